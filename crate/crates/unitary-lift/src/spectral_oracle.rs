//! Spectral counting for diagonal unitaries and unitary fields, the
//! bottleneck matching distance, and logarithms across a spectral gap.

use crate::circle_lsc::{cells, Angle, DyadicPartition};
use crate::cu_morphisms::ArcValuation;
use crate::error::{Error, Result};
use crate::fd_lift::DiagonalUnitary;
use crate::graph_lift::{marriage_match, UnitaryField};
use crate::rational::{self, frac, Q};

/// Per block, how many angles sit in each arc and on each breakpoint.
fn cell_counts(angles: &[Angle], n: u32) -> (Vec<u64>, Vec<u64>) {
    let nc = cells(n);
    let part = DyadicPartition::new(n);
    let mut arcs = vec![0u64; nc];
    let mut points = vec![0u64; nc];
    for a in angles {
        match part.locate(a) {
            Ok(i) => arcs[i] += 1,
            Err(j) => points[j] += 1,
        }
    }
    (arcs, points)
}

/// Spectral counts of a diagonal unitary on every connected arc at
/// resolution `n`.
pub fn cu_of_unitary(u: &DiagonalUnitary, n: u32) -> ArcValuation {
    let (arcs, points): (Vec<_>, Vec<_>) = u.blocks.iter().map(|b| cell_counts(b, n)).unzip();
    ArcValuation::from_cell_masses(n, &arcs, &points).expect("counts have one entry per cell")
}

/// Spectral counts of a unitary field: each arc maps to the lsc function
/// counting tracks inside the arc.
pub fn cu_of_field(u: &UnitaryField, n: u32) -> Result<ArcValuation> {
    u.spectral_counts(n)
}

/// `min_σ max_λ dist(λ, σ(λ))` over block-preserving bijections.
pub fn matching_distance(u: &DiagonalUnitary, v: &DiagonalUnitary) -> Result<Q> {
    if u.dims() != v.dims() {
        return Err(Error::DimensionMismatch(format!(
            "block sizes {:?} and {:?} differ",
            u.dims(),
            v.dims()
        )));
    }
    let mut worst = Q::from_integer(0);
    for (a, b) in u.blocks.iter().zip(&v.blocks) {
        // every pair is within 1/2 < 1, so the matching always exists
        let m = marriage_match(a, b, Q::from_integer(1))?;
        worst = worst.max(m.bottleneck);
    }
    Ok(worst)
}

/// Real lifts of the angles into the unit window `(gap, gap + 1)`, block by
/// block, so that `exp(2πi h) = u`.
pub fn log_transfer(u: &DiagonalUnitary, gap: Angle) -> Result<Vec<Vec<Q>>> {
    u.blocks
        .iter()
        .map(|b| {
            b.iter()
                .map(|a| {
                    if *a == gap {
                        Err(Error::FullSpectrum(gap.to_string()))
                    } else {
                        Ok(gap.value() + frac(a.value() - gap.value()))
                    }
                })
                .collect()
        })
        .collect()
}

/// Thickening distance between two self-adjoint spectra in the closed
/// window `[w, w + 1]`, on the grid of mesh `1/2^r`: the least `m/2^r`
/// such that counts on every open grid interval are dominated by the
/// counts on its `m`-cell thickening, in both directions.
pub fn selfadjoint_distance(h: &[Q], k: &[Q], window: Q, r: u32) -> Result<Q> {
    if h.len() != k.len() {
        return Err(Error::DimensionMismatch("spectra of different sizes".into()));
    }
    if rational::grid_multiple(&window, r).is_none() {
        return Err(Error::NotDyadic(rational::format_q(&window)));
    }
    let nc = cells(r) as i64;
    let at = |i: i64| window + Q::new(i.clamp(0, nc), nc);
    let count = |xs: &[Q], lo: Q, hi: Q| xs.iter().filter(|x| lo < **x && **x < hi).count();
    let ok = |m: i64| {
        (0..nc).all(|a| {
            (a + 1..=nc).all(|b| {
                let (lo, hi) = (at(a), at(b));
                let (tlo, thi) = (at(a - m), at(b + m));
                // thickenings that reach an end of the window include it
                let widen = |x: Q, edge: Q| if x == edge { x - Q::new(1, 2 * nc) } else { x };
                let (tlo, thi) = (widen(tlo, window), widen(thi, window + Q::from_integer(1)));
                let tlo = if a - m <= 0 { tlo.min(window - Q::new(1, 2 * nc)) } else { tlo };
                let thi = if b + m >= nc { thi.max(window + Q::from_integer(1) + Q::new(1, 2 * nc)) } else { thi };
                count(h, lo, hi) <= count(k, tlo, thi) && count(k, lo, hi) <= count(h, tlo, thi)
            })
        })
    };
    let m = (0..=nc).find(|&m| ok(m)).expect("m = 2^r always passes");
    Ok(Q::new(m, nc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle_lsc::{lambda_generators, NatInf};
    use crate::cu_morphisms::{d_cu, dd_cu, Dist, Value};
    use crate::rational::q;
    use itertools::Itertools;
    use proptest::prelude::*;

    fn angles(v: &[(i64, i64)]) -> Vec<Angle> {
        v.iter().map(|(a, b)| Angle::new(q(*a, *b))).collect()
    }

    fn single(v: &[(i64, i64)]) -> DiagonalUnitary {
        DiagonalUnitary::new(vec![angles(v)])
    }

    /// Factorial oracle for the bottleneck distance.
    fn brute_matching(a: &[Angle], b: &[Angle]) -> Q {
        (0..b.len())
            .permutations(b.len())
            .map(|p| a.iter().zip(&p).map(|(x, &j)| x.dist(&b[j])).max().unwrap_or(Q::from_integer(0)))
            .min()
            .unwrap_or(Q::from_integer(0))
    }

    #[test]
    fn counts_for_small_examples() {
        let u = single(&[(1, 4), (3, 4)]);
        let a = cu_of_unitary(&u, 1);
        assert_eq!(a.arc(0, 1), &Value::Tuple(vec![NatInf::Fin(1)]));
        assert_eq!(a.arc(1, 1), &Value::Tuple(vec![NatInf::Fin(1)]));
        assert_eq!(a.arc(0, 2), &Value::Tuple(vec![NatInf::Fin(2)]));
        assert_eq!(a.arc(1, 2), &Value::Tuple(vec![NatInf::Fin(2)]));
        let w = cu_of_unitary(&DiagonalUnitary::roots_of_unity(2), 2);
        // every open quarter arc misses the roots, which sit on its ends
        for k in 0..4 {
            assert_eq!(w.arc(k, 1), &Value::Tuple(vec![NatInf::Fin(0)]));
        }
        // the half-open-shifted arcs (x_{k-1}, x_k) at n = 3 around each root
        let w3 = cu_of_unitary(&DiagonalUnitary::roots_of_unity(2), 3);
        for k in 0..4 {
            assert_eq!(w3.arc(2 * k + 7, 2), &Value::Tuple(vec![NatInf::Fin(1)]));
        }
    }

    #[test]
    fn evaluate_matches_direct_counting() {
        let u = DiagonalUnitary::new(vec![
            angles(&[(0, 1), (1, 8), (1, 3), (1, 2), (1, 2), (7, 10)]),
            angles(&[(3, 16), (5, 8)]),
        ]);
        for n in 0..=3 {
            let a = cu_of_unitary(&u, n);
            a.validate().unwrap();
            for (g, _) in lambda_generators(n) {
                let direct: Vec<NatInf> = u
                    .blocks
                    .iter()
                    .map(|b| NatInf::Fin(b.iter().filter(|x| g.function().value_at(x) == NatInf::Fin(1)).count() as u64))
                    .collect();
                assert_eq!(a.evaluate(&g).unwrap(), Value::Tuple(direct));
            }
        }
    }

    #[test]
    fn matching_examples() {
        let u = single(&[(0, 1)]);
        assert_eq!(matching_distance(&u, &u).unwrap(), q(0, 1));
        assert_eq!(matching_distance(&u, &single(&[(1, 2)])).unwrap(), q(1, 2));
        assert!(matching_distance(&u, &single(&[(1, 2), (0, 1)])).is_err());
    }

    #[test]
    fn log_examples() {
        let h = log_transfer(&single(&[(1, 4)]), Angle::new(q(0, 1))).unwrap();
        assert_eq!(h, vec![vec![q(1, 4)]]);
        let h = log_transfer(&single(&[(3, 4)]), Angle::new(q(1, 2))).unwrap();
        assert_eq!(h, vec![vec![q(3, 4)]]);
        let h = log_transfer(&single(&[(1, 4)]), Angle::new(q(1, 2))).unwrap();
        assert_eq!(h, vec![vec![q(5, 4)]]);
        assert!(matches!(
            log_transfer(&single(&[(1, 2)]), Angle::new(q(1, 2))),
            Err(Error::FullSpectrum(_))
        ));
    }

    #[test]
    fn gap_transfer_is_strict_across_the_gap() {
        // circularly close, linearly far
        let u = single(&[(9, 20)]);
        let v = single(&[(11, 20)]);
        let gap = Angle::new(q(1, 2));
        let h = &log_transfer(&u, gap).unwrap()[0];
        let k = &log_transfer(&v, gap).unwrap()[0];
        let linear = selfadjoint_distance(h, k, gap.value(), 4).unwrap();
        let circular = d_cu(&cu_of_unitary(&u, 4), &cu_of_unitary(&v, 4)).unwrap();
        assert!(Dist::Finite(linear) > circular);
    }

    fn arb_angles(d: usize, den: i64) -> impl Strategy<Value = Vec<Angle>> {
        prop::collection::vec(0..den, d).prop_map(move |v| v.into_iter().map(|k| Angle::new(q(k, den))).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 128, rng_algorithm: prop::test_runner::RngAlgorithm::ChaCha, ..ProptestConfig::default() })]

        #[test]
        fn matching_equals_factorial_oracle(d in 1usize..=5, a in arb_angles(5, 48), b in arb_angles(5, 48)) {
            let (a, b) = (&a[..d], &b[..d]);
            let u = DiagonalUnitary::new(vec![a.to_vec()]);
            let v = DiagonalUnitary::new(vec![b.to_vec()]);
            prop_assert_eq!(matching_distance(&u, &v).unwrap(), brute_matching(a, b));
        }

        #[test]
        fn matching_is_a_metric(a in arb_angles(5, 40), b in arb_angles(5, 40), c in arb_angles(5, 40)) {
            let (u, v, w) = (DiagonalUnitary::new(vec![a]), DiagonalUnitary::new(vec![b]), DiagonalUnitary::new(vec![c]));
            let uv = matching_distance(&u, &v).unwrap();
            prop_assert_eq!(uv, matching_distance(&v, &u).unwrap());
            prop_assert!(matching_distance(&u, &w).unwrap() <= uv + matching_distance(&v, &w).unwrap());
            prop_assert_eq!(uv == q(0, 1), u.same_spectrum(&v));
        }

        #[test]
        fn counting_is_permutation_invariant(a in arb_angles(6, 32), seed in 0usize..720) {
            let mut b = a.clone();
            let k = b.len();
            b.rotate_left(seed % k);
            b.swap(0, seed % k);
            let u = DiagonalUnitary::new(vec![a]);
            let v = DiagonalUnitary::new(vec![b]);
            prop_assert_eq!(cu_of_unitary(&u, 3), cu_of_unitary(&v, 3));
        }

        #[test]
        fn lattice_distance_within_twice_matching(a in arb_angles(6, 64), b in arb_angles(6, 64)) {
            let u = DiagonalUnitary::new(vec![a]);
            let v = DiagonalUnitary::new(vec![b]);
            let dd = dd_cu(&cu_of_unitary(&u, 4), &cu_of_unitary(&v, 4)).unwrap();
            let m = matching_distance(&u, &v).unwrap();
            prop_assert!(dd.value <= Dist::Finite(q(2, 1) * m));
            // the cell-level distance never exceeds the bottleneck
            prop_assert!(d_cu(&cu_of_unitary(&u, 4), &cu_of_unitary(&v, 4)).unwrap() <= Dist::Finite(m + q(1, 16)));
        }

        #[test]
        fn gap_transfer_bounds_the_circle(a in arb_angles(4, 64), b in arb_angles(4, 64), g in 0i64..16) {
            let gap = Angle::new(q(g, 16));
            prop_assume!(a.iter().chain(&b).all(|x| *x != gap));
            let u = DiagonalUnitary::new(vec![a]);
            let v = DiagonalUnitary::new(vec![b]);
            let h = &log_transfer(&u, gap).unwrap()[0];
            let k = &log_transfer(&v, gap).unwrap()[0];
            for x in h.iter() {
                prop_assert!(gap.value() < *x && *x < gap.value() + q(1, 1));
            }
            let linear = selfadjoint_distance(h, k, gap.value(), 4).unwrap();
            let circular = d_cu(&cu_of_unitary(&u, 4), &cu_of_unitary(&v, 4)).unwrap();
            prop_assert!(circular <= Dist::Finite(linear));
        }

        #[test]
        fn gap_transfer_is_exact_inside_a_half_window(a in arb_angles(4, 32), b in arb_angles(4, 32), g in 0i64..16) {
            // both spectra in the half-turn opposite the gap
            let gap = Angle::new(q(g, 16));
            let shift = |xs: Vec<Angle>| -> Vec<Angle> {
                xs.into_iter().map(|x| Angle::new(gap.value() + q(1, 4) + x.value() / 2)).collect()
            };
            let (a, b) = (shift(a), shift(b));
            let u = DiagonalUnitary::new(vec![a]);
            let v = DiagonalUnitary::new(vec![b]);
            let h = &log_transfer(&u, gap).unwrap()[0];
            let k = &log_transfer(&v, gap).unwrap()[0];
            let linear = selfadjoint_distance(h, k, gap.value(), 4).unwrap();
            let circular = d_cu(&cu_of_unitary(&u, 4), &cu_of_unitary(&v, 4)).unwrap();
            prop_assert_eq!(circular, Dist::Finite(linear));
        }
    }
}
