//! Diagonal unitaries in finite-dimensional algebras and the fill-up lift of
//! a valuation into `ℕ^r`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::circle_lsc::{cells, Angle, DyadicPartition, NatInf};
use crate::cu_morphisms::{ArcValuation, Codomain, Value};
use crate::error::{Error, Result};

/// A diagonal unitary in `M_{d_1} ⊕ ... ⊕ M_{d_r}`, stored as one angle list
/// per block (order is irrelevant to every invariant computed here).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiagonalUnitary {
    pub blocks: Vec<Vec<Angle>>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    angle: Angle,
    multiplicity: u64,
}

#[derive(Serialize, Deserialize)]
struct RawUnitary {
    blocks: Vec<Vec<Entry>>,
}

impl Serialize for DiagonalUnitary {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut out: Vec<Entry> = Vec::new();
                for a in b {
                    match out.last_mut() {
                        Some(e) if e.angle == *a => e.multiplicity += 1,
                        _ => out.push(Entry {
                            angle: *a,
                            multiplicity: 1,
                        }),
                    }
                }
                out
            })
            .collect();
        RawUnitary { blocks }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiagonalUnitary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawUnitary::deserialize(d)?;
        let blocks = raw
            .blocks
            .into_iter()
            .map(|b| {
                b.into_iter()
                    .flat_map(|e| std::iter::repeat(e.angle).take(e.multiplicity as usize))
                    .collect()
            })
            .collect();
        Ok(DiagonalUnitary { blocks })
    }
}

impl DiagonalUnitary {
    pub fn new(blocks: Vec<Vec<Angle>>) -> Self {
        DiagonalUnitary { blocks }
    }

    pub fn dims(&self) -> Vec<u64> {
        self.blocks.iter().map(|b| b.len() as u64).collect()
    }

    /// `diag(1, e^{2πi/2^n}, ..., e^{2πi(2^n-1)/2^n})` in a single block.
    pub fn roots_of_unity(n: u32) -> Self {
        let p = DyadicPartition::new(n);
        DiagonalUnitary {
            blocks: vec![(0..p.len()).map(|k| p.breakpoint(k)).collect()],
        }
    }

    /// Each block with its angles sorted.
    pub fn sorted(&self) -> DiagonalUnitary {
        DiagonalUnitary {
            blocks: self
                .blocks
                .iter()
                .map(|b| {
                    let mut b = b.clone();
                    b.sort();
                    b
                })
                .collect(),
        }
    }

    /// Equal as multisets, block by block.
    pub fn same_spectrum(&self, other: &DiagonalUnitary) -> bool {
        self.sorted() == other.sorted()
    }
}

/// Build a diagonal unitary whose spectral counts equal `α` on `Λ_n`: arc
/// centers carry the arc values, breakpoints carry the excess of each
/// double arc over its two halves.
pub fn fill_up(alpha: &ArcValuation) -> Result<DiagonalUnitary> {
    let Codomain::FinDim { blocks } = alpha.codomain() else {
        return Err(Error::DimensionMismatch("fill-up needs a finite-dimensional codomain".into()));
    };
    alpha.validate()?;
    let n = alpha.resolution();
    let nc = cells(n);
    let part = DyadicPartition::new(n);
    let fin = |v: &Value, b: usize| -> Result<i64> {
        let t = v.tuple().ok_or_else(|| Error::Invariant("tuple value expected".into()))?;
        match t[b] {
            NatInf::Fin(x) => Ok(x as i64),
            NatInf::Inf => Err(Error::Unbounded),
        }
    };
    let mut out = Vec::with_capacity(blocks.len());
    for (b, &d) in blocks.iter().enumerate() {
        let mut angles = Vec::with_capacity(d as usize);
        for k in 0..nc {
            let q_k = fin(alpha.arc(k, 1), b)?;
            let r_k = if n == 0 {
                fin(alpha.unit(), b)? - q_k
            } else {
                fin(alpha.arc(k, 2), b)? - q_k - fin(alpha.arc(k + 1, 1), b)?
            };
            if r_k < 0 {
                return Err(Error::inconsistent(
                    "non-negative breakpoint multiplicity",
                    format!("block {b}, breakpoint {}", k + 1),
                ));
            }
            angles.extend(std::iter::repeat(part.center(k + 1)).take(q_k as usize));
            angles.extend(std::iter::repeat(part.breakpoint(k + 1)).take(r_k as usize));
        }
        if angles.len() as u64 != d {
            return Err(Error::inconsistent(
                "cover identity",
                format!("block {b}: {} entries for dimension {d}", angles.len()),
            ));
        }
        out.push(angles);
    }
    Ok(DiagonalUnitary { blocks: out })
}

/// `(u_1, ..., u_{n_max})` with `u_n` the fill-up of `α` restricted to `Λ_n`.
pub fn lift_sequence(alpha: &ArcValuation, n_max: u32) -> Result<Vec<DiagonalUnitary>> {
    (1..=n_max)
        .map(|n| {
            let coarse = alpha.coarsen(n)?;
            fill_up(&coarse).map_err(|e| match e {
                Error::Inconsistent { constraint, location } => Error::Inconsistent {
                    constraint,
                    location: format!("resolution {n}: {location}"),
                },
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle_lsc::{lambda_generators, Span};
    use crate::rational::q;
    use crate::spectral_oracle::cu_of_unitary;

    fn angles(v: &[(i64, i64)]) -> Vec<Angle> {
        v.iter().map(|(a, b)| Angle::new(q(*a, *b))).collect()
    }

    fn valuation(n: u32, blocks: Vec<u64>, f: impl Fn(usize, usize) -> Vec<u64>) -> ArcValuation {
        let cod = Codomain::FinDim { blocks: blocks.clone() };
        ArcValuation::from_fn(n, cod, |s| match s {
            Span::Full => Value::Tuple(blocks.iter().map(|d| NatInf::Fin(*d)).collect()),
            Span::Arc { start, len } => Value::Tuple(f(start, len).into_iter().map(NatInf::Fin).collect()),
        })
        .unwrap()
    }

    #[test]
    fn two_by_two_example() {
        // U_k ↦ 1, V_k ↦ 2 at n = 1, d = 2
        let a = valuation(1, vec![2], |_, len| vec![if len == 1 { 1 } else { 2 }]);
        let u = fill_up(&a).unwrap();
        assert_eq!(u.blocks[0], angles(&[(1, 4), (3, 4)]));
    }

    #[test]
    fn three_by_three_example() {
        // U_1 ↦ 1, U_2 ↦ 0, V_1 = V_2 ↦ 2
        let a = valuation(1, vec![3], |s, len| vec![if len == 2 { 2 } else if s == 0 { 1 } else { 0 }]);
        let u = fill_up(&a).unwrap();
        assert!(u.same_spectrum(&DiagonalUnitary::new(vec![angles(&[(1, 4), (1, 2), (0, 1)])])));
        let back = cu_of_unitary(&u, 1);
        assert_eq!(back, a);
    }

    #[test]
    fn center_supported_unitary_is_a_fixed_point() {
        let u = DiagonalUnitary::new(vec![angles(&[(1, 8), (1, 8), (5, 8)]), angles(&[(7, 8)])]);
        let a = cu_of_unitary(&u, 2);
        assert!(fill_up(&a).unwrap().same_spectrum(&u));
    }

    #[test]
    fn negative_breakpoint_is_rejected() {
        let a = valuation(1, vec![2], |_, _| vec![1]);
        assert!(matches!(fill_up(&a), Err(Error::Inconsistent { .. })));
    }

    #[test]
    fn agreement_on_every_generator() {
        let u = DiagonalUnitary::new(vec![angles(&[(0, 1), (1, 16), (3, 8), (3, 8), (1, 2), (13, 16)])]);
        for n in 0..=3 {
            let a = cu_of_unitary(&u, n);
            let v = fill_up(&a).unwrap();
            let b = cu_of_unitary(&v, n);
            for (g, _) in lambda_generators(n) {
                assert_eq!(a.evaluate(&g).unwrap(), b.evaluate(&g).unwrap());
            }
        }
    }

    #[test]
    fn lift_sequence_of_roots_of_unity() {
        let w = DiagonalUnitary::roots_of_unity(3);
        let a = cu_of_unitary(&w, 3);
        let seq = lift_sequence(&a, 3).unwrap();
        assert_eq!(seq.len(), 3);
        assert!(seq[2].same_spectrum(&w));
    }

    #[test]
    fn json_groups_multiplicities() {
        let u = DiagonalUnitary::new(vec![angles(&[(1, 4), (1, 4), (3, 4)])]);
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, r#"{"blocks":[[{"angle":"1/4","multiplicity":2},{"angle":"3/4","multiplicity":1}]]}"#);
        let back: DiagonalUnitary = serde_json::from_str(&s).unwrap();
        assert_eq!(back, u);
    }
}
