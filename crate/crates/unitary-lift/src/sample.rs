//! Random consistent inputs for property trials: spectral valuations,
//! diagonal unitaries and piecewise-linear unitary fields.

use rand::Rng;

use crate::circle_lsc::{cells, Angle};
use crate::cu_morphisms::ArcValuation;
use crate::fd_lift::DiagonalUnitary;
use crate::graph_lift::{LinearPiece, UnitaryField};
use crate::graph_space::MetricGraph;
use crate::rational::{frac, Q};

/// The counting valuation of `dims[b]` items per block dropped uniformly on
/// the `2^(n+1)` cells (arcs and breakpoints) at resolution `n`.
pub fn cell_valuation<R: Rng>(rng: &mut R, n: u32, dims: &[u64]) -> ArcValuation {
    let nc = cells(n);
    let mut arcs = vec![vec![0u64; nc]; dims.len()];
    let mut points = vec![vec![0u64; nc]; dims.len()];
    for (b, &d) in dims.iter().enumerate() {
        for _ in 0..d {
            let c = rng.gen_range(0..2 * nc);
            if c % 2 == 0 {
                arcs[b][c / 2] += 1;
            } else {
                points[b][c / 2] += 1;
            }
        }
    }
    ArcValuation::from_cell_masses(n, &arcs, &points).expect("one entry per cell")
}

/// Angles on the grid `k/den`.
pub fn angles<R: Rng>(rng: &mut R, d: usize, den: i64) -> Vec<Angle> {
    (0..d).map(|_| Angle::new(Q::new(rng.gen_range(0..den), den))).collect()
}

pub fn unitary<R: Rng>(rng: &mut R, dims: &[usize], den: i64) -> DiagonalUnitary {
    DiagonalUnitary::new(dims.iter().map(|&d| angles(rng, d, den)).collect())
}

fn shuffled<R: Rng>(rng: &mut R, d: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

/// A field on `x` whose tracks run, on each edge, from an item of the
/// start vertex through a random angle at a random interior point to an
/// item of the end vertex, along shortest arcs.
pub fn field<R: Rng>(rng: &mut R, x: &MetricGraph, d: usize, den: i64) -> UnitaryField {
    let vertices: Vec<Vec<Angle>> = x.vertices.iter().map(|_| angles(rng, d, den)).collect();
    let mut tracks = vec![Vec::new(); d];
    for e in &x.edges {
        let (pa, pb) = (shuffled(rng, d), shuffled(rng, d));
        let mid = e.length * Q::new(rng.gen_range(1..4), 4);
        for (t, per_edge) in tracks.iter_mut().enumerate() {
            let a = vertices[e.a][pa[t]];
            let b = vertices[e.b][pb[t]];
            let c = Angle::new(Q::new(rng.gen_range(0..den), den));
            let s1 = a.value() + a.shortest_delta(&c);
            let s2 = s1 + c.shortest_delta(&b);
            per_edge.push(vec![
                LinearPiece {
                    from: Q::from_integer(0),
                    to: mid,
                    start: a.value(),
                    end: s1,
                },
                LinearPiece {
                    from: mid,
                    to: e.length,
                    start: frac(s1),
                    end: frac(s1) + (s2 - s1),
                },
            ]);
        }
    }
    UnitaryField::new(x.clone(), d, tracks, vertices).expect("tracks meet the vertex spectra")
}
