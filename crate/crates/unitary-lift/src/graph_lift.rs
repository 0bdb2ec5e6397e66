//! Lifting a valuation with values in `Lsc(X, ℕ̄)` to a diagonal unitary
//! field over a metric graph: constant pieces, bottleneck matchings between
//! neighbouring pieces, linear connectors, and a final counting check.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};

use crate::circle_lsc::{cells, Angle, NatInf, Span};
use crate::cu_morphisms::{compare_on_lambda, ArcValuation, Codomain, Value};
use crate::error::{Error, Result};
use crate::fd_lift::fill_up;
use crate::graph_space::{cut, ClosedCover, EdgeFunction, End, GraphLsc, MetricGraph, Point};
use crate::rational::{self, frac, Q};

fn zero() -> Q {
    Q::from_integer(0)
}

/// A bijection between two labelled multisets of angles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// `sigma[i]` is the partner of source item `i`.
    pub sigma: Vec<usize>,
    #[serde(with = "rational")]
    pub bottleneck: Q,
}

impl Matching {
    pub fn identity(d: usize) -> Self {
        Matching {
            sigma: (0..d).collect(),
            bottleneck: zero(),
        }
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.sigma.len()];
        for (i, &j) in self.sigma.iter().enumerate() {
            inv[j] = i;
        }
        inv
    }
}

/// Items sorted by angle, ties by index.
fn order(xs: &[Angle]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by_key(|&i| (xs[i], i));
    idx
}

struct Bipartite {
    adj: Vec<Vec<usize>>,
    left_order: Vec<usize>,
}

impl Bipartite {
    fn new(a: &[Angle], b: &[Angle], keep: impl Fn(Q) -> bool) -> Self {
        let right = order(b);
        let adj = a
            .iter()
            .map(|x| right.iter().copied().filter(|&j| keep(x.dist(&b[j]))).collect())
            .collect();
        Bipartite {
            adj,
            left_order: order(a),
        }
    }

    fn augment(&self, u: usize, seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        // free partners first, so equal multisets match in order
        if let Some(&j) = self.adj[u].iter().find(|&&j| owner[j].is_none() && !seen[j]) {
            seen[j] = true;
            owner[j] = Some(u);
            return true;
        }
        for &j in &self.adj[u] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].map_or(true, |w| self.augment(w, seen, owner)) {
                owner[j] = Some(u);
                return true;
            }
        }
        false
    }

    /// Maximum matching as `owner[right] = left`.
    fn maximum(&self, n_right: usize) -> Vec<Option<usize>> {
        let mut owner = vec![None; n_right];
        for &u in &self.left_order {
            let mut seen = vec![false; n_right];
            self.augment(u, &mut seen, &mut owner);
        }
        owner
    }
}

/// A perfect matching with every pair strictly closer than `threshold`,
/// minimising the largest pair distance. On failure the error carries a
/// deficient set of source items.
pub fn marriage_match(a: &[Angle], b: &[Angle], threshold: Q) -> Result<Matching> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} items against {}", a.len(), b.len())));
    }
    let d = a.len();
    let mut cand: Vec<Q> = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| x.dist(y)))
        .filter(|t| *t < threshold)
        .collect();
    cand.sort();
    cand.dedup();
    let perfect = |t: Q| -> Option<Vec<usize>> {
        let g = Bipartite::new(a, b, |x| x <= t);
        let owner = g.maximum(d);
        let mut sigma = vec![usize::MAX; d];
        for (j, o) in owner.iter().enumerate() {
            sigma[(*o)?] = j;
        }
        Some(sigma)
    };
    if d == 0 {
        return Ok(Matching::identity(0));
    }
    let feasible_top = cand.last().and_then(|&t| perfect(t));
    if feasible_top.is_none() {
        return Err(hall_witness(a, b, threshold));
    }
    let (mut lo, mut hi) = (0usize, cand.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect(cand[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let sigma = perfect(cand[lo]).expect("binary search ends on a feasible value");
    let bottleneck = sigma.iter().enumerate().map(|(i, &j)| a[i].dist(&b[j])).max().unwrap_or(zero());
    Ok(Matching { sigma, bottleneck })
}

/// Source items reachable by alternating paths from the unmatched items of
/// a maximum matching: a set whose neighbourhood is smaller than itself.
fn hall_witness(a: &[Angle], b: &[Angle], threshold: Q) -> Error {
    let g = Bipartite::new(a, b, |x| x < threshold);
    let owner = g.maximum(b.len());
    let mut matched = vec![false; a.len()];
    for o in owner.iter().flatten() {
        matched[*o] = true;
    }
    let mut stack: Vec<usize> = (0..a.len()).filter(|&u| !matched[u]).collect();
    let mut in_omega = matched.iter().map(|m| !m).collect::<Vec<_>>();
    let mut nbr = vec![false; b.len()];
    while let Some(u) = stack.pop() {
        for &j in &g.adj[u] {
            if !nbr[j] {
                nbr[j] = true;
                if let Some(w) = owner[j] {
                    if !in_omega[w] {
                        in_omega[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
    }
    let omega: Vec<usize> = (0..a.len()).filter(|&i| in_omega[i]).collect();
    Error::HallViolation {
        omega_size: omega.len(),
        omega,
        neighbours: nbr.iter().filter(|x| **x).count(),
    }
}

/// A linear stretch of one track over `[from, to]` on one edge. Angles are
/// real lifts; only their classes mod 1 matter between pieces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearPiece {
    #[serde(rename = "from_coord", with = "rational")]
    pub from: Q,
    #[serde(rename = "to_coord", with = "rational")]
    pub to: Q,
    #[serde(rename = "start_angle", with = "rational")]
    pub start: Q,
    #[serde(rename = "end_angle", with = "rational")]
    pub end: Q,
}

impl LinearPiece {
    fn at(&self, c: Q) -> Q {
        self.start + (self.end - self.start) * (c - self.from) / (self.to - self.from)
    }
}

/// A continuous map from a metric graph to diagonal unitaries in `M_d`,
/// given by `d` piecewise-linear angle tracks on each edge. Track labels
/// are local to an edge; vertices record the spectrum there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnitaryField {
    graph: MetricGraph,
    dim: usize,
    /// `tracks[t][edge]`
    tracks: Vec<Vec<Vec<LinearPiece>>>,
    vertices: Vec<Vec<Angle>>,
}

#[derive(Deserialize)]
struct RawField {
    graph: MetricGraph,
    dim: usize,
    tracks: Vec<Vec<Vec<LinearPiece>>>,
    vertices: Vec<Vec<Angle>>,
}

impl<'de> Deserialize<'de> for UnitaryField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = RawField::deserialize(d)?;
        UnitaryField::new(r.graph, r.dim, r.tracks, r.vertices).map_err(serde::de::Error::custom)
    }
}

fn sorted(mut v: Vec<Angle>) -> Vec<Angle> {
    v.sort();
    v
}

impl UnitaryField {
    pub fn new(
        graph: MetricGraph,
        dim: usize,
        tracks: Vec<Vec<Vec<LinearPiece>>>,
        vertices: Vec<Vec<Angle>>,
    ) -> Result<Self> {
        let f = UnitaryField {
            graph,
            dim,
            tracks,
            vertices,
        };
        f.validate()?;
        Ok(f)
    }

    /// The field equal to `angles` everywhere.
    pub fn constant(graph: &MetricGraph, angles: &[Angle]) -> Self {
        let tracks = angles
            .iter()
            .map(|a| {
                graph
                    .edges
                    .iter()
                    .map(|e| {
                        vec![LinearPiece {
                            from: zero(),
                            to: e.length,
                            start: a.value(),
                            end: a.value(),
                        }]
                    })
                    .collect()
            })
            .collect();
        UnitaryField {
            graph: graph.clone(),
            dim: angles.len(),
            tracks,
            vertices: vec![sorted(angles.to_vec()); graph.vertices.len()],
        }
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tracks(&self) -> &[Vec<Vec<LinearPiece>>] {
        &self.tracks
    }

    fn validate(&self) -> Result<()> {
        let x = &self.graph;
        let bad = |m: String| Err(Error::Graph(m));
        if self.tracks.len() != self.dim || self.vertices.len() != x.vertices.len() {
            return bad("track or vertex count does not match".into());
        }
        if self.vertices.iter().any(|v| v.len() != self.dim) {
            return bad(format!("every vertex needs {} angles", self.dim));
        }
        for (t, per_edge) in self.tracks.iter().enumerate() {
            if per_edge.len() != x.edges.len() {
                return bad(format!("track {t}: wrong number of edges"));
            }
            for (k, ps) in per_edge.iter().enumerate() {
                let mut at = zero();
                let mut prev: Option<Q> = None;
                for p in ps {
                    if p.from != at || p.to <= p.from {
                        return bad(format!("track {t}, edge {k}: pieces must tile [0, length]"));
                    }
                    if prev.is_some_and(|v| !frac(v - p.start).eq(&zero())) {
                        return bad(format!("track {t}, edge {k}: jump at {}", rational::format_q(&p.from)));
                    }
                    at = p.to;
                    prev = Some(p.end);
                }
                if at != x.edges[k].length {
                    return bad(format!("track {t}, edge {k}: pieces must tile [0, length]"));
                }
            }
        }
        for (k, e) in x.edges.iter().enumerate() {
            for (v, c) in [(e.a, zero()), (e.b, e.length)] {
                let here = sorted((0..self.dim).map(|t| self.track_at(t, k, c)).collect());
                if here != sorted(self.vertices[v].clone()) {
                    return bad(format!("edge {k} does not meet vertex {} continuously", x.vertices[v]));
                }
            }
        }
        Ok(())
    }

    fn track_at(&self, t: usize, edge: usize, c: Q) -> Angle {
        let ps = &self.tracks[t][edge];
        let p = ps.iter().find(|p| p.from <= c && c <= p.to).expect("pieces tile the edge");
        Angle::new(p.at(c))
    }

    /// The spectrum at a point, sorted.
    pub fn angles_at(&self, p: &Point) -> Vec<Angle> {
        match *p {
            Point::Vertex { vertex: v } => sorted(self.vertices[v].clone()),
            Point::Interior { edge, coord } => sorted((0..self.dim).map(|t| self.track_at(t, edge, coord)).collect()),
        }
    }

    /// Per edge: the interior coordinates where some track meets a grid
    /// angle of resolution `n` or changes slope, and the spectra on the open
    /// intervals between them and at them.
    fn samples(&self, n: u32) -> Vec<(Vec<Q>, Vec<Vec<Angle>>, Vec<Vec<Angle>>)> {
        let nc = cells(n) as i64;
        let two = Q::from_integer(2);
        self.graph
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let mut cuts = std::collections::BTreeSet::new();
                for per_edge in &self.tracks {
                    for p in &per_edge[k] {
                        cuts.insert(p.from);
                        cuts.insert(p.to);
                        if p.start == p.end {
                            continue;
                        }
                        let (lo, hi) = (p.start.min(p.end), p.start.max(p.end));
                        let first = (lo * Q::from_integer(nc)).ceil().to_integer();
                        let last = (hi * Q::from_integer(nc)).floor().to_integer();
                        for m in first..=last {
                            let y = Q::new(m, nc);
                            cuts.insert(p.from + (y - p.start) / (p.end - p.start) * (p.to - p.from));
                        }
                    }
                }
                let cuts: Vec<Q> = cuts.into_iter().filter(|c| *c > zero() && *c < e.length).collect();
                let mids = (0..=cuts.len())
                    .map(|i| {
                        let lo = if i == 0 { zero() } else { cuts[i - 1] };
                        let hi = cuts.get(i).copied().unwrap_or(e.length);
                        self.angles_at(&Point::Interior {
                            edge: k,
                            coord: (lo + hi) / two,
                        })
                    })
                    .collect();
                let pts = cuts.iter().map(|&c| self.angles_at(&Point::Interior { edge: k, coord: c })).collect();
                (cuts, mids, pts)
            })
            .collect()
    }

    /// Spectral counts at resolution `n`: each arc maps to the lsc function
    /// counting angles inside it.
    pub fn spectral_counts(&self, n: u32) -> Result<ArcValuation> {
        let nc = cells(n);
        let samples = self.samples(n);
        let count = |xs: &[Angle], s: &Span| NatInf::Fin(xs.iter().filter(|a| s.contains(a, nc)).count() as u64);
        let codomain = Codomain::Graph {
            graph: self.graph.clone(),
            d: self.dim as u64,
        };
        ArcValuation::from_fn(n, codomain, |span| {
            let edges = samples
                .iter()
                .map(|(cuts, mids, pts)| {
                    EdgeFunction {
                        breakpoints: cuts.clone(),
                        interval_values: mids.iter().map(|m| count(m, &span)).collect(),
                        point_values: pts.iter().map(|p| count(p, &span)).collect(),
                    }
                    .canonical()
                })
                .collect();
            Value::Graph(GraphLsc {
                edges,
                vertex_values: self.vertices.iter().map(|v| count(v, &span)).collect(),
            })
        })
    }

    /// Largest change of angle along any single linear piece.
    pub fn max_piece_excursion(&self) -> Q {
        self.tracks
            .iter()
            .flatten()
            .flatten()
            .map(|p| rational::abs(p.end - p.start))
            .max()
            .unwrap_or(zero())
    }
}

/// Matchings between the spectra of adjacent pieces, keyed by the ordered
/// pair `(pivot, other)` used at some singular point.
pub type PieceMatchings = BTreeMap<(usize, usize), Matching>;

/// The branches at a singular point in pivot order: by edge, start ends first.
fn branch_order(cover: &ClosedCover, s: usize) -> Vec<usize> {
    let sp = &cover.singular[s];
    let mut idx: Vec<usize> = (0..sp.branches.len()).collect();
    idx.sort_by_key(|&i| (cover.segments[sp.branches[i].segment].edge, sp.branches[i].end, sp.branches[i].segment));
    idx
}

/// Bottleneck matchings under `2/2^n` from each pivot piece to every other
/// piece meeting it at a singular point.
pub fn match_pieces(cover: &ClosedCover, spectra: &[Vec<Angle>], n: u32) -> Result<PieceMatchings> {
    let threshold = Q::new(2, cells(n) as i64);
    let mut out = PieceMatchings::new();
    for s in 0..cover.singular.len() {
        let br = &cover.singular[s].branches;
        let ord = branch_order(cover, s);
        let pivot = br[ord[0]].piece;
        for &i in &ord[1..] {
            let other = br[i].piece;
            if other == pivot || out.contains_key(&(pivot, other)) {
                continue;
            }
            let m = marriage_match(&spectra[pivot], &spectra[other], threshold)?;
            out.insert((pivot, other), m);
        }
    }
    Ok(out)
}

/// Path data at one segment end: per item of the segment's piece, the
/// polyline `(distance from the singular point, angle lift)` and the pivot
/// item it follows.
struct Connector {
    paths: Vec<Vec<(Q, Q)>>,
    pivot_item: Vec<usize>,
    from_pivot: Vec<usize>,
}

fn connectors(
    cover: &ClosedCover,
    spectra: &[Vec<Angle>],
    matchings: &PieceMatchings,
    deltas: &[Q],
    comp_of_segment: &[usize],
) -> Result<(BTreeMap<(usize, End), Connector>, Vec<Option<Vec<Angle>>>)> {
    let mut out = BTreeMap::new();
    let mut at_vertex = Vec::new();
    let half = rational::q(1, 2);
    for s in 0..cover.singular.len() {
        let sp = &cover.singular[s];
        let ord = branch_order(cover, s);
        let pivot_piece = sp.branches[ord[0]].piece;
        let lam: Vec<Q> = spectra[pivot_piece].iter().map(Angle::value).collect();
        let d = lam.len();
        let sigma_for = |piece: usize| -> Result<Vec<usize>> {
            if piece == pivot_piece {
                return Ok((0..d).collect());
            }
            matchings
                .get(&(pivot_piece, piece))
                .map(|m| m.sigma.clone())
                .ok_or_else(|| Error::Invariant(format!("no matching from piece {pivot_piece} to {piece}")))
        };
        let deltas_to = |piece: usize| -> Result<Vec<Q>> {
            let sigma = sigma_for(piece)?;
            Ok((0..d)
                .map(|i| spectra[pivot_piece][i].shortest_delta(&spectra[piece][sigma[i]]))
                .collect())
        };
        let partner = ord[1..].iter().copied().find(|&i| sp.branches[i].piece != pivot_piece);
        let mid: Vec<Q> = match partner {
            Some(p) => {
                let dl = deltas_to(sp.branches[p].piece)?;
                (0..d).map(|i| lam[i] + dl[i] * half).collect()
            }
            None => lam.clone(),
        };
        let delta = deltas[comp_of_segment[sp.branches[ord[0]].segment]];
        for (rank, &bi) in ord.iter().enumerate() {
            let b = &sp.branches[bi];
            let sigma = sigma_for(b.piece)?;
            let dl = deltas_to(b.piece)?;
            let paths_by_pivot: Vec<Vec<(Q, Q)>> = (0..d)
                .map(|i| {
                    if rank == 0 {
                        vec![(zero(), mid[i]), (delta, lam[i])]
                    } else if Some(bi) == partner {
                        vec![(zero(), mid[i]), (delta, lam[i] + dl[i])]
                    } else {
                        vec![(zero(), mid[i]), (delta * half, lam[i]), (delta, lam[i] + dl[i])]
                    }
                })
                .collect();
            let mut pivot_item = vec![0; d];
            for (i, &j) in sigma.iter().enumerate() {
                pivot_item[j] = i;
            }
            let paths = (0..d).map(|j| paths_by_pivot[pivot_item[j]].clone()).collect();
            out.insert(
                (b.segment, b.end),
                Connector {
                    paths,
                    pivot_item,
                    from_pivot: sigma,
                },
            );
        }
        if let Point::Vertex { .. } = sp.at {
            at_vertex.push(Some(mid.iter().map(|m| Angle::new(*m)).collect()));
        } else {
            at_vertex.push(None);
        }
    }
    Ok((out, at_vertex))
}

fn push_piece(out: &mut Vec<LinearPiece>, from: Q, to: Q, start: Q, end: Q) {
    if from < to {
        let s = frac(start);
        out.push(LinearPiece {
            from,
            to,
            start: s,
            end: s + (end - start),
        });
    }
}

/// Glue the constant pieces along linear connectors of length `δ` around
/// every singular point (`δ` = shortest segment of the component / 16).
pub fn assemble(
    x: &MetricGraph,
    cover: &ClosedCover,
    spectra: &[Vec<Angle>],
    matchings: &PieceMatchings,
) -> Result<UnitaryField> {
    let d = spectra.first().map_or(0, Vec::len);
    if spectra.iter().any(|s| s.len() != d) {
        return Err(Error::DimensionMismatch("pieces have different dimensions".into()));
    }
    let (_, ecomp) = x.components();
    let ncomp = cover.pieces.iter().map(|p| p.component + 1).max().unwrap_or(0);
    let mut deltas = vec![Q::from_integer(1); ncomp];
    let mut seen = vec![false; ncomp];
    let comp_of_segment: Vec<usize> = cover.segments.iter().map(|s| ecomp[s.edge]).collect();
    for (s, c) in cover.segments.iter().zip(&comp_of_segment) {
        let len = (s.to - s.from) / Q::from_integer(16);
        if !seen[*c] || len < deltas[*c] {
            deltas[*c] = len;
            seen[*c] = true;
        }
    }
    let (conn, vertex_mid) = connectors(cover, spectra, matchings, &deltas, &comp_of_segment)?;

    let mut tracks = vec![vec![Vec::new(); x.edges.len()]; d];
    for k in 0..x.edges.len() {
        let segs: Vec<usize> = (0..cover.segments.len()).filter(|&s| cover.segments[s].edge == k).collect();
        // item of the current segment's piece carried by each track
        let mut item: Vec<usize> = (0..d).collect();
        for (pos, &s) in segs.iter().enumerate() {
            let seg = &cover.segments[s];
            let u = &spectra[seg.piece];
            let start = conn.get(&(s, End::Start));
            let finish = conn.get(&(s, End::Finish));
            if pos > 0 {
                let prev_finish = conn.get(&(segs[pos - 1], End::Finish)).ok_or_else(|| {
                    Error::Invariant(format!("edge {k}: consecutive segments without a singular point"))
                })?;
                let start = start.ok_or_else(|| Error::Invariant(format!("edge {k}: missing connector")))?;
                item = item.iter().map(|&j| start.from_pivot[prev_finish.pivot_item[j]]).collect();
            }
            for t in 0..d {
                let j = item[t];
                let out = &mut tracks[t][k];
                let mut lo = seg.from;
                if let Some(c) = start {
                    for w in c.paths[j].windows(2) {
                        push_piece(out, seg.from + w[0].0, seg.from + w[1].0, w[0].1, w[1].1);
                    }
                    lo = seg.from + c.paths[j].last().unwrap().0;
                }
                let hi = finish.map_or(seg.to, |c| seg.to - c.paths[j].last().unwrap().0);
                push_piece(out, lo, hi, u[j].value(), u[j].value());
                if let Some(c) = finish {
                    for w in c.paths[j].windows(2).rev() {
                        push_piece(out, seg.to - w[1].0, seg.to - w[0].0, w[1].1, w[0].1);
                    }
                }
            }
        }
    }

    let mut vertices = vec![Vec::new(); x.vertices.len()];
    for (pid, p) in cover.pieces.iter().enumerate() {
        for &v in &p.vertices {
            vertices[v] = sorted(spectra[pid].clone());
        }
    }
    for (s, mid) in cover.singular.iter().zip(vertex_mid) {
        if let (Point::Vertex { vertex: v }, Some(m)) = (s.at, mid) {
            vertices[v] = sorted(m);
        }
    }
    UnitaryField::new(x.clone(), d, tracks, vertices).map_err(|e| Error::Invariant(format!("assembled field: {e}")))
}

/// Everything produced by a graph lift.
#[derive(Debug, Clone, Serialize)]
pub struct GraphLift {
    pub field: UnitaryField,
    pub cover: ClosedCover,
    pub piece_spectra: Vec<Vec<Angle>>,
    pub matchings: Vec<PieceMatchingEntry>,
    /// Resolution of the lattice on which the counts were verified.
    pub verified_at: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct PieceMatchingEntry {
    pub source: usize,
    pub target: usize,
    #[serde(flatten)]
    pub matching: Matching,
}

fn graph_value(v: &Value) -> Result<&GraphLsc> {
    match v {
        Value::Graph(g) => Ok(g),
        other => Err(Error::DimensionMismatch(format!("expected a graph function, got {other}"))),
    }
}

/// Lift `α` (given on `Λ_n`, values over a metric graph) to a unitary field
/// whose spectral counts agree with `α` on `Λ_{n-2}`. Errors are tagged with
/// the step that failed: 1 cut and per-piece fill-up, 2 matching,
/// 4 assembly, 5 verification.
pub fn lift_graph(alpha: &ArcValuation, n: u32) -> Result<GraphLift> {
    let Codomain::Graph { graph: x, d } = alpha.codomain() else {
        return Err(Error::DimensionMismatch("graph lift needs a graph codomain".into()).at_step(1));
    };
    let alpha = alpha.coarsen(n).map_err(|e| e.at_step(1))?;
    alpha.validate().map_err(|e| e.at_step(1))?;
    if n < 2 && !x.edges.is_empty() {
        return Err(Error::Graph("graph lifts need resolution at least 2".into()).at_step(1));
    }
    let nc = cells(n);
    let mut fs = vec![graph_value(alpha.unit()).map_err(|e| e.at_step(1))?.clone()];
    for start in 0..nc {
        for len in 1..=nc {
            fs.push(graph_value(alpha.arc(start, len)).map_err(|e| e.at_step(1))?.clone());
        }
    }
    let cover = cut(x, &fs).map_err(|e| e.at_step(1))?;

    let mut spectra = Vec::with_capacity(cover.pieces.len());
    for (pid, p) in cover.pieces.iter().enumerate() {
        let prof = &p.profile;
        let local = ArcValuation::from_fn(n, Codomain::FinDim { blocks: vec![*d] }, |s| {
            let v = match s {
                Span::Full => prof[0],
                Span::Arc { start, len } => prof[1 + start * nc + len - 1],
            };
            Value::Tuple(vec![NatInf::Fin(v)])
        })
        .and_then(|a| fill_up(&a))
        .map_err(|e| match e {
            Error::Inconsistent { constraint, location } => Error::Inconsistent {
                constraint,
                location: format!("piece {pid}: {location}"),
            },
            other => other,
        })
        .map_err(|e| e.at_step(1))?;
        spectra.push(local.sorted().blocks.remove(0));
    }

    let matchings = match_pieces(&cover, &spectra, n).map_err(|e| e.at_step(2))?;
    let field = assemble(x, &cover, &spectra, &matchings).map_err(|e| e.at_step(4))?;

    let level = n.saturating_sub(2);
    let counts = field.spectral_counts(n).map_err(|e| e.at_step(5))?;
    if !compare_on_lambda(&counts, &alpha, level).map_err(|e| e.at_step(5))? {
        return Err(Error::Invariant(format!("spectral counts disagree with the valuation on level {level}")).at_step(5));
    }
    Ok(GraphLift {
        field,
        cover,
        piece_spectra: spectra,
        matchings: matchings
            .into_iter()
            .map(|((source, target), matching)| PieceMatchingEntry { source, target, matching })
            .collect(),
        verified_at: level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle_lsc::lambda_generators;
    use crate::rational::q;
    use itertools::Itertools;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn angles(v: &[(i64, i64)]) -> Vec<Angle> {
        v.iter().map(|(a, b)| Angle::new(q(*a, *b))).collect()
    }

    fn brute_bottleneck(a: &[Angle], b: &[Angle], threshold: Q) -> Option<Q> {
        (0..b.len())
            .permutations(b.len())
            .map(|p| a.iter().zip(&p).map(|(x, &j)| x.dist(&b[j])).max().unwrap_or(zero()))
            .filter(|m| *m < threshold)
            .min()
    }

    #[test]
    fn identity_matching() {
        let a = angles(&[(1, 3), (0, 1), (1, 3), (3, 4)]);
        let m = marriage_match(&a, &a, q(1, 8)).unwrap();
        assert_eq!(m.sigma, vec![0, 1, 2, 3]);
        assert_eq!(m.bottleneck, zero());
    }

    #[test]
    fn shifted_quarters_match_at_an_eighth() {
        let a = angles(&[(0, 1), (1, 4), (1, 2), (3, 4)]);
        let b = angles(&[(1, 8), (3, 8), (5, 8), (7, 8)]);
        let m = marriage_match(&a, &b, q(1, 2)).unwrap();
        assert_eq!(m.bottleneck, q(1, 8));
        for (i, &j) in m.sigma.iter().enumerate() {
            assert_eq!(a[i].dist(&b[j]), q(1, 8));
        }
        assert_eq!(brute_bottleneck(&a, &b, q(1, 2)), Some(q(1, 8)));
    }

    #[test]
    fn hall_violation_reports_the_deficient_set() {
        let a = angles(&[(0, 1), (0, 1)]);
        let b = angles(&[(1, 2), (1, 2)]);
        match marriage_match(&a, &b, q(1, 4)) {
            Err(Error::HallViolation {
                omega,
                omega_size,
                neighbours,
            }) => {
                assert_eq!(omega, vec![0, 1]);
                assert_eq!(omega_size, 2);
                assert_eq!(neighbours, 0);
            }
            other => panic!("expected a Hall violation, got {other:?}"),
        }
    }

    fn segment_graph_value(cut_at: Q, left: Vec<NatInf>, right: Vec<NatInf>) -> Vec<GraphLsc> {
        left.into_iter()
            .zip(right)
            .map(|(l, r)| GraphLsc {
                edges: vec![EdgeFunction {
                    breakpoints: vec![cut_at],
                    interval_values: vec![l, r],
                    point_values: vec![l.min(r)],
                }],
                vertex_values: vec![l, r],
            })
            .collect()
    }

    #[test]
    fn one_piece_gives_a_constant_field() {
        let x = MetricGraph::unit_interval();
        let f = GraphLsc::constant(&x, NatInf::Fin(1));
        let cover = cut(&x, &[f]).unwrap();
        assert_eq!(cover.pieces.len(), 1);
        let sp = vec![angles(&[(1, 8), (5, 8)])];
        let m = match_pieces(&cover, &sp, 2).unwrap();
        let u = assemble(&x, &cover, &sp, &m).unwrap();
        assert_eq!(u, UnitaryField::constant(&x, &sp[0]));
    }

    #[test]
    fn two_pieces_on_an_edge() {
        let x = MetricGraph::unit_interval();
        let fs = segment_graph_value(q(1, 2), vec![NatInf::Fin(1)], vec![NatInf::Fin(2)]);
        let cover = cut(&x, &fs).unwrap();
        assert_eq!(cover.pieces.len(), 2);
        let left = cover.piece_at(&Point::Vertex { vertex: 0 }).unwrap();
        let mut sp = vec![Vec::new(); 2];
        sp[left] = angles(&[(1, 4)]);
        sp[1 - left] = angles(&[(3, 8)]);
        let m = match_pieces(&cover, &sp, 2).unwrap();
        let u = assemble(&x, &cover, &sp, &m).unwrap();
        let at = |c: Q| u.angles_at(&Point::Interior { edge: 0, coord: c })[0];
        assert_eq!(at(q(1, 4)), Angle::new(q(1, 4)));
        assert_eq!(at(q(3, 4)), Angle::new(q(3, 8)));
        assert_eq!(at(q(1, 2)), Angle::new(q(5, 16)));
        // δ = (1/2) / 16
        assert_eq!(at(q(1, 2) - q(1, 32)), Angle::new(q(1, 4)));
        assert_eq!(at(q(1, 2) + q(1, 32)), Angle::new(q(3, 8)));
        assert_eq!(u.max_piece_excursion(), q(1, 16));
        for k in 0..=64 {
            let a = at(q(k, 64).max(q(1, 128)).min(q(127, 128)));
            assert!(a.dist(&Angle::new(q(1, 4))) <= q(1, 8));
        }
    }

    #[test]
    fn three_branches_at_a_vertex() {
        // a star with three unit edges, one piece per open edge
        let x = MetricGraph::new(
            vec!["c".into(), "a".into(), "b".into(), "d".into()],
            vec![
                ("c".into(), "a".into(), q(1, 1)),
                ("c".into(), "b".into(), q(1, 1)),
                ("c".into(), "d".into(), q(1, 1)),
            ],
        )
        .unwrap();
        let f = GraphLsc {
            edges: vec![
                EdgeFunction::constant(NatInf::Fin(1)),
                EdgeFunction::constant(NatInf::Fin(2)),
                EdgeFunction::constant(NatInf::Fin(3)),
            ],
            vertex_values: vec![NatInf::Fin(0), NatInf::Fin(1), NatInf::Fin(2), NatInf::Fin(3)],
        };
        let cover = cut(&x, &[f]).unwrap();
        assert_eq!(cover.pieces.len(), 3);
        let piece_of_edge = |k: usize| cover.piece_at(&Point::Interior { edge: k, coord: q(1, 2) }).unwrap();
        let mut sp = vec![Vec::new(); 3];
        sp[piece_of_edge(0)] = angles(&[(0, 1), (1, 2)]);
        sp[piece_of_edge(1)] = angles(&[(1, 16), (1, 2)]);
        sp[piece_of_edge(2)] = angles(&[(15, 16), (9, 16)]);
        let m = match_pieces(&cover, &sp, 2).unwrap();
        let u = assemble(&x, &cover, &sp, &m).unwrap();
        // the pivot is edge 0; the vertex carries the midpoints toward edge 1
        assert_eq!(u.angles_at(&Point::Vertex { vertex: 0 }), angles(&[(1, 32), (1, 2)]));
        // on the third edge the path passes back through the pivot spectrum
        let delta = q(1, 16);
        assert_eq!(
            u.angles_at(&Point::Interior { edge: 2, coord: delta / 2 }),
            angles(&[(0, 1), (1, 2)])
        );
        assert_eq!(u.angles_at(&Point::Interior { edge: 2, coord: delta }), angles(&[(9, 16), (15, 16)]));
    }

    #[test]
    fn field_json_round_trip_and_validation() {
        let x = MetricGraph::unit_interval();
        let fs = segment_graph_value(q(1, 2), vec![NatInf::Fin(1)], vec![NatInf::Fin(2)]);
        let cover = cut(&x, &fs).unwrap();
        let sp = vec![angles(&[(1, 4)]), angles(&[(3, 8)])];
        let u = assemble(&x, &cover, &sp, &match_pieces(&cover, &sp, 2).unwrap()).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        assert!(s.contains("from_coord"));
        let back: UnitaryField = serde_json::from_str(&s).unwrap();
        assert_eq!(back, u);
        let broken = s.replacen("\"start_angle\":\"1/4\"", "\"start_angle\":\"1/3\"", 1);
        assert!(serde_json::from_str::<UnitaryField>(&broken).is_err());
    }

    /// `e^{2πi t} ⊗ diag(roots of unity)` on the unit interval.
    fn winding_field(m: u32) -> UnitaryField {
        let x = MetricGraph::unit_interval();
        let d = cells(m);
        let tracks = (0..d)
            .map(|k| {
                vec![vec![LinearPiece {
                    from: zero(),
                    to: q(1, 1),
                    start: Q::new(k as i64, d as i64),
                    end: Q::new(k as i64, d as i64) + q(1, 1),
                }]]
            })
            .collect();
        let roots: Vec<Angle> = (0..d).map(|k| Angle::new(Q::new(k as i64, d as i64))).collect();
        UnitaryField::new(x, d, tracks, vec![roots.clone(), roots]).unwrap()
    }

    #[test]
    fn point_graph_reduces_to_fill_up() {
        let x = MetricGraph::point();
        let sp = angles(&[(1, 8), (1, 2), (1, 2)]);
        let alpha = UnitaryField::constant(&x, &sp).spectral_counts(3).unwrap();
        let lift = lift_graph(&alpha, 3).unwrap();
        assert_eq!(lift.cover.pieces.len(), 1);
        let direct = fill_up(
            &crate::spectral_oracle::cu_of_unitary(&crate::fd_lift::DiagonalUnitary::new(vec![sp]), 3),
        )
        .unwrap();
        assert_eq!(lift.piece_spectra[0], direct.sorted().blocks[0]);
    }

    #[test]
    fn winding_field_lifts() {
        for m in 0..=2 {
            let v = winding_field(m);
            for n in 2..=4 {
                let alpha = v.spectral_counts(n).unwrap();
                alpha.validate().unwrap();
                let lift = lift_graph(&alpha, n).unwrap();
                assert_eq!(lift.verified_at, n - 2);
                assert!(lift.field.max_piece_excursion() < Q::new(2, cells(n) as i64));
            }
        }
    }

    #[test]
    fn counts_agree_with_direct_evaluation() {
        let v = winding_field(1);
        let a = v.spectral_counts(3).unwrap();
        for (g, _) in lambda_generators(2) {
            let Value::Graph(h) = a.evaluate(&g).unwrap() else { panic!() };
            for k in 0..=40 {
                let c = q(k, 40);
                let p = if k == 0 {
                    Point::Vertex { vertex: 0 }
                } else if k == 40 {
                    Point::Vertex { vertex: 1 }
                } else {
                    Point::Interior { edge: 0, coord: c }
                };
                let direct: u64 = v
                    .angles_at(&p)
                    .iter()
                    .map(|x| g.function().value_at(x).finite().unwrap())
                    .sum();
                assert_eq!(h.value_at(&p), NatInf::Fin(direct));
            }
        }
    }

    #[test]
    fn low_resolution_is_rejected_at_step_one() {
        let x = MetricGraph::unit_interval();
        let alpha = UnitaryField::constant(&x, &angles(&[(1, 8)])).spectral_counts(2).unwrap();
        assert!(matches!(lift_graph(&alpha, 1), Err(Error::LiftStep { step: 1, .. })));
    }

    fn random_field(x: &MetricGraph, d: usize, seed: u64) -> UnitaryField {
        crate::sample::field(&mut ChaCha8Rng::seed_from_u64(seed), x, d, 32)
    }

    #[test]
    fn random_fields_are_valid_valuations() {
        for seed in 0..5 {
            let u = random_field(&MetricGraph::theta(), 3, seed);
            u.spectral_counts(2).unwrap().validate().unwrap();
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 24, rng_algorithm: prop::test_runner::RngAlgorithm::ChaCha, ..ProptestConfig::default() })]

        #[test]
        fn matching_is_optimal(a in prop::collection::vec(0i64..24, 1..=5), b in prop::collection::vec(0i64..24, 5), th in 1i64..12) {
            let a: Vec<Angle> = a.iter().map(|k| Angle::new(q(*k, 24))).collect();
            let b: Vec<Angle> = b[..a.len()].iter().map(|k| Angle::new(q(*k, 24))).collect();
            let threshold = q(th, 24);
            match (marriage_match(&a, &b, threshold), brute_bottleneck(&a, &b, threshold)) {
                (Ok(m), Some(best)) => {
                    prop_assert_eq!(m.bottleneck, best);
                    let mut s = m.sigma.clone();
                    s.sort();
                    prop_assert_eq!(s, (0..a.len()).collect::<Vec<_>>());
                }
                (Err(Error::HallViolation { omega, neighbours, .. }), None) => {
                    prop_assert!(neighbours < omega.len());
                    let nb = (0..b.len()).filter(|&j| omega.iter().any(|&i| a[i].dist(&b[j]) < threshold)).count();
                    prop_assert_eq!(nb, neighbours);
                }
                (r, best) => prop_assert!(false, "matcher {:?} against brute force {:?}", r, best),
            }
        }

        #[test]
        fn theta_lifts_verify(seed in 0u64..1000, d in 1usize..=4, n in 2u32..=3) {
            let u = random_field(&MetricGraph::theta(), d, seed);
            let alpha = u.spectral_counts(n).unwrap();
            let lift = lift_graph(&alpha, n).unwrap();
            prop_assert!(lift.field.max_piece_excursion() < Q::new(2, cells(n) as i64));
        }

        #[test]
        fn circle_lifts_verify(seed in 0u64..1000, d in 1usize..=3) {
            let u = random_field(&MetricGraph::circle(), d, seed);
            let alpha = u.spectral_counts(3).unwrap();
            prop_assert!(lift_graph(&alpha, 3).is_ok());
        }
    }
}
