//! Metric graphs, open regions on them, piecewise-constant lsc functions and
//! the constant-profile cover used by the graph lift.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::circle_lsc::NatInf;
use crate::error::{Error, Result};
use crate::rational::{self, Q};

fn zero() -> Q {
    Q::from_integer(0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: Q,
}

/// A finite graph whose edges are isometric to closed intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricGraph {
    pub vertices: Vec<String>,
    pub edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    vertices: Vec<VertexId>,
    edges: Vec<RawEdge>,
}

#[derive(Serialize, Deserialize)]
struct RawEdge {
    a: VertexId,
    b: VertexId,
    #[serde(with = "rational")]
    length: Q,
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(untagged)]
enum VertexId {
    Int(i64),
    Text(String),
}

impl VertexId {
    fn text(&self) -> String {
        match self {
            VertexId::Int(i) => i.to_string(),
            VertexId::Text(s) => s.clone(),
        }
    }
}

impl Serialize for MetricGraph {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawGraph {
            vertices: self.vertices.iter().cloned().map(VertexId::Text).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| RawEdge {
                    a: VertexId::Text(self.vertices[e.a].clone()),
                    b: VertexId::Text(self.vertices[e.b].clone()),
                    length: e.length,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricGraph {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawGraph::deserialize(d)?;
        let vertices: Vec<String> = raw.vertices.iter().map(VertexId::text).collect();
        let edges = raw
            .edges
            .iter()
            .map(|e| Ok((e.a.text(), e.b.text(), e.length)))
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        MetricGraph::new(vertices, edges).map_err(serde::de::Error::custom)
    }
}

impl MetricGraph {
    pub fn new(vertices: Vec<String>, edges: Vec<(String, String, Q)>) -> Result<Self> {
        let index: BTreeMap<&str, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        if index.len() != vertices.len() {
            return Err(Error::Graph("duplicate vertex id".into()));
        }
        let mut out = Vec::with_capacity(edges.len());
        for (k, (a, b, length)) in edges.into_iter().enumerate() {
            let find = |v: &str| {
                index
                    .get(v)
                    .copied()
                    .ok_or_else(|| Error::Graph(format!("edge {k} references unknown vertex {v:?}")))
            };
            if length <= zero() {
                return Err(Error::Graph(format!("edge {k} has non-positive length")));
            }
            out.push(Edge {
                a: find(&a)?,
                b: find(&b)?,
                length,
            });
        }
        Ok(MetricGraph {
            vertices,
            edges: out,
        })
    }

    /// A single vertex, no edges.
    pub fn point() -> Self {
        MetricGraph {
            vertices: vec!["p".into()],
            edges: vec![],
        }
    }

    /// `[0, 1]` as one unit edge from "0" to "1".
    pub fn unit_interval() -> Self {
        Self::new(vec!["0".into(), "1".into()], vec![("0".into(), "1".into(), Q::from_integer(1))]).unwrap()
    }

    /// A circle of circumference 1 as a single loop.
    pub fn circle() -> Self {
        Self::new(vec!["o".into()], vec![("o".into(), "o".into(), Q::from_integer(1))]).unwrap()
    }

    /// Two vertices joined by three unit edges.
    pub fn theta() -> Self {
        let e = |l| ("s".to_string(), "t".to_string(), l);
        Self::new(
            vec!["s".into(), "t".into()],
            vec![e(Q::from_integer(1)), e(Q::from_integer(1)), e(Q::from_integer(1))],
        )
        .unwrap()
    }

    pub fn total_length(&self) -> Q {
        self.edges.iter().fold(zero(), |s, e| s + e.length)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|e| (e.a == v) as usize + (e.b == v) as usize)
            .sum()
    }

    /// Connected component index per vertex and per edge.
    pub fn components(&self) -> (Vec<usize>, Vec<usize>) {
        let nv = self.vertices.len();
        let mut parent: Vec<usize> = (0..nv).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        for e in &self.edges {
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            parent[ra] = rb;
        }
        let mut label = BTreeMap::new();
        let vcomp: Vec<usize> = (0..nv)
            .map(|v| {
                let r = find(&mut parent, v);
                let next = label.len();
                *label.entry(r).or_insert(next)
            })
            .collect();
        let ecomp = self.edges.iter().map(|e| vcomp[e.a]).collect();
        (vcomp, ecomp)
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        match *p {
            Point::Vertex { vertex: v } if v < self.vertices.len() => Ok(()),
            Point::Interior { edge, coord } if edge < self.edges.len() => {
                if coord > zero() && coord < self.edges[edge].length {
                    Ok(())
                } else {
                    Err(Error::Graph(format!("coordinate outside edge {edge}")))
                }
            }
            _ => Err(Error::Graph("point references unknown vertex or edge".into())),
        }
    }

    /// Shortest-path distances from a set of weighted sources on vertices.
    fn vertex_distances(&self, seeds: &[Option<Q>]) -> Vec<Option<Q>> {
        let nv = self.vertices.len();
        let mut dist = seeds.to_vec();
        let mut done = vec![false; nv];
        loop {
            let next = (0..nv)
                .filter(|&v| !done[v] && dist[v].is_some())
                .min_by_key(|&v| dist[v].unwrap());
            let Some(v) = next else { break };
            done[v] = true;
            let dv = dist[v].unwrap();
            for e in &self.edges {
                for (x, y) in [(e.a, e.b), (e.b, e.a)] {
                    if x == v {
                        let cand = dv + e.length;
                        if dist[y].map_or(true, |d| cand < d) {
                            dist[y] = Some(cand);
                        }
                    }
                }
            }
        }
        dist
    }
}

/// A point of a metric graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Point {
    Vertex { vertex: usize },
    Interior {
        edge: usize,
        #[serde(with = "rational")]
        coord: Q,
    },
}

/// An open subset of a metric graph: open intervals in edge coordinates plus
/// the vertices it contains.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Region {
    pub edges: Vec<Vec<(Q, Q)>>,
    pub vertices: Vec<bool>,
}

/// Closed subsets of one edge (coordinates within `[0, L]`), each seen from a
/// source at the given extra distance.
type Sources = Vec<(Q, Q, Q)>;

impl Region {
    pub fn empty(x: &MetricGraph) -> Self {
        Region {
            edges: vec![vec![]; x.edges.len()],
            vertices: vec![false; x.vertices.len()],
        }
    }

    pub fn full(x: &MetricGraph) -> Self {
        Region {
            edges: x.edges.iter().map(|e| vec![(zero(), e.length)]).collect(),
            vertices: vec![true; x.vertices.len()],
        }
    }

    /// Build from raw intervals, merging overlaps and checking openness.
    pub fn new(x: &MetricGraph, edges: Vec<Vec<(Q, Q)>>, vertices: Vec<bool>) -> Result<Self> {
        if edges.len() != x.edges.len() || vertices.len() != x.vertices.len() {
            return Err(Error::Region("region shape does not match the graph".into()));
        }
        let mut r = Region {
            edges: edges.into_iter().map(merge_open).collect(),
            vertices,
        };
        for (k, ivs) in r.edges.iter_mut().enumerate() {
            let l = x.edges[k].length;
            for (a, b) in ivs.iter_mut() {
                if *a >= *b || *a < zero() || *b > l {
                    return Err(Error::Region(format!("bad interval on edge {k}")));
                }
            }
        }
        for (v, &on) in r.vertices.iter().enumerate() {
            if !on {
                continue;
            }
            for (k, e) in x.edges.iter().enumerate() {
                let touches_a = e.a == v && !r.edges[k].first().is_some_and(|iv| iv.0 == zero());
                let touches_b = e.b == v && !r.edges[k].last().is_some_and(|iv| iv.1 == e.length);
                if touches_a || touches_b {
                    return Err(Error::Region(format!(
                        "vertex {} is included but a neighbouring edge end is not",
                        x.vertices[v]
                    )));
                }
            }
        }
        Ok(r)
    }

    pub fn is_empty(&self) -> bool {
        self.edges.iter().all(Vec::is_empty) && !self.vertices.iter().any(|v| *v)
    }

    pub fn contains(&self, p: &Point) -> bool {
        match *p {
            Point::Vertex { vertex: v } => self.vertices[v],
            Point::Interior { edge, coord } => self.edges[edge].iter().any(|(a, b)| *a < coord && coord < *b),
        }
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.vertices.iter().zip(&other.vertices).all(|(a, b)| !*a || *b)
            && self.edges.iter().zip(&other.edges).all(|(mine, theirs)| {
                mine.iter()
                    .all(|(a, b)| theirs.iter().any(|(c, d)| c <= a && b <= d))
            })
    }

    /// Sources for the distance to the closure of this region.
    fn closure_sources(&self) -> Vec<Sources> {
        self.edges
            .iter()
            .map(|ivs| ivs.iter().map(|(a, b)| (*a, *b, zero())).collect())
            .collect()
    }

    /// Sources for the distance to the complement of this region.
    fn complement_sources(&self, x: &MetricGraph) -> Vec<Sources> {
        self.edges
            .iter()
            .zip(&x.edges)
            .map(|(ivs, e)| {
                complement_in(ivs, e.length, self.vertices[e.a], self.vertices[e.b])
                    .into_iter()
                    .map(|(a, b)| (a, b, zero()))
                    .collect()
            })
            .collect()
    }

    /// `{x : dist(x, U) < δ}`.
    pub fn thicken(&self, x: &MetricGraph, delta: Q) -> Region {
        if delta <= zero() {
            return self.clone();
        }
        let field = DistanceField::new(x, self.closure_sources(), self.vertices.clone());
        field.sublevel_open(x, delta)
    }

    /// `Int_δ(U) = {x : dist(x, X ∖ U) > δ}`, the largest open `V` with `V_δ ⊆ U`.
    pub fn int_delta(&self, x: &MetricGraph, delta: Q) -> Region {
        let outside: Vec<bool> = self.vertices.iter().map(|v| !v).collect();
        let field = DistanceField::new(x, self.complement_sources(x), outside);
        field.superlevel_open(x, delta)
    }

    /// Exact `dist(closure(U), X ∖ Z)`, or `None` if `Z` is everything.
    pub fn gap_to_complement(&self, x: &MetricGraph, z: &Region) -> Option<Q> {
        let field = DistanceField::new(x, self.closure_sources(), self.vertices.clone());
        let mut best: Option<Q> = None;
        let mut take = |d: Q| {
            if best.map_or(true, |b| d < b) {
                best = Some(d);
            }
        };
        for (v, &inside) in z.vertices.iter().enumerate() {
            if !inside {
                if let Some(d) = field.vertex[v] {
                    take(d);
                } else {
                    // unreachable from U: nothing to separate
                }
            }
        }
        for (k, e) in x.edges.iter().enumerate() {
            for (s, t) in complement_in(&z.edges[k], e.length, z.vertices[e.a], z.vertices[e.b]) {
                if let Some(d) = field.min_on(k, s, t, e.length) {
                    take(d);
                }
            }
        }
        best
    }
}

fn merge_open(mut ivs: Vec<(Q, Q)>) -> Vec<(Q, Q)> {
    ivs.sort();
    let mut out: Vec<(Q, Q)> = Vec::new();
    for (a, b) in ivs {
        if let Some(last) = out.last_mut() {
            if a < last.1 {
                last.1 = last.1.max(b);
                continue;
            }
        }
        out.push((a, b));
    }
    out
}

/// Closed complement of sorted disjoint open intervals within `[0, L]`,
/// leaving out an endpoint whose vertex belongs to the region.
fn complement_in(ivs: &[(Q, Q)], l: Q, keep_a: bool, keep_b: bool) -> Vec<(Q, Q)> {
    let mut out = Vec::new();
    let mut cur = zero();
    for (a, b) in ivs {
        out.push((cur, *a));
        cur = *b;
    }
    out.push((cur, l));
    out.retain(|&(s, t)| !(s == t && ((s == zero() && keep_a) || (s == l && keep_b))));
    out
}

/// Distance to a closed set given by per-edge closed intervals and vertices.
struct DistanceField {
    vertex: Vec<Option<Q>>,
    /// Per edge: closed intervals with offsets (inner sources plus the two
    /// endpoint sources carrying vertex distances).
    sources: Vec<Sources>,
}

impl DistanceField {
    fn new(x: &MetricGraph, inner: Vec<Sources>, in_set: Vec<bool>) -> Self {
        let mut seeds: Vec<Option<Q>> = in_set.iter().map(|&b| b.then(zero)).collect();
        let mut improve = |v: usize, d: Q| {
            if seeds[v].map_or(true, |s| d < s) {
                seeds[v] = Some(d);
            }
        };
        for (k, e) in x.edges.iter().enumerate() {
            for (a, b, _) in &inner[k] {
                improve(e.a, *a);
                improve(e.b, e.length - *b);
            }
        }
        let vertex = x.vertex_distances(&seeds);
        let sources = x
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let mut s = inner[k].clone();
                if let Some(d) = vertex[e.a] {
                    s.push((zero(), zero(), d));
                }
                if let Some(d) = vertex[e.b] {
                    s.push((e.length, e.length, d));
                }
                s
            })
            .collect();
        DistanceField { vertex, sources }
    }

    /// Minimum of the field over `[s, t]` on edge `k`.
    fn min_on(&self, k: usize, s: Q, t: Q, _l: Q) -> Option<Q> {
        self.sources[k]
            .iter()
            .map(|(a, b, o)| {
                let gap = if t < *a {
                    *a - t
                } else if *b < s {
                    s - *b
                } else {
                    zero()
                };
                *o + gap
            })
            .min()
    }

    /// `{dist < δ}`.
    fn sublevel_open(&self, x: &MetricGraph, delta: Q) -> Region {
        let edges = x
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let ivs = self.sources[k]
                    .iter()
                    .filter(|(_, _, o)| *o < delta)
                    .map(|(a, b, o)| {
                        let r = delta - *o;
                        ((*a - r).max(zero()), (*b + r).min(e.length))
                    })
                    .collect();
                merge_open(ivs)
            })
            .collect();
        let vertices = self.vertex.iter().map(|d| d.is_some_and(|d| d < delta)).collect();
        Region { edges, vertices }
    }

    /// `{dist > δ}`.
    fn superlevel_open(&self, x: &MetricGraph, delta: Q) -> Region {
        let edges = x
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let mut closed: Vec<(Q, Q)> = self.sources[k]
                    .iter()
                    .filter(|(_, _, o)| *o <= delta)
                    .map(|(a, b, o)| {
                        let r = delta - *o;
                        ((*a - r).max(zero()), (*b + r).min(e.length))
                    })
                    .collect();
                closed.sort();
                let mut out = Vec::new();
                let mut reach: Option<Q> = None;
                for (a, b) in closed {
                    match reach {
                        None if a > zero() => out.push((zero(), a)),
                        Some(r) if a > r => out.push((r, a)),
                        _ => {}
                    }
                    reach = Some(reach.map_or(b, |r| r.max(b)));
                }
                match reach {
                    None => out.push((zero(), e.length)),
                    Some(r) if r < e.length => out.push((r, e.length)),
                    _ => {}
                }
                out
            })
            .collect();
        let vertices = self.vertex.iter().map(|d| d.map_or(true, |d| d > delta)).collect();
        Region { edges, vertices }
    }
}

/// A piecewise-constant lsc function on one edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeFunction {
    #[serde(with = "rational::vec")]
    pub breakpoints: Vec<Q>,
    pub interval_values: Vec<NatInf>,
    pub point_values: Vec<NatInf>,
}

impl EdgeFunction {
    pub fn constant(v: NatInf) -> Self {
        EdgeFunction {
            breakpoints: vec![],
            interval_values: vec![v],
            point_values: vec![],
        }
    }

    pub fn value_at(&self, c: Q) -> NatInf {
        match self.breakpoints.binary_search(&c) {
            Ok(i) => self.point_values[i],
            Err(i) => self.interval_values[i],
        }
    }

    pub fn first(&self) -> NatInf {
        self.interval_values[0]
    }

    pub fn last(&self) -> NatInf {
        *self.interval_values.last().unwrap()
    }

    /// Same function on a finer breakpoint set (a superset of the current one).
    fn refine(&self, cuts: &[Q]) -> EdgeFunction {
        let n = cuts.len();
        let interval_values = (0..=n)
            .map(|i| {
                if i == 0 {
                    self.first()
                } else if i == n {
                    self.last()
                } else {
                    self.value_at((cuts[i - 1] + cuts[i]) / Q::from_integer(2))
                }
            })
            .collect();
        EdgeFunction {
            breakpoints: cuts.to_vec(),
            interval_values,
            point_values: cuts.iter().map(|c| self.value_at(*c)).collect(),
        }
    }

    pub fn canonical(&self) -> EdgeFunction {
        let mut out = EdgeFunction::constant(self.interval_values[0]);
        for (i, c) in self.breakpoints.iter().enumerate() {
            let v = self.point_values[i];
            let next = self.interval_values[i + 1];
            if v == out.last() && next == v {
                continue;
            }
            out.breakpoints.push(*c);
            out.point_values.push(v);
            out.interval_values.push(next);
        }
        out
    }
}

/// A piecewise-constant `ℕ̄`-valued lsc function on a metric graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphLsc {
    pub edges: Vec<EdgeFunction>,
    pub vertex_values: Vec<NatInf>,
}

impl GraphLsc {
    pub fn constant(x: &MetricGraph, v: NatInf) -> Self {
        GraphLsc {
            edges: vec![EdgeFunction::constant(v); x.edges.len()],
            vertex_values: vec![v; x.vertices.len()],
        }
    }

    pub fn validate(&self, x: &MetricGraph) -> Result<()> {
        if self.edges.len() != x.edges.len() || self.vertex_values.len() != x.vertices.len() {
            return Err(Error::DimensionMismatch("function shape does not match the graph".into()));
        }
        for (k, (f, e)) in self.edges.iter().zip(&x.edges).enumerate() {
            if f.interval_values.len() != f.breakpoints.len() + 1 || f.point_values.len() != f.breakpoints.len() {
                return Err(Error::DimensionMismatch(format!("edge {k}: value counts")));
            }
            let mut prev = zero();
            for (i, c) in f.breakpoints.iter().enumerate() {
                if *c <= prev || *c >= e.length {
                    return Err(Error::Graph(format!("edge {k}: breakpoints must increase inside (0, length)")));
                }
                prev = *c;
                if f.point_values[i] > f.interval_values[i].min(f.interval_values[i + 1]) {
                    return Err(Error::NotLsc(format!("edge {k} at {}", rational::format_q(c))));
                }
            }
            for (v, val) in [(e.a, f.first()), (e.b, f.last())] {
                if self.vertex_values[v] > val {
                    return Err(Error::NotLsc(format!("vertex {}", x.vertices[v])));
                }
            }
        }
        Ok(())
    }

    pub fn value_at(&self, p: &Point) -> NatInf {
        match *p {
            Point::Vertex { vertex: v } => self.vertex_values[v],
            Point::Interior { edge, coord } => self.edges[edge].value_at(coord),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.edges.iter().all(|f| f.interval_values.iter().all(NatInf::is_finite))
            && self.vertex_values.iter().all(NatInf::is_finite)
    }

    pub fn max_value(&self) -> NatInf {
        self.edges
            .iter()
            .flat_map(|f| f.interval_values.iter())
            .chain(&self.vertex_values)
            .copied()
            .max()
            .unwrap_or(NatInf::ZERO)
    }

    fn zip_with(&self, other: &GraphLsc, op: impl Fn(NatInf, NatInf) -> NatInf) -> GraphLsc {
        let edges = self
            .edges
            .iter()
            .zip(&other.edges)
            .map(|(f, g)| {
                let cuts = union_sorted(&f.breakpoints, &g.breakpoints);
                let (f, g) = (f.refine(&cuts), g.refine(&cuts));
                EdgeFunction {
                    breakpoints: cuts,
                    interval_values: f.interval_values.iter().zip(&g.interval_values).map(|(a, b)| op(*a, *b)).collect(),
                    point_values: f.point_values.iter().zip(&g.point_values).map(|(a, b)| op(*a, *b)).collect(),
                }
                .canonical()
            })
            .collect();
        let vertex_values = self
            .vertex_values
            .iter()
            .zip(&other.vertex_values)
            .map(|(a, b)| op(*a, *b))
            .collect();
        GraphLsc { edges, vertex_values }
    }

    pub fn add(&self, other: &GraphLsc) -> GraphLsc {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn le(&self, other: &GraphLsc) -> bool {
        self.vertex_values.iter().zip(&other.vertex_values).all(|(a, b)| a <= b)
            && self.edges.iter().zip(&other.edges).all(|(f, g)| {
                let cuts = union_sorted(&f.breakpoints, &g.breakpoints);
                let (f, g) = (f.refine(&cuts), g.refine(&cuts));
                f.interval_values.iter().zip(&g.interval_values).all(|(a, b)| a <= b)
                    && f.point_values.iter().zip(&g.point_values).all(|(a, b)| a <= b)
            })
    }

    /// Merge breakpoints that carry no information.
    pub fn canonical(&self) -> GraphLsc {
        GraphLsc {
            edges: self.edges.iter().map(EdgeFunction::canonical).collect(),
            vertex_values: self.vertex_values.clone(),
        }
    }

    /// The open level set `{f ≥ l}`.
    pub fn level_set(&self, x: &MetricGraph, l: u64) -> Region {
        let t = NatInf::Fin(l);
        let edges = self
            .edges
            .iter()
            .zip(&x.edges)
            .map(|(f, e)| {
                let mut out: Vec<(Q, Q)> = Vec::new();
                let mut open: Option<Q> = None;
                for i in 0..f.interval_values.len() {
                    let lo = if i == 0 { zero() } else { f.breakpoints[i - 1] };
                    let hi = f.breakpoints.get(i).copied().unwrap_or(e.length);
                    if f.interval_values[i] >= t {
                        if open.is_none() {
                            open = Some(lo);
                        }
                        let continues = i < f.point_values.len() && f.point_values[i] >= t;
                        if !continues {
                            out.push((open.take().unwrap(), hi));
                        }
                    }
                }
                out
            })
            .collect();
        Region {
            edges,
            vertices: self.vertex_values.iter().map(|v| *v >= t).collect(),
        }
    }

    pub fn indicator(x: &MetricGraph, r: &Region) -> GraphLsc {
        let edges = r
            .edges
            .iter()
            .zip(&x.edges)
            .map(|(ivs, e)| {
                let mut cuts: Vec<Q> = ivs
                    .iter()
                    .flat_map(|(a, b)| [*a, *b])
                    .filter(|c| *c > zero() && *c < e.length)
                    .collect();
                cuts.dedup();
                let mut f = EdgeFunction {
                    breakpoints: cuts.clone(),
                    interval_values: vec![NatInf::ZERO; cuts.len() + 1],
                    point_values: vec![NatInf::ZERO; cuts.len()],
                };
                for i in 0..=cuts.len() {
                    let lo = if i == 0 { zero() } else { cuts[i - 1] };
                    let hi = cuts.get(i).copied().unwrap_or(e.length);
                    let mid = (lo + hi) / Q::from_integer(2);
                    if ivs.iter().any(|(a, b)| *a < mid && mid < *b) {
                        f.interval_values[i] = NatInf::Fin(1);
                    }
                }
                f.canonical()
            })
            .collect();
        GraphLsc {
            edges,
            vertex_values: r.vertices.iter().map(|&b| if b { NatInf::Fin(1) } else { NatInf::ZERO }).collect(),
        }
    }

    /// `(1_{W_1}, ..., 1_{W_M})` with `W_l = {f ≥ l}`.
    pub fn chain_decomposition(&self, x: &MetricGraph) -> Result<Vec<GraphLsc>> {
        let top = self.max_value().finite().ok_or(Error::Unbounded)?;
        Ok((1..=top).map(|l| GraphLsc::indicator(x, &self.level_set(x, l))).collect())
    }
}

fn union_sorted(a: &[Q], b: &[Q]) -> Vec<Q> {
    let set: BTreeSet<Q> = a.iter().chain(b).copied().collect();
    set.into_iter().collect()
}

/// One maximal open sub-interval of an edge on which every tracked function
/// is constant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub edge: usize,
    #[serde(with = "rational")]
    pub from: Q,
    #[serde(with = "rational")]
    pub to: Q,
    pub piece: usize,
}

/// Which end of a segment touches a singular point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum End {
    Start,
    Finish,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub segment: usize,
    pub end: End,
    pub piece: usize,
}

/// A point where the value profile changes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub at: Point,
    pub profile: Vec<u64>,
    pub branches: Vec<Branch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    /// Constant value of each tracked function on the open piece.
    pub profile: Vec<u64>,
    pub segments: Vec<usize>,
    /// Vertices lying in the open piece.
    pub vertices: Vec<usize>,
    /// Connected component of the graph containing the piece.
    pub component: usize,
}

/// The cover of a graph by closures of maximal constant-profile open pieces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedCover {
    pub pieces: Vec<Piece>,
    pub segments: Vec<Segment>,
    pub singular: Vec<SingularPoint>,
}

impl ClosedCover {
    /// Unordered pairs of distinct pieces whose closures meet.
    pub fn adjacency(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for s in &self.singular {
            for a in &s.branches {
                for b in &s.branches {
                    if a.piece != b.piece {
                        out.insert((a.piece.min(b.piece), a.piece.max(b.piece)));
                    }
                }
            }
        }
        out
    }

    /// The piece whose open set contains `p`, if `p` is not singular.
    pub fn piece_at(&self, p: &Point) -> Option<usize> {
        match *p {
            Point::Vertex { vertex: v } => self.pieces.iter().position(|pc| pc.vertices.contains(&v)),
            Point::Interior { edge, coord } => self
                .segments
                .iter()
                .find(|s| s.edge == edge && s.from < coord && coord < s.to)
                .map(|s| s.piece),
        }
    }
}

/// Split `X` into maximal open regions where every `f_i` is constant.
pub fn cut(x: &MetricGraph, fs: &[GraphLsc]) -> Result<ClosedCover> {
    for f in fs {
        f.validate(x)?;
        if !f.is_finite() {
            return Err(Error::Unbounded);
        }
    }
    let fin = |v: NatInf| v.finite().expect("checked finite");
    let (vcomp, ecomp) = x.components();

    // common refinement per edge
    let mut cells = Vec::new(); // (edge, cuts, interval profiles, point profiles)
    for (k, e) in x.edges.iter().enumerate() {
        let mut cuts: BTreeSet<Q> = BTreeSet::new();
        for f in fs {
            cuts.extend(f.edges[k].breakpoints.iter().copied());
        }
        let cuts: Vec<Q> = cuts.into_iter().collect();
        let refined: Vec<EdgeFunction> = fs.iter().map(|f| f.edges[k].refine(&cuts)).collect();
        let ivp: Vec<Vec<u64>> = (0..=cuts.len())
            .map(|i| refined.iter().map(|f| fin(f.interval_values[i])).collect())
            .collect();
        let ptp: Vec<Vec<u64>> = (0..cuts.len())
            .map(|i| refined.iter().map(|f| fin(f.point_values[i])).collect())
            .collect();
        let _ = e;
        cells.push((cuts, ivp, ptp));
    }
    let vprof: Vec<Vec<u64>> = (0..x.vertices.len())
        .map(|v| fs.iter().map(|f| fin(f.vertex_values[v])).collect())
        .collect();

    // segments: maximal runs of intervals joined by non-singular breakpoints
    let mut segments: Vec<Segment> = Vec::new();
    let mut seg_profile: Vec<Vec<u64>> = Vec::new();
    let mut interior_singular: Vec<(usize, Q, Vec<u64>, usize, usize)> = Vec::new();
    let mut first_seg = vec![0usize; x.edges.len()];
    let mut last_seg = vec![0usize; x.edges.len()];
    for (k, e) in x.edges.iter().enumerate() {
        let (cuts, ivp, ptp) = &cells[k];
        let mut from = zero();
        first_seg[k] = segments.len();
        for i in 0..cuts.len() {
            let smooth = ptp[i] == ivp[i] && ivp[i] == ivp[i + 1];
            if !smooth {
                segments.push(Segment {
                    edge: k,
                    from,
                    to: cuts[i],
                    piece: usize::MAX,
                });
                seg_profile.push(ivp[i].clone());
                let left = segments.len() - 1;
                interior_singular.push((k, cuts[i], ptp[i].clone(), left, left + 1));
                from = cuts[i];
            }
        }
        segments.push(Segment {
            edge: k,
            from,
            to: e.length,
            piece: usize::MAX,
        });
        seg_profile.push(ivp[cuts.len()].clone());
        last_seg[k] = segments.len() - 1;
    }

    // union-find over segments and vertices (vertex v -> node segments.len() + v)
    let ns = segments.len();
    let mut parent: Vec<usize> = (0..ns + x.vertices.len()).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    let mut vertex_smooth = vec![true; x.vertices.len()];
    for (k, e) in x.edges.iter().enumerate() {
        if seg_profile[first_seg[k]] != vprof[e.a] {
            vertex_smooth[e.a] = false;
        }
        if seg_profile[last_seg[k]] != vprof[e.b] {
            vertex_smooth[e.b] = false;
        }
    }
    for (k, e) in x.edges.iter().enumerate() {
        for (v, s) in [(e.a, first_seg[k]), (e.b, last_seg[k])] {
            if vertex_smooth[v] {
                let (r1, r2) = (find(&mut parent, s), find(&mut parent, ns + v));
                parent[r1] = r2;
            }
        }
    }
    let mut piece_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pieces: Vec<Piece> = Vec::new();
    let mut node_piece = vec![0usize; ns + x.vertices.len()];
    for node in 0..ns + x.vertices.len() {
        if node >= ns && !vertex_smooth[node - ns] {
            continue;
        }
        let root = find(&mut parent, node);
        let id = *piece_of_root.entry(root).or_insert_with(|| {
            let (profile, component) = if node < ns {
                (seg_profile[node].clone(), ecomp[segments[node].edge])
            } else {
                (vprof[node - ns].clone(), vcomp[node - ns])
            };
            pieces.push(Piece {
                profile,
                segments: vec![],
                vertices: vec![],
                component,
            });
            pieces.len() - 1
        });
        node_piece[node] = id;
        if node < ns {
            pieces[id].segments.push(node);
            segments[node].piece = id;
        } else {
            pieces[id].vertices.push(node - ns);
        }
    }

    let mut singular = Vec::new();
    for (v, smooth) in vertex_smooth.iter().enumerate() {
        if *smooth {
            continue;
        }
        let mut branches = Vec::new();
        for (k, e) in x.edges.iter().enumerate() {
            if e.a == v {
                branches.push(Branch {
                    segment: first_seg[k],
                    end: End::Start,
                    piece: segments[first_seg[k]].piece,
                });
            }
            if e.b == v {
                branches.push(Branch {
                    segment: last_seg[k],
                    end: End::Finish,
                    piece: segments[last_seg[k]].piece,
                });
            }
        }
        singular.push(SingularPoint {
            at: Point::Vertex { vertex: v },
            profile: vprof[v].clone(),
            branches,
        });
    }
    for (edge, coord, profile, left, right) in interior_singular {
        singular.push(SingularPoint {
            at: Point::Interior { edge, coord },
            profile,
            branches: vec![
                Branch {
                    segment: left,
                    end: End::Finish,
                    piece: segments[left].piece,
                },
                Branch {
                    segment: right,
                    end: End::Start,
                    piece: segments[right].piece,
                },
            ],
        });
    }
    Ok(ClosedCover {
        pieces,
        segments,
        singular,
    })
}

/// Largest `δ` with `U_δ ⊆ Z_l^g`, where `U ⊆ W_l^f`: the exact distance from
/// `closure(U)` to `X ∖ Z_l^g`. When `Z_l^g` is everything the total length
/// of the graph is returned.
pub fn glue_delta(x: &MetricGraph, f: &GraphLsc, g: &GraphLsc, l: u64, u: &Region) -> Result<Q> {
    let w = f.level_set(x, l);
    if !u.is_subset(&w) {
        return Err(Error::Region(format!("region is not inside level set {l} of f")));
    }
    let z = g.level_set(x, l);
    match u.gap_to_complement(x, &z) {
        None => Ok(x.total_length()),
        Some(d) if d > zero() => Ok(d),
        Some(_) => Err(Error::Region(format!(
            "closure of the region meets the complement of level set {l} of g"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use proptest::prelude::*;

    fn fin(v: u64) -> NatInf {
        NatInf::Fin(v)
    }

    fn interval_region(x: &MetricGraph, ivs: Vec<(Q, Q)>) -> Region {
        Region::new(x, vec![ivs], vec![false; x.vertices.len()]).unwrap()
    }

    /// Sample points of a unit-edge graph on a fine grid.
    fn grid_points(x: &MetricGraph, den: i64) -> Vec<Point> {
        let mut out: Vec<Point> = (0..x.vertices.len()).map(|vertex| Point::Vertex { vertex }).collect();
        for (k, e) in x.edges.iter().enumerate() {
            let steps = (e.length * Q::from_integer(den)).to_integer();
            for i in 1..steps {
                out.push(Point::Interior {
                    edge: k,
                    coord: q(i, den),
                });
            }
        }
        out
    }

    /// Brute-force path distance between sample points on a fine grid.
    fn brute_dist(x: &MetricGraph, den: i64) -> (Vec<Point>, Vec<Vec<Q>>) {
        let pts = grid_points(x, den);
        let idx: BTreeMap<Point, usize> = pts.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let n = pts.len();
        let big = Q::from_integer(1_000);
        let mut d = vec![vec![big; n]; n];
        for i in 0..n {
            d[i][i] = zero();
        }
        let step = q(1, den);
        for (k, e) in x.edges.iter().enumerate() {
            let steps = (e.length * Q::from_integer(den)).to_integer();
            let at = |i: i64| -> usize {
                if i == 0 {
                    idx[&Point::Vertex { vertex: e.a }]
                } else if i == steps {
                    idx[&Point::Vertex { vertex: e.b }]
                } else {
                    idx[&Point::Interior { edge: k, coord: q(i, den) }]
                }
            };
            for i in 0..steps {
                let (a, b) = (at(i), at(i + 1));
                d[a][b] = d[a][b].min(step);
                d[b][a] = d[b][a].min(step);
            }
        }
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let c = d[i][m] + d[m][j];
                    if c < d[i][j] {
                        d[i][j] = c;
                    }
                }
            }
        }
        (pts, d)
    }

    #[test]
    fn graph_json_accepts_integer_ids() {
        let g: MetricGraph =
            serde_json::from_str(r#"{"vertices":[0,1],"edges":[{"a":0,"b":1,"length":"1/2"}]}"#).unwrap();
        assert_eq!(g.edges[0].length, q(1, 2));
        let back: MetricGraph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<MetricGraph>(r#"{"vertices":["a"],"edges":[{"a":"a","b":"z","length":1}]}"#).is_err());
    }

    #[test]
    fn int_delta_shrinks_an_interval() {
        let x = MetricGraph::unit_interval();
        let u = interval_region(&x, vec![(q(0, 1), q(1, 1))]);
        let v = u.int_delta(&x, q(1, 4));
        assert_eq!(v.edges[0], vec![(q(1, 4), q(3, 4))]);
        assert_eq!(v.thicken(&x, q(1, 4)), u);
        assert!(v.is_subset(&u));
        let thin = interval_region(&x, vec![(q(1, 4), q(1, 2))]);
        assert!(thin.int_delta(&x, q(1, 8)).is_empty());
    }

    #[test]
    fn int_delta_crosses_vertices() {
        // theta graph minus a point near s: the ball around that point covers
        // all three edges
        let x = MetricGraph::theta();
        let mut full = Region::full(&x);
        full.edges[0] = vec![(q(0, 1), q(1, 8)), (q(1, 8), q(1, 1))];
        let v = full.int_delta(&x, q(1, 4));
        assert!(!v.vertices[0]);
        assert_eq!(v.edges[1], vec![(q(1, 8), q(1, 1))]);
        assert_eq!(v.edges[0], vec![(q(3, 8), q(1, 1))]);
    }

    #[test]
    fn glue_delta_example() {
        let x = MetricGraph::unit_interval();
        let f = GraphLsc::indicator(&x, &interval_region(&x, vec![(q(1, 4), q(1, 2))]));
        let g = GraphLsc::indicator(&x, &interval_region(&x, vec![(q(0, 1), q(3, 4))]));
        let u = interval_region(&x, vec![(q(1, 4), q(1, 2))]);
        let d = glue_delta(&x, &f, &g, 1, &u).unwrap();
        assert_eq!(d, q(1, 4));
        assert!(u.thicken(&x, d).is_subset(&g.level_set(&x, 1)));
        let one = GraphLsc::constant(&x, fin(1));
        assert_eq!(glue_delta(&x, &f, &one, 1, &u).unwrap(), q(1, 1));
        assert!(glue_delta(&x, &g, &g, 1, &g.level_set(&x, 1)).is_err());
    }

    #[test]
    fn cut_examples() {
        let x = MetricGraph::unit_interval();
        let c = cut(&x, &[GraphLsc::constant(&x, fin(2))]).unwrap();
        assert_eq!(c.pieces.len(), 1);
        assert!(c.singular.is_empty());

        // [0, 1/2) is open in [0, 1]
        let half = Region::new(&x, vec![vec![(q(0, 1), q(1, 2))]], vec![true, false]).unwrap();
        let c = cut(&x, &[GraphLsc::indicator(&x, &half)]).unwrap();
        assert_eq!(c.pieces.len(), 2);
        assert_eq!(c.singular.len(), 1);
        assert_eq!(c.singular[0].at, Point::Interior { edge: 0, coord: q(1, 2) });
        assert_eq!(c.adjacency().len(), 1);
        assert_eq!(c.pieces[0].profile, vec![1]);
        assert_eq!(c.pieces[0].vertices, vec![0]);
        assert!(cut(&x, &[GraphLsc::constant(&x, NatInf::Inf)]).is_err());
    }

    #[test]
    fn cut_on_circle_wraps_through_the_vertex() {
        let x = MetricGraph::circle();
        let r = Region::new(&x, vec![vec![(q(1, 4), q(1, 2))]], vec![false]).unwrap();
        let c = cut(&x, &[GraphLsc::indicator(&x, &r)]).unwrap();
        // the zero set wraps through the vertex into one piece
        assert_eq!(c.pieces.len(), 2);
        assert_eq!(c.singular.len(), 2);
    }

    fn arb_function(den: i64, top: u64) -> impl Strategy<Value = EdgeFunction> {
        (prop::collection::btree_set(1..den, 0..4), prop::collection::vec(0..=top, 10), prop::collection::vec(0..=top, 10))
            .prop_map(move |(cuts, iv, pt)| {
                let breakpoints: Vec<Q> = cuts.into_iter().map(|c| q(c, den)).collect();
                let n = breakpoints.len();
                let interval_values: Vec<NatInf> = iv[..=n].iter().map(|v| fin(*v)).collect();
                let point_values = (0..n)
                    .map(|i| fin(pt[i]).min(interval_values[i]).min(interval_values[i + 1]))
                    .collect();
                EdgeFunction {
                    breakpoints,
                    interval_values,
                    point_values,
                }
            })
    }

    fn arb_theta_lsc() -> impl Strategy<Value = GraphLsc> {
        (prop::collection::vec(arb_function(8, 3), 3), prop::collection::vec(0u64..=3, 2)).prop_map(|(edges, vs)| {
            let x = MetricGraph::theta();
            let mut vertex_values: Vec<NatInf> = vs.into_iter().map(fin).collect();
            for (k, e) in x.edges.iter().enumerate() {
                vertex_values[e.a] = vertex_values[e.a].min(edges[k].first());
                vertex_values[e.b] = vertex_values[e.b].min(edges[k].last());
            }
            GraphLsc { edges, vertex_values }
        })
    }

    fn arb_region(x: MetricGraph, den: i64) -> impl Strategy<Value = Region> {
        let ne = x.edges.len();
        prop::collection::vec(prop::collection::btree_set(0..=den, 0..6), ne).prop_map(move |sets| {
            let edges = sets
                .into_iter()
                .map(|s| {
                    let pts: Vec<i64> = s.into_iter().collect();
                    pts.chunks(2)
                        .filter(|c| c.len() == 2)
                        .map(|c| (q(c[0], den), q(c[1], den)))
                        .collect()
                })
                .collect();
            Region::new(&x, edges, vec![false; x.vertices.len()]).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, rng_algorithm: prop::test_runner::RngAlgorithm::ChaCha, ..ProptestConfig::default() })]

        #[test]
        fn chain_decomposition_reconstructs(f in arb_theta_lsc()) {
            let x = MetricGraph::theta();
            f.validate(&x).unwrap();
            let parts = f.chain_decomposition(&x).unwrap();
            let sum = parts.iter().fold(GraphLsc::constant(&x, NatInf::ZERO), |s, p| s.add(p));
            prop_assert_eq!(sum.canonical(), f.canonical());
        }

        #[test]
        fn cut_profiles_are_constant_and_idempotent(f in arb_theta_lsc(), g in arb_theta_lsc()) {
            let x = MetricGraph::theta();
            let cover = cut(&x, &[f.clone(), g.clone()]).unwrap();
            for p in grid_points(&x, 32) {
                if let Some(l) = cover.piece_at(&p) {
                    prop_assert_eq!(&cover.pieces[l].profile, &vec![f.value_at(&p).finite().unwrap(), g.value_at(&p).finite().unwrap()]);
                }
            }
            let again = cut(&x, &[f.canonical(), g.canonical(), f.clone()]).unwrap();
            prop_assert_eq!(again.pieces.len(), cover.pieces.len());
            prop_assert_eq!(again.singular.len(), cover.singular.len());
            // adjacency is symmetric by construction; both orientations appear once
            for (a, b) in cover.adjacency() {
                prop_assert!(a < b);
            }
        }

        #[test]
        fn thicken_and_interior_match_brute_force(u in arb_region(MetricGraph::theta(), 4), m in 1i64..4) {
            let x = MetricGraph::theta();
            let delta = q(m, 8);
            let (pts, d) = brute_dist(&x, 16);
            let t = u.thicken(&x, delta);
            let i = u.int_delta(&x, delta);
            // region membership on the sample grid, closures via dyadic samples
            let in_u: Vec<bool> = pts.iter().map(|p| u.contains(p)).collect();
            let closure: Vec<bool> = pts.iter().map(|p| in_closure(&x, &u, p)).collect();
            for a in 0..pts.len() {
                let to_u = (0..pts.len()).filter(|&b| closure[b]).map(|b| d[a][b]).min();
                let expect_t = to_u.is_some_and(|v| v < delta);
                prop_assert_eq!(t.contains(&pts[a]), expect_t);
                let to_out = (0..pts.len()).filter(|&b| !in_u[b]).map(|b| d[a][b]).min();
                let expect_i = to_out.map_or(true, |v| v > delta);
                prop_assert_eq!(i.contains(&pts[a]), expect_i);
            }
            prop_assert!(i.is_subset(&u));
            prop_assert!(u.is_subset(&t));
        }

        #[test]
        fn interior_then_thicken_recovers_wide_intervals(a in 0i64..4, len in 5i64..9) {
            let x = MetricGraph::unit_interval();
            let b = (a + len).min(16);
            if b - a > 4 {
                let u = interval_region(&x, vec![(q(a, 16), q(b, 16))]);
                let d = q(1, 8);
                let shrunk = u.int_delta(&x, d);
                let expect = interval_region(&x, vec![(q(a, 16), q(b, 16))]);
                prop_assert_eq!(shrunk.thicken(&x, d), expect);
            }
        }

        #[test]
        fn glue_delta_grows_with_target(f in arb_theta_lsc(), g in arb_theta_lsc()) {
            let x = MetricGraph::theta();
            let bigger = g.add(&f);
            let u = f.level_set(&x, 1).int_delta(&x, q(1, 8));
            let small = glue_delta(&x, &f, &g, 1, &u);
            let large = glue_delta(&x, &f, &bigger, 1, &u);
            if let Ok(s) = small {
                let l = large.unwrap();
                prop_assert!(l >= s);
                prop_assert!(u.thicken(&x, s).is_subset(&g.level_set(&x, 1)));
            }
        }
    }

    fn in_closure(x: &MetricGraph, u: &Region, p: &Point) -> bool {
        match *p {
            Point::Vertex { vertex: v } => x.edges.iter().enumerate().any(|(k, e)| {
                (e.a == v && u.edges[k].first().is_some_and(|iv| iv.0 == zero()))
                    || (e.b == v && u.edges[k].last().is_some_and(|iv| iv.1 == e.length))
            }),
            Point::Interior { edge, coord } => u.edges[edge].iter().any(|(a, b)| *a <= coord && coord <= *b),
        }
    }
}
