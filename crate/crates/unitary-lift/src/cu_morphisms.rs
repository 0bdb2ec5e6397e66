//! Morphisms out of `Lsc(T, ℕ̄)` presented by their values on connected
//! dyadic arcs, the compare-on-lattice relation, the two distances built on
//! it, and Cauchy sequences of such presentations.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::circle_lsc::{cells, LambdaElement, NatInf, Span};
use crate::determinant::CuZElement;
use crate::error::{Error, Result};
use crate::graph_space::{GraphLsc, MetricGraph};
use crate::rational::{self, Q};

/// The target semigroup of a valuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Codomain {
    /// `ℕ̄^r` for the algebra `M_{d_1} ⊕ ... ⊕ M_{d_r}`.
    FinDim { blocks: Vec<u64> },
    /// Lsc functions on a metric graph, for `M_d(C(X))`.
    Graph { graph: MetricGraph, d: u64 },
    /// `ℕ ⊔ (0, ∞]`.
    JiangSu,
}

/// An element of one of the codomains.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Tuple(Vec<NatInf>),
    Graph(GraphLsc),
    CuZ(CuZElement),
}

impl Value {
    pub fn add(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Tuple(a), Value::Tuple(b)) => Value::Tuple(a.iter().zip(b).map(|(x, y)| *x + *y).collect()),
            (Value::Graph(a), Value::Graph(b)) => Value::Graph(a.add(b)),
            (Value::CuZ(a), Value::CuZ(b)) => Value::CuZ(a.add(b)),
            _ => panic!("adding values from different codomains"),
        }
    }

    pub fn le(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Tuple(a), Value::Tuple(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x <= y),
            (Value::Graph(a), Value::Graph(b)) => a.le(b),
            (Value::CuZ(a), Value::CuZ(b)) => a.le(b),
            _ => false,
        }
    }

    pub fn tuple(&self) -> Option<&[NatInf]> {
        match self {
            Value::Tuple(t) => Some(t),
            _ => None,
        }
    }

    /// Componentwise minimum of two tuples.
    fn meet(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Tuple(a), Value::Tuple(b)) => Value::Tuple(a.iter().zip(b).map(|(x, y)| *x.min(y)).collect()),
            _ => panic!("meet is only defined on tuples"),
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Value::Tuple(t) => serde_json::to_value(t),
            Value::Graph(g) => serde_json::to_value(g),
            Value::CuZ(c) => serde_json::to_value(c),
        }
        .expect("values serialize")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

impl Codomain {
    pub fn zero(&self) -> Value {
        match self {
            Codomain::FinDim { blocks } => Value::Tuple(vec![NatInf::ZERO; blocks.len()]),
            Codomain::Graph { graph, .. } => Value::Graph(GraphLsc::constant(graph, NatInf::ZERO)),
            Codomain::JiangSu => Value::CuZ(CuZElement::ZERO),
        }
    }

    /// The class of the unit of the algebra.
    pub fn unit(&self) -> Value {
        match self {
            Codomain::FinDim { blocks } => Value::Tuple(blocks.iter().map(|d| NatInf::Fin(*d)).collect()),
            Codomain::Graph { graph, d } => Value::Graph(GraphLsc::constant(graph, NatInf::Fin(*d))),
            Codomain::JiangSu => Value::CuZ(CuZElement::Compact(1)),
        }
    }

    fn check(&self, v: &Value) -> Result<()> {
        match (self, v) {
            (Codomain::FinDim { blocks }, Value::Tuple(t)) if t.len() == blocks.len() => Ok(()),
            (Codomain::Graph { graph, .. }, Value::Graph(g)) => g.validate(graph),
            (Codomain::JiangSu, Value::CuZ(_)) => Ok(()),
            _ => Err(Error::DimensionMismatch(format!("value {v} does not belong to the codomain"))),
        }
    }

    fn parse(&self, j: Json) -> Result<Value> {
        let bad = |e: serde_json::Error| Error::Parse(e.to_string());
        let v = match self {
            Codomain::FinDim { .. } => Value::Tuple(serde_json::from_value(j).map_err(bad)?),
            Codomain::Graph { .. } => Value::Graph(serde_json::from_value(j).map_err(bad)?),
            Codomain::JiangSu => Value::CuZ(serde_json::from_value(j).map_err(bad)?),
        };
        self.check(&v)?;
        Ok(v)
    }
}

/// A morphism restricted to the connected generators of `Λ_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcValuation {
    resolution: u32,
    codomain: Codomain,
    unit: Value,
    /// Indexed by `start * 2^n + (length - 1)`.
    arcs: Vec<Value>,
}

#[derive(Serialize, Deserialize)]
struct RawValuation {
    resolution: u32,
    codomain: Codomain,
    unit: Json,
    arcs: Vec<RawArc>,
}

#[derive(Serialize, Deserialize)]
struct RawArc {
    start: usize,
    length: usize,
    value: Json,
}

impl Serialize for ArcValuation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let nc = self.cells();
        RawValuation {
            resolution: self.resolution,
            codomain: self.codomain.clone(),
            unit: self.unit.to_json(),
            arcs: (0..nc)
                .flat_map(|start| (1..=nc).map(move |length| (start, length)))
                .map(|(start, length)| RawArc {
                    start,
                    length,
                    value: self.arc(start, length).to_json(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ArcValuation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawValuation::deserialize(d)?;
        ArcValuation::from_raw(raw).map_err(serde::de::Error::custom)
    }
}

impl ArcValuation {
    fn from_raw(raw: RawValuation) -> Result<Self> {
        if raw.resolution > 12 {
            return Err(Error::Parse(format!("resolution {} is too large", raw.resolution)));
        }
        let nc = cells(raw.resolution);
        let unit = raw.codomain.parse(raw.unit)?;
        let mut arcs: Vec<Option<Value>> = vec![None; nc * nc];
        for a in raw.arcs {
            if a.start >= nc || a.length == 0 || a.length > nc {
                return Err(Error::Parse(format!("arc start={} length={} out of range", a.start, a.length)));
            }
            let slot = &mut arcs[a.start * nc + a.length - 1];
            if slot.is_some() {
                return Err(Error::Parse(format!("arc start={} length={} listed twice", a.start, a.length)));
            }
            *slot = Some(raw.codomain.parse(a.value)?);
        }
        let arcs = arcs
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("missing arc start={} length={}", i / nc, i % nc + 1))))
            .collect::<Result<Vec<_>>>()?;
        Ok(ArcValuation {
            resolution: raw.resolution,
            codomain: raw.codomain,
            unit,
            arcs,
        })
    }

    /// Build from a function on spans (called on every arc; `Full` gives the unit).
    pub fn from_fn(resolution: u32, codomain: Codomain, mut f: impl FnMut(Span) -> Value) -> Result<Self> {
        let nc = cells(resolution);
        let unit = f(Span::Full);
        codomain.check(&unit)?;
        let mut arcs = Vec::with_capacity(nc * nc);
        for start in 0..nc {
            for len in 1..=nc {
                let v = f(Span::Arc { start, len });
                codomain.check(&v)?;
                arcs.push(v);
            }
        }
        Ok(ArcValuation {
            resolution,
            codomain,
            unit,
            arcs,
        })
    }

    /// The valuation of a finite sum of point and arc masses: `arc_mass[b][i]`
    /// sits inside arc `i` and `point_mass[b][j]` on breakpoint `j`, per block.
    pub fn from_cell_masses(resolution: u32, arc_mass: &[Vec<u64>], point_mass: &[Vec<u64>]) -> Result<Self> {
        let nc = cells(resolution);
        if arc_mass.len() != point_mass.len() || arc_mass.iter().chain(point_mass).any(|m| m.len() != nc) {
            return Err(Error::DimensionMismatch("mass arrays must have one entry per cell".into()));
        }
        let blocks: Vec<u64> = arc_mass
            .iter()
            .zip(point_mass)
            .map(|(a, p)| a.iter().sum::<u64>() + p.iter().sum::<u64>())
            .collect();
        let codomain = Codomain::FinDim { blocks: blocks.clone() };
        Self::from_fn(resolution, codomain, |span| match span {
            Span::Full => Value::Tuple(blocks.iter().map(|d| NatInf::Fin(*d)).collect()),
            Span::Arc { start, len } => Value::Tuple(
                arc_mass
                    .iter()
                    .zip(point_mass)
                    .map(|(a, p)| {
                        let arcs: u64 = (0..len).map(|t| a[(start + t) % nc]).sum();
                        let pts: u64 = (0..len - 1).map(|t| p[(start + t) % nc]).sum();
                        NatInf::Fin(arcs + pts)
                    })
                    .collect(),
            ),
        })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn codomain(&self) -> &Codomain {
        &self.codomain
    }

    pub fn unit(&self) -> &Value {
        &self.unit
    }

    pub fn cells(&self) -> usize {
        cells(self.resolution)
    }

    pub fn arc(&self, start: usize, len: usize) -> &Value {
        let nc = self.cells();
        &self.arcs[(start % nc) * nc + len - 1]
    }

    /// Value on a span at this valuation's resolution.
    pub fn get(&self, span: &Span) -> &Value {
        match *span {
            Span::Full => &self.unit,
            Span::Arc { start, len } => self.arc(start, len),
        }
    }

    fn get_or_zero(&self, span: Option<Span>) -> Value {
        span.map_or_else(|| self.codomain.zero(), |s| self.get(&s).clone())
    }

    /// Sum over the connected components of `g` (which may be coarser).
    pub fn evaluate(&self, g: &LambdaElement) -> Result<Value> {
        let m = g.resolution();
        if m > self.resolution {
            return Err(Error::ResolutionMismatch {
                expected: self.resolution,
                got: m,
            });
        }
        Ok(g.components()
            .iter()
            .fold(self.codomain.zero(), |acc, c| acc.add(self.get(&c.refine(self.resolution - m)))))
    }

    /// The restriction to the coarser lattice `Λ_m`.
    pub fn coarsen(&self, m: u32) -> Result<ArcValuation> {
        if m > self.resolution {
            return Err(Error::ResolutionMismatch {
                expected: self.resolution,
                got: m,
            });
        }
        let shift = self.resolution - m;
        Self::from_fn(m, self.codomain.clone(), |s| self.get(&s.refine(shift)).clone())
    }

    /// Check the identities every restriction of an additive order-preserving
    /// map satisfies; the first violation is reported.
    pub fn validate(&self) -> Result<()> {
        let nc = self.cells();
        let loc = |s: usize, l: usize| format!("arc start={s} length={l}");
        if self.unit != self.codomain.unit() {
            return Err(Error::inconsistent("unit", format!("{} != {}", self.unit, self.codomain.unit())));
        }
        if let Codomain::FinDim { .. } = self.codomain {
            for v in self.arcs.iter().chain(std::iter::once(&self.unit)) {
                if v.tuple().is_some_and(|t| t.iter().any(|x| !x.is_finite())) {
                    return Err(Error::Unbounded);
                }
            }
        }
        for s in 0..nc {
            for l in 1..=nc {
                let v = self.arc(s, l);
                let outer = if l == nc {
                    vec![&self.unit]
                } else {
                    vec![self.arc(s, l + 1), self.arc(s + nc - 1, l + 1)]
                };
                if outer.iter().any(|w| !v.le(w)) {
                    return Err(Error::inconsistent("monotone", loc(s, l)));
                }
            }
        }
        let v = |s: usize| self.arc(s, 2).clone();
        let u = |s: usize| self.arc(s, 1).clone();
        let zero = self.codomain.zero();
        if self.resolution >= 1 {
            let lhs = (0..nc).fold(zero.clone(), |a, k| a.add(&v(k)));
            let rhs = (0..nc).fold(self.unit.clone(), |a, k| a.add(&u(k)));
            if lhs != rhs {
                return Err(Error::inconsistent("cover identity", format!("{lhs} != {rhs}")));
            }
        }
        for s in 0..nc {
            for l in 2..=nc {
                let lhs = (1..l - 1).fold(self.arc(s, l).clone(), |a, t| a.add(&u(s + t)));
                let rhs = (0..l - 1).fold(zero.clone(), |a, t| a.add(&v(s + t)));
                if lhs != rhs {
                    return Err(Error::inconsistent("arc additivity", loc(s, l)));
                }
                for a in 1..l {
                    let parts = self.arc(s, a).add(self.arc(s + a, l - a));
                    if !parts.le(self.arc(s, l)) {
                        return Err(Error::inconsistent("superadditivity", format!("{} split at {a}", loc(s, l))));
                    }
                }
            }
        }
        Ok(())
    }

    fn same_codomain(&self, other: &ArcValuation) -> Result<()> {
        if self.codomain != other.codomain {
            return Err(Error::DimensionMismatch("valuations have different codomains".into()));
        }
        Ok(())
    }
}

/// Both valuations at their finest common resolution.
fn at_common(a: &ArcValuation, b: &ArcValuation) -> Result<(ArcValuation, ArcValuation)> {
    a.same_codomain(b)?;
    let r = a.resolution.min(b.resolution);
    Ok((a.coarsen(r)?, b.coarsen(r)?))
}

/// Whether `a(Int(D)) ≤ b(D)` and `b(Int(D)) ≤ a(D)` for every connected span
/// `D` at `level`, where `Int` removes `shrink` cells of the common resolution
/// from each end.
fn dominated(a: &ArcValuation, b: &ArcValuation, level: u32, shrink: usize) -> bool {
    let r = a.resolution;
    let nc = a.cells();
    Span::all(level).iter().all(|d| {
        let d = d.refine(r - level);
        let inner = d.shrink(shrink, nc);
        a.get_or_zero(inner).le(b.get(&d)) && b.get_or_zero(inner).le(a.get(&d))
    })
}

/// `α(g) ≤ β(h)` and `β(g) ≤ α(h)` for all `g ≪ h` in `Λ_n`.
///
/// Checked on connected spans only: the least `h` way above `g` is its
/// one-cell thickening, and additivity over components plus
/// superadditivity reduce the general pair to a connected one.
pub fn compare_on_lambda(a: &ArcValuation, b: &ArcValuation, n: u32) -> Result<bool> {
    let (a, b) = at_common(a, b)?;
    if n > a.resolution {
        return Err(Error::ResolutionMismatch {
            expected: a.resolution,
            got: n,
        });
    }
    Ok(dominated(&a, &b, n, 1 << (a.resolution - n)))
}

/// A non-negative rational or `∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dist {
    Finite(Q),
    Infinite,
}

impl Dist {
    pub fn finite(&self) -> Option<Q> {
        match self {
            Dist::Finite(q) => Some(*q),
            Dist::Infinite => None,
        }
    }

    pub fn scale(&self, k: Q) -> Dist {
        match self {
            Dist::Finite(q) => Dist::Finite(*q * k),
            Dist::Infinite => Dist::Infinite,
        }
    }

    pub fn plus(&self, other: &Dist) -> Dist {
        match (self, other) {
            (Dist::Finite(a), Dist::Finite(b)) => Dist::Finite(*a + *b),
            _ => Dist::Infinite,
        }
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Dist::Finite(a), Dist::Finite(b)) => a.cmp(b),
            (Dist::Finite(_), Dist::Infinite) => Ordering::Less,
            (Dist::Infinite, Dist::Finite(_)) => Ordering::Greater,
            (Dist::Infinite, Dist::Infinite) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Finite(q) => f.write_str(&rational::format_q(q)),
            Dist::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Dist {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Dist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let t = String::deserialize(d)?;
        if t == "inf" {
            Ok(Dist::Infinite)
        } else {
            rational::parse_q(&t).map(Dist::Finite).map_err(serde::de::Error::custom)
        }
    }
}

/// Result of the lattice-based distance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DdReport {
    /// `1/2^m` for the finest level `m` at which the pair compares, `0` on
    /// exact agreement, `inf` when even `Λ_0` separates them.
    pub value: Dist,
    pub exact_agreement: bool,
    /// The finest tested level passed: the true infimum may be smaller.
    pub resolution_limited: bool,
    /// Finest level at which the pair compares.
    pub level: Option<u32>,
}

pub fn dd_cu(a: &ArcValuation, b: &ArcValuation) -> Result<DdReport> {
    let (a, b) = at_common(a, b)?;
    let r = a.resolution;
    let mut level = None;
    for m in 0..=r {
        if dominated(&a, &b, m, 1 << (r - m)) {
            level = Some(m);
        } else {
            break;
        }
    }
    let exact = a == b;
    Ok(match level {
        None => DdReport {
            value: Dist::Infinite,
            exact_agreement: false,
            resolution_limited: false,
            level,
        },
        Some(_) if exact => DdReport {
            value: Dist::Finite(Q::from_integer(0)),
            exact_agreement: true,
            resolution_limited: false,
            level,
        },
        Some(m) => DdReport {
            value: Dist::Finite(rational::dyadic(m)),
            exact_agreement: false,
            resolution_limited: m == r,
            level,
        },
    })
}

/// Least `r = m/2^R` with `α(U) ≤ β(U_r)` and `β(U) ≤ α(U_r)` for all dyadic
/// open `U` at the common resolution `R`.
pub fn d_cu(a: &ArcValuation, b: &ArcValuation) -> Result<Dist> {
    let (a, b) = at_common(a, b)?;
    if !(a.unit.le(&b.unit) && b.unit.le(&a.unit)) {
        return Ok(Dist::Infinite);
    }
    let r = a.resolution;
    let nc = a.cells();
    let (mut lo, mut hi) = (0usize, nc.div_ceil(2));
    while lo < hi {
        let mid = (lo + hi) / 2;
        if dominated(&a, &b, r, mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Dist::Finite(Q::new(lo as i64, nc as i64)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauchyStep {
    /// Index `n` of the later term (the sequence starts at `n = 1`).
    pub index: u32,
    pub distance: DdReport,
    #[serde(with = "rational")]
    pub bound: Q,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauchyCheck {
    pub pass: bool,
    pub steps: Vec<CauchyStep>,
}

/// `dd(α_{n-1}, α_n) ≤ C/2^n` for consecutive terms, indexed from `n = 1`.
pub fn cauchy_check(seq: &[ArcValuation], c: Q) -> Result<CauchyCheck> {
    let mut steps = Vec::new();
    for i in 1..seq.len() {
        let index = i as u32 + 1;
        let distance = dd_cu(&seq[i - 1], &seq[i])?;
        let bound = c * rational::dyadic(index);
        let pass = distance.value <= Dist::Finite(bound);
        steps.push(CauchyStep {
            index,
            distance,
            bound,
            pass,
        });
    }
    Ok(CauchyCheck {
        pass: steps.iter().all(|s| s.pass),
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailDistance {
    pub index: u32,
    pub distance: DdReport,
    /// `2C/2^n`: the geometric tail sum with the relaxed triangle constant.
    #[serde(with = "rational")]
    pub bound: Q,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauchyLimit {
    pub limit: ArcValuation,
    pub tail: Vec<TailDistance>,
}

/// Stage values `s_j(U) = min_{i in tail(j)} α_i(Int_{2/2^j} U)` for
/// `j = target+1 ..= R+1`, where the inner thinning is measured on the
/// common grid `R` and `tail(j)` starts at `min(j + ⌈log₂ C⌉, L)`.
fn limit_stages(seq: &[ArcValuation], c: Q, target: u32) -> Vec<Vec<Value>> {
    let r = seq[0].resolution;
    let nc = cells(r);
    let len = seq.len();
    let mut lag = 0u32;
    while Q::from_integer(1i64 << lag) < c {
        lag += 1;
    }
    let spans: Vec<Span> = Span::all(target).into_iter().map(|s| s.refine(r - target)).collect();
    (target + 1..=r + 1)
        .map(|j| {
            let thin = 1usize << (r + 1 - j);
            let first = ((j + lag) as usize).min(len);
            spans
                .iter()
                .map(|d| {
                    let inner = d.shrink(thin, nc);
                    seq[first - 1..]
                        .iter()
                        .map(|a| a.get_or_zero(inner))
                        .reduce(|x, y| x.meet(&y))
                        .expect("non-empty tail")
                })
                .collect()
        })
        .collect()
}

fn settles(stages: &[Vec<Value>]) -> bool {
    stages.len() >= 2 && stages[stages.len() - 1] == stages[stages.len() - 2]
}

/// The limit of a Cauchy sequence of finite-dimensional valuations, on the
/// connected generators of `Λ_target`. A finite sequence is read as
/// eventually constant at its last term.
pub fn cauchy_limit(seq: &[ArcValuation], c: Q, target: u32) -> Result<CauchyLimit> {
    let first = seq.first().ok_or_else(|| Error::Invariant("empty sequence".into()))?;
    if !matches!(first.codomain, Codomain::FinDim { .. }) {
        return Err(Error::DimensionMismatch("limits are computed for finite-dimensional codomains only".into()));
    }
    if c <= Q::from_integer(0) {
        return Err(Error::Parse("the Cauchy constant must be positive".into()));
    }
    for a in seq {
        first.same_codomain(a)?;
        if a.unit != first.unit {
            return Err(Error::inconsistent("unit", "sequence terms disagree on the unit"));
        }
    }
    let r = seq.iter().map(|a| a.resolution).min().unwrap();
    let seq: Vec<ArcValuation> = seq.iter().map(|a| a.coarsen(r)).collect::<Result<_>>()?;
    let settled_at = |t: u32| t < r && settles(&limit_stages(&seq, c, t));
    if !settled_at(target) {
        let settled = (0..target.min(r)).rev().find(|&t| settled_at(t));
        return Err(Error::NotSettled {
            requested: target,
            settled,
        });
    }
    let stages = limit_stages(&seq, c, target);
    let last = stages.last().unwrap();
    let tc = cells(target);
    let limit = ArcValuation::from_fn(target, first.codomain.clone(), |s| match s {
        Span::Full => first.unit.clone(),
        Span::Arc { start, len } => last[start * tc + len - 1].clone(),
    })?;
    let tail = seq
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let index = i as u32 + 1;
            let distance = dd_cu(&limit, a)?;
            let bound = Q::from_integer(2) * c * rational::dyadic(index);
            let within = distance.value <= Dist::Finite(bound);
            Ok(TailDistance {
                index,
                distance,
                bound,
                within,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CauchyLimit { limit, tail })
}
