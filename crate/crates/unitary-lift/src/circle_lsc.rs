//! The circle of circumference 1 at dyadic resolution, lower-semicontinuous
//! step functions on it, and the finite test lattices of `{0,1}`-valued ones.
//!
//! Cell conventions at resolution `n` (with `N = 2^n`):
//! arc `i` is the open interval `(i/N, (i+1)/N)`, point `i` is the breakpoint
//! `(i+1)/N` (mod 1), so point `i` sits between arc `i` and arc `i+1`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{self, frac, Q};

/// An element of `ℕ ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NatInf {
    Fin(u64),
    Inf,
}

impl NatInf {
    pub const ZERO: NatInf = NatInf::Fin(0);

    pub fn is_finite(&self) -> bool {
        matches!(self, NatInf::Fin(_))
    }

    pub fn finite(&self) -> Option<u64> {
        match self {
            NatInf::Fin(v) => Some(*v),
            NatInf::Inf => None,
        }
    }

    /// Truncated subtraction; `None` when the result would be negative or
    /// undefined (`∞ - ∞`).
    pub fn checked_sub(&self, other: NatInf) -> Option<NatInf> {
        match (self, other) {
            (NatInf::Fin(a), NatInf::Fin(b)) => a.checked_sub(b).map(NatInf::Fin),
            (NatInf::Inf, NatInf::Fin(_)) => Some(NatInf::Inf),
            _ => None,
        }
    }
}

impl Ord for NatInf {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (NatInf::Fin(a), NatInf::Fin(b)) => a.cmp(b),
            (NatInf::Fin(_), NatInf::Inf) => Ordering::Less,
            (NatInf::Inf, NatInf::Fin(_)) => Ordering::Greater,
            (NatInf::Inf, NatInf::Inf) => Ordering::Equal,
        }
    }
}

impl PartialOrd for NatInf {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for NatInf {
    type Output = NatInf;
    fn add(self, rhs: NatInf) -> NatInf {
        match (self, rhs) {
            (NatInf::Fin(a), NatInf::Fin(b)) => NatInf::Fin(a + b),
            _ => NatInf::Inf,
        }
    }
}

impl From<u64> for NatInf {
    fn from(v: u64) -> Self {
        NatInf::Fin(v)
    }
}

impl fmt::Display for NatInf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NatInf::Fin(v) => write!(f, "{v}"),
            NatInf::Inf => write!(f, "inf"),
        }
    }
}

impl Serialize for NatInf {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NatInf::Fin(v) => s.serialize_u64(*v),
            NatInf::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NatInf {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(NatInf::Fin(v)),
            Raw::Text(t) if t == "inf" => Ok(NatInf::Inf),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a natural number or \"inf\", got {t:?}"
            ))),
        }
    }
}

/// A point of the circle, stored as a reduced rational in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Angle(Q);

impl Angle {
    pub fn new(x: Q) -> Angle {
        Angle(frac(x))
    }

    pub fn value(&self) -> Q {
        self.0
    }

    /// Arc-length distance on the circle of circumference 1.
    pub fn dist(&self, other: &Angle) -> Q {
        let d = rational::abs(self.0 - other.0);
        let e = Q::from_integer(1) - d;
        d.min(e)
    }

    /// Signed displacement of the shortest path from `self` to `other`,
    /// in `(-1/2, 1/2]`; antipodal pairs go counterclockwise.
    pub fn shortest_delta(&self, other: &Angle) -> Q {
        let half = rational::q(1, 2);
        let d = frac(other.0 - self.0);
        if d > half {
            d - Q::from_integer(1)
        } else {
            d
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&rational::format_q(&self.0))
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        rational::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = rational::deserialize(d)?;
        if raw < Q::from_integer(0) || raw >= Q::from_integer(1) {
            return Err(serde::de::Error::custom(format!(
                "angle {} outside [0,1)",
                rational::format_q(&raw)
            )));
        }
        Ok(Angle(raw))
    }
}

pub fn cells(n: u32) -> usize {
    1usize << n
}

/// The equidistant partition of the circle into `2^n` open arcs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicPartition {
    pub resolution: u32,
}

impl DyadicPartition {
    pub fn new(resolution: u32) -> Self {
        DyadicPartition { resolution }
    }

    pub fn len(&self) -> usize {
        cells(self.resolution)
    }

    /// Breakpoint `x_k = k / 2^n` (`k` taken mod `2^n`).
    pub fn breakpoint(&self, k: usize) -> Angle {
        Angle::new(Q::new(k as i64, self.len() as i64))
    }

    /// Center of the arc `U_k = (x_{k-1}, x_k)` for `k = 1..=2^n`.
    pub fn center(&self, k: usize) -> Angle {
        Angle::new(Q::new(2 * k as i64 - 1, 2 * self.len() as i64))
    }

    /// Locate an angle: `Ok(i)` for arc index `i`, `Err(j)` for point index `j`.
    pub fn locate(&self, a: &Angle) -> std::result::Result<usize, usize> {
        let n = self.len() as i64;
        let t = a.value() * Q::from_integer(n);
        if t.is_integer() {
            let k = t.to_integer();
            Err(((k - 1).rem_euclid(n)) as usize)
        } else {
            Ok(t.floor().to_integer() as usize)
        }
    }
}

/// A connected open subset of the circle built from cells at some resolution:
/// either the whole circle or the open arc covering `len` consecutive cells
/// starting at arc `start` (with the breakpoints between them).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Span {
    Full,
    Arc { start: usize, len: usize },
}

impl Span {
    /// Re-express a span at a finer resolution (`shift = n_fine - n_coarse`).
    pub fn refine(&self, shift: u32) -> Span {
        match *self {
            Span::Full => Span::Full,
            Span::Arc { start, len } => Span::Arc {
                start: start << shift,
                len: len << shift,
            },
        }
    }

    /// Remove `c` cells from each end (the `c/N`-interior of the arc).
    pub fn shrink(&self, c: usize, n_cells: usize) -> Option<Span> {
        match *self {
            Span::Full => Some(Span::Full),
            Span::Arc { start, len } => {
                if len <= 2 * c {
                    None
                } else {
                    Some(Span::Arc {
                        start: (start + c) % n_cells,
                        len: len - 2 * c,
                    })
                }
            }
        }
    }

    /// Left endpoint and length as angles (`None` for the full circle).
    pub fn geometry(&self, n_cells: usize) -> Option<(Angle, Q)> {
        match *self {
            Span::Full => None,
            Span::Arc { start, len } => Some((
                Angle::new(Q::new(start as i64, n_cells as i64)),
                Q::new(len as i64, n_cells as i64),
            )),
        }
    }

    /// Whether the (open) span contains the angle.
    pub fn contains(&self, a: &Angle, n_cells: usize) -> bool {
        match self.geometry(n_cells) {
            None => true,
            Some((s, l)) => {
                let off = frac(a.value() - s.value());
                off > Q::from_integer(0) && off < l
            }
        }
    }

    pub fn indicator(&self, n: u32) -> StepLsc {
        let nc = cells(n);
        match *self {
            Span::Full => StepLsc::constant(n, NatInf::Fin(1)),
            Span::Arc { start, len } => {
                let mut f = StepLsc::constant(n, NatInf::ZERO);
                for t in 0..len {
                    f.arc_values[(start + t) % nc] = NatInf::Fin(1);
                }
                for t in 0..len.saturating_sub(1) {
                    f.point_values[(start + t) % nc] = NatInf::Fin(1);
                }
                f
            }
        }
    }

    /// Every connected span at resolution `n`: `N^2` arcs plus the circle.
    pub fn all(n: u32) -> Vec<Span> {
        let nc = cells(n);
        let mut out = Vec::with_capacity(nc * nc + 1);
        for start in 0..nc {
            for len in 1..=nc {
                out.push(Span::Arc { start, len });
            }
        }
        out.push(Span::Full);
        out
    }
}

/// A lower-semicontinuous `ℕ̄`-valued step function on the circle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepLsc {
    pub resolution: u32,
    pub arc_values: Vec<NatInf>,
    pub point_values: Vec<NatInf>,
}

impl StepLsc {
    pub fn new(resolution: u32, arc_values: Vec<NatInf>, point_values: Vec<NatInf>) -> Result<Self> {
        let f = StepLsc {
            resolution,
            arc_values,
            point_values,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn constant(resolution: u32, v: NatInf) -> Self {
        let nc = cells(resolution);
        StepLsc {
            resolution,
            arc_values: vec![v; nc],
            point_values: vec![v; nc],
        }
    }

    pub fn zero(resolution: u32) -> Self {
        Self::constant(resolution, NatInf::ZERO)
    }

    pub fn cells(&self) -> usize {
        cells(self.resolution)
    }

    pub fn validate(&self) -> Result<()> {
        let nc = self.cells();
        if self.arc_values.len() != nc || self.point_values.len() != nc {
            return Err(Error::DimensionMismatch(format!(
                "resolution {} needs {} arc and point values, got {} and {}",
                self.resolution,
                nc,
                self.arc_values.len(),
                self.point_values.len()
            )));
        }
        for j in 0..nc {
            let cap = self.arc_values[j].min(self.arc_values[(j + 1) % nc]);
            if self.point_values[j] > cap {
                return Err(Error::NotLsc(format!("breakpoint index {j}")));
            }
        }
        Ok(())
    }

    /// The same function at resolution `m >= self.resolution`.
    pub fn refine_to(&self, m: u32) -> Result<StepLsc> {
        if m < self.resolution {
            return Err(Error::ResolutionMismatch {
                expected: self.resolution,
                got: m,
            });
        }
        let mut f = self.clone();
        while f.resolution < m {
            let nc = f.cells();
            let mut arcs = Vec::with_capacity(2 * nc);
            let mut points = Vec::with_capacity(2 * nc);
            for i in 0..nc {
                arcs.push(f.arc_values[i]);
                arcs.push(f.arc_values[i]);
                points.push(f.arc_values[i]);
                points.push(f.point_values[i]);
            }
            f = StepLsc {
                resolution: f.resolution + 1,
                arc_values: arcs,
                point_values: points,
            };
        }
        Ok(f)
    }

    pub fn value_at(&self, a: &Angle) -> NatInf {
        match DyadicPartition::new(self.resolution).locate(a) {
            Ok(i) => self.arc_values[i],
            Err(j) => self.point_values[j],
        }
    }

    pub fn max_value(&self) -> NatInf {
        self.arc_values.iter().copied().max().unwrap_or(NatInf::ZERO)
    }

    pub fn is_finite(&self) -> bool {
        self.arc_values.iter().all(NatInf::is_finite)
    }

    /// Pointwise comparison after refining both to a common resolution.
    pub fn le(&self, other: &StepLsc) -> bool {
        let (f, g) = common(self, other);
        f.arc_values.iter().zip(&g.arc_values).all(|(a, b)| a <= b)
            && f.point_values.iter().zip(&g.point_values).all(|(a, b)| a <= b)
    }

    pub fn pointwise_add(&self, other: &StepLsc) -> StepLsc {
        let (f, g) = common(self, other);
        StepLsc {
            resolution: f.resolution,
            arc_values: f.arc_values.iter().zip(&g.arc_values).map(|(a, b)| *a + *b).collect(),
            point_values: f
                .point_values
                .iter()
                .zip(&g.point_values)
                .map(|(a, b)| *a + *b)
                .collect(),
        }
    }

    /// Same function, compared cellwise at the finer of the two resolutions.
    pub fn same_function(&self, other: &StepLsc) -> bool {
        let (f, g) = common(self, other);
        f == g
    }

    pub fn is_indicator(&self) -> bool {
        self.arc_values
            .iter()
            .chain(&self.point_values)
            .all(|v| *v == NatInf::ZERO || *v == NatInf::Fin(1))
    }

    /// Connected components of the support of a `{0,1}`-valued function.
    pub fn support_components(&self) -> Vec<Span> {
        let nc = self.cells();
        let on = |c: usize| -> bool {
            // cell 2i is arc i, cell 2i+1 is point i
            let v = if c % 2 == 0 {
                self.arc_values[c / 2]
            } else {
                self.point_values[c / 2]
            };
            v > NatInf::ZERO
        };
        let total = 2 * nc;
        let first_off = (0..total).find(|&c| !on(c));
        let Some(first_off) = first_off else {
            return vec![Span::Full];
        };
        let mut out = Vec::new();
        let mut c = (first_off + 1) % total;
        let mut visited = 0;
        while visited < total {
            if on(c) {
                let start_cell = c;
                let mut len_cells = 0;
                while on(c) && visited < total {
                    len_cells += 1;
                    visited += 1;
                    c = (c + 1) % total;
                }
                // runs start and end on arcs: (len_cells + 1) / 2 arcs
                out.push(Span::Arc {
                    start: start_cell / 2,
                    len: (len_cells + 1) / 2,
                });
            } else {
                visited += 1;
                c = (c + 1) % total;
            }
        }
        out.sort();
        out
    }
}

fn common(f: &StepLsc, g: &StepLsc) -> (StepLsc, StepLsc) {
    let m = f.resolution.max(g.resolution);
    (
        f.refine_to(m).expect("refining upward"),
        g.refine_to(m).expect("refining upward"),
    )
}

/// `f ≪ g`: `f` finite and, for every level `l`, the closure of `{f ≥ l}`
/// lies inside `{g ≥ l}`.
pub fn way_below(f: &StepLsc, g: &StepLsc) -> bool {
    let (f, g) = common(f, g);
    if !f.is_finite() {
        return false;
    }
    let nc = f.cells();
    (0..nc).all(|i| g.arc_values[i] >= f.arc_values[i])
        && (0..nc).all(|j| {
            let need = f.arc_values[j].max(f.arc_values[(j + 1) % nc]);
            g.point_values[j] >= need
        })
}

/// Levelwise open `r`-thickening (`r = m/2^p`); output resolution `max(n, p)`.
pub fn thicken(f: &StepLsc, r: Q) -> Result<StepLsc> {
    let (m, p) = rational::as_dyadic(&r).ok_or_else(|| Error::NotDyadic(rational::format_q(&r)))?;
    if m == 0 {
        return Ok(f.clone());
    }
    let res = f.resolution.max(p);
    let f = f.refine_to(res)?;
    let steps = rational::grid_multiple(&r, res).expect("dyadic radius on its own grid") as usize;
    let nc = f.cells();
    let idx = |i: isize| -> usize { i.rem_euclid(nc as isize) as usize };
    let window_max = |lo: isize, hi: isize| -> NatInf {
        if (hi - lo + 1) as usize >= nc {
            return f.max_value();
        }
        (lo..=hi).map(|i| f.arc_values[idx(i)]).max().unwrap_or(NatInf::ZERO)
    };
    let s = steps as isize;
    let arc_values = (0..nc as isize).map(|i| window_max(i - s, i + s)).collect();
    let point_values = (0..nc as isize).map(|j| window_max(j - s + 1, j + s)).collect();
    Ok(StepLsc {
        resolution: res,
        arc_values,
        point_values,
    })
}

/// `(1_{W_1}, ..., 1_{W_M})` with `W_l = {f ≥ l}`.
pub fn chain_decomposition(f: &StepLsc) -> Result<Vec<StepLsc>> {
    let top = f.max_value().finite().ok_or(Error::Unbounded)?;
    Ok((1..=top)
        .map(|l| {
            let ind = |v: &NatInf| {
                if *v >= NatInf::Fin(l) {
                    NatInf::Fin(1)
                } else {
                    NatInf::ZERO
                }
            };
            StepLsc {
                resolution: f.resolution,
                arc_values: f.arc_values.iter().map(ind).collect(),
                point_values: f.point_values.iter().map(ind).collect(),
            }
        })
        .collect())
}

/// A `{0,1}`-valued element of the test lattice at its resolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LambdaElement(StepLsc);

impl LambdaElement {
    pub fn new(f: StepLsc) -> Result<Self> {
        f.validate()?;
        if !f.is_indicator() {
            return Err(Error::NotLambda("values must lie in {0,1}".into()));
        }
        Ok(LambdaElement(f))
    }

    pub fn from_spans(n: u32, spans: &[Span]) -> Self {
        let mut f = StepLsc::zero(n);
        for s in spans {
            let g = s.indicator(n);
            for i in 0..f.cells() {
                f.arc_values[i] = f.arc_values[i].max(g.arc_values[i]);
                f.point_values[i] = f.point_values[i].max(g.point_values[i]);
            }
        }
        LambdaElement(f)
    }

    pub fn function(&self) -> &StepLsc {
        &self.0
    }

    pub fn resolution(&self) -> u32 {
        self.0.resolution
    }

    pub fn components(&self) -> Vec<Span> {
        if self.0.arc_values.iter().all(|v| *v == NatInf::ZERO) {
            return Vec::new();
        }
        self.0.support_components()
    }

    /// The least `h` in the same lattice with `self ≪ h`.
    pub fn way_above_hull(&self) -> LambdaElement {
        let f = thicken(&self.0, Q::new(1, 1i64 << self.0.resolution)).expect("grid radius");
        LambdaElement(f)
    }
}

/// Every element of `Λ_n` together with its support components.
pub fn lambda_generators(n: u32) -> Vec<(LambdaElement, Vec<Span>)> {
    let nc = cells(n);
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << nc) {
        let arcs: Vec<bool> = (0..nc).map(|i| mask >> i & 1 == 1).collect();
        let free: Vec<usize> = (0..nc).filter(|&j| arcs[j] && arcs[(j + 1) % nc]).collect();
        for pm in 0u64..(1u64 << free.len()) {
            let mut f = StepLsc::zero(n);
            for i in 0..nc {
                if arcs[i] {
                    f.arc_values[i] = NatInf::Fin(1);
                }
            }
            for (b, &j) in free.iter().enumerate() {
                if pm >> b & 1 == 1 {
                    f.point_values[j] = NatInf::Fin(1);
                }
            }
            let g = LambdaElement(f);
            let comps = g.components();
            out.push((g, comps));
        }
    }
    out
}
