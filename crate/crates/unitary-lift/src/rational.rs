//! Exact rationals and their `"p/q"` text form.

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serializer};

use crate::error::Error;

pub type Q = Ratio<i64>;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(n)
}

/// `1 / 2^n`.
pub fn dyadic(n: u32) -> Q {
    Q::new(1, 1i64 << n)
}

/// Reduce into `[0, 1)`.
pub fn frac(x: Q) -> Q {
    x - x.floor()
}

pub fn format_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse_q(s: &str) -> Result<Q, Error> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Q::new(n, d))
        }
        None => s.parse::<i64>().map(Q::from_integer).map_err(|_| bad()),
    }
}

/// If `x = m / 2^p` with `m, p ≥ 0`, return `(m, p)` with `p` minimal.
pub fn as_dyadic(x: &Q) -> Option<(i64, u32)> {
    if x.is_negative() {
        return None;
    }
    let d = *x.denom();
    if d.count_ones() != 1 {
        return None;
    }
    Some((*x.numer(), d.trailing_zeros()))
}

/// Express `x` as an integer multiple of `1/2^n`, if it is one.
pub fn grid_multiple(x: &Q, n: u32) -> Option<i64> {
    let scaled = x * Q::from_integer(1i64 << n);
    scaled.is_integer().then(|| scaled.to_integer())
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn abs(x: Q) -> Q {
    if x.is_negative() {
        -x
    } else {
        x
    }
}

pub fn is_zero(x: &Q) -> bool {
    x.is_zero()
}

pub fn one() -> Q {
    Q::one()
}

pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_q(x))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Int(n) => Ok(Q::from_integer(n)),
        Raw::Text(t) => parse_q(&t).map_err(de::Error::custom),
    }
}

pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&format_q(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter()
            .map(|t| parse_q(t).map_err(de::Error::custom))
            .collect()
    }
}
