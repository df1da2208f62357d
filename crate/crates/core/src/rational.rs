//! Exact rational helpers. Every number that crosses a public interface is a
//! `BigRational` rendered as `p/q` (or `p` when the denominator is one).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Parses `p/q`, `p`, or a signed variant of either.
pub fn parse(s: &str) -> Result<Q> {
    let t = s.trim();
    let bad = || Error::BadRational(s.to_string());
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: BigInt = num.parse().map_err(|_| bad())?;
    let d: BigInt = den.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Q::new(n, d))
}

pub fn fmt(v: &Q) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// `base^k` for a non-negative exponent.
pub fn pow(base: &Q, k: u32) -> Q {
    num_traits::pow(base.clone(), k as usize)
}

/// Exponent `k` with `base^k == v`, if any. Requires `0 < base < 1`.
pub fn log_exact(base: &Q, v: &Q) -> Option<u32> {
    if !v.is_positive() {
        return None;
    }
    let mut acc = Q::one();
    for k in 0..=4096u32 {
        if &acc == v {
            return Some(k);
        }
        if &acc < v {
            return None;
        }
        acc *= base;
    }
    None
}

pub fn check_b(b: &Q) -> Result<()> {
    if b.is_positive() && b < &q(1, 4) {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(fmt(b)))
    }
}

pub mod serde_q {
    //! Serializes a rational as its `p/q` string.
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}
