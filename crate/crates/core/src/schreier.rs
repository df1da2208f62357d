//! Hereditary families of finite subsets of ℕ and a symbolic Cantor–Bendixson
//! derivative for the product spaces `R * G`.
//!
//! Values of `R = {b^k} ∪ {0, 1}` accumulate only at `0`, so a point `f` of
//! `R * G` is a limit of other points exactly when its support can absorb one
//! more coordinate carrying a vanishing value. The derivative therefore keeps
//! the supports whose extension spectrum is infinite and drops the rest.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normingset::Functional;
use crate::rational::{self, Q};

/// A finite subset of ℕ stored as a strictly increasing list of positive integers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct FiniteSet(Vec<u64>);

impl FiniteSet {
    pub fn empty() -> Self {
        FiniteSet(Vec::new())
    }

    pub fn new(elements: Vec<u64>) -> Result<Self> {
        if elements.contains(&0) {
            return Err(Error::InvalidInput("set elements must be positive".into()));
        }
        if elements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("set elements must be strictly increasing".into()));
        }
        Ok(FiniteSet(elements))
    }

    /// Sorts and deduplicates; still rejects zero.
    pub fn from_unsorted<I: IntoIterator<Item = u64>>(it: I) -> Result<Self> {
        let mut v: Vec<u64> = it.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self::new(v)
    }

    pub fn elements(&self) -> &[u64] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn least(&self) -> Option<u64> {
        self.0.first().copied()
    }
    pub fn greatest(&self) -> Option<u64> {
        self.0.last().copied()
    }
    pub fn contains(&self, x: u64) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn with(&self, x: u64) -> FiniteSet {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&x) {
            v.insert(pos, x);
        }
        FiniteSet(v)
    }
}

impl TryFrom<Vec<u64>> for FiniteSet {
    type Error = Error;
    fn try_from(v: Vec<u64>) -> Result<Self> {
        FiniteSet::new(v)
    }
}

impl From<FiniteSet> for Vec<u64> {
    fn from(s: FiniteSet) -> Vec<u64> {
        s.0
    }
}

impl fmt::Display for FiniteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "{{")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// Membership test for the family `{F : |F| <= min F + 2} ∪ {∅}`.
pub fn in_schreier_plus_two(support: &[u64]) -> bool {
    match support.first() {
        None => true,
        Some(&m) => (support.len() as u64) <= m + 2,
    }
}

/// `true` when `support` is a maximal member of `{F : |F| <= min F + 2}`.
pub fn maximal_in_schreier_plus_two(support: &[u64]) -> bool {
    match support.first() {
        None => false,
        Some(&m) => support.len() as u64 == m + 2,
    }
}

/// Symbolic descriptor of a hereditary, pointwise compact family.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HereditaryFamily {
    /// `A_n = {F : |F| <= n}`; `A_0 = {∅}`.
    SizeBounded(u32),
    /// `{F : |F| <= min F + offset} ∪ {∅}`; offset 2 is the norming family.
    Schreier(i64),
    /// Members of the base family whose elements are all `<= horizon`.
    Restricted(Box<HereditaryFamily>, u64),
    /// No members at all; the derivative of `{∅}`.
    Empty,
}

/// Extension spectrum `{m > max F : F ∪ {m} ∈ family}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Spectrum {
    Finite(Vec<u64>),
    /// Every `m > beyond` extends the set, and nothing at or below it does.
    Cofinal { beyond: u64 },
}

impl Spectrum {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Spectrum::Cofinal { .. })
    }
}

impl HereditaryFamily {
    pub fn schreier_plus_two() -> Self {
        HereditaryFamily::Schreier(2)
    }

    pub fn restrict(self, horizon: u64) -> Self {
        HereditaryFamily::Restricted(Box::new(self), horizon)
    }

    pub fn member(&self, f: &FiniteSet) -> bool {
        match self {
            HereditaryFamily::SizeBounded(n) => f.len() as u64 <= *n as u64,
            HereditaryFamily::Schreier(c) => match f.least() {
                None => true,
                Some(m) => (f.len() as i64) <= m as i64 + c,
            },
            HereditaryFamily::Restricted(base, horizon) => {
                f.greatest().is_none_or(|m| m <= *horizon) && base.member(f)
            }
            HereditaryFamily::Empty => false,
        }
    }

    fn require_member(&self, f: &FiniteSet) -> Result<()> {
        if self.member(f) {
            Ok(())
        } else {
            Err(Error::NotAMember(f.to_string(), self.to_string()))
        }
    }

    /// `true` iff no proper superset of `f` belongs to the family.
    pub fn is_maximal(&self, f: &FiniteSet) -> Result<bool> {
        self.require_member(f)?;
        Ok(match self {
            HereditaryFamily::SizeBounded(n) => f.len() as u64 == *n as u64,
            HereditaryFamily::Schreier(c) => match f.least() {
                // some singleton {m} with 1 <= m + c always exists
                None => false,
                Some(m) => (f.len() as i64) >= m as i64 + c,
            },
            HereditaryFamily::Restricted(_, horizon) => {
                // hereditary: a proper superset exists iff a one-point extension does
                !(1..=*horizon).any(|p| !f.contains(p) && self.member(&f.with(p)))
            }
            HereditaryFamily::Empty => unreachable!("empty family has no members"),
        })
    }

    /// Classifies the right-extensions of `f`. Restricted families report
    /// the spectrum of their base, so that "cofinal" keeps its asymptotic
    /// meaning under a finite horizon.
    pub fn extension_spectrum(&self, f: &FiniteSet) -> Result<Spectrum> {
        self.require_member(f)?;
        Ok(self.spectrum_unchecked(f))
    }

    fn spectrum_unchecked(&self, f: &FiniteSet) -> Spectrum {
        let top = f.greatest().unwrap_or(0);
        match self {
            HereditaryFamily::SizeBounded(n) => {
                if (f.len() as u64) < *n as u64 {
                    Spectrum::Cofinal { beyond: top }
                } else {
                    Spectrum::Finite(Vec::new())
                }
            }
            HereditaryFamily::Schreier(c) => match f.least() {
                None => Spectrum::Cofinal { beyond: (-c).max(0) as u64 },
                Some(m) => {
                    if (f.len() as i64) < m as i64 + c {
                        Spectrum::Cofinal { beyond: top }
                    } else {
                        Spectrum::Finite(Vec::new())
                    }
                }
            },
            HereditaryFamily::Restricted(base, _) => base.spectrum_unchecked(f),
            HereditaryFamily::Empty => Spectrum::Finite(Vec::new()),
        }
    }

    /// Support family of the first Cantor–Bendixson derivative of `R * G`:
    /// the members whose extension spectrum is infinite.
    pub fn derivative(&self) -> HereditaryFamily {
        match self {
            HereditaryFamily::SizeBounded(0) => HereditaryFamily::Empty,
            HereditaryFamily::SizeBounded(n) => HereditaryFamily::SizeBounded(n - 1),
            HereditaryFamily::Schreier(c) => HereditaryFamily::Schreier(c - 1),
            HereditaryFamily::Restricted(base, h) => {
                HereditaryFamily::Restricted(Box::new(base.derivative()), *h)
            }
            HereditaryFamily::Empty => HereditaryFamily::Empty,
        }
    }

    pub fn iterated_derivative(&self, k: u32) -> HereditaryFamily {
        (0..k).fold(self.clone(), |fam, _| fam.derivative())
    }

    /// `true` when the only member is `∅`, i.e. `R * G` is the zero point.
    pub fn is_zero_point_only(&self) -> bool {
        match self {
            HereditaryFamily::SizeBounded(0) => true,
            HereditaryFamily::Restricted(base, _) => base.is_zero_point_only(),
            _ => false,
        }
    }

    /// All members with elements in `1..=horizon`, in (size, lexicographic) order.
    pub fn members_within(&self, horizon: u64) -> Vec<FiniteSet> {
        let mut out = Vec::new();
        let mut stack = vec![FiniteSet::empty()];
        // hereditary: grow members one element at a time, ascending
        while let Some(f) = stack.pop() {
            if !self.member(&f) {
                continue;
            }
            let start = f.greatest().unwrap_or(0) + 1;
            for p in start..=horizon {
                stack.push(f.with(p));
            }
            out.push(f);
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out
    }

    /// Human-readable summary used by the CLI.
    pub fn describe(&self) -> String {
        match self {
            HereditaryFamily::Empty => "empty (no points)".to_string(),
            f if f.is_zero_point_only() => "{∅} (zero point only)".to_string(),
            f => f.to_string(),
        }
    }
}

impl fmt::Display for HereditaryFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HereditaryFamily::SizeBounded(n) => write!(f, "An:{n}"),
            HereditaryFamily::Schreier(c) if *c >= 0 => write!(f, "schreier+{c}"),
            HereditaryFamily::Schreier(c) => write!(f, "schreier{c}"),
            HereditaryFamily::Restricted(base, h) => write!(f, "restrict({base},{h})"),
            HereditaryFamily::Empty => write!(f, "empty"),
        }
    }
}

impl FromStr for HereditaryFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("unknown family descriptor `{s}`"));
        if s == "empty" {
            return Ok(HereditaryFamily::Empty);
        }
        if let Some(n) = s.strip_prefix("An:") {
            return n.parse().map(HereditaryFamily::SizeBounded).map_err(|_| bad());
        }
        if let Some(c) = s.strip_prefix("schreier") {
            let c = c.strip_prefix('+').unwrap_or(c);
            return c.parse().map(HereditaryFamily::Schreier).map_err(|_| bad());
        }
        if let Some(inner) = s.strip_prefix("restrict(").and_then(|r| r.strip_suffix(')')) {
            let (base, h) = inner.rsplit_once(',').ok_or_else(bad)?;
            let h: u64 = h.trim().parse().map_err(|_| bad())?;
            return Ok(base.parse::<HereditaryFamily>()?.restrict(h));
        }
        Err(bad())
    }
}

/// A finitely supported function `ℕ → R`; values are stored as exponents of
/// `b` (exponent 0 is the value 1). The zero point has empty support.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ProductPoint {
    values: BTreeMap<u64, u32>,
}

impl ProductPoint {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_exponents<I: IntoIterator<Item = (u64, u32)>>(it: I) -> Self {
        ProductPoint { values: it.into_iter().collect() }
    }

    /// Builds a point from rational values, rejecting anything outside `R`.
    pub fn from_rationals<'a, I>(values: I, b: &Q) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, &'a Q)>,
    {
        let mut out = BTreeMap::new();
        for (c, v) in values {
            if num_traits::Zero::is_zero(v) {
                continue;
            }
            let k = rational::log_exact(b, v)
                .ok_or_else(|| Error::CoefficientOutsideRange(rational::fmt(v)))?;
            out.insert(c, k);
        }
        Ok(ProductPoint { values: out })
    }

    pub fn support(&self) -> FiniteSet {
        FiniteSet(self.values.keys().copied().collect())
    }

    pub fn exponents(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.values.iter().map(|(&c, &k)| (c, k))
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Sorted `[coordinate, exponent]` pairs.
    pub fn to_pairs(&self) -> Vec<[u64; 2]> {
        self.values.iter().map(|(&c, &k)| [c, k as u64]).collect()
    }
}

/// `φ d* = Σ_{n ∈ supp d*} d*(n) χ_{n}`.
pub fn phi_embed(d: &Functional) -> ProductPoint {
    ProductPoint::from_exponents(d.coords().iter().map(|&(c, k)| (c, k)))
}
