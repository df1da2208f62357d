//! Inductive construction of the intervals `Δ_n` and norming sets `D_n`.
//!
//! Functionals are stored with coefficient exponents: a coordinate carrying
//! exponent `k` has value `b^k`, exponent 0 is the value 1, and absent
//! coordinates are zero. Each `D_n` is listed as its composites in σ-order
//! followed by the unit functionals in coordinate order; `FunctionalId`
//! indexes into that list.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Q};
use crate::schreier::{in_schreier_plus_two, maximal_in_schreier_plus_two};

/// Position of a functional: level `n >= 1` and index within `D_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct FunctionalId {
    pub level: usize,
    pub index: usize,
}

impl FunctionalId {
    pub fn new(level: usize, index: usize) -> Self {
        FunctionalId { level, index }
    }
}

impl From<[usize; 2]> for FunctionalId {
    fn from(a: [usize; 2]) -> Self {
        FunctionalId::new(a[0], a[1])
    }
}

impl From<FunctionalId> for [usize; 2] {
    fn from(id: FunctionalId) -> Self {
        [id.level, id.index]
    }
}

impl fmt::Display for FunctionalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D{}[{}]", self.level, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Unit(u64),
    /// `ξ + b·(η | Δ_{k+1} ∪ … ∪ Δ_l) + e_top`.
    Composite { xi: FunctionalId, eta: FunctionalId, k: usize, l: usize, top: u64 },
}

/// A sparse functional with coefficients in `{b^k} ∪ {0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Functional {
    coords: Vec<(u64, u32)>,
    level: usize,
    provenance: Provenance,
}

impl Functional {
    pub fn unit(coord: u64, level: usize) -> Self {
        Functional { coords: vec![(coord, 0)], level, provenance: Provenance::Unit(coord) }
    }

    /// Sorted `(coordinate, exponent)` pairs.
    pub fn coords(&self) -> &[(u64, u32)] {
        &self.coords
    }
    pub fn level(&self) -> usize {
        self.level
    }
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
    pub fn is_composite(&self) -> bool {
        matches!(self.provenance, Provenance::Composite { .. })
    }
    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.coords.iter().map(|&(c, _)| c)
    }
    pub fn support_len(&self) -> usize {
        self.coords.len()
    }
    pub fn min_support(&self) -> Option<u64> {
        self.coords.first().map(|&(c, _)| c)
    }
    pub fn max_support(&self) -> Option<u64> {
        self.coords.last().map(|&(c, _)| c)
    }
    pub fn exponent_at(&self, coord: u64) -> Option<u32> {
        self.coords.binary_search_by_key(&coord, |&(c, _)| c).ok().map(|i| self.coords[i].1)
    }
    /// Number of support points strictly above `bound`.
    pub fn count_above(&self, bound: u64) -> usize {
        self.coords.len() - self.coords.partition_point(|&(c, _)| c <= bound)
    }
    pub fn value_at(&self, coord: u64, b: &Q) -> Q {
        match self.exponent_at(coord) {
            Some(k) => rational::pow(b, k),
            None => num_traits::Zero::zero(),
        }
    }
}

/// One level of the construction: `Δ_n = [lo, hi]` and `D_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelData {
    pub lo: u64,
    pub hi: u64,
    composites: Vec<Functional>,
    units: Vec<Functional>,
}

impl LevelData {
    fn new(level: usize, lo: u64, hi: u64, composites: Vec<Functional>) -> Self {
        let units = (lo..=hi).map(|c| Functional::unit(c, level)).collect();
        LevelData { lo, hi, composites, units }
    }
    pub fn width(&self) -> u64 {
        self.hi - self.lo + 1
    }
    pub fn composites(&self) -> &[Functional] {
        &self.composites
    }
    pub fn units(&self) -> &[Functional] {
        &self.units
    }
    pub fn len(&self) -> usize {
        self.composites.len() + self.units.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn get(&self, index: usize) -> Option<&Functional> {
        if index < self.composites.len() {
            self.composites.get(index)
        } else {
            self.units.get(index - self.composites.len())
        }
    }
    pub fn iter(&self) -> impl Iterator<Item = &Functional> {
        self.composites.iter().chain(self.units.iter())
    }
    pub fn contains(&self, coord: u64) -> bool {
        self.lo <= coord && coord <= self.hi
    }
}

/// A registered linked pair and the top coordinate `σ_n` assigned to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairAssignment {
    pub xi: FunctionalId,
    pub eta: FunctionalId,
    pub top: u64,
}

/// The pairs `Σ_n` with their assigned tops in `Δ_{n+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaLevel {
    pub n: usize,
    pub pairs: Vec<PairAssignment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstructionState {
    b: Q,
    levels: Vec<LevelData>,
    sigma: Vec<SigmaLevel>,
}

impl ConstructionState {
    /// Levels 1 and 2: `Δ_k = {k}`, `D_k = {e_k*}`.
    pub fn new(b: Q) -> Result<Self> {
        rational::check_b(&b)?;
        let levels = vec![LevelData::new(1, 1, 1, Vec::new()), LevelData::new(2, 2, 2, Vec::new())];
        Ok(ConstructionState { b, levels, sigma: Vec::new() })
    }

    /// Builds up to `levels` levels, stopping early (without error) when the
    /// next level would push the maximal coordinate past `max_coord`.
    pub fn build(b: Q, levels: usize, max_coord: Option<u64>) -> Result<Self> {
        let mut state = Self::new(b)?;
        while state.level_count() < levels {
            match state.extend_level(max_coord) {
                Ok(()) => {}
                Err(Error::CoordinateBudget { .. }) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(state)
    }

    pub fn b(&self) -> &Q {
        &self.b
    }
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }
    pub fn levels(&self) -> &[LevelData] {
        &self.levels
    }
    pub fn sigma(&self) -> &[SigmaLevel] {
        &self.sigma
    }
    /// `Δ_n`, 1-based.
    pub fn level(&self, n: usize) -> Result<&LevelData> {
        n.checked_sub(1)
            .and_then(|i| self.levels.get(i))
            .ok_or(Error::LevelNotBuilt { requested: n, built: self.levels.len() })
    }
    pub fn max_coord(&self) -> u64 {
        self.levels.last().map_or(0, |l| l.hi)
    }
    /// `max Δ_n`, with `max Δ_0 = 0`.
    pub fn level_end(&self, n: usize) -> u64 {
        if n == 0 {
            0
        } else {
            self.levels[n - 1].hi
        }
    }
    pub fn delta_sizes(&self) -> Vec<u64> {
        self.levels.iter().map(LevelData::width).collect()
    }

    /// Level `n` with `coord ∈ Δ_n`.
    pub fn level_of(&self, coord: u64) -> Option<usize> {
        if coord == 0 || coord > self.max_coord() {
            return None;
        }
        Some(self.levels.partition_point(|l| l.hi < coord) + 1)
    }

    pub fn functional(&self, id: FunctionalId) -> Result<&Functional> {
        self.level(id.level)
            .ok()
            .and_then(|l| l.get(id.index))
            .ok_or(Error::UnknownFunctional { level: id.level, index: id.index })
    }

    pub fn unit_id(&self, coord: u64) -> Result<FunctionalId> {
        let n = self.level_of(coord).ok_or(Error::CoordinateNotBuilt(coord))?;
        let lvl = &self.levels[n - 1];
        Ok(FunctionalId::new(n, lvl.composites.len() + (coord - lvl.lo) as usize))
    }

    /// Every built functional with its id, level by level.
    pub fn functionals(&self) -> impl Iterator<Item = (FunctionalId, &Functional)> {
        self.levels.iter().enumerate().flat_map(|(i, lvl)| {
            lvl.iter().enumerate().map(move |(j, f)| (FunctionalId::new(i + 1, j), f))
        })
    }

    pub fn functional_count(&self) -> usize {
        self.levels.iter().map(LevelData::len).sum()
    }

    /// `supp ξ ∪ supp(η | Δ_{k+1..l})` in `F` and not maximal, for `ξ ∈ D_k`,
    /// `η ∈ D_l`.
    pub fn is_linked_pair(&self, xi: FunctionalId, eta: FunctionalId) -> Result<bool> {
        let x = self.functional(xi)?;
        let e = self.functional(eta)?;
        if xi.level >= eta.level {
            return Err(Error::InvalidInput(format!(
                "linked pair needs k < l, got levels {} and {}",
                xi.level, eta.level
            )));
        }
        let bound = self.level_end(xi.level);
        let mut union: Vec<u64> = x.support().collect();
        union.extend(e.support().filter(|&c| c > bound));
        Ok(in_schreier_plus_two(&union) && !maximal_in_schreier_plus_two(&union))
    }

    /// Room left in the Schreier budget: `η` may contribute at most this many
    /// points above `Δ_k`. Negative or zero means `ξ` links with nothing.
    fn link_capacity(x: &Functional) -> i64 {
        x.min_support().map_or(0, |m| m as i64 + 1 - x.support_len() as i64)
    }

    /// `|Σ_n|` without materializing the pairs.
    pub fn count_linked_pairs(&self, n: usize) -> Result<u64> {
        if n > self.levels.len() {
            return Err(Error::LevelNotBuilt { requested: n, built: self.levels.len() });
        }
        // hist[k][l][r]: number of η ∈ D_l with exactly r support points above Δ_k
        let mut total = 0u64;
        for k in 1..=n {
            let bound = self.level_end(k);
            let mut cumulative: Vec<Vec<u64>> = Vec::new();
            for l in (k + 1)..=n {
                let mut h = vec![0u64; l + 2];
                for e in self.levels[l - 1].iter() {
                    let r = e.count_above(bound).min(l + 1);
                    h[r] += 1;
                }
                for r in 1..h.len() {
                    h[r] += h[r - 1];
                }
                cumulative.push(h);
            }
            for x in self.levels[k - 1].iter() {
                let cap = Self::link_capacity(x);
                if cap < 1 {
                    continue;
                }
                for h in &cumulative {
                    total += h[(cap as usize).min(h.len() - 1)];
                }
            }
        }
        Ok(total)
    }

    /// `Σ_n` in canonical order: lexicographic in
    /// `(k, index of ξ in D_k, l, index of η in D_l)`.
    pub fn enumerate_linked_pairs(&self, n: usize) -> Result<Vec<(FunctionalId, FunctionalId)>> {
        if n > self.levels.len() {
            return Err(Error::LevelNotBuilt { requested: n, built: self.levels.len() });
        }
        let mut xis: Vec<(FunctionalId, &Functional)> = Vec::new();
        for k in 1..=n {
            for (j, x) in self.levels[k - 1].iter().enumerate() {
                xis.push((FunctionalId::new(k, j), x));
            }
        }
        let per_xi: Vec<Vec<(FunctionalId, FunctionalId)>> = xis
            .par_iter()
            .map(|&(xid, x)| {
                let cap = Self::link_capacity(x);
                let mut out = Vec::new();
                if cap < 1 {
                    return out;
                }
                let bound = self.level_end(xid.level);
                for l in (xid.level + 1)..=n {
                    for (j, e) in self.levels[l - 1].iter().enumerate() {
                        if e.count_above(bound) as i64 <= cap {
                            out.push((xid, FunctionalId::new(l, j)));
                        }
                    }
                }
                out
            })
            .collect();
        Ok(per_xi.into_iter().flatten().collect())
    }

    /// Coordinates of `ξ + b·(η | Δ_{k+1..l}) + e_top`.
    fn compose(&self, xi: &Functional, k: usize, eta: &Functional, top: u64) -> Vec<(u64, u32)> {
        let bound = self.level_end(k);
        let mut coords = xi.coords.clone();
        coords.extend(eta.coords.iter().filter(|&&(c, _)| c > bound).map(|&(c, e)| (c, e + 1)));
        coords.push((top, 0));
        coords
    }

    /// Appends `Δ_{n+1}` (the adjacent interval with `|Σ_n|` points) and
    /// `D_{n+1}`. Fails without modifying the state if `Σ_n` is empty or the
    /// new interval would end past `max_coord`.
    pub fn extend_level(&mut self, max_coord: Option<u64>) -> Result<()> {
        let n = self.levels.len();
        let count = self.count_linked_pairs(n)?;
        if count == 0 {
            return Err(Error::NoLinkedPairs(n));
        }
        let lo = self.max_coord() + 1;
        let hi = lo + count - 1;
        if let Some(cap) = max_coord {
            if hi > cap {
                return Err(Error::CoordinateBudget { needed: hi, cap });
            }
        }
        let pairs = self.enumerate_linked_pairs(n)?;
        debug_assert_eq!(pairs.len() as u64, count);
        let composites: Vec<Functional> = pairs
            .par_iter()
            .enumerate()
            .map(|(i, &(xid, eid))| {
                let top = lo + i as u64;
                let x = &self.levels[xid.level - 1].get(xid.index).expect("registered");
                let e = &self.levels[eid.level - 1].get(eid.index).expect("registered");
                Functional {
                    coords: self.compose(x, xid.level, e, top),
                    level: n + 1,
                    provenance: Provenance::Composite {
                        xi: xid,
                        eta: eid,
                        k: xid.level,
                        l: eid.level,
                        top,
                    },
                }
            })
            .collect();
        let assignments = pairs
            .iter()
            .enumerate()
            .map(|(i, &(xi, eta))| PairAssignment { xi, eta, top: lo + i as u64 })
            .collect();
        self.levels.push(LevelData::new(n + 1, lo, hi, composites));
        self.sigma.push(SigmaLevel { n, pairs: assignments });
        Ok(())
    }

    /// `γ_i*`: the unique composite with top `i`.
    pub fn gamma(&self, i: u64) -> Result<&Functional> {
        let n = self.level_of(i).ok_or(Error::CoordinateNotBuilt(i))?;
        let lvl = &self.levels[n - 1];
        lvl.composites.get((i - lvl.lo) as usize).ok_or(Error::NoComposite(i))
    }

    pub fn gamma_id(&self, i: u64) -> Result<FunctionalId> {
        self.gamma(i)?;
        let n = self.level_of(i).expect("checked by gamma");
        Ok(FunctionalId::new(n, (i - self.levels[n - 1].lo) as usize))
    }

    /// Parents of a composite: `(ξ, η, k, l, top)`.
    pub fn decompose(&self, d: &Functional) -> Result<Decomposition<'_>> {
        match d.provenance {
            Provenance::Unit(_) => Err(Error::NotComposite),
            Provenance::Composite { xi, eta, k, l, top } => Ok(Decomposition {
                xi: self.functional(xi)?,
                eta: self.functional(eta)?,
                xi_id: xi,
                eta_id: eta,
                k,
                l,
                top,
            }),
        }
    }

    /// Recomputes the coordinates a composite must have from its parents.
    pub fn recompose(&self, dec: &Decomposition<'_>) -> Vec<(u64, u32)> {
        let mut c = self.compose(dec.xi, dec.k, dec.eta, dec.top);
        c.sort_unstable();
        c
    }

    #[doc(hidden)]
    pub fn tamper_coords(&mut self, id: FunctionalId, coords: Vec<(u64, u32)>) {
        let lvl = &mut self.levels[id.level - 1];
        let nc = lvl.composites.len();
        if id.index < nc {
            lvl.composites[id.index].coords = coords;
        } else {
            lvl.units[id.index - nc].coords = coords;
        }
    }
}

pub struct Decomposition<'a> {
    pub xi: &'a Functional,
    pub eta: &'a Functional,
    pub xi_id: FunctionalId,
    pub eta_id: FunctionalId,
    pub k: usize,
    pub l: usize,
    pub top: u64,
}

// ---------------------------------------------------------------------------
// Property verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyCheck {
    pub property: String,
    pub checked: usize,
    pub passed: bool,
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub levels: usize,
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
    pub fn check(&self, property: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.property == property)
    }
}

struct Tally {
    property: &'static str,
    checked: usize,
    failure: Option<String>,
}

impl Tally {
    fn new(property: &'static str) -> Self {
        Tally { property, checked: 0, failure: None }
    }
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.failure.is_none() {
            self.failure = Some(what());
        }
    }
    fn finish(self) -> PropertyCheck {
        PropertyCheck {
            property: self.property.to_string(),
            checked: self.checked,
            passed: self.failure.is_none(),
            counterexample: self.failure,
        }
    }
}

impl ConstructionState {
    /// Checks properties (1)–(7) of the construction on every built level,
    /// plus interval adjacency and the σ-registry (growth law, canonical
    /// order, top assignment).
    pub fn verify_properties(&self) -> PropertyReport {
        let mut p1 = Tally::new("(1) units");
        let mut p2 = Tally::new("(2) support location");
        let mut p3 = Tally::new("(3) one point per interval");
        let mut p4 = Tally::new("(4) coefficients in R");
        let mut p5 = Tally::new("(5) support in F");
        let mut p6 = Tally::new("(6) unique composite per top");
        let mut p7 = Tally::new("(7) decomposition");
        let mut adj = Tally::new("intervals adjacent");
        let mut sig = Tally::new("sigma registry");

        let mut prev_hi = 0u64;
        for (i, lvl) in self.levels.iter().enumerate() {
            let n = i + 1;
            adj.record(lvl.lo == prev_hi + 1 && lvl.hi >= lvl.lo, || {
                format!("Δ_{n} = [{}, {}] after max Δ_{} = {prev_hi}", lvl.lo, lvl.hi, n - 1)
            });
            if n <= 2 {
                adj.record(lvl.lo == n as u64 && lvl.hi == n as u64, || format!("Δ_{n} ≠ {{{n}}}"));
            }
            prev_hi = lvl.hi;
        }

        for (i, lvl) in self.levels.iter().enumerate() {
            let n = i + 1;
            // (1)
            for c in lvl.lo..=lvl.hi {
                let ok = lvl.units.get((c - lvl.lo) as usize).is_some_and(|u| {
                    u.coords == [(c, 0)] && u.provenance == Provenance::Unit(c) && u.level == n
                });
                p1.record(ok, || format!("e_{c}* missing from D_{n}"));
            }
            if n <= 2 {
                p1.record(lvl.composites.is_empty(), || format!("D_{n} has composites"));
            }
            for (j, d) in lvl.iter().enumerate() {
                let id = FunctionalId::new(n, j);
                let supp: Vec<u64> = d.support().collect();
                // (2)
                let ok = !supp.is_empty()
                    && supp.windows(2).all(|w| w[0] < w[1])
                    && supp.iter().all(|&c| c >= 1 && c <= lvl.hi)
                    && lvl.contains(*supp.last().unwrap());
                p2.record(ok, || format!("{id}: support {supp:?} vs Δ_{n} = [{}, {}]", lvl.lo, lvl.hi));
                // (3)
                let lv: Vec<Option<usize>> = supp.iter().map(|&c| self.level_of(c)).collect();
                let ok = lv.iter().all(Option::is_some) && lv.windows(2).all(|w| w[0] < w[1]);
                p3.record(ok, || format!("{id}: support {supp:?} meets some Δ_k twice"));
                // (4): exponents are structural; a unit or top coordinate must carry 1
                let ok = match d.provenance {
                    Provenance::Unit(c) => d.coords == [(c, 0)],
                    Provenance::Composite { top, .. } => d.exponent_at(top) == Some(0),
                };
                p4.record(ok, || format!("{id}: top coefficient is not 1"));
                // (5)
                p5.record(in_schreier_plus_two(&supp), || format!("{id}: support {supp:?} ∉ F"));
            }
            if n >= 3 {
                // (6)
                let nc = lvl.composites.len() as u64;
                p6.record(nc == lvl.width(), || {
                    format!("D_{n} has {nc} composites for |Δ_{n}| = {}", lvl.width())
                });
                let mut seen = vec![0u32; lvl.width() as usize];
                for d in lvl.iter().filter(|d| d.support_len() > 1) {
                    if let Some(m) = d.max_support().filter(|&m| lvl.contains(m)) {
                        seen[(m - lvl.lo) as usize] += 1;
                    }
                }
                for (off, &cnt) in seen.iter().enumerate() {
                    let i = lvl.lo + off as u64;
                    p6.record(cnt == 1, || format!("top {i} carries {cnt} composites"));
                }
                // (7)
                for (j, d) in lvl.composites.iter().enumerate() {
                    let id = FunctionalId::new(n, j);
                    let ok = match self.decompose(d) {
                        Ok(dec) => {
                            1 <= dec.k
                                && dec.k < dec.l
                                && dec.l < n
                                && dec.xi.level == dec.k
                                && dec.eta.level == dec.l
                                && lvl.contains(dec.top)
                                && self.recompose(&dec) == d.coords
                        }
                        Err(_) => false,
                    };
                    p7.record(ok, || format!("{id} does not recompose from its registered parents"));
                }
            }
        }

        // registry: Σ_n recomputed, |Δ_{n+1}| = |Σ_n|, tops in order
        for s in &self.sigma {
            let n = s.n;
            let Ok(next) = self.level(n + 1) else {
                sig.record(false, || format!("Σ_{n} registered but level {} missing", n + 1));
                continue;
            };
            let expected = self.enumerate_linked_pairs(n).unwrap_or_default();
            let got: Vec<(FunctionalId, FunctionalId)> = s.pairs.iter().map(|p| (p.xi, p.eta)).collect();
            sig.record(expected == got, || format!("Σ_{n} differs from the canonical enumeration"));
            sig.record(next.width() == s.pairs.len() as u64, || {
                format!("|Δ_{}| = {} but |Σ_{n}| = {}", n + 1, next.width(), s.pairs.len())
            });
            for (i, p) in s.pairs.iter().enumerate() {
                let top_ok = p.top == next.lo + i as u64;
                let comp_ok = next.composites.get(i).is_some_and(|c| {
                    matches!(c.provenance, Provenance::Composite { xi, eta, top, .. }
                        if xi == p.xi && eta == p.eta && top == p.top)
                });
                sig.record(top_ok && comp_ok, || format!("σ_{n}({}, {}) = {} is inconsistent", p.xi, p.eta, p.top));
            }
        }
        for n in 3..=self.levels.len() {
            sig.record(self.sigma.iter().any(|s| s.n == n - 1), || format!("Σ_{} not registered", n - 1));
        }

        PropertyReport {
            levels: self.levels.len(),
            checks: vec![
                p1.finish(),
                p2.finish(),
                p3.finish(),
                p4.finish(),
                p5.finish(),
                p6.finish(),
                p7.finish(),
                adj.finish(),
                sig.finish(),
            ],
        }
    }
}

// ---------------------------------------------------------------------------
// State document
// ---------------------------------------------------------------------------

pub const STATE_VERSION: u64 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    version: u64,
    b: String,
    levels: Vec<LevelDoc>,
    sigma: Vec<SigmaLevel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelDoc {
    interval: [u64; 2],
    composites: Vec<CompositeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompositeDoc {
    coords: Vec<(u64, u32)>,
    xi: FunctionalId,
    eta: FunctionalId,
    k: usize,
    l: usize,
    top: u64,
}

impl ConstructionState {
    pub fn save_state(&self) -> String {
        let doc = StateDoc {
            version: STATE_VERSION,
            b: rational::fmt(&self.b),
            levels: self
                .levels
                .iter()
                .map(|lvl| LevelDoc {
                    interval: [lvl.lo, lvl.hi],
                    composites: lvl
                        .composites
                        .iter()
                        .map(|c| match c.provenance {
                            Provenance::Composite { xi, eta, k, l, top } => {
                                CompositeDoc { coords: c.coords.clone(), xi, eta, k, l, top }
                            }
                            Provenance::Unit(_) => unreachable!("composite list holds composites"),
                        })
                        .collect(),
                })
                .collect(),
            sigma: self.sigma.clone(),
        };
        let mut s = serde_json::to_string(&doc).expect("state serializes");
        s.push('\n');
        s
    }

    /// Parses a state document. Structural invariants (b range, adjacent
    /// intervals, valid references) are enforced; the construction
    /// properties are left to `verify_properties`.
    pub fn load_state(text: &str) -> Result<Self> {
        let doc: StateDoc =
            serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
        if doc.version != STATE_VERSION {
            return Err(Error::SchemaVersion(doc.version));
        }
        let b = rational::parse(&doc.b).map_err(|e| Error::MalformedDocument(e.to_string()))?;
        rational::check_b(&b)?;
        if doc.levels.len() < 2 {
            return Err(Error::MalformedDocument("at least two levels required".into()));
        }
        let mut levels: Vec<LevelData> = Vec::with_capacity(doc.levels.len());
        let mut prev = 0u64;
        for (i, ld) in doc.levels.into_iter().enumerate() {
            let n = i + 1;
            let [lo, hi] = ld.interval;
            if lo != prev + 1 || hi < lo {
                return Err(Error::MalformedDocument(format!("interval of level {n} is not adjacent")));
            }
            prev = hi;
            let mut composites = Vec::with_capacity(ld.composites.len());
            for cd in ld.composites {
                for id in [cd.xi, cd.eta] {
                    let known = id.level >= 1
                        && id.level < n
                        && levels.get(id.level - 1).is_some_and(|l| id.index < l.len());
                    if !known {
                        return Err(Error::MalformedDocument(format!("level {n}: dangling reference {id}")));
                    }
                }
                if cd.coords.windows(2).any(|w| w[0].0 >= w[1].0) || cd.coords.is_empty() {
                    return Err(Error::MalformedDocument(format!("level {n}: coords not strictly increasing")));
                }
                composites.push(Functional {
                    coords: cd.coords,
                    level: n,
                    provenance: Provenance::Composite { xi: cd.xi, eta: cd.eta, k: cd.k, l: cd.l, top: cd.top },
                });
            }
            levels.push(LevelData::new(n, lo, hi, composites));
        }
        Ok(ConstructionState { b, levels, sigma: doc.sigma })
    }
}
