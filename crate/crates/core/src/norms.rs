//! Evaluation of functionals on finitely supported vectors and certified
//! brackets for `‖x‖ = sup_{d* ∈ D} |d*(x)|`.
//!
//! The lower bound of a bracket is attained by an actually built functional.
//! The upper bound ranges over a finite synthesis closure that contains the
//! restriction to `[1, M]` of every functional of the (infinite) set `D`:
//! a functional whose top lies beyond `M` restricts to
//! `d1|[1,M] + b·(d2|(max Δ_k, M])`, where `d1` lives at level `k` and both
//! parents sit at strictly lower levels. Coefficients deeper than `b^K` are
//! not tracked exactly; they are charged `b^{K+1}` per coordinate.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::normingset::{ConstructionState, Functional, FunctionalId, Provenance};
use crate::rational::{self, Q};
use crate::report::{CheckOutcome, Tracker};

/// A finitely supported vector with exact rational coordinates. Zero
/// entries are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Vector {
    coords: BTreeMap<u64, Q>,
}

impl Vector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn unit(i: u64) -> Self {
        Self::from_pairs([(i, Q::one())])
    }

    pub fn from_pairs<I: IntoIterator<Item = (u64, Q)>>(it: I) -> Self {
        let mut v = Vector::zero();
        for (c, x) in it {
            v.add_at(c, &x);
        }
        v
    }

    pub fn add_at(&mut self, c: u64, x: &Q) {
        if x.is_zero() {
            return;
        }
        let e = self.coords.entry(c).or_insert_with(Q::zero);
        *e += x;
        if e.is_zero() {
            self.coords.remove(&c);
        }
    }

    pub fn get(&self, c: u64) -> Q {
        self.coords.get(&c).cloned().unwrap_or_else(Q::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Q)> {
        self.coords.iter().map(|(&c, v)| (c, v))
    }

    pub fn support(&self) -> BTreeSet<u64> {
        self.coords.keys().copied().collect()
    }

    pub fn max_support(&self) -> Option<u64> {
        self.coords.keys().next_back().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn sup_norm(&self) -> Q {
        self.coords.values().map(Q::abs).max().unwrap_or_else(Q::zero)
    }

    pub fn l1_norm(&self) -> Q {
        self.coords.values().map(Q::abs).fold(Q::zero(), |a, v| a + v)
    }

    pub fn scale(&self, s: &Q) -> Vector {
        Vector::from_pairs(self.coords.iter().map(|(&c, v)| (c, v * s)))
    }

    pub fn add(&self, other: &Vector) -> Vector {
        let mut out = self.clone();
        for (c, v) in other.iter() {
            out.add_at(c, v);
        }
        out
    }

    pub fn dot(&self, other: &Vector) -> Q {
        let (small, large) = if self.coords.len() <= other.coords.len() { (self, other) } else { (other, self) };
        small
            .coords
            .iter()
            .filter_map(|(c, v)| large.coords.get(c).map(|w| v * w))
            .fold(Q::zero(), |a, x| a + x)
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|(c, v)| format!("{c}:{}", rational::fmt(v))).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for Vector {
    type Err = Error;

    /// Comma-separated `coord:value` pairs, e.g. `1:1,2:-1/2`.
    fn from_str(s: &str) -> Result<Self> {
        let mut v = Vector::zero();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (c, x) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidInput(format!("expected coord:value, got `{part}`")))?;
            let c: u64 = c.trim().parse().map_err(|_| Error::InvalidInput(format!("bad coordinate `{c}`")))?;
            if c == 0 {
                return Err(Error::InvalidInput("coordinates start at 1".into()));
            }
            v.add_at(c, &rational::parse(x)?);
        }
        Ok(v)
    }
}

impl Serialize for Vector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `Σ_i d*(i) x(i)`.
pub fn evaluate(b: &Q, f: &Functional, x: &Vector) -> Q {
    let mut acc = Q::zero();
    for &(c, k) in f.coords() {
        if let Some(v) = x.coords.get(&c) {
            acc += rational::pow(b, k) * v;
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Built { id: FunctionalId, interval: (u64, u64) },
    Synthetic,
}

/// A functional with rational coefficients, typically `d*|I`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictedFunctional {
    coords: BTreeMap<u64, Q>,
    origin: Origin,
}

impl RestrictedFunctional {
    pub fn zero() -> Self {
        RestrictedFunctional { coords: BTreeMap::new(), origin: Origin::Synthetic }
    }

    pub fn synthetic<I: IntoIterator<Item = (u64, Q)>>(it: I) -> Self {
        RestrictedFunctional {
            coords: it.into_iter().filter(|(_, v)| !v.is_zero()).collect(),
            origin: Origin::Synthetic,
        }
    }

    pub fn apply(&self, x: &Vector) -> Q {
        self.coords
            .iter()
            .filter_map(|(c, v)| x.coords.get(c).map(|w| v * w))
            .fold(Q::zero(), |a, t| a + t)
    }

    pub fn coords(&self) -> impl Iterator<Item = (u64, &Q)> {
        self.coords.iter().map(|(&c, v)| (c, v))
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn is_zero(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn as_vector(&self) -> Vector {
        Vector::from_pairs(self.coords.iter().map(|(&c, v)| (c, v.clone())))
    }
}

impl Serialize for RestrictedFunctional {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("RestrictedFunctional", 2)?;
        let coords: Vec<(u64, String)> = self.coords.iter().map(|(&c, v)| (c, rational::fmt(v))).collect();
        st.serialize_field("coords", &coords)?;
        st.serialize_field("origin", &self.origin)?;
        st.end()
    }
}

/// Coordinatewise truncation `f|[lo, hi]`.
pub fn restrict(b: &Q, id: FunctionalId, f: &Functional, lo: u64, hi: u64) -> RestrictedFunctional {
    RestrictedFunctional {
        coords: f
            .coords()
            .iter()
            .filter(|&&(c, _)| lo <= c && c <= hi)
            .map(|&(c, k)| (c, rational::pow(b, k)))
            .collect(),
        origin: Origin::Built { id, interval: (lo, hi) },
    }
}

/// Coefficient of a closure element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coef {
    /// `b^k` with `k <= K`.
    Exact(u32),
    /// `b^k` for some unknown `k > K`.
    Deep,
}

impl Coef {
    fn from_exponent(k: u32, depth: u32) -> Coef {
        if k <= depth {
            Coef::Exact(k)
        } else {
            Coef::Deep
        }
    }

    fn times_b(self, depth: u32) -> Coef {
        match self {
            Coef::Exact(k) => Coef::from_exponent(k + 1, depth),
            Coef::Deep => Coef::Deep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClosureElement {
    coords: Vec<(u64, Coef)>,
}

impl ClosureElement {
    pub fn coords(&self) -> &[(u64, Coef)] {
        &self.coords
    }

    pub fn has_deep(&self) -> bool {
        self.coords.iter().any(|&(_, c)| c == Coef::Deep)
    }

    /// Exactly known part of `|f(x)|` and the deep coordinates' mass `Σ|x_p|`.
    fn split_value(&self, b_pows: &[Q], x: &Vector) -> (Q, Q) {
        let mut known = Q::zero();
        let mut deep = Q::zero();
        for &(c, coef) in &self.coords {
            if let Some(v) = x.coords.get(&c) {
                match coef {
                    Coef::Exact(k) => known += &b_pows[k as usize] * v,
                    Coef::Deep => deep += v.abs(),
                }
            }
        }
        (known.abs(), deep)
    }

    /// Exact coefficients when no coordinate is deep.
    pub fn to_restricted(&self, b: &Q) -> Option<RestrictedFunctional> {
        let mut out = BTreeMap::new();
        for &(c, coef) in &self.coords {
            match coef {
                Coef::Exact(k) => {
                    out.insert(c, rational::pow(b, k));
                }
                Coef::Deep => return None,
            }
        }
        Some(RestrictedFunctional { coords: out, origin: Origin::Synthetic })
    }
}

/// The finite synthesis closure at horizon `M` and depth `K`.
#[derive(Debug, Clone)]
pub struct Restrictions {
    pub horizon: u64,
    pub depth: u32,
    pub elements: Vec<ClosureElement>,
    /// `(M + 2)·b^{K+1}`: what any one functional can hide below the horizon
    /// in coefficients deeper than `b^K`.
    pub tail_bound: Q,
    /// Whether any coefficient was cut at depth `K`.
    pub truncated: bool,
}

/// Projects `f` onto `window`.
fn project(f: &Functional, window: &BTreeSet<u64>, depth: u32) -> Vec<(u64, Coef)> {
    f.coords()
        .iter()
        .filter(|(c, _)| window.contains(c))
        .map(|&(c, k)| (c, Coef::from_exponent(k, depth)))
        .collect()
}

struct Composable {
    /// `max Δ_k` for the level `k` of the left parent
    level_end: u64,
    body: Vec<(u64, Coef)>,
    /// how many projected points the right parent may add
    capacity: i64,
}

fn capacity_of(f: &Functional) -> i64 {
    f.min_support().map_or(0, |m| m as i64 + 1 - f.support_len() as i64)
}

/// Indexes a state for repeated evaluation: which functionals meet each
/// coordinate, and per level the tops of its functionals grouped by
/// linking capacity.
pub struct NormEngine<'a> {
    state: &'a ConstructionState,
    by_coord: Vec<Vec<FunctionalId>>,
    /// per level: capacity -> sorted tops
    tops: Vec<BTreeMap<i64, Vec<u64>>>,
}

impl<'a> NormEngine<'a> {
    pub fn new(state: &'a ConstructionState) -> Self {
        let mut by_coord: Vec<Vec<FunctionalId>> = vec![Vec::new(); state.max_coord() as usize];
        let mut tops: Vec<BTreeMap<i64, Vec<u64>>> = vec![BTreeMap::new(); state.level_count()];
        for (id, f) in state.functionals() {
            for c in f.support() {
                by_coord[(c - 1) as usize].push(id);
            }
            if let Some(t) = f.max_support() {
                tops[id.level - 1].entry(capacity_of(f)).or_default().push(t);
            }
        }
        for lvl in &mut tops {
            for v in lvl.values_mut() {
                v.sort_unstable();
            }
        }
        NormEngine { state, by_coord, tops }
    }

    pub fn state(&self) -> &ConstructionState {
        self.state
    }

    /// Functionals whose support meets `coords`, in (level, index) order.
    fn meeting<'c>(&self, coords: impl IntoIterator<Item = &'c u64>) -> Vec<FunctionalId> {
        let mut ids: Vec<FunctionalId> = coords
            .into_iter()
            .filter_map(|&c| c.checked_sub(1).and_then(|i| self.by_coord.get(i as usize)))
            .flatten()
            .copied()
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Closure of the projections onto `window ⊆ [1, horizon]` of all
    /// restrictions `d*|[1, horizon]`, `d* ∈ D`.
    ///
    /// Projecting only loosens the linked-pair constraint (the family is
    /// hereditary and subsets of non-maximal members are non-maximal), so the
    /// result still over-approximates.
    fn closure_on(&self, horizon: u64, window: &BTreeSet<u64>, depth: u32) -> Result<(Vec<ClosureElement>, bool)> {
        let state = self.state;
        let top_level = state.level_of(horizon).ok_or(Error::CoordinateNotBuilt(horizon))?;
        let mut seen: HashSet<ClosureElement> = HashSet::new();
        // for a given parent level and body only the largest capacity matters
        let mut widest: HashMap<(u64, Vec<(u64, Coef)>), i64> = HashMap::new();
        let mut queue: Vec<ClosureElement> = Vec::new();
        let mut truncated = false;

        // functionals meeting the window
        let mut met: HashMap<(usize, i64), usize> = HashMap::new();
        for id in self.meeting(window.iter()) {
            let f = state.functional(id)?;
            if f.max_support().is_some_and(|t| t > horizon) {
                continue;
            }
            let capacity = capacity_of(f);
            *met.entry((id.level, capacity)).or_default() += 1;
            let body = project(f, window, depth);
            truncated |= body.iter().any(|&(_, c)| c == Coef::Deep);
            let cap = widest.entry((state.level_end(id.level), body.clone())).or_insert(capacity);
            *cap = (*cap).max(capacity);
            let el = ClosureElement { coords: body };
            if seen.insert(el.clone()) {
                queue.push(el);
            }
        }
        // functionals avoiding the window contribute an empty body
        for n in 1..=top_level {
            let avoiding = self.tops[n - 1].iter().rev().find(|(capacity, tops)| {
                tops.partition_point(|&t| t <= horizon) > met.get(&(n, **capacity)).copied().unwrap_or(0)
            });
            if let Some((&capacity, _)) = avoiding {
                let cap = widest.entry((state.level_end(n), Vec::new())).or_insert(capacity);
                *cap = (*cap).max(capacity);
            }
        }
        let order: Vec<Composable> = widest
            .into_iter()
            .filter(|&(_, capacity)| capacity >= 1)
            .map(|((level_end, body), capacity)| Composable { level_end, body, capacity })
            .collect();

        while let Some(f2) = queue.pop() {
            for d1 in &order {
                let part: Vec<(u64, Coef)> = f2
                    .coords
                    .iter()
                    .filter(|&&(c, _)| c > d1.level_end)
                    .map(|&(c, coef)| (c, coef.times_b(depth)))
                    .collect();
                if part.is_empty() || part.len() as i64 > d1.capacity {
                    continue;
                }
                truncated |= part.iter().any(|&(_, c)| c == Coef::Deep);
                let mut coords = d1.body.clone();
                coords.extend(part);
                let el = ClosureElement { coords };
                if seen.insert(el.clone()) {
                    queue.push(el);
                }
            }
        }
        let mut elements: Vec<ClosureElement> = seen.into_iter().filter(|e| !e.coords.is_empty()).collect();
        elements.sort();
        Ok((elements, truncated))
    }

    /// The closure on the full window `[1, M]`.
    pub fn enumerate_restrictions(&self, horizon: u64, depth: u32) -> Result<Restrictions> {
        let window: BTreeSet<u64> = (1..=horizon).collect();
        let (elements, truncated) = self.closure_on(horizon, &window, depth)?;
        Ok(Restrictions { horizon, depth, elements, tail_bound: tail_bound(self.state.b(), horizon, depth), truncated })
    }

    /// `max_{d* built} |d*(x)|` and the first maximizing functional.
    pub fn lower_bound(&self, x: &Vector) -> (Q, Option<FunctionalId>) {
        let b = self.state.b();
        let mut best = Q::zero();
        let mut arg = None;
        for id in self.meeting(x.coords.keys()) {
            let f = self.state.functional(id).expect("indexed ids exist");
            let v = evaluate(b, f, x).abs();
            if v > best {
                best = v;
                arg = Some(id);
            }
        }
        (best, arg)
    }

    /// Bracket at a fixed depth, with the closure projected onto `window`
    /// (which must contain `supp x`).
    pub fn bracket_on(&self, x: &Vector, window: &BTreeSet<u64>, depth: u32) -> Result<NormBracket> {
        let state = self.state;
        check_within(state, x)?;
        let b = state.b();
        let (lower, arg) = self.lower_bound(x);
        let horizon = match window.iter().next_back().copied().max(x.max_support()) {
            Some(h) => h,
            None => {
                return Ok(NormBracket {
                    lower,
                    upper: Q::zero(),
                    witness: RestrictedFunctional::zero(),
                    tail_term: Q::zero(),
                    depth,
                    closure_size: 0,
                })
            }
        };
        let (elements, _) = self.closure_on(horizon, window, depth)?;
        let pows: Vec<Q> = (0..=depth).map(|k| rational::pow(b, k)).collect();
        let deep_coef = rational::pow(b, depth + 1);
        let mut upper = Q::zero();
        let mut explored = Q::zero();
        for el in &elements {
            let (known, deep) = el.split_value(&pows, x);
            let bound = &known + &deep * &deep_coef;
            if bound > upper {
                upper = bound;
            }
            if known > explored {
                explored = known;
            }
        }
        let witness = match arg {
            Some(id) => restrict(b, id, state.functional(id)?, 1, horizon),
            None => RestrictedFunctional::zero(),
        };
        let tail_term = &upper - &explored.min(upper.clone());
        Ok(NormBracket { lower, upper, witness, tail_term, depth, closure_size: elements.len() })
    }

    pub fn bracket_at_depth(&self, x: &Vector, depth: u32) -> Result<NormBracket> {
        self.bracket_on(x, &x.support(), depth)
    }

    /// Raises the depth from 1 until `upper − lower <= ε`; returns the last
    /// bracket and whether it met `ε`.
    pub fn bracket_best(&self, x: &Vector, epsilon: &Q, depth_limit: u32) -> Result<(NormBracket, bool)> {
        if !epsilon.is_positive() {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        let mut depth = 1.min(depth_limit);
        loop {
            let br = self.bracket_at_depth(x, depth)?;
            if &br.width() <= epsilon {
                return Ok((br, true));
            }
            if depth >= depth_limit {
                return Ok((br, false));
            }
            depth += 1;
        }
    }

    pub fn bracket(&self, x: &Vector, epsilon: &Q, depth_limit: u32) -> Result<NormBracket> {
        let (br, ok) = self.bracket_best(x, epsilon, depth_limit)?;
        if ok {
            Ok(br)
        } else {
            Err(Error::EpsilonNotReached {
                width: rational::fmt(&br.width()),
                epsilon: rational::fmt(epsilon),
                depth: br.depth,
            })
        }
    }

    /// `max_{d*, I initial} |(d*|I)(x)|` over all built functionals, with
    /// the first maximizing functional and the cut `max I`.
    pub fn max_initial_restriction(&self, x: &Vector) -> (Q, Option<(FunctionalId, u64)>) {
        let b = self.state.b();
        let mut patterns: BTreeMap<Vec<(u64, u32)>, FunctionalId> = BTreeMap::new();
        for id in self.meeting(x.coords.keys()) {
            let f = self.state.functional(id).expect("indexed ids exist");
            let proj: Vec<(u64, u32)> = f.coords().iter().filter(|(c, _)| x.coords.contains_key(c)).copied().collect();
            patterns.entry(proj).or_insert(id);
        }
        let mut best = Q::zero();
        let mut arg = None;
        for (pat, id) in patterns {
            let mut acc = Q::zero();
            for (c, k) in pat {
                acc += rational::pow(b, k) * x.get(c);
                if acc.abs() > best {
                    best = acc.abs();
                    arg = Some((id, c));
                }
            }
        }
        (best, arg)
    }
}

pub fn enumerate_restrictions(state: &ConstructionState, horizon: u64, depth: u32) -> Result<Restrictions> {
    NormEngine::new(state).enumerate_restrictions(horizon, depth)
}

pub fn tail_bound(b: &Q, horizon: u64, depth: u32) -> Q {
    rational::int(horizon as i64 + 2) * rational::pow(b, depth + 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormBracket {
    #[serde(with = "rational::serde_q")]
    pub lower: Q,
    #[serde(with = "rational::serde_q")]
    pub upper: Q,
    pub witness: RestrictedFunctional,
    /// Share of `upper` coming from coefficients cut at depth `K`.
    #[serde(with = "rational::serde_q")]
    pub tail_term: Q,
    pub depth: u32,
    pub closure_size: usize,
}

impl NormBracket {
    pub fn width(&self) -> Q {
        &self.upper - &self.lower
    }
    pub fn contains(&self, v: &Q) -> bool {
        &self.lower <= v && v <= &self.upper
    }
}

fn check_within(state: &ConstructionState, x: &Vector) -> Result<()> {
    match x.max_support() {
        Some(m) if m > state.max_coord() => Err(Error::CoordinateNotBuilt(m)),
        _ => Ok(()),
    }
}

pub fn lower_bound(state: &ConstructionState, x: &Vector) -> (Q, Option<FunctionalId>) {
    NormEngine::new(state).lower_bound(x)
}

pub fn norm_bracket_on(state: &ConstructionState, x: &Vector, window: &BTreeSet<u64>, depth: u32) -> Result<NormBracket> {
    NormEngine::new(state).bracket_on(x, window, depth)
}

pub fn norm_bracket_at_depth(state: &ConstructionState, x: &Vector, depth: u32) -> Result<NormBracket> {
    NormEngine::new(state).bracket_at_depth(x, depth)
}

pub fn norm_bracket_best(
    state: &ConstructionState,
    x: &Vector,
    epsilon: &Q,
    depth_limit: u32,
) -> Result<(NormBracket, bool)> {
    NormEngine::new(state).bracket_best(x, epsilon, depth_limit)
}

pub fn norm_bracket(state: &ConstructionState, x: &Vector, epsilon: &Q, depth_limit: u32) -> Result<NormBracket> {
    NormEngine::new(state).bracket(x, epsilon, depth_limit)
}

// ---------------------------------------------------------------------------
// Basis-constant suite
// ---------------------------------------------------------------------------

/// Piecewise-constant certificate `c ↦ bound on ‖d*|[1, c]‖`, stored as
/// `(first c, value)` breakpoints in increasing order starting at `c = 0`.
pub type Certificate = Vec<(u64, Q)>;

fn cert_at(cert: &Certificate, c: u64) -> &Q {
    let i = cert.partition_point(|&(s, _)| s <= c);
    &cert[i - 1].1
}

/// Recursive certificates for every built functional: units give `0` before
/// their coordinate and `1` after; a composite `d1 + b(d2|J) + e_i` gives
/// `1` once `i ∈ I`, follows `d1` while `max I <= max Δ_k`, and otherwise
/// `‖d1‖ + b·(‖d2|I‖ + ‖d2|[1, max Δ_k]‖)`.
pub fn restriction_certificates(state: &ConstructionState) -> Result<HashMap<FunctionalId, Certificate>> {
    let b = state.b();
    let one = Q::one();
    let mut out: HashMap<FunctionalId, Certificate> = HashMap::with_capacity(state.functional_count());
    for (id, f) in state.functionals() {
        let cert = match *f.provenance() {
            Provenance::Unit(i) => vec![(0, Q::zero()), (i, one.clone())],
            Provenance::Composite { xi, eta, k, top, .. } => {
                let c1 = out.get(&xi).ok_or(Error::UnknownFunctional { level: xi.level, index: xi.index })?;
                let c2 = out.get(&eta).ok_or(Error::UnknownFunctional { level: eta.level, index: eta.index })?;
                let split = state.level_end(k);
                let base = cert_at(c2, split).clone();
                let mut cert: Certificate = c1.iter().filter(|(s, _)| *s <= split).cloned().collect();
                let mut starts: Vec<u64> = vec![split + 1];
                starts.extend(c2.iter().map(|(s, _)| *s).filter(|&s| s > split + 1 && s < top));
                for s in starts {
                    cert.push((s, &one + b * (cert_at(c2, s) + &base)));
                }
                cert.push((top, one.clone()));
                cert
            }
        };
        out.insert(id, cert);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisBoundReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl BasisBoundReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

pub fn max_initial_restriction(state: &ConstructionState, x: &Vector) -> (Q, Option<(FunctionalId, u64)>) {
    NormEngine::new(state).max_initial_restriction(x)
}

/// Checks `|(d*|I)(x)| <= 2·upper(‖x‖)` for every built functional, every
/// initial interval and every sample, and that the recursive certificate
/// stays at or below 2 for every built functional and initial interval.
pub fn basis_bound_check(
    state: &ConstructionState,
    samples: &[Vector],
    epsilon: &Q,
    depth_limit: u32,
) -> Result<BasisBoundReport> {
    let two = rational::int(2);
    let engine = NormEngine::new(state);
    let per_sample: Vec<Result<Tracker>> = samples
        .par_iter()
        .enumerate()
        .map(|(si, x)| {
            let mut t = Tracker::new("restriction bound on samples", "|(d*|I)(x)| / upper(‖x‖) ≤ 2");
            let (br, _) = engine.bracket_best(x, epsilon, depth_limit)?;
            let (v, arg) = engine.max_initial_restriction(x);
            if br.upper.is_positive() {
                t.at_most(&(&v / &br.upper), &two, || format!("sample {si} ({x}), functional/cut {arg:?}"));
            }
            Ok(t)
        })
        .collect();
    let mut sampled = Tracker::new("restriction bound on samples", "|(d*|I)(x)| / upper(‖x‖) ≤ 2");
    for t in per_sample {
        sampled.merge(t?);
    }

    let certs = restriction_certificates(state)?;
    let mut symbolic = Tracker::new("recursive restriction certificate", "‖d*|I‖ ≤ 2");
    let mut ids: Vec<&FunctionalId> = certs.keys().collect();
    ids.sort();
    for id in ids {
        for (start, v) in &certs[id] {
            symbolic.at_most(v, &two, || format!("{id} cut at {start}"));
        }
    }
    Ok(BasisBoundReport { outcomes: vec![symbolic.finish(), sampled.finish()] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};

    fn state(levels: usize) -> ConstructionState {
        ConstructionState::build(q(1, 5), levels, None).unwrap()
    }

    #[test]
    fn vector_parsing() {
        let v: Vector = "1:1,2:-1/2,2:1/2,3:0".parse().unwrap();
        assert_eq!(v, Vector::unit(1));
        assert!("0:1".parse::<Vector>().is_err());
        assert!("1".parse::<Vector>().is_err());
        assert_eq!("".parse::<Vector>().unwrap(), Vector::zero());
        let w: Vector = "2:3/4,5:-1".parse().unwrap();
        assert_eq!(w.to_string(), "2:3/4,5:-1");
    }

    #[test]
    fn evaluate_examples() {
        let s = state(3);
        let g3 = s.gamma(3).unwrap();
        let x: Vector = "1:1,2:1".parse().unwrap();
        assert_eq!(evaluate(s.b(), g3, &x), q(6, 5));
        let e2 = s.functional(s.unit_id(2).unwrap()).unwrap();
        assert_eq!(evaluate(s.b(), e2, &Vector::unit(2)), int(1));
        assert_eq!(evaluate(s.b(), e2, &Vector::unit(1)), int(0));
        assert_eq!(evaluate(s.b(), g3, &Vector::zero()), int(0));
    }

    #[test]
    fn restrict_examples() {
        let s = state(3);
        let id = s.gamma_id(3).unwrap();
        let g3 = s.gamma(3).unwrap();
        let r = restrict(s.b(), id, g3, 1, 2);
        assert_eq!(r.as_vector(), "1:1,2:1/5".parse().unwrap());
        let s4 = state(4);
        let e5 = s4.unit_id(5).unwrap();
        assert!(restrict(s4.b(), e5, s4.functional(e5).unwrap(), 1, 3).is_zero());
        let full = restrict(s.b(), id, g3, 1, 3);
        assert_eq!(full.as_vector(), "1:1,2:1/5,3:1".parse().unwrap());
    }

    #[test]
    fn restriction_closure_examples() {
        let s = state(4);
        let r = enumerate_restrictions(&s, 2, 3).unwrap();
        let exact: Vec<Vector> =
            r.elements.iter().filter_map(|e| e.to_restricted(s.b())).map(|f| f.as_vector()).collect();
        for want in ["1:1", "2:1", "1:1,2:1/5"] {
            assert!(exact.contains(&want.parse().unwrap()), "missing {want}");
        }
        assert_eq!(r.tail_bound, q(4, 625));
        let one = enumerate_restrictions(&s, 1, 5).unwrap();
        assert_eq!(one.elements.len(), 1);
        assert_eq!(one.elements[0].coords(), &[(1, Coef::Exact(0))]);
        assert!(enumerate_restrictions(&s, 8, 3).is_err());
    }

    #[test]
    fn bracket_examples() {
        let s = state(4);
        let eps = q(1, 1000);
        let br = norm_bracket(&s, &Vector::unit(1), &eps, 8).unwrap();
        assert_eq!((br.lower.clone(), br.upper.clone()), (int(1), int(1)));
        let x: Vector = "1:1,2:1".parse().unwrap();
        let br = norm_bracket(&s, &x, &eps, 8).unwrap();
        assert!(br.contains(&q(6, 5)) && br.width() <= eps, "{br:?}");
        assert_eq!(br.witness.apply(&x), q(6, 5));
        let z = norm_bracket(&s, &Vector::zero(), &eps, 8).unwrap();
        assert_eq!((z.lower, z.upper), (int(0), int(0)));
        assert!(norm_bracket(&s, &Vector::unit(99), &eps, 8).is_err());
    }

    #[test]
    fn every_built_restriction_is_in_the_closure() {
        let s = state(5);
        for horizon in 1..=9 {
            let r = enumerate_restrictions(&s, horizon, 12).unwrap();
            let set: HashSet<&ClosureElement> = r.elements.iter().collect();
            for (_, f) in s.functionals() {
                let body: Vec<(u64, Coef)> = f
                    .coords()
                    .iter()
                    .filter(|(c, _)| *c <= horizon)
                    .map(|&(c, k)| (c, Coef::from_exponent(k, 12)))
                    .collect();
                if !body.is_empty() {
                    assert!(set.contains(&ClosureElement { coords: body.clone() }), "M={horizon}: {body:?}");
                }
            }
        }
    }

    #[test]
    fn certificates_are_at_most_two() {
        let s = state(5);
        let certs = restriction_certificates(&s).unwrap();
        let two = int(2);
        for (id, c) in &certs {
            assert!(c.iter().all(|(_, v)| v <= &two), "{id}: {c:?}");
        }
        // γ_3 restricted to [1,2]: 1 + b(1 + 0)
        let g3 = certs.get(&s.gamma_id(3).unwrap()).unwrap();
        assert_eq!(cert_at(g3, 2), &q(6, 5));
        assert_eq!(cert_at(g3, 3), &int(1));
    }

    #[test]
    fn basis_bound_examples() {
        let s = state(4);
        let samples: Vec<Vector> = vec!["1:1,2:1".parse().unwrap(), Vector::unit(3), "2:1,5:-1".parse().unwrap()];
        let rep = basis_bound_check(&s, &samples, &q(1, 1000), 8).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
        let (v, _) = max_initial_restriction(&s, &samples[0]);
        assert_eq!(v, q(6, 5));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use std::sync::OnceLock;

        fn shared() -> &'static ConstructionState {
            static S: OnceLock<ConstructionState> = OnceLock::new();
            S.get_or_init(|| state(5))
        }

        fn vector() -> impl Strategy<Value = Vector> {
            prop::collection::btree_map(1u64..=31, (-4i64..=4, 1i64..=3), 0..4)
                .prop_map(|m| Vector::from_pairs(m.into_iter().map(|(c, (n, d))| (c, q(n, d)))))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn bracket_is_ordered_and_dominates_sup(x in vector()) {
                let s = shared();
                let br = norm_bracket_at_depth(s, &x, 4).unwrap();
                prop_assert!(br.lower <= br.upper);
                prop_assert!(x.sup_norm() <= br.lower);
                prop_assert!(br.upper <= x.l1_norm());
            }

            #[test]
            fn scaling_and_symmetry(x in vector(), n in -3i64..=3, d in 1i64..=3) {
                let s = shared();
                let a = q(n, d);
                let br = norm_bracket_at_depth(s, &x, 4).unwrap();
                let scaled = norm_bracket_at_depth(s, &x.scale(&a), 4).unwrap();
                prop_assert_eq!(&scaled.lower, &(&br.lower * a.abs()));
                prop_assert_eq!(&scaled.upper, &(&br.upper * a.abs()));
            }

            #[test]
            fn triangle_on_common_window(x in vector(), y in vector()) {
                let s = shared();
                let window: BTreeSet<u64> = x.support().union(&y.support()).copied().collect();
                let bx = norm_bracket_on(s, &x, &window, 4).unwrap();
                let by = norm_bracket_on(s, &y, &window, 4).unwrap();
                let bs = norm_bracket_on(s, &x.add(&y), &window, 4).unwrap();
                prop_assert!(bs.upper <= &bx.upper + &by.upper);
                prop_assert!(bs.lower <= &bx.upper + &by.upper);
            }
        }
    }
}
