//! Block sequences of the unit vector basis: the certifier for flat blocks
//! (which behave like the `c_0` basis) and explicit `ℓ1` witnesses for
//! blocks with a uniformly large coordinate.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::normingset::{ConstructionState, Functional, FunctionalId, Provenance};
use crate::norms::{self, Vector};
use crate::rational::{self, Q};
use crate::report::{CheckOutcome, Tracker};

/// One block `u_n` with an optional designated coordinate `i_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockVector {
    vector: Vector,
    designated: Option<u64>,
}

impl BlockVector {
    pub fn new(vector: Vector, designated: Option<u64>) -> Result<Self> {
        if vector.is_zero() {
            return Err(Error::InvalidInput("blocks must be nonzero".into()));
        }
        if let Some(i) = designated {
            if vector.get(i).is_zero() {
                return Err(Error::InvalidInput(format!("designated coordinate {i} is outside the block {vector}")));
            }
        }
        Ok(BlockVector { vector, designated })
    }

    /// Designates the first coordinate of largest modulus.
    pub fn with_peak(vector: Vector) -> Result<Self> {
        let peak = vector.sup_norm();
        let i = vector.iter().find(|(_, v)| v.abs() == peak).map(|(c, _)| c);
        BlockVector::new(vector, i)
    }

    pub fn unit(i: u64) -> Self {
        BlockVector { vector: Vector::unit(i), designated: Some(i) }
    }

    pub fn vector(&self) -> &Vector {
        &self.vector
    }

    pub fn designated(&self) -> Option<u64> {
        self.designated
    }

    pub fn range(&self) -> (u64, u64) {
        let s = self.vector.support();
        (*s.first().expect("nonzero"), *s.last().expect("nonzero"))
    }
}

/// Successive blocks, `max supp u_n < min supp u_{n+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockBasis {
    blocks: Vec<BlockVector>,
}

impl BlockBasis {
    pub fn new(blocks: Vec<BlockVector>) -> Result<Self> {
        for (n, w) in blocks.windows(2).enumerate() {
            if w[0].range().1 >= w[1].range().0 {
                return Err(Error::NotSuccessive(n + 2, n + 1));
            }
        }
        Ok(BlockBasis { blocks })
    }

    pub fn units(coords: impl IntoIterator<Item = u64>) -> Result<Self> {
        BlockBasis::new(coords.into_iter().map(BlockVector::unit).collect())
    }

    pub fn blocks(&self) -> &[BlockVector] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `min_n |u_n(i_n)|` over designated coordinates.
    pub fn default_delta(&self) -> Result<Q> {
        self.blocks
            .iter()
            .map(|u| u.designated.map(|i| u.vector.get(i).abs()))
            .collect::<Option<Vec<Q>>>()
            .and_then(|v| v.into_iter().min())
            .ok_or_else(|| Error::NoDesignated("every block needs a designated coordinate".into()))
    }

    /// coordinate -> (block index, value)
    fn locator(&self) -> HashMap<u64, (usize, &Q)> {
        let mut m = HashMap::new();
        for (n, u) in self.blocks.iter().enumerate() {
            for (c, v) in u.vector.iter() {
                m.insert(c, (n, v));
            }
        }
        m
    }
}

impl FromStr for BlockBasis {
    type Err = Error;

    /// Either unit shorthand `e1,e2,e5` or `;`-separated sparse vectors such
    /// as `1:1;2:1/2,3:-1`, each designated at its peak.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return BlockBasis::new(Vec::new());
        }
        if !s.contains(':') {
            let coords = s
                .split(',')
                .map(|t| {
                    let t = t.trim();
                    t.strip_prefix('e')
                        .and_then(|d| d.parse::<u64>().ok())
                        .filter(|&c| c > 0)
                        .ok_or_else(|| Error::InvalidInput(format!("expected a unit block like e3, got `{t}`")))
                })
                .collect::<Result<Vec<u64>>>()?;
            return BlockBasis::units(coords);
        }
        let blocks = s
            .split(';')
            .map(|part| BlockVector::with_peak(part.parse()?))
            .collect::<Result<Vec<_>>>()?;
        BlockBasis::new(blocks)
    }
}

impl fmt::Display for BlockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|u| u.vector.to_string()).collect();
        write!(f, "{}", parts.join(";"))
    }
}

/// `1 + Σ_{n≥1} (n+2)/2^n`, summed in closed form: with `x = 1/2`,
/// `Σ n x^n = x/(1−x)²` and `Σ x^n = x/(1−x)`.
pub fn c0_series_constant() -> Q {
    let x = rational::q(1, 2);
    let one = Q::one();
    let om = &one - &x;
    &one + &x / (&om * &om) + rational::int(2) * &x / &om
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockBracket {
    pub block: usize,
    #[serde(with = "rational::serde_q")]
    pub lower: Q,
    #[serde(with = "rational::serde_q")]
    pub upper: Q,
}

#[derive(Debug, Clone, Serialize)]
pub struct C0Report {
    #[serde(with = "rational::serde_q")]
    pub constant: Q,
    pub flatness: CheckOutcome,
    pub series: CheckOutcome,
    pub brackets: Vec<BlockBracket>,
}

impl C0Report {
    pub fn passed(&self) -> bool {
        self.flatness.passed && self.series.passed
    }
}

/// Checks `‖u_n‖_c0 < 2^{-k_{n−1}}` for `n ≥ 2` (with `k_n = max supp u_n`),
/// then `Σ_n |d*(u_n)| ≤ 5` for every built functional.
pub fn c0_certify(state: &ConstructionState, basis: &BlockBasis, depth: u32) -> Result<C0Report> {
    let constant = c0_series_constant();
    let mut flat = Tracker::new("flat blocks", "‖u_n‖_c0 < 1/2^{k_{n-1}}");
    for (n, w) in basis.blocks.windows(2).enumerate() {
        let k_prev = w[0].range().1;
        let norm = w[1].vector.sup_norm();
        let ok = norm < Q::one() / rational::pow(&rational::int(2), k_prev as u32);
        flat.holds(ok, || format!("block {}: ‖u‖_c0 = {} is not below 2^-{k_prev}", n + 2, rational::fmt(&norm)));
    }
    let flatness = flat.finish();

    let mut series = Tracker::new("c0 series bound", "Σ_n |d*(u_n)| ≤ 1 + Σ(n+2)/2^n");
    let locate = basis.locator();
    let b = state.b();
    for (id, f) in state.functionals() {
        let mut per_block: HashMap<usize, Q> = HashMap::new();
        for &(c, k) in f.coords() {
            if let Some((n, v)) = locate.get(&c) {
                *per_block.entry(*n).or_insert_with(Q::zero) += rational::pow(b, k) * *v;
            }
        }
        let total = per_block.values().map(Q::abs).fold(Q::zero(), |a, v| a + v);
        series.at_most(&total, &constant, || format!("{id}"));
    }

    let mut brackets = Vec::with_capacity(basis.len());
    for (n, u) in basis.blocks.iter().enumerate() {
        if u.vector.max_support().is_some_and(|m| m > state.max_coord()) {
            continue;
        }
        let br = norms::norm_bracket_at_depth(state, &u.vector, depth)?;
        brackets.push(BlockBracket { block: n + 1, lower: br.lower, upper: br.upper });
    }
    Ok(C0Report { constant, flatness, series: series.finish(), brackets })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessMethod {
    Induction,
    Search,
}

/// Parent tree of a functional, leaves being unit vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lineage {
    pub id: FunctionalId,
    pub coords: Vec<(u64, u32)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<Box<Lineage>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<Box<Lineage>>,
}

pub fn lineage(state: &ConstructionState, id: FunctionalId) -> Result<Lineage> {
    let f = state.functional(id)?;
    Ok(match *f.provenance() {
        Provenance::Unit(_) => Lineage { id, coords: f.coords().to_vec(), top: None, xi: None, eta: None },
        Provenance::Composite { xi, eta, top, .. } => Lineage {
            id,
            coords: f.coords().to_vec(),
            top: Some(top),
            xi: Some(Box::new(lineage(state, xi)?)),
            eta: Some(Box::new(lineage(state, eta)?)),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct L1Witness {
    pub k: usize,
    /// 1-based block indices.
    pub blocks: Vec<usize>,
    pub functional: FunctionalId,
    pub support: Vec<u64>,
    #[serde(serialize_with = "ser_qs")]
    pub values: Vec<Q>,
    #[serde(with = "rational::serde_q")]
    pub delta: Q,
    #[serde(with = "rational::serde_q")]
    pub threshold: Q,
    pub method: WitnessMethod,
    pub lineage: Lineage,
}

fn ser_qs<S: serde::Serializer>(v: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(rational::fmt))
}

fn value_on(b: &Q, f: &Functional, u: &Vector) -> Q {
    norms::evaluate(b, f, u)
}

/// Whether `supp d* ∩ supp u = {i}` and `|d*(u)| ≥ threshold`.
fn qualifies(b: &Q, f: &Functional, u: &BlockVector, threshold: &Q) -> Option<Q> {
    let i = u.designated?;
    let mut meets = f.support().filter(|c| !u.vector.get(*c).is_zero());
    let only = meets.next() == Some(i) && meets.next().is_none();
    let v = value_on(b, f, &u.vector).abs();
    (only && &v >= threshold).then_some(v)
}

/// Re-checks a witness by direct evaluation.
pub fn validate_witness(state: &ConstructionState, basis: &BlockBasis, w: &L1Witness) -> std::result::Result<(), String> {
    let f = state.functional(w.functional).map_err(|e| e.to_string())?;
    if w.blocks.len() != w.k {
        return Err(format!("|F| = {} but k = {}", w.blocks.len(), w.k));
    }
    if f.support_len() > 2 * w.k + 1 {
        return Err(format!("support size {} exceeds {}", f.support_len(), 2 * w.k + 1));
    }
    for &n in &w.blocks {
        let u = basis.blocks.get(n - 1).ok_or_else(|| format!("block {n} does not exist"))?;
        if qualifies(state.b(), f, u, &w.threshold).is_none() {
            return Err(format!("block {n} fails the intersection or value condition"));
        }
    }
    Ok(())
}

fn find_composite(state: &ConstructionState, xi: FunctionalId, eta: FunctionalId, beyond: u64) -> Option<FunctionalId> {
    for n in (eta.level + 1)..=state.level_count() {
        let lvl = state.level(n).ok()?;
        for (idx, f) in lvl.composites().iter().enumerate() {
            if let Provenance::Composite { xi: a, eta: e, top, .. } = *f.provenance() {
                if a == xi && e == eta && top > beyond {
                    return Some(FunctionalId::new(n, idx));
                }
            }
        }
    }
    None
}

/// The inductive construction: start at the first block whose designated
/// coordinate is at least `2k − 3`, then repeatedly join the current
/// functional with the unit functional of the first block lying beyond the
/// levels used so far.
pub fn l1_witness_induction(
    state: &ConstructionState,
    basis: &BlockBasis,
    k: usize,
) -> Result<(Vec<usize>, FunctionalId)> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if basis.blocks.iter().any(|u| u.designated.is_none()) {
        return Err(Error::NoDesignated("every block needs a designated coordinate".into()));
    }
    let floor = (2 * k as u64).saturating_sub(3).max(1);
    let start = basis
        .blocks
        .iter()
        .position(|u| u.designated.is_some_and(|i| i >= floor))
        .ok_or_else(|| Error::InsufficientLevels(format!("no block with designated coordinate ≥ {floor}")))?;
    let i0 = basis.blocks[start].designated.expect("checked");
    let mut current = state.unit_id(i0).map_err(|_| Error::InsufficientLevels(format!("coordinate {i0} is not built")))?;
    let mut chosen = vec![start];
    while chosen.len() < k {
        let m = *chosen.last().expect("nonempty");
        let f = state.functional(current)?;
        let reach = f.max_support().unwrap_or(0).max(basis.blocks[m].range().1);
        let l = state
            .level_of(reach)
            .ok_or_else(|| Error::InsufficientLevels(format!("coordinate {reach} is not built")))?;
        let bound = state.level_end(l);
        let m1 = (m + 1..basis.len())
            .find(|&j| basis.blocks[j].range().0 > bound)
            .ok_or_else(|| Error::InsufficientLevels(format!("no block starts beyond max Δ_{l} = {bound}")))?;
        let i = basis.blocks[m1].designated.expect("checked");
        let eta = state
            .unit_id(i)
            .map_err(|_| Error::InsufficientLevels(format!("coordinate {i} is not built")))?;
        let beyond = basis.blocks[m1].range().1;
        current = find_composite(state, current, eta, beyond).ok_or_else(|| {
            Error::InsufficientLevels(format!("no registered composite of ({current}, e_{i}*) with top beyond {beyond}"))
        })?;
        chosen.push(m1);
    }
    Ok((chosen, current))
}

/// First built functional (in level, index order) that meets `k` blocks in
/// the required way with support at most `2k + 1`.
pub fn l1_witness_search(
    state: &ConstructionState,
    basis: &BlockBasis,
    delta: &Q,
    k: usize,
) -> Result<(Vec<usize>, FunctionalId)> {
    let threshold = delta * state.b();
    let locate = basis.locator();
    for (id, f) in state.functionals() {
        if f.support_len() > 2 * k + 1 || f.support_len() < k {
            continue;
        }
        let mut hit: Vec<usize> = f.support().filter_map(|c| locate.get(&c).map(|(n, _)| *n)).collect();
        hit.dedup();
        let good: Vec<usize> =
            hit.into_iter().filter(|&n| qualifies(state.b(), f, &basis.blocks[n], &threshold).is_some()).collect();
        if good.len() >= k {
            return Ok((good[..k].to_vec(), id));
        }
    }
    Err(Error::InsufficientLevels(format!("no built functional witnesses k = {k}")))
}

/// `(F, d*)` with `|F| = k`, `|supp d*| ≤ 2k + 1`, `supp d* ∩ supp u_n = {i_n}`
/// and `|d*(u_n)| ≥ δb` for `n ∈ F`. The inductive construction is tried
/// first; when the state is too shallow for it, built functionals are
/// searched directly.
pub fn l1_witness(state: &ConstructionState, basis: &BlockBasis, delta: Option<&Q>, k: usize) -> Result<L1Witness> {
    let delta = match delta {
        Some(d) if d.is_positive() => d.clone(),
        Some(d) => return Err(Error::InvalidInput(format!("delta must be positive, got {}", rational::fmt(d)))),
        None => basis.default_delta()?,
    };
    let (chosen, id, method) = match l1_witness_induction(state, basis, k) {
        Ok((c, id)) => (c, id, WitnessMethod::Induction),
        Err(Error::InsufficientLevels(why)) => match l1_witness_search(state, basis, &delta, k) {
            Ok((c, id)) => (c, id, WitnessMethod::Search),
            Err(_) => return Err(Error::InsufficientLevels(why)),
        },
        Err(e) => return Err(e),
    };
    let f = state.functional(id)?;
    let threshold = &delta * state.b();
    let values = chosen.iter().map(|&n| value_on(state.b(), f, &basis.blocks[n].vector).abs()).collect();
    let w = L1Witness {
        k,
        blocks: chosen.iter().map(|n| n + 1).collect(),
        functional: id,
        support: f.support().collect(),
        values,
        delta,
        threshold,
        method,
        lineage: lineage(state, id)?,
    };
    validate_witness(state, basis, &w).map_err(|e| Error::InsufficientLevels(format!("witness rejected: {e}")))?;
    Ok(w)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpreadingRow {
    pub k: usize,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<L1Witness>,
    /// `δ·b·k`.
    #[serde(with = "rational::serde_q")]
    pub lower_bound: Q,
    /// `Σ_{n ∈ F} |d*(u_n)|`, a lower bound for `‖Σ_{n ∈ F} ±u_n‖`.
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "ser_opt_q")]
    pub certified: Option<Q>,
    /// `Σ_{n ∈ F} ‖u_n‖ = k` for unit blocks.
    #[serde(with = "rational::serde_q")]
    pub upper_bound: Q,
}

fn ser_opt_q<S: serde::Serializer>(v: &Option<Q>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(q) => s.serialize_str(&rational::fmt(q)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpreadingTable {
    pub note: String,
    pub rows: Vec<SpreadingRow>,
}

/// Witnesses on the unit vector basis for `k = 1..=k_max`.
pub fn spreading_table(state: &ConstructionState, k_max: usize) -> Result<SpreadingTable> {
    let basis = BlockBasis::units(1..=state.max_coord())?;
    let one = Q::one();
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let lower_bound = state.b() * rational::int(k as i64);
        let upper_bound = rational::int(k as i64);
        match l1_witness(state, &basis, Some(&one), k) {
            Ok(w) => {
                let certified = Some(w.values.iter().fold(Q::zero(), |a, v| a + v));
                rows.push(SpreadingRow { k, status: "ok".into(), witness: Some(w), lower_bound, certified, upper_bound });
            }
            Err(Error::InsufficientLevels(_)) => rows.push(SpreadingRow {
                k,
                status: "insufficient levels".into(),
                witness: None,
                lower_bound,
                certified: None,
                upper_bound,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(SpreadingTable {
        note: format!("finite-stage evidence on {} levels; not an asymptotic statement", state.level_count()),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};

    fn state(levels: usize) -> ConstructionState {
        ConstructionState::build(q(1, 5), levels, None).unwrap()
    }

    #[test]
    fn series_constant_is_five() {
        assert_eq!(c0_series_constant(), int(5));
    }

    #[test]
    fn block_parsing_and_successiveness() {
        let b: BlockBasis = "e1,e2,e4".parse().unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.blocks()[2].designated(), Some(4));
        let v: BlockBasis = "1:1/2,2:-1;4:1/3".parse().unwrap();
        assert_eq!(v.blocks()[0].designated(), Some(2));
        assert_eq!(v.default_delta().unwrap(), q(1, 3));
        assert_eq!("e2,e1".parse::<BlockBasis>(), Err(Error::NotSuccessive(2, 1)));
        assert!("1:1,3:1;2:1".parse::<BlockBasis>().is_err());
        assert!("x1".parse::<BlockBasis>().is_err());
        let none = BlockBasis::new(vec![BlockVector::new(Vector::unit(1), None).unwrap()]).unwrap();
        assert!(matches!(none.default_delta(), Err(Error::NoDesignated(_))));
    }

    #[test]
    fn c0_examples() {
        let s = state(4);
        let single = BlockBasis::units([1]).unwrap();
        let r = c0_certify(&s, &single, 4).unwrap();
        assert!(r.passed());
        assert_eq!(r.series.observed.as_deref(), Some("1"));
        let flat: BlockBasis = "1:1;2:1/4".parse().unwrap();
        assert!(c0_certify(&s, &flat, 4).unwrap().passed());
        let steep: BlockBasis = "1:1;2:1/2".parse().unwrap();
        let r = c0_certify(&s, &steep, 4).unwrap();
        assert!(!r.flatness.passed);
        assert!(r.flatness.counterexample.unwrap().starts_with("block 2"));
    }

    #[test]
    fn witness_examples() {
        let s = state(4);
        let units = BlockBasis::units([1, 2]).unwrap();
        let w = l1_witness(&s, &units, Some(&int(1)), 1).unwrap();
        assert_eq!((w.blocks.clone(), w.support.clone()), (vec![1], vec![1]));
        let w = l1_witness(&s, &units, Some(&int(1)), 2).unwrap();
        assert_eq!(w.blocks, vec![1, 2]);
        assert_eq!(w.support, vec![1, 2, 3]);
        assert_eq!(w.values, vec![int(1), q(1, 5)]);
        assert_eq!(w.method, WitnessMethod::Induction);
        let shallow = state(2);
        assert!(matches!(l1_witness(&shallow, &units, Some(&int(1)), 2), Err(Error::InsufficientLevels(_))));
        let undesignated = BlockBasis::new(vec![BlockVector::new(Vector::unit(1), None).unwrap()]).unwrap();
        assert!(matches!(l1_witness(&s, &undesignated, Some(&int(1)), 1), Err(Error::NoDesignated(_))));
    }

    #[test]
    fn witness_falls_back_to_search() {
        let s = state(5);
        let basis = BlockBasis::units(1..=s.max_coord()).unwrap();
        assert!(matches!(l1_witness_induction(&s, &basis, 3), Err(Error::InsufficientLevels(_))));
        let w = l1_witness(&s, &basis, Some(&int(1)), 3).unwrap();
        assert_eq!(w.method, WitnessMethod::Search);
        assert!(validate_witness(&s, &basis, &w).is_ok());
        assert_eq!((w.blocks.clone(), w.support.clone()), (vec![1, 2, 3], vec![1, 2, 3]));
    }

    #[test]
    fn spreading_rows() {
        let s = state(4);
        let t = spreading_table(&s, 5).unwrap();
        assert_eq!(t.rows[0].lower_bound, q(1, 5));
        assert_eq!(t.rows[1].witness.as_ref().unwrap().values, vec![int(1), q(1, 5)]);
        assert_eq!(t.rows[4].status, "insufficient levels");
    }
}
