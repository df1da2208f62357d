//! Extension operators `T_n`, the projections `P_m`, and exact checks of
//! the bounds that make the completed space an L∞ space with an ℓ1 dual.
//!
//! `T_n` is stored as sparse exact columns. Row-sum norms of composed
//! functionals are computed from the transposed rows: for a functional `d*`,
//! `d*(I − P_m)T_n = Σ_{p ∈ supp d*, m < level(p) ≤ n} d*(p)·row_p`.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::normingset::{ConstructionState, FunctionalId};
use crate::norms::{self, RestrictedFunctional, Vector};
use crate::rational::{self, Q};
use crate::report::{CheckOutcome, Tracker};

/// Sorted `(coordinate, value)` pairs without zeros.
pub type Sparse = Vec<(u64, Q)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Constants {
    #[serde(with = "rational::serde_q")]
    pub rho: Q,
    #[serde(with = "rational::serde_q")]
    pub lambda: Q,
    #[serde(with = "rational::serde_q")]
    pub c: Q,
}

impl Constants {
    pub fn new(b: &Q) -> Result<Self> {
        rational::check_b(b)?;
        let one = Q::one();
        let half = rational::q(1, 2);
        let rho = &half * (&one + rational::int(3) * b / (&one - b));
        let lambda = (&one / (&one - &rho)) * (&one / (&one - b)) + &half;
        Ok(Constants { rho, lambda, c: rational::int(2) })
    }

    /// `‖d*T_n‖` for `d*` at levels `≤ n`.
    pub fn bound_full(&self) -> Q {
        Q::one() + &self.lambda / rational::int(2)
    }

    /// `‖d*(I − P_m)T_n‖` for `d*` at levels `≤ n`.
    pub fn bound_tail(&self) -> Q {
        Q::one() + rational::int(3) * &self.lambda / rational::int(2)
    }

    /// `‖d*(I − P_m)T_n‖` for every `d*`.
    pub fn bound_tail_any(&self, b: &Q) -> Q {
        self.bound_tail() / (Q::one() - b)
    }
}

/// `T_n`, columns `T_n e_j` for `j ∈ [1, max Δ_n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtensionOperator {
    n: usize,
    columns: Vec<Sparse>,
}

impl ExtensionOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> u64 {
        self.columns.len() as u64
    }

    pub fn column(&self, j: u64) -> Option<&Sparse> {
        j.checked_sub(1).and_then(|i| self.columns.get(i as usize))
    }

    pub fn nonzeros(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    #[doc(hidden)]
    pub fn tamper_column(&mut self, j: u64, col: Sparse) {
        self.columns[(j - 1) as usize] = col;
    }

    /// `T_n π_n x`.
    pub fn apply(&self, x: &Vector) -> Vector {
        let mut acc: BTreeMap<u64, Q> = BTreeMap::new();
        for (j, v) in x.iter() {
            if let Some(col) = self.column(j) {
                for (i, t) in col {
                    *acc.entry(*i).or_insert_with(Q::zero) += t * v;
                }
            }
        }
        Vector::from_pairs(acc)
    }

    /// `T_2`: the identity on `Δ_1 ∪ Δ_2`.
    pub fn initial(state: &ConstructionState) -> Result<Self> {
        if state.level_count() < 2 {
            return Err(Error::LevelNotBuilt { requested: 2, built: state.level_count() });
        }
        let dim = state.level_end(2);
        Ok(ExtensionOperator { n: 2, columns: (1..=dim).map(|j| vec![(j, Q::one())]).collect() })
    }

    /// `T_{n+1} x = T_n π_n x + Σ_{i ∈ Δ_{n+1}} [x(i) − ½ γ_i*(T_n π_n x)] e_i`.
    pub fn extend(&self, state: &ConstructionState) -> Result<Self> {
        let next = self.n + 1;
        let lvl = state.level(next)?;
        let b = state.b();
        let half = rational::q(1, 2);
        // coordinate p -> (i, γ_i*(p)) for tops i in Δ_{n+1}
        let mut incidence: HashMap<u64, Vec<(u64, Q)>> = HashMap::new();
        for i in lvl.lo..=lvl.hi {
            for &(p, k) in state.gamma(i)?.coords() {
                if p != i {
                    incidence.entry(p).or_default().push((i, rational::pow(b, k)));
                }
            }
        }
        let mut columns: Vec<Sparse> = self
            .columns
            .par_iter()
            .map(|col| {
                let mut acc: BTreeMap<u64, Q> = BTreeMap::new();
                for (p, v) in col {
                    if let Some(hits) = incidence.get(p) {
                        for (i, g) in hits {
                            *acc.entry(*i).or_insert_with(Q::zero) += g * v;
                        }
                    }
                }
                let mut out = col.clone();
                out.extend(acc.into_iter().filter(|(_, s)| !s.is_zero()).map(|(i, s)| (i, -(&half * s))));
                out
            })
            .collect();
        columns.extend((lvl.lo..=lvl.hi).map(|j| vec![(j, Q::one())]));
        Ok(ExtensionOperator { n: next, columns })
    }

    /// Rows of the matrix, `row_p(j) = (T_n e_j)(p)`, sorted by column.
    pub fn rows(&self) -> Vec<Sparse> {
        let mut rows: Vec<Sparse> = vec![Vec::new(); self.columns.len()];
        for (jm1, col) in self.columns.iter().enumerate() {
            for (p, v) in col {
                rows[(*p - 1) as usize].push((jm1 as u64 + 1, v.clone()));
            }
        }
        rows
    }
}

/// `[T_2, T_3, …, T_n]`.
pub fn build_chain(state: &ConstructionState, n: usize) -> Result<Vec<ExtensionOperator>> {
    if n < 2 || n > state.level_count() {
        return Err(Error::LevelNotBuilt { requested: n, built: state.level_count() });
    }
    let mut chain = vec![ExtensionOperator::initial(state)?];
    while chain.last().expect("nonempty").n < n {
        let next = chain.last().expect("nonempty").extend(state)?;
        chain.push(next);
    }
    Ok(chain)
}

pub fn build_t(state: &ConstructionState, n: usize) -> Result<ExtensionOperator> {
    Ok(build_chain(state, n)?.pop().expect("nonempty chain"))
}

/// `P_m T_n e_j = T_m π_m e_j` for every `m ≤ n` and every built `j`.
pub fn compatibility_check(state: &ConstructionState, chain: &[ExtensionOperator]) -> CheckOutcome {
    let mut t = Tracker::new("compatibility", "P_m T_n = T_m π_m");
    for (a, tn) in chain.iter().enumerate() {
        for tm in &chain[..=a] {
            let cut = state.level_end(tm.n);
            for j in 1..=tn.dim() {
                let lhs: Vec<&(u64, Q)> = tn.column(j).expect("in range").iter().filter(|(i, _)| *i <= cut).collect();
                let rhs: Vec<&(u64, Q)> = match tm.column(j) {
                    Some(c) => c.iter().collect(),
                    None => Vec::new(),
                };
                t.holds(lhs == rhs, || {
                    let first = lhs
                        .iter()
                        .zip(rhs.iter())
                        .find(|(x, y)| x != y)
                        .map(|(x, _)| x.0)
                        .or_else(|| lhs.get(rhs.len()).map(|x| x.0))
                        .or_else(|| rhs.get(lhs.len()).map(|x| x.0));
                    format!("m={} n={} column {j}: first mismatch at coordinate {first:?}", tm.n, tn.n)
                });
            }
        }
    }
    t.finish()
}

fn abs_sum(acc: &HashMap<u64, Q>) -> Q {
    acc.values().map(Q::abs).fold(Q::zero(), |a, v| a + v)
}

/// `‖d*(I − P_m)T_n‖` for `m = 0..=n`, where `d*` is given as
/// `(coordinate, coefficient)` pairs already restricted to `[1, max Δ_n]`.
pub fn tail_norms(state: &ConstructionState, rows: &[Sparse], n: usize, d: &[(u64, Q)]) -> Vec<Q> {
    let mut by_level: Vec<Vec<&(u64, Q)>> = vec![Vec::new(); n + 1];
    for pv in d {
        let lev = state.level_of(pv.0).expect("coordinate inside the built range");
        by_level[lev].push(pv);
    }
    let mut out = vec![Q::zero(); n + 1];
    let mut acc: HashMap<u64, Q> = HashMap::new();
    for m in (0..n).rev() {
        for (p, c) in &by_level[m + 1] {
            for (j, v) in &rows[(*p - 1) as usize] {
                *acc.entry(*j).or_insert_with(Q::zero) += c * v;
            }
        }
        out[m] = abs_sum(&acc);
    }
    out
}

/// Operator norm of a functional on `(ℝ^dim, ‖·‖_∞)`.
pub fn row_sum_norm(f: &[(u64, Q)]) -> Q {
    f.iter().map(|(_, v)| v.abs()).fold(Q::zero(), |a, v| a + v)
}

/// The four bounds for `T_n`: against every built functional and every
/// `m ≤ n`.
pub fn verify_dual_properties(state: &ConstructionState, op: &ExtensionOperator) -> Result<Vec<CheckOutcome>> {
    let consts = Constants::new(state.b())?;
    let b = state.b();
    let n = op.n;
    let cut = state.level_end(n);
    let rows = op.rows();

    // one representative per distinct restriction to [1, max Δ_n]
    let mut seen: HashSet<Vec<(u64, u32)>> = HashSet::new();
    let mut work: Vec<(FunctionalId, bool, Sparse)> = Vec::new();
    for (id, f) in state.functionals() {
        let proj: Vec<(u64, u32)> = f.coords().iter().filter(|(c, _)| *c <= cut).copied().collect();
        let low = id.level <= n;
        if low || seen.insert(proj.clone()) {
            let coefs = proj.iter().map(|&(c, k)| (c, rational::pow(b, k))).collect();
            work.push((id, low, coefs));
        }
    }

    let bounds = [consts.bound_full(), consts.bound_tail(), consts.bound_tail_any(b), consts.lambda.clone()];
    let fresh = || {
        [
            Tracker::new(format!("(1) ‖d*T_{n}‖, levels ≤ {n}"), "‖d*T_n‖ ≤ 1 + λ/2"),
            Tracker::new(format!("(2) ‖d*(I−P_m)T_{n}‖, levels ≤ {n}"), "‖d*(I−P_m)T_n‖ ≤ 1 + 3λ/2"),
            Tracker::new(format!("(3) ‖d*(I−P_m)T_{n}‖, all levels"), "‖d*(I−P_m)T_n‖ ≤ (1 + 3λ/2)Σb^k"),
            Tracker::new(format!("(4) max ‖d*T_{n}‖"), "‖T_n‖ ≤ λ"),
        ]
    };
    let partial: Vec<[Tracker; 4]> = work
        .par_chunks(256)
        .map(|chunk| {
            let mut tr = fresh();
            for (id, low, d) in chunk {
                let norms = tail_norms(state, &rows, n, d);
                if *low {
                    tr[0].at_most(&norms[0], &bounds[0], || format!("{id}"));
                    for (m, v) in norms.iter().enumerate() {
                        tr[1].at_most(v, &bounds[1], || format!("{id}, m={m}"));
                    }
                }
                for (m, v) in norms.iter().enumerate() {
                    tr[2].at_most(v, &bounds[2], || format!("{id}, m={m}"));
                }
                tr[3].at_most(&norms[0], &bounds[3], || format!("{id}"));
            }
            tr
        })
        .collect();
    let mut total = fresh();
    for tr in partial {
        for (acc, t) in total.iter_mut().zip(tr) {
            acc.merge(t);
        }
    }
    Ok(total.into_iter().map(Tracker::finish).collect())
}

/// `b_i* = ½ γ_i*∘P_{k−1} + e_i*` for `i ∈ Δ_k`, `k ≥ 3`; `e_i*` below.
pub fn b_star(state: &ConstructionState, i: u64) -> Result<RestrictedFunctional> {
    let k = state.level_of(i).ok_or(Error::CoordinateNotBuilt(i))?;
    if k <= 2 {
        return Ok(RestrictedFunctional::synthetic([(i, Q::one())]));
    }
    let b = state.b();
    let half = rational::q(1, 2);
    let cut = state.level_end(k - 1);
    let g = state.gamma(i)?;
    let mut coords: Vec<(u64, Q)> =
        g.coords().iter().filter(|(c, _)| *c <= cut).map(|&(c, e)| (c, &half * rational::pow(b, e))).collect();
    coords.push((i, Q::one()));
    Ok(RestrictedFunctional::synthetic(coords))
}

/// `b_i*(T_n e_j) = δ_ij` for all built `i, j ≤ max Δ_n`, checked one row
/// combination `b_i* T_n` at a time.
pub fn biorthogonality_check(state: &ConstructionState, op: &ExtensionOperator) -> Result<CheckOutcome> {
    let rows = op.rows();
    let dim = op.dim();
    let verdicts: Vec<Result<Option<String>>> = (1..=dim)
        .into_par_iter()
        .map(|i| {
            let bi = b_star(state, i)?;
            let mut acc: BTreeMap<u64, Q> = BTreeMap::new();
            for (p, c) in bi.coords() {
                for (j, v) in &rows[(p - 1) as usize] {
                    *acc.entry(*j).or_insert_with(Q::zero) += c * v;
                }
            }
            acc.retain(|_, v| !v.is_zero());
            let ok = acc.len() == 1 && acc.get(&i).is_some_and(Q::is_one);
            Ok((!ok).then(|| {
                acc.iter()
                    .find(|(j, v)| **j != i || !v.is_one())
                    .map(|(j, v)| format!("b_{i}*(T_n e_{j}) = {}", rational::fmt(v)))
                    .unwrap_or_else(|| format!("b_{i}*(T_n e_{i}) = 0"))
            }))
        })
        .collect();
    let mut t = Tracker::new(format!("biorthogonality, n={}", op.n), "b_i*(T_n e_j) = δ_ij");
    for v in verdicts {
        let v = v?;
        t.holds(v.is_none(), || v.clone().unwrap_or_default());
    }
    Ok(t.finish())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LowerEstimate {
    pub functional: FunctionalId,
    /// `I = [1, end]`; `None` means `I = ℕ`.
    pub interval_end: Option<u64>,
    #[serde(with = "rational::serde_q")]
    pub value: Q,
    pub pivot: u64,
}

/// `(d*|I)(y)`, with `I = [1, end]`.
pub fn restricted_value(b: &Q, f: &crate::normingset::Functional, end: Option<u64>, y: &Vector) -> Q {
    let mut acc = Q::zero();
    for &(c, k) in f.coords() {
        if end.is_none_or(|e| c <= e) {
            acc += rational::pow(b, k) * y.get(c);
        }
    }
    acc
}

/// For a pattern `x` with `‖x‖_∞ = 1` supported in `[1, max Δ_n]`, picks
/// `(d*, I)` with `|(d*|I)(T_n x)| ≥ ½` by the case split at the largest
/// coordinate `i_0` where `|x(i_0)| = 1`.
pub fn lower_estimate_check(state: &ConstructionState, op: &ExtensionOperator, x: &Vector) -> Result<LowerEstimate> {
    if x.sup_norm() != Q::one() {
        return Err(Error::InvalidInput(format!("pattern must have sup norm 1, got {}", rational::fmt(&x.sup_norm()))));
    }
    if x.max_support().is_some_and(|m| m > op.dim()) {
        return Err(Error::CoordinateNotBuilt(x.max_support().unwrap_or_default()));
    }
    let b = state.b();
    let i0 = x.iter().filter(|(_, v)| v.abs().is_one()).map(|(c, _)| c).max().expect("sup norm 1");
    let k = state.level_of(i0).ok_or(Error::CoordinateNotBuilt(i0))?;
    let tx = op.apply(x);
    let (id, end) = if k <= 2 {
        (state.unit_id(i0)?, None)
    } else {
        let g = state.gamma(i0)?;
        let y_val = restricted_value(b, g, Some(state.level_end(k - 1)), &tx);
        if y_val.abs() >= Q::one() {
            (state.gamma_id(i0)?, Some(state.level_end(k - 1)))
        } else {
            (state.gamma_id(i0)?, Some(state.level_end(k)))
        }
    };
    let value = restricted_value(b, state.functional(id)?, end, &tx);
    Ok(LowerEstimate { functional: id, interval_end: end, value, pivot: i0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct L1Equivalence {
    #[serde(with = "rational::serde_q")]
    pub sum_abs: Q,
    pub witness: Vector,
    #[serde(with = "rational::serde_q")]
    pub witness_value: Q,
    #[serde(with = "rational::serde_q")]
    pub witness_norm_upper: Q,
    /// `Σ|a_i| / λ`.
    #[serde(with = "rational::serde_q")]
    pub lower_threshold: Q,
    pub lower_certified: bool,
    /// `(C/2 + 1)·Σ|a_i|`.
    #[serde(with = "rational::serde_q")]
    pub upper_bound: Q,
    pub upper_samples: CheckOutcome,
}

/// `λ⁻¹Σ|a_i| ≤ ‖Σ a_i b_i*‖ ≤ (C/2 + 1)Σ|a_i|`: the lower side through the
/// explicit witness `x = T_n(sign a)`, the upper side as a necessary
/// condition over samples `y` whose certified norm is at most 1.
pub fn l1_equivalence_check(
    state: &ConstructionState,
    op: &ExtensionOperator,
    a: &Vector,
    samples: &[Vector],
    depth: u32,
) -> Result<L1Equivalence> {
    if a.max_support().is_some_and(|m| m > op.dim()) {
        return Err(Error::CoordinateNotBuilt(a.max_support().unwrap_or_default()));
    }
    let consts = Constants::new(state.b())?;
    let sum_abs = a.l1_norm();
    let combo: Vec<(u64, Q)> = {
        let mut acc: BTreeMap<u64, Q> = BTreeMap::new();
        for (i, ai) in a.iter() {
            for (c, v) in b_star(state, i)?.coords() {
                *acc.entry(c).or_insert_with(Q::zero) += ai * v;
            }
        }
        acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
    };
    let apply = |y: &Vector| -> Q { combo.iter().map(|(c, v)| v * y.get(*c)).fold(Q::zero(), |s, t| s + t) };

    let signs = Vector::from_pairs(a.iter().map(|(i, v)| (i, if v.is_positive() { Q::one() } else { -Q::one() })));
    let witness = op.apply(&signs);
    let witness_value = apply(&witness);
    let witness_norm_upper = norms::norm_bracket_at_depth(state, &witness, depth)?.upper;
    let lower_threshold = &sum_abs / &consts.lambda;
    let lower_certified = witness_value == sum_abs && witness_norm_upper <= consts.lambda;

    let upper_bound = (&consts.c / rational::int(2) + Q::one()) * &sum_abs;
    let mut t = Tracker::new("ℓ1 upper estimate on samples", "‖Σ a_i b_i*‖ ≤ (C/2 + 1)Σ|a_i|");
    for (si, y) in samples.iter().enumerate() {
        let upper = norms::norm_bracket_at_depth(state, y, depth)?.upper;
        if upper.is_zero() {
            continue;
        }
        let scaled = y.scale(&(Q::one() / &upper));
        t.at_most(&apply(&scaled).abs(), &upper_bound, || format!("sample {si} ({y})"));
    }
    Ok(L1Equivalence {
        sum_abs,
        witness,
        witness_value,
        witness_norm_upper,
        lower_threshold,
        lower_certified,
        upper_bound,
        upper_samples: t.finish(),
    })
}
