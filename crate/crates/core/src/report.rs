//! Structured check results shared by every verifier.

use serde::Serialize;

use crate::rational::{self, Q};

/// One verified claim: exact extreme value against its bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub anchor: String,
    pub passed: bool,
    pub cases: u64,
    /// Largest observed left-hand side, `p/q`.
    pub observed: Option<String>,
    /// The bound it was compared against, `p/q`.
    pub bound: Option<String>,
    pub counterexample: Option<String>,
}

/// Accumulates cases for a single check, keeping the extreme observation
/// and the first failure.
#[derive(Debug, Clone)]
pub struct Tracker {
    check: String,
    anchor: String,
    cases: u64,
    observed: Option<Q>,
    bound: Option<Q>,
    failure: Option<String>,
}

impl Tracker {
    pub fn new(check: impl Into<String>, anchor: impl Into<String>) -> Self {
        Tracker { check: check.into(), anchor: anchor.into(), cases: 0, observed: None, bound: None, failure: None }
    }

    /// Records `value <= bound`.
    pub fn at_most(&mut self, value: &Q, bound: &Q, ctx: impl FnOnce() -> String) {
        self.cases += 1;
        if self.observed.as_ref().is_none_or(|o| value > o) {
            self.observed = Some(value.clone());
            self.bound = Some(bound.clone());
        }
        if value > bound && self.failure.is_none() {
            self.failure = Some(format!("{}: {} > {}", ctx(), rational::fmt(value), rational::fmt(bound)));
        }
    }

    /// Records `value >= bound`; the smallest value is kept as the extreme.
    pub fn at_least(&mut self, value: &Q, bound: &Q, ctx: impl FnOnce() -> String) {
        self.cases += 1;
        if self.observed.as_ref().is_none_or(|o| value < o) {
            self.observed = Some(value.clone());
            self.bound = Some(bound.clone());
        }
        if value < bound && self.failure.is_none() {
            self.failure = Some(format!("{}: {} < {}", ctx(), rational::fmt(value), rational::fmt(bound)));
        }
    }

    pub fn holds(&mut self, ok: bool, ctx: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok && self.failure.is_none() {
            self.failure = Some(ctx());
        }
    }

    pub fn merge(&mut self, other: Tracker) {
        self.cases += other.cases;
        if let Some(o) = other.observed {
            // callers merge trackers of the same direction; keep the larger
            if self.observed.as_ref().is_none_or(|s| &o > s) {
                self.observed = Some(o);
                self.bound = other.bound;
            }
        }
        if self.failure.is_none() {
            self.failure = other.failure;
        }
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn finish(self) -> CheckOutcome {
        CheckOutcome {
            check: self.check,
            anchor: self.anchor,
            passed: self.failure.is_none(),
            cases: self.cases,
            observed: self.observed.as_ref().map(rational::fmt),
            bound: self.bound.as_ref().map(rational::fmt),
            counterexample: self.failure,
        }
    }
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}

/// Markdown table rendering used by `--format md`.
pub fn to_markdown(outcomes: &[CheckOutcome]) -> String {
    let mut s = String::from("| check | anchor | verdict | cases | observed | bound | counterexample |\n");
    s.push_str("|---|---|---|---|---|---|---|\n");
    let cell = |t: &str| t.replace('|', "\\|");
    for o in outcomes {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            cell(&o.check),
            cell(&o.anchor),
            if o.passed { "PASS" } else { "FAIL" },
            o.cases,
            o.observed.as_deref().unwrap_or("-"),
            o.bound.as_deref().unwrap_or("-"),
            cell(o.counterexample.as_deref().unwrap_or("-")),
        ));
    }
    s
}
