//! Verification harness.
//!
//! Exact checks ([`oracles`], [`ledger`]) compare two floating evaluations
//! of the same algebra; statistical checks ([`lln`], [`clt`]) compare
//! Monte-Carlo estimates against the closed-form limits. Every check is a
//! [`Check`] object in a [`CheckRegistry`] and yields
//! [`VerificationReport`]s.

pub mod clt;
pub mod fault;
pub mod ledger;
pub mod lln;
pub mod oracles;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{AsymptoticSummary, AsymptoticsError};
use crate::kernels::TransitionTable;
use crate::model::{model_for, WalkModel};
use crate::walker::{WalkError, Walker};

/// First stream id used for ledger paths.
pub const LEDGER_STREAM_BASE: u64 = 1 << 62;
/// Stream id of the single long LLN path.
pub const LLN_STREAM: u64 = 1 << 63;
/// Stream id for drawing random projection directions.
pub const PROJECTION_STREAM: u64 = (1 << 63) + (1 << 62);

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Asymptotics(#[from] AsymptoticsError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("tolerance `{key}` must be positive, got {value}")]
    Tolerance { key: String, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    /// Pathwise algebraic identities.
    pub exact_eps: f64,
    /// z-bound for mean tests.
    pub stat_z: f64,
    /// Relative bound on covariance entries.
    pub cov_rel: f64,
    /// Bound on |skewness| and |kurtosis - 3|.
    pub moment_abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { exact_eps: 1e-9, stat_z: 4.0, cov_rel: 0.05, moment_abs: 0.1 }
    }
}

impl Tolerance {
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), VerifyError> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(VerifyError::Tolerance { key: key.to_string(), value });
        }
        let slot = match key {
            "exact_eps" => &mut self.exact_eps,
            "stat_z" => &mut self.stat_z,
            "cov_rel" => &mut self.cov_rel,
            "moment_abs" => &mut self.moment_abs,
            _ => return Err(VerifyError::Tolerance { key: key.to_string(), value }),
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub status: Status,
    pub observed: f64,
    pub target: f64,
    pub tolerance: f64,
    pub seed: Option<u64>,
    pub n: Option<u64>,
    pub replicates: Option<u64>,
    pub detail: String,
}

impl VerificationReport {
    /// Pass iff `|observed - target| <= tolerance`.
    pub fn compare(check: impl Into<String>, observed: f64, target: f64, tolerance: f64) -> Self {
        // no negative zeros in reports
        let (observed, target) = (observed + 0.0, target + 0.0);
        let ok = (observed - target).abs() <= tolerance;
        Self {
            check: check.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            observed,
            target,
            tolerance,
            seed: None,
            n: None,
            replicates: None,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn with_run(mut self, seed: Option<u64>, n: Option<u64>, replicates: Option<u64>) -> Self {
        self.seed = seed;
        self.n = n;
        self.replicates = replicates;
        self
    }

    /// Downgrades a failure to a flag.
    pub fn flag_only(mut self) -> Self {
        if self.status == Status::Fail {
            self.status = Status::Flagged;
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }

    /// `|observed - target| / tolerance`; how close to failing.
    pub fn severity(&self) -> f64 {
        let d = (self.observed - self.target).abs();
        if self.tolerance > 0.0 {
            d / self.tolerance
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Largest-difference comparison of two equally shaped slices. Reports the
/// worst entry, labelled by `label(index)`.
pub(crate) fn compare_worst(
    check: &str,
    observed: &[f64],
    target: &[f64],
    tolerance: f64,
    label: impl Fn(usize) -> String,
) -> VerificationReport {
    debug_assert_eq!(observed.len(), target.len());
    let worst = (0..observed.len())
        .max_by(|&a, &b| {
            let da = (observed[a] - target[a]).abs();
            let db = (observed[b] - target[b]).abs();
            da.total_cmp(&db)
        })
        .unwrap_or(0);
    match observed.get(worst) {
        Some(&o) => VerificationReport::compare(check, o, target[worst], tolerance).with_detail(label(worst)),
        None => VerificationReport::compare(check, 0.0, 0.0, tolerance),
    }
}

/// Keeps, for every check name, the most severe report, preserving first
/// appearance order.
pub fn worst_by_check(reports: impl IntoIterator<Item = VerificationReport>) -> Vec<VerificationReport> {
    let mut order: Vec<String> = Vec::new();
    let mut best: BTreeMap<String, VerificationReport> = BTreeMap::new();
    for r in reports {
        match best.get(&r.check) {
            None => {
                order.push(r.check.clone());
                best.insert(r.check.clone(), r);
            }
            Some(prev) => {
                let rank = |x: &VerificationReport| (x.status == Status::Fail, x.status == Status::Flagged);
                if rank(&r) > rank(prev) || (rank(&r) == rank(prev) && r.severity() > prev.severity()) {
                    best.insert(r.check.clone(), r);
                }
            }
        }
    }
    order.into_iter().map(|k| best.remove(&k).expect("present")).collect()
}

/// Run parameters shared by all checks.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub table: TransitionTable,
    /// Steps per replicate (CLT) and per ledger path.
    pub steps: u64,
    pub replicates: u64,
    pub seed: u64,
    pub tolerance: Tolerance,
    /// Length of the single LLN path.
    pub lln_steps: u64,
    pub ledger_paths: u64,
}

impl VerifyConfig {
    pub fn new(table: TransitionTable) -> Self {
        Self {
            table,
            steps: 10_000,
            replicates: 10_000,
            seed: 1,
            tolerance: Tolerance::default(),
            lln_steps: 1 << 22,
            ledger_paths: 8,
        }
    }
}

/// Everything a check needs, built once per run.
pub struct VerifyContext {
    pub config: VerifyConfig,
    pub walker: Walker,
    pub model: &'static dyn WalkModel,
    pub summary: AsymptoticSummary,
}

impl VerifyContext {
    pub fn new(config: VerifyConfig) -> Result<Self, VerifyError> {
        let model = model_for(config.table.kind);
        let summary = model.summary(&config.table)?;
        let walker = Walker::new(&config.table).map_err(WalkError::from)?;
        Ok(Self { config, walker, model, summary })
    }
}

pub trait Check: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, ctx: &VerifyContext) -> Result<Vec<VerificationReport>, VerifyError>;
}

/// Ordered, name-indexed checks.
pub struct CheckRegistry {
    checks: Vec<Box<dyn Check>>,
}

impl CheckRegistry {
    pub fn empty() -> Self {
        Self { checks: Vec::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(oracles::OracleCheck));
        r.register(Box::new(ledger::LedgerCheck));
        r.register(Box::new(lln::LlnCheck));
        r.register(Box::new(clt::CltCheck));
        r
    }

    /// Appends a check, replacing an existing one of the same name in place.
    pub fn register(&mut self, check: Box<dyn Check>) {
        match self.checks.iter().position(|c| c.name() == check.name()) {
            Some(i) => self.checks[i] = check,
            None => self.checks.push(check),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.checks.iter().map(|c| c.name()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&dyn Check> {
        self.checks.iter().find(|c| c.name() == name).map(|c| c.as_ref())
    }

    pub fn run(&self, name: &str, ctx: &VerifyContext) -> Result<Vec<VerificationReport>, VerifyError> {
        self.get(name)
            .ok_or_else(|| VerifyError::UnknownCheck(name.to_string()))?
            .run(ctx)
    }

    pub fn run_all(&self, ctx: &VerifyContext) -> Result<Vec<VerificationReport>, VerifyError> {
        let mut out = Vec::new();
        for c in &self.checks {
            out.extend(c.run(ctx)?);
        }
        Ok(out)
    }
}

impl Default for CheckRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_keys() {
        let mut t = Tolerance::default();
        t.set("cov_rel", 0.1).unwrap();
        assert_eq!(t.cov_rel, 0.1);
        assert!(t.set("cov_rel", 0.0).is_err());
        assert!(t.set("bogus", 1.0).is_err());
    }

    #[test]
    fn worst_keeps_failures_and_order() {
        let a = VerificationReport::compare("x", 1.0, 1.0, 0.1);
        let b = VerificationReport::compare("y", 1.0, 1.05, 0.1);
        let c = VerificationReport::compare("x", 1.0, 2.0, 0.1);
        let d = VerificationReport::compare("y", 1.0, 1.09, 0.1);
        let w = worst_by_check([a, b, c.clone(), d.clone()]);
        assert_eq!(w, vec![c, d]);
    }

    #[test]
    fn flags_do_not_fail() {
        let r = VerificationReport::compare("z", 5.0, 0.0, 1.0).flag_only();
        assert_eq!(r.status, Status::Flagged);
        assert!(r.passed());
        assert_eq!(VerificationReport::compare("z", 0.0, 0.0, 0.0).severity(), 0.0);
    }

    #[test]
    fn registry_order() {
        let r = CheckRegistry::builtin();
        assert_eq!(r.names(), vec!["oracles", "ledger", "lln", "clt"]);
        assert!(r.get("nope").is_none());
    }
}
