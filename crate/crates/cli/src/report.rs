//! JSON report envelope and the selftest cases.

use std::time::{SystemTime, UNIX_EPOCH};

use crystalwalk::kernels::TransitionTable;
use crystalwalk::verify::{CheckRegistry, Tolerance, VerificationReport, VerifyConfig, VerifyContext, VerifyError};
use crystalwalk::walker::{SimulationMode, TRAJECTORY_CAP};
use crystalwalk::{Mat3, RngSpec, Vec3};
use serde::Serialize;

pub use crystalwalk::verify::Status;

use crate::config::{builtin, BUILTINS};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub timestamp: u64,
    pub version: &'static str,
    pub check: String,
    pub table: TransitionTable,
    pub steps: u64,
    pub replicates: u64,
    pub seed: u64,
    pub lln_steps: u64,
    pub ledger_paths: u64,
    pub tolerance: Tolerance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub pass: usize,
    pub flagged: usize,
    pub fail: usize,
}

impl Totals {
    pub fn of(reports: &[VerificationReport]) -> Self {
        let mut t = Self::default();
        for r in reports {
            match r.status {
                Status::Pass => t.pass += 1,
                Status::Flagged => t.flagged += 1,
                Status::Fail => t.fail += 1,
            }
        }
        t
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub meta: Meta,
    pub totals: Totals,
    pub reports: Vec<VerificationReport>,
}

impl Report {
    pub fn new(check: &str, c: &VerifyConfig, reports: Vec<VerificationReport>) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            meta: Meta {
                timestamp,
                version: env!("CARGO_PKG_VERSION"),
                check: check.to_string(),
                table: c.table.clone(),
                steps: c.steps,
                replicates: c.replicates,
                seed: c.seed,
                lln_steps: c.lln_steps,
                ledger_paths: c.ledger_paths,
                tolerance: c.tolerance,
            },
            totals: Totals::of(&reports),
            reports,
        }
    }
}

fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    (a - b).abs().max()
}

fn exact(check: String, observed: f64, target: f64, eps: f64, detail: &str) -> VerificationReport {
    VerificationReport::compare(check, observed, target, eps).with_detail(detail)
}

/// Closed-form targets plus oracle, ledger and LLN checks for each builtin.
pub fn selftest_reports() -> Result<Vec<VerificationReport>, CliError> {
    let registry = CheckRegistry::builtin();
    let mut out = Vec::new();
    for name in BUILTINS {
        let table = builtin(name)?.table()?;
        let mut vc = VerifyConfig::new(table.clone());
        vc.steps = 10_000;
        vc.ledger_paths = 2;
        vc.lln_steps = 1 << 16;
        let eps = vc.tolerance.exact_eps;
        let ctx = VerifyContext::new(vc)?;
        let s = &ctx.summary;
        let gamma = &s.clt_covariance;

        match name {
            "symmetric-ice" => out.push(exact(
                format!("{name}/gamma"),
                max_abs_diff(gamma, &Mat3::from_diagonal(&Vec3::new(0.4, 0.4, 0.2))),
                0.0,
                eps,
                "Γ = diag(0.4, 0.4, 0.2)",
            )),
            "symmetric-graphite" => out.push(exact(
                format!("{name}/gamma"),
                max_abs_diff(gamma, &Mat3::from_diagonal(&Vec3::new(4.0 / 9.0, 4.0 / 9.0, 1.0 / 9.0))),
                0.0,
                eps,
                "Γ = diag(4/9, 4/9, 1/9)",
            )),
            "zigzag" => {
                out.push(exact(format!("{name}/gamma"), gamma.abs().max(), 0.0, eps, "Γ = 0"));
                let rec = ctx
                    .walker
                    .simulate(1001, RngSpec::new(1, 0), SimulationMode::Trajectory { cap: TRAJECTORY_CAP })
                    .map_err(VerifyError::from)?;
                let far = Vec3::new(table.geometry.a, 0.0, 0.0);
                let worst = rec
                    .states
                    .iter()
                    .flatten()
                    .map(|st| {
                        let x = st.position(&table.geometry);
                        x.norm().min((x - far).norm())
                    })
                    .fold(0.0, f64::max);
                out.push(exact(format!("{name}/two_point_orbit"), worst, 0.0, eps, "path stays on {0, (a,0,0)}"));
            }
            "vertical-ice" => {
                let horizontal = gamma.fixed_view::<2, 3>(0, 0).abs().max();
                out.push(exact(format!("{name}/gamma_horizontal"), horizontal, 0.0, eps, "Γ rows x, y vanish"));
                out.push(exact(format!("{name}/gamma_zz"), gamma[(2, 2)], 1.0, eps, "Γ_zz = h²"));
                out.push(exact(
                    format!("{name}/gamma_is_sigma2"),
                    max_abs_diff(gamma, &s.sigma2),
                    0.0,
                    eps,
                    "Γ = σ² at p = 1",
                ));
            }
            _ => {}
        }

        for check in ["oracles", "ledger", "lln"] {
            for mut r in registry.run(check, &ctx)? {
                r.check = format!("{name}/{}", r.check);
                out.push(r);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_count_statuses() {
        let r = vec![
            VerificationReport::compare("a", 0.0, 0.0, 1.0),
            VerificationReport::compare("b", 2.0, 0.0, 1.0),
            VerificationReport::compare("c", 2.0, 0.0, 1.0).flag_only(),
        ];
        assert_eq!(Totals::of(&r), Totals { pass: 1, flagged: 1, fail: 1 });
    }

    #[test]
    fn selftest_is_green() {
        let reports = selftest_reports().unwrap();
        let bad: Vec<_> = reports.iter().filter(|r| r.status == Status::Fail).collect();
        assert!(bad.is_empty(), "{bad:?}");
        assert!(reports.iter().any(|r| r.check == "zigzag/two_point_orbit"));
    }
}
