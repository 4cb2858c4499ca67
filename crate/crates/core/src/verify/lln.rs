//! Strong law with rate along one long path.
//!
//! The squared error `‖S_n/n - lln_limit‖²` is compared at dyadic times with
//! `RATE_SAFETY · tr(Γ) · log(n)/n + c²/n² + exact_eps`, where
//! `c = ‖θ‖ + ‖m‖ + ‖ρ‖` bounds the oscillating part of the centering
//! (the only error left when Γ = 0). Only the final checkpoint can fail;
//! earlier exceedances are flagged.

use crate::asymptotics::{counter_j_mean, counter_j_variance, lln_rate_bound, AsymptoticSummary};
use crate::lattice::LatticeKind;
use crate::rng::RngSpec;
use crate::verify::{Check, Status, Tolerance, VerificationReport, VerifyContext, VerifyError, LLN_STREAM};
use crate::walker::{Checkpoint, Walker};

/// Constant in front of `tr(Γ) log(n)/n`.
pub const RATE_SAFETY: f64 = 25.0;

/// `2, 4, 8, ...` up to `n`, with `n` itself appended when it is not a power
/// of two.
pub fn dyadic_checkpoints(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut t = 2u64;
    while t <= n {
        out.push(t);
        match t.checked_mul(2) {
            Some(next) => t = next,
            None => break,
        }
    }
    if n >= 2 && out.last() != Some(&n) {
        out.push(n);
    }
    out
}

pub fn check_lln(
    checkpoints: &[Checkpoint],
    s: &AsymptoticSummary,
    tol: &Tolerance,
    seed: u64,
) -> Result<Vec<VerificationReport>, VerifyError> {
    let Some(last) = checkpoints.last() else {
        return Ok(Vec::new());
    };
    let trace = s.clt_covariance.trace();
    let swing = s.theta.norm() + s.m.map_or(0.0, |m| m.norm()) + s.rho.map_or(0.0, |r| r.norm());
    let mut exceed = Vec::new();
    let mut evaluate = |cp: &Checkpoint| -> Result<(f64, f64), VerifyError> {
        let n = cp.n as f64;
        let err = (cp.position / n - s.lln_limit).norm_squared();
        let bound = RATE_SAFETY * trace * lln_rate_bound(cp.n)? + (swing / n).powi(2) + tol.exact_eps;
        if err > bound {
            exceed.push(cp.n);
        }
        Ok((err, bound))
    };
    for cp in &checkpoints[..checkpoints.len() - 1] {
        evaluate(cp)?;
    }
    let (err, bound) = evaluate(last)?;
    let mut rate = VerificationReport {
        check: "lln_rate".into(),
        status: if err <= bound { Status::Pass } else { Status::Fail },
        observed: err,
        target: 0.0,
        tolerance: bound,
        seed: Some(seed),
        n: Some(last.n),
        replicates: Some(1),
        detail: format!("squared error at n = {} against {RATE_SAFETY}·tr(Γ)·log(n)/n + c²/n² + exact_eps", last.n),
    };
    let early: Vec<u64> = exceed.iter().copied().filter(|&t| t != last.n).collect();
    if rate.status == Status::Pass && !early.is_empty() {
        rate.status = Status::Flagged;
        rate.detail.push_str(&format!("; exceeded at earlier checkpoints {early:?}"));
    }
    let mut out = vec![rate];

    if s.kind == LatticeKind::Graphite2h {
        let n = last.n as f64;
        let se = (counter_j_variance(s.p) / n).sqrt();
        let tolerance = tol.stat_z * se + 2.0 / n;
        out.push(
            VerificationReport::compare("lln_counter_j", last.counters.j as f64 / n, counter_j_mean(s.p), tolerance)
                .with_run(Some(seed), Some(last.n), Some(1))
                .with_detail(format!("J_n/n against p/(2-p), stat_z·se + 2/n with se = {se:.3e}")),
        );
    }
    Ok(out)
}

/// Simulates the LLN path on [`LLN_STREAM`] and checks it.
pub fn run_lln(
    walker: &Walker,
    s: &AsymptoticSummary,
    n: u64,
    seed: u64,
    tol: &Tolerance,
) -> Result<Vec<VerificationReport>, VerifyError> {
    let times = dyadic_checkpoints(n);
    let cps = walker.checkpoints(&times, RngSpec::new(seed, LLN_STREAM))?;
    check_lln(&cps, s, tol, seed)
}

pub struct LlnCheck;

impl Check for LlnCheck {
    fn name(&self) -> &'static str {
        "lln"
    }

    fn run(&self, ctx: &VerifyContext) -> Result<Vec<VerificationReport>, VerifyError> {
        let c = &ctx.config;
        run_lln(&ctx.walker, &ctx.summary, c.lln_steps, c.seed, &c.tolerance)
    }
}
