//! Pathwise identities of the martingale ledger.

use rayon::prelude::*;

use crate::asymptotics::AsymptoticSummary;
use crate::lattice::LatticeKind;
use crate::model::WalkModel;
use crate::rng::RngSpec;
use crate::verify::{
    compare_worst, worst_by_check, Check, Tolerance, VerificationReport, VerifyContext, VerifyError,
    LEDGER_STREAM_BASE,
};
use crate::walker::{SimulationMode, WalkRecord, Walker};

const AXES: [&str; 3] = ["x", "y", "z"];

/// Names of the bracket blocks, in joint order `(M, N...)`.
fn block_names(kind: LatticeKind) -> &'static [&'static str] {
    match kind {
        LatticeKind::Ice1h => &["M", "N"],
        LatticeKind::Graphite2h => &["M", "NJ", "NK"],
    }
}

/// Conventional name of the `(a, b)` block, e.g. `C` for `<M, N^J>`.
fn cross_name(kind: LatticeKind, a: usize, b: usize) -> String {
    match (kind, a, b) {
        (_, 0, 0) => "M".into(),
        (LatticeKind::Ice1h, 0, 1) => "C".into(),
        (LatticeKind::Ice1h, 1, 1) => "N".into(),
        (LatticeKind::Graphite2h, 0, 1) => "C".into(),
        (LatticeKind::Graphite2h, 0, 2) => "E".into(),
        (LatticeKind::Graphite2h, 1, 1) => "NJ".into(),
        (LatticeKind::Graphite2h, 1, 2) => "D".into(),
        (LatticeKind::Graphite2h, 2, 2) => "NK".into(),
        _ => format!("{}_{}", block_names(kind)[a], block_names(kind)[b]),
    }
}

/// Row/column range of block `b` in the joint bracket.
fn span(b: usize) -> std::ops::Range<usize> {
    if b == 0 {
        0..3
    } else {
        2 + b..3 + b
    }
}

pub fn check_ledger(
    record: &WalkRecord,
    s: &AsymptoticSummary,
    model: &dyn WalkModel,
    tol: &Tolerance,
) -> Vec<VerificationReport> {
    let eps = tol.exact_eps;
    let n = record.steps;
    let run = |r: VerificationReport| r.with_run(Some(record.spec.seed), Some(n), None);
    let mut out = Vec::new();
    let led = &record.ledger;

    let sum = led.m + led.r;
    out.push(run(compare_worst("ledger_decomposition", record.position.as_slice(), sum.as_slice(), eps, |q| {
        format!("S_n = M_n + R_n, {}", AXES[q])
    })));

    let r_closed = model.closed_centering(s, n, &record.previous);
    out.push(run(compare_worst("ledger_centering", led.r.as_slice(), r_closed.as_slice(), eps, |q| {
        format!("R_n closed form, {}", AXES[q])
    })));

    let closed = model.closed_joint_bracket(s, n, &record.previous);
    let blocks = block_names(record.kind).len();
    for a in 0..blocks {
        for b in a..blocks {
            let (ra, rb) = (span(a), span(b));
            let mut obs = Vec::new();
            let mut tgt = Vec::new();
            let mut idx = Vec::new();
            for r in ra.clone() {
                for c in rb.clone() {
                    if a == b && c < r {
                        continue;
                    }
                    obs.push(led.bracket[(r, c)]);
                    tgt.push(closed[(r, c)]);
                    idx.push((r, c));
                }
            }
            let name = cross_name(record.kind, a, b);
            out.push(run(compare_worst(&format!("ledger_bracket_{name}"), &obs, &tgt, eps, |q| {
                format!("<{name}>_n entry {:?}", idx[q])
            })));
        }
    }

    if record.kind == LatticeKind::Graphite2h {
        let (j, k) = (led.bracket[(3, 3)], led.bracket[(4, 4)]);
        out.push(run(
            VerificationReport::compare("ledger_nj_equals_nk", j, k, eps).with_detail("<N^J>_n = <N^K>_n"),
        ));
        let expected = if n.is_multiple_of(2) { 1.0 } else { 0.0 };
        out.push(run(
            VerificationReport::compare("ledger_color_parity", record.counters.i as f64, expected, 0.0)
                .with_detail("I_n = 1 for even n, 0 for odd n"),
        ));
    }
    out
}

/// Runs `paths` ledger walks of `steps` steps on streams from
/// [`LEDGER_STREAM_BASE`] and keeps the worst report per identity.
pub fn check_ledger_paths(
    walker: &Walker,
    s: &AsymptoticSummary,
    model: &dyn WalkModel,
    steps: u64,
    paths: u64,
    seed: u64,
    tol: &Tolerance,
) -> Result<Vec<VerificationReport>, VerifyError> {
    let per_path: Result<Vec<Vec<VerificationReport>>, VerifyError> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let rec = walker.simulate(steps, RngSpec::new(seed, LEDGER_STREAM_BASE + p), SimulationMode::Summary)?;
            Ok(check_ledger(&rec, s, model, tol))
        })
        .collect();
    let mut worst = worst_by_check(per_path?.into_iter().flatten());
    for r in &mut worst {
        r.replicates = Some(paths);
    }
    Ok(worst)
}

pub struct LedgerCheck;

impl Check for LedgerCheck {
    fn name(&self) -> &'static str {
        "ledger"
    }

    fn run(&self, ctx: &VerifyContext) -> Result<Vec<VerificationReport>, VerifyError> {
        let c = &ctx.config;
        check_ledger_paths(&ctx.walker, &ctx.summary, ctx.model, c.steps, c.ledger_paths.max(1), c.seed, &c.tolerance)
    }
}
