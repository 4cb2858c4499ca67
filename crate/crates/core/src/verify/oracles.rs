//! Brute-force conditional moments over increment atoms against the
//! class-resolved closed forms.

use crate::asymptotics::AsymptoticSummary;
use crate::kernels::{
    conditional_cross_moment, conditional_mean, conditional_second_moment, conditional_sign_mean,
    joint_conditional_covariance, TransitionTable,
};
use crate::model::{model_for, WalkModel};
use crate::verify::{compare_worst, Check, Tolerance, VerificationReport, VerifyContext, VerifyError};

const AXES: [&str; 3] = ["x", "y", "z"];

fn mat_label(dim: usize) -> impl Fn(usize) -> String {
    move |q| format!("[{},{}]", q / dim, q % dim)
}

/// Oracle checks against the table's own summary.
pub fn check_oracles(table: &TransitionTable, tol: &Tolerance) -> Result<Vec<VerificationReport>, VerifyError> {
    let model = model_for(table.kind);
    let summary = model.summary(table)?;
    Ok(check_oracles_with(table, &summary, model, tol))
}

/// Oracle checks against an arbitrary summary (used for fault injection).
pub fn check_oracles_with(
    table: &TransitionTable,
    s: &AsymptoticSummary,
    model: &dyn WalkModel,
    tol: &Tolerance,
) -> Vec<VerificationReport> {
    let eps = tol.exact_eps;
    let mut out = Vec::new();
    for &c in model.classes() {
        let cl = c.label();
        let bm = conditional_mean(table, c);
        let cm = model.closed_mean(s, c);
        out.push(compare_worst(&format!("oracle_mean/{cl}"), bm.as_slice(), cm.as_slice(), eps, |q| {
            format!("class {cl} mean {}", AXES[q])
        }));

        let b2 = conditional_second_moment(table, c).transpose();
        let c2 = model.closed_second_moment(s, c).transpose();
        out.push(compare_worst(&format!("oracle_second_moment/{cl}"), b2.as_slice(), c2.as_slice(), eps, |q| {
            format!("class {cl} second moment {}", mat_label(3)(q))
        }));

        for &sign in model.signs() {
            let name = format!("{sign:?}").to_lowercase();
            let bs = conditional_sign_mean(table, c, sign);
            let cs = model.closed_sign_mean(s, c, sign);
            out.push(
                VerificationReport::compare(format!("oracle_sign_mean/{name}/{cl}"), bs, cs, eps)
                    .with_detail(format!("class {cl} E[{name}']")),
            );
            let bx = conditional_cross_moment(table, c, sign);
            let cx = model.closed_cross_moment(s, c, sign);
            out.push(compare_worst(
                &format!("oracle_cross_moment/{name}/{cl}"),
                bx.as_slice(),
                cx.as_slice(),
                eps,
                |q| format!("class {cl} E[xi' {name}'] {}", AXES[q]),
            ));
        }

        let bj = joint_conditional_covariance(table, c, model.tracked_signs()).transpose();
        let cj = model.closed_bracket_increment(s, c).transpose();
        let dim = bj.nrows();
        out.push(compare_worst(&format!("oracle_bracket_increment/{cl}"), bj.as_slice(), cj.as_slice(), eps, |q| {
            format!("class {cl} joint bracket increment {}", mat_label(dim)(q))
        }));
    }
    out
}

pub struct OracleCheck;

impl Check for OracleCheck {
    fn name(&self) -> &'static str {
        "oracles"
    }

    fn run(&self, ctx: &VerifyContext) -> Result<Vec<VerificationReport>, VerifyError> {
        Ok(check_oracles_with(&ctx.config.table, &ctx.summary, ctx.model, &ctx.config.tolerance))
    }
}
