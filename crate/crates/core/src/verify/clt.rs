//! Central limit theorem at finite n: covariance entries, per-coordinate and
//! projected moments, and a pseudo-inverse Mahalanobis trace.

use nalgebra::SymmetricEigen;

use crate::asymptotics::{AsymptoticSummary, DEGENERACY_FLOOR};
use crate::rng::RngSpec;
use crate::verify::{Check, Tolerance, VerificationReport, VerifyContext, VerifyError, PROJECTION_STREAM};
use crate::walker::{BatchStatistics, ProjectionMoments};
use crate::{Mat3, Vec3};

/// Absolute floor on covariance comparisons, in units of `max(1, ‖Γ‖_max)`.
pub const COV_ABS_FLOOR: f64 = 2e-3;

const AXES: [&str; 3] = ["x", "y", "z"];

/// Coordinate axes followed by `extra` seeded uniform unit vectors.
pub fn projection_directions(seed: u64, extra: usize) -> Vec<Vec3> {
    let mut dirs = vec![Vec3::x(), Vec3::y(), Vec3::z()];
    let mut rng = RngSpec::new(seed, PROJECTION_STREAM).build();
    for _ in 0..extra {
        let z = 2.0 * rng.uniform() - 1.0;
        let phi = std::f64::consts::TAU * rng.uniform();
        let r = (1.0 - z * z).sqrt();
        dirs.push(Vec3::new(r * phi.cos(), r * phi.sin(), z));
    }
    dirs
}

fn cov_tolerance(target: f64, gamma: &Mat3, tol: &Tolerance) -> f64 {
    (tol.cov_rel * target.abs()).max(COV_ABS_FLOOR * gamma.abs().max().max(1.0))
}

fn moment_reports(
    out: &mut Vec<VerificationReport>,
    label: &str,
    m: &ProjectionMoments,
    variance: f64,
    tol: &Tolerance,
) {
    if variance <= DEGENERACY_FLOOR {
        return;
    }
    out.push(
        VerificationReport::compare(format!("clt_skewness/{label}"), m.skewness, 0.0, tol.moment_abs)
            .with_detail(format!("standardized skewness of {label}")),
    );
    out.push(
        VerificationReport::compare(format!("clt_kurtosis/{label}"), m.kurtosis, 3.0, tol.moment_abs)
            .with_detail(format!("kurtosis of {label}")),
    );
}

pub fn check_clt(batch: &BatchStatistics, s: &AsymptoticSummary, tol: &Tolerance, seed: u64) -> Vec<VerificationReport> {
    let gamma = &s.clt_covariance;
    let cov = &batch.cov_scaled;
    let mut out = Vec::new();

    for r in 0..3 {
        for c in r..3 {
            let target = gamma[(r, c)];
            out.push(
                VerificationReport::compare(
                    format!("clt_covariance/{}{}", AXES[r], AXES[c]),
                    cov[(r, c)],
                    target,
                    cov_tolerance(target, gamma, tol),
                )
                .with_detail(format!("Cov((S_n - n·lln)/√n)[{r},{c}] against Γ")),
            );
        }
    }

    for (a, m) in batch.coordinates.iter().enumerate() {
        moment_reports(&mut out, AXES[a], m, gamma[(a, a)], tol);
    }

    for (q, m) in batch.projections.iter().enumerate() {
        let u = m.direction;
        let target = (u.transpose() * gamma * u)[0];
        let label = format!("u{q}");
        out.push(
            VerificationReport::compare(format!("clt_projection/{label}"), m.variance, target, cov_tolerance(target, gamma, tol))
                .with_detail(format!("Var(uᵀT) against uᵀΓu, u = [{:.6}, {:.6}, {:.6}]", u.x, u.y, u.z)),
        );
        moment_reports(&mut out, &label, m, target, tol);
    }

    // Pseudo-inverse trace: tr(Γ⁺ Ĉ) ≈ rank on the range of Γ; Ĉ ≈ 0 on its
    // null space.
    let eig = SymmetricEigen::new(*gamma);
    let mut trace = 0.0;
    let mut rank = 0usize;
    let mut null_mass = 0.0;
    for q in 0..3 {
        let v = eig.eigenvectors.column(q).into_owned();
        let quad = (v.transpose() * cov * v)[0];
        if eig.eigenvalues[q] > DEGENERACY_FLOOR {
            rank += 1;
            trace += quad / eig.eigenvalues[q];
        } else {
            null_mass += quad.abs();
        }
    }
    if rank > 0 {
        out.push(
            VerificationReport::compare("clt_mahalanobis", trace, rank as f64, tol.cov_rel * rank as f64)
                .with_detail(format!("tr(Γ⁺Ĉ) against rank(Γ) = {rank}")),
        );
    }
    if rank < 3 {
        out.push(
            VerificationReport::compare("clt_null_space", null_mass, 0.0, COV_ABS_FLOOR * gamma.abs().max().max(1.0))
                .with_detail(format!("variance of T on the {}-dimensional null space of Γ", 3 - rank)),
        );
    }

    // Finite-n bias of the mean is O(1/√n); reported, never failed.
    let sqrt_n = (batch.n.max(1) as f64).sqrt();
    let mean_t = (batch.mean_s - s.lln_limit * batch.n as f64) / sqrt_n;
    let (worst, z) = (0..3)
        .map(|a| {
            let se = (gamma[(a, a)].max(DEGENERACY_FLOOR) / batch.replicates as f64).sqrt();
            (a, mean_t[a] / se)
        })
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .expect("three axes");
    out.push(
        VerificationReport::compare("clt_mean", z, 0.0, tol.stat_z)
            .with_detail(format!("largest mean z-score, axis {} (flag only)", AXES[worst]))
            .flag_only(),
    );

    for r in &mut out {
        r.seed = Some(seed);
        r.n = Some(batch.n);
        r.replicates = Some(batch.replicates);
    }
    out
}

pub struct CltCheck;

impl Check for CltCheck {
    fn name(&self) -> &'static str {
        "clt"
    }

    fn run(&self, ctx: &VerifyContext) -> Result<Vec<VerificationReport>, VerifyError> {
        let c = &ctx.config;
        let dirs = projection_directions(c.seed, 2);
        let batch = ctx.walker.run_batch(c.steps, c.replicates, RngSpec::new(c.seed, 0), &dirs)?;
        Ok(check_clt(&batch, &ctx.summary, &c.tolerance, c.seed))
    }
}
