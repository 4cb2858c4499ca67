//! Closed-form limits: drift vectors, step covariances, CLT covariance and
//! the limiting bracket matrix of the joint martingale.
//!
//! Γ is evaluated twice: directly from the component formulas, and as
//! `AᵀΛA` from the bracket limit. Tests hold the two together.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::kernels::{HorizontalRows, KernelError, TransitionTable};
use crate::lattice::LatticeKind;
use crate::matrix_json;
use crate::{Mat3, Vec3};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Eigenvalue floor below which Γ is treated as singular.
pub const DEGENERACY_FLOOR: f64 = 1e-10;
/// Width of the window below p = 1 where the ice Γ formula is flagged.
pub const CANCELLATION_WINDOW: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("expected a {expected} table, got {got}")]
    WrongKind { expected: LatticeKind, got: LatticeKind },
    #[error("rate bound needs n >= 2, got {0}")]
    Domain(u64),
}

/// Row statistics, indexed by [`crate::VertexClass::index`].
///
/// `s` and `t` are only populated for graphite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedRates {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
}

impl DerivedRates {
    pub fn of(table: &TransitionTable) -> Self {
        let rows: Vec<[f64; 3]> = match &table.horizontal {
            HorizontalRows::Ice(r) => r.to_vec(),
            // class index i + 2j
            HorizontalRows::Graphite(r) => vec![r[0][0], r[1][0], r[0][1], r[1][1]],
        };
        let u: Vec<f64> = rows.iter().map(|r| r[1] + r[2]).collect();
        let v: Vec<f64> = rows.iter().map(|r| r[1] - r[2]).collect();
        let (s, t) = match table.kind {
            LatticeKind::Ice1h => (Vec::new(), Vec::new()),
            LatticeKind::Graphite2h => (
                u.iter().map(|u| u * (1.0 - u)).collect(),
                u.iter().zip(&v).map(|(u, v)| v * (u - 1.0)).collect(),
            ),
        };
        Self { u, v, s, t }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticSummary {
    pub kind: LatticeKind,
    pub p: f64,
    pub alpha: f64,
    #[serde(serialize_with = "matrix_json::vec3")]
    pub mu: Vec3,
    #[serde(serialize_with = "matrix_json::vec3")]
    pub theta: Vec3,
    #[serde(serialize_with = "matrix_json::mat3")]
    pub sigma2: Mat3,
    #[serde(serialize_with = "matrix_json::mat3")]
    pub nu: Mat3,
    #[serde(serialize_with = "matrix_json::vec3")]
    pub zeta: Vec3,
    #[serde(serialize_with = "matrix_json::opt_vec3")]
    pub m: Option<Vec3>,
    #[serde(serialize_with = "matrix_json::opt_vec3")]
    pub rho: Option<Vec3>,
    #[serde(serialize_with = "matrix_json::opt_mat3")]
    pub gamma: Option<Mat3>,
    #[serde(serialize_with = "matrix_json::opt_mat3")]
    pub delta: Option<Mat3>,
    #[serde(serialize_with = "matrix_json::vec3")]
    pub lln_limit: Vec3,
    /// CLT covariance Γ.
    #[serde(rename = "Gamma", serialize_with = "matrix_json::mat3")]
    pub clt_covariance: Mat3,
    /// Limiting bracket of `(M, N)` (ice) or `(M, N^J, N^K)` (graphite).
    #[serde(rename = "Lambda", serialize_with = "matrix_json::dmat")]
    pub lambda: DMatrix<f64>,
    /// `θ/(2(1-p))`, absent at p = 1.
    #[serde(serialize_with = "matrix_json::opt_vec3")]
    pub theta_p: Option<Vec3>,
    /// `m/(2-p)`.
    #[serde(serialize_with = "matrix_json::opt_vec3")]
    pub m_p: Option<Vec3>,
    /// `ρ/p`, absent at p = 0.
    #[serde(serialize_with = "matrix_json::opt_vec3")]
    pub rho_p: Option<Vec3>,
    pub min_eigenvalue: f64,
    pub flags: Vec<String>,
}

fn set_sym(m: &mut Mat3, r: usize, c: usize, v: f64) {
    m[(r, c)] = v;
    m[(c, r)] = v;
}

fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    a * b.transpose()
}

fn sym_outer(a: &Vec3, b: &Vec3) -> Mat3 {
    outer(a, b) + outer(b, a)
}

fn expect_kind(table: &TransitionTable, kind: LatticeKind) -> Result<(), AsymptoticsError> {
    if table.kind != kind {
        return Err(AsymptoticsError::WrongKind { expected: kind, got: table.kind });
    }
    table.validate()?;
    Ok(())
}

/// Dispatches on the table's lattice.
pub fn summarize(table: &TransitionTable) -> Result<AsymptoticSummary, AsymptoticsError> {
    match table.kind {
        LatticeKind::Ice1h => ice_summary(table),
        LatticeKind::Graphite2h => graphite_summary(table),
    }
}

pub fn ice_summary(table: &TransitionTable) -> Result<AsymptoticSummary, AsymptoticsError> {
    expect_kind(table, LatticeKind::Ice1h)?;
    let (a, h, p) = (table.geometry.a, table.geometry.h, table.p);
    let b = 2.0 * table.alpha - 1.0;
    let DerivedRates { u, v, .. } = DerivedRates::of(table);
    let (us, vs) = (u[0] + u[1], v[0] + v[1]);

    let mu = Vec3::new(0.75 * a * (u[1] - u[0]), SQRT3 * a / 4.0 * (v[0] - v[1]), h * p * b);
    let theta = Vec3::new(a * ((1.0 - p) - 0.75 * us), SQRT3 * a / 4.0 * vs, 0.0);
    let zeta = Vec3::new(0.0, 0.0, h * p * b);

    let mut sigma2 = Mat3::zeros();
    sigma2[(0, 0)] = a * a
        * (p * (1.0 - p) + 3.0 / 8.0 * (3.0 - 4.0 * p) * us - 9.0 / 8.0 * (u[0] * u[0] + u[1] * u[1]));
    sigma2[(1, 1)] = 3.0 * a * a / 8.0 * (us - (v[0] * v[0] + v[1] * v[1]));
    sigma2[(2, 2)] = h * h * p * (1.0 - p * b * b);
    set_sym(
        &mut sigma2,
        0,
        1,
        a * a * SQRT3 / 8.0 * ((2.0 * p - 3.0) * vs + 3.0 * (u[0] * v[0] + u[1] * v[1])),
    );
    set_sym(&mut sigma2, 0, 2, -mu.x * mu.z);
    set_sym(&mut sigma2, 1, 2, -mu.y * mu.z);

    let mut nu = Mat3::zeros();
    nu[(0, 0)] = 3.0 * a * a / 8.0 * (u[0] - u[1]) * (3.0 - 4.0 * p - 3.0 * us);
    nu[(1, 1)] = 3.0 * a * a / 8.0 * (u[0] - u[1] - v[0] * v[0] + v[1] * v[1]);
    set_sym(
        &mut nu,
        0,
        1,
        a * a * SQRT3 / 8.0 * ((2.0 * p - 3.0) * (v[0] - v[1]) + 3.0 * (u[0] * v[0] - u[1] * v[1])),
    );
    set_sym(&mut nu, 0, 2, -theta.x * mu.z);
    set_sym(&mut nu, 1, 2, -theta.y * mu.z);

    let mut flags = Vec::new();
    let clt_covariance = if p >= 1.0 {
        sigma2
    } else {
        if p > 1.0 - CANCELLATION_WINDOW {
            flags.push(format!("gamma_cancellation: p = {p} is within {CANCELLATION_WINDOW:e} of 1"));
        }
        sigma2 - outer(&theta, &theta) * (p / (1.0 - p))
    };

    let mut lambda = DMatrix::zeros(4, 4);
    lambda.view_mut((0, 0), (3, 3)).copy_from(&sigma2);
    for r in 0..3 {
        lambda[(r, 3)] = -2.0 * p * theta[r];
        lambda[(3, r)] = -2.0 * p * theta[r];
    }
    lambda[(3, 3)] = 4.0 * p * (1.0 - p);

    Ok(finish(AsymptoticSummary {
        kind: LatticeKind::Ice1h,
        p,
        alpha: table.alpha,
        mu,
        theta,
        sigma2,
        nu,
        zeta,
        m: None,
        rho: None,
        gamma: None,
        delta: None,
        lln_limit: mu,
        clt_covariance,
        lambda,
        theta_p: (p < 1.0).then(|| theta / (2.0 * (1.0 - p))),
        m_p: None,
        rho_p: None,
        min_eigenvalue: 0.0,
        flags,
    }))
}

/// One of the four graphite step matrices. `signs` weights the classes
/// (00, 10, 01, 11); `jump_weight` is 1 for σ², γ and 0 for ν, δ.
fn graphite_matrix(
    r: &DerivedRates,
    geom: (f64, f64, f64, f64),
    signs: [f64; 4],
    jump_weight: f64,
) -> Mat3 {
    let (a, h, p, b) = geom;
    let c10 = signs[1];
    let dot = |xs: &[f64]| -> f64 { signs.iter().zip(xs).map(|(s, x)| s * x).sum() };
    let v2: Vec<f64> = r.v.iter().map(|v| v * v).collect();

    let mut x = Mat3::zeros();
    x[(0, 0)] = a * a / 4.0
        * (2.0 * p * (1.0 - p) * jump_weight + 9.0 / 4.0 * dot(&r.s) - 3.0 * p * (r.u[0] + c10 * r.u[1]));
    x[(1, 1)] = 3.0 * a * a / 16.0 * (dot(&r.u) - dot(&v2));
    x[(2, 2)] = jump_weight * h * h * p / 2.0 * (1.0 - p * b * b);
    set_sym(&mut x, 0, 1, a * a * SQRT3 / 16.0 * (3.0 * dot(&r.t) + 2.0 * p * (r.v[0] + c10 * r.v[1])));
    // The vertical cross terms pair with the opposite class-10 sign and jump weight.
    let (xc10, xw) = (-c10, 1.0 - jump_weight);
    set_sym(
        &mut x,
        0,
        2,
        a * h / 8.0 * (-4.0 * p * (1.0 - p) * b * xw + 3.0 * p * b * (r.u[0] + xc10 * r.u[1])),
    );
    set_sym(&mut x, 1, 2, -SQRT3 * a * h * p * b / 8.0 * (r.v[0] + xc10 * r.v[1]));
    x
}

pub fn graphite_summary(table: &TransitionTable) -> Result<AsymptoticSummary, AsymptoticsError> {
    expect_kind(table, LatticeKind::Graphite2h)?;
    let (a, h, p) = (table.geometry.a, table.geometry.h, table.p);
    let b = 2.0 * table.alpha - 1.0;
    let rates = DerivedRates::of(table);
    let (u, v) = (&rates.u, &rates.v);
    // class order: 00, 10, 01, 11
    let (u00, u10, u01, u11) = (u[0], u[1], u[2], u[3]);
    let (v00, v10, v01, v11) = (v[0], v[1], v[2], v[3]);

    let mu = Vec3::new(
        3.0 * a / 8.0 * ((u10 + u11) - (u00 + u01)),
        a * SQRT3 / 8.0 * ((v00 + v01) - (v10 + v11)),
        h * p * b / 2.0,
    );
    let m = Vec3::new(
        3.0 * a / 8.0 * ((u10 - u11) - (u00 - u01)),
        a * SQRT3 / 8.0 * ((v00 - v01) - (v10 - v11)),
        h * p * b / 2.0,
    );
    let theta = Vec3::new(
        a * ((1.0 - p / 2.0) - 3.0 / 8.0 * (u00 + u01 + u10 + u11)),
        a * SQRT3 / 8.0 * (v00 + v01 + v10 + v11),
        0.0,
    );
    let rho = Vec3::new(
        a * (-p / 2.0 - 3.0 / 8.0 * ((u00 - u01) + (u10 - u11))),
        a * SQRT3 / 8.0 * ((v00 - v01) + (v10 - v11)),
        0.0,
    );
    let zeta = Vec3::new(0.0, 0.0, h * p * b);

    let geom = (a, h, p, b);
    let sigma2 = graphite_matrix(&rates, geom, [1.0, 1.0, 1.0, 1.0], 1.0);
    let gamma = graphite_matrix(&rates, geom, [1.0, 1.0, -1.0, -1.0], 1.0);
    let nu = graphite_matrix(&rates, geom, [1.0, -1.0, 1.0, -1.0], 0.0);
    let delta = graphite_matrix(&rates, geom, [1.0, -1.0, -1.0, 1.0], 0.0);

    let mut lambda = DMatrix::zeros(5, 5);
    let (lln_limit, clt_covariance) = if p > 0.0 {
        let q = 2.0 - p;
        let centred = zeta - mu * p;
        let gam = sigma2
            + gamma * (p / q)
            + sym_outer(&centred, &m) * (2.0 / (q * q))
            - outer(&m, &m) * (4.0 * p / (q * q * q))
            + sym_outer(&theta, &rho) * (2.0 / q)
            + outer(&rho, &rho) * (4.0 / (p * q));

        lambda
            .view_mut((0, 0), (3, 3))
            .copy_from(&((sigma2 * q + gamma * p) / q));
        let cj = (zeta - (mu + m) * p) * (2.0 / q);
        let ck = (theta + rho) * (2.0 * p / q);
        for r in 0..3 {
            lambda[(r, 3)] = cj[r];
            lambda[(3, r)] = cj[r];
            lambda[(r, 4)] = ck[r];
            lambda[(4, r)] = ck[r];
        }
        lambda[(3, 3)] = 4.0 * p * (1.0 - p) / q;
        lambda[(4, 4)] = 4.0 * p * (1.0 - p) / q;
        (mu + m * (p / q), gam)
    } else {
        let gam = sigma2 + delta;
        lambda.view_mut((0, 0), (3, 3)).copy_from(&gam);
        (mu + rho, gam)
    };

    Ok(finish(AsymptoticSummary {
        kind: LatticeKind::Graphite2h,
        p,
        alpha: table.alpha,
        mu,
        theta,
        sigma2,
        nu,
        zeta,
        m: Some(m),
        rho: Some(rho),
        gamma: Some(gamma),
        delta: Some(delta),
        lln_limit,
        clt_covariance,
        lambda,
        theta_p: None,
        m_p: Some(m / (2.0 - p)),
        rho_p: (p > 0.0).then(|| rho / p),
        min_eigenvalue: 0.0,
        flags: Vec::new(),
    }))
}

fn finish(mut s: AsymptoticSummary) -> AsymptoticSummary {
    s.min_eigenvalue = min_eigenvalue(&s.clt_covariance);
    if s.min_eigenvalue < -DEGENERACY_FLOOR {
        s.flags.push(format!("gamma_not_psd: min eigenvalue {:e}", s.min_eigenvalue));
    } else if s.min_eigenvalue < DEGENERACY_FLOOR {
        s.flags.push("gamma_singular".to_string());
    }
    s
}

pub fn min_eigenvalue(m: &Mat3) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

impl AsymptoticSummary {
    /// Γ recomputed as `AᵀΛA`, where `A` stacks the identity over the
    /// helper vectors that turn bracket coordinates into position.
    pub fn gamma_via_lambda(&self) -> Mat3 {
        let helpers: Vec<Vec3> = match self.kind {
            LatticeKind::Ice1h => vec![self.theta_p.unwrap_or_else(Vec3::zeros)],
            LatticeKind::Graphite2h => vec![
                self.m_p.unwrap_or_else(Vec3::zeros),
                self.rho_p.unwrap_or_else(Vec3::zeros),
            ],
        };
        let dim = 3 + helpers.len();
        let mut a = DMatrix::zeros(dim, 3);
        a.view_mut((0, 0), (3, 3)).fill_with_identity();
        for (r, hv) in helpers.iter().enumerate() {
            for c in 0..3 {
                a[(3 + r, c)] = hv[c];
            }
        }
        let g = a.transpose() * &self.lambda * a;
        Mat3::from_fn(|r, c| g[(r, c)])
    }

    pub fn is_degenerate(&self) -> bool {
        self.min_eigenvalue < DEGENERACY_FLOOR
    }

    /// Every nonzero closed-form coefficient the oracle and ledger checks
    /// consume. Symmetric matrix entries are listed once (upper triangle).
    pub fn coefficients(&self) -> Vec<Coefficient> {
        let mut out = Vec::new();
        let mut vector = |field: CoefficientField, v: Option<&Vec3>| {
            if let Some(v) = v {
                for r in 0..3 {
                    if v[r] != 0.0 {
                        out.push(Coefficient { field, row: r, col: None });
                    }
                }
            }
        };
        vector(CoefficientField::Mu, Some(&self.mu));
        vector(CoefficientField::Theta, Some(&self.theta));
        vector(CoefficientField::M, self.m.as_ref());
        vector(CoefficientField::Rho, self.rho.as_ref());
        vector(CoefficientField::Zeta, Some(&self.zeta));
        let mut matrix = |field: CoefficientField, m: Option<&Mat3>| {
            if let Some(m) = m {
                for r in 0..3 {
                    for c in r..3 {
                        if m[(r, c)] != 0.0 {
                            out.push(Coefficient { field, row: r, col: Some(c) });
                        }
                    }
                }
            }
        };
        matrix(CoefficientField::Sigma2, Some(&self.sigma2));
        matrix(CoefficientField::Nu, Some(&self.nu));
        matrix(CoefficientField::Gamma, self.gamma.as_ref());
        matrix(CoefficientField::Delta, self.delta.as_ref());
        out
    }

    /// Copy with one coefficient scaled by `1 + rel` (both entries of a
    /// symmetric pair). Derived quantities are left untouched.
    pub fn perturbed(&self, coef: &Coefficient, rel: f64) -> Self {
        let mut s = self.clone();
        let scale = 1.0 + rel;
        let vector = match coef.field {
            CoefficientField::Mu => Some(&mut s.mu),
            CoefficientField::Theta => Some(&mut s.theta),
            CoefficientField::M => s.m.as_mut(),
            CoefficientField::Rho => s.rho.as_mut(),
            CoefficientField::Zeta => Some(&mut s.zeta),
            _ => None,
        };
        if let Some(v) = vector {
            v[coef.row] *= scale;
            return s;
        }
        let matrix = match coef.field {
            CoefficientField::Sigma2 => Some(&mut s.sigma2),
            CoefficientField::Nu => Some(&mut s.nu),
            CoefficientField::Gamma => s.gamma.as_mut(),
            CoefficientField::Delta => s.delta.as_mut(),
            _ => None,
        };
        if let (Some(m), Some(c)) = (matrix, coef.col) {
            m[(coef.row, c)] *= scale;
            if c != coef.row {
                m[(c, coef.row)] *= scale;
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientField {
    Mu,
    Theta,
    M,
    Rho,
    Zeta,
    Sigma2,
    Nu,
    Gamma,
    Delta,
}

impl CoefficientField {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mu => "mu",
            Self::Theta => "theta",
            Self::M => "m",
            Self::Rho => "rho",
            Self::Zeta => "zeta",
            Self::Sigma2 => "sigma2",
            Self::Nu => "nu",
            Self::Gamma => "gamma",
            Self::Delta => "delta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Coefficient {
    pub field: CoefficientField,
    pub row: usize,
    pub col: Option<usize>,
}

impl std::fmt::Display for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.col {
            Some(c) => write!(f, "{}[{},{}]", self.field.name(), self.row, c),
            None => write!(f, "{}[{}]", self.field.name(), self.row),
        }
    }
}

/// `log(n)/n`, the scale of the squared LLN error.
pub fn lln_rate_bound(n: u64) -> Result<f64, AsymptoticsError> {
    if n < 2 {
        return Err(AsymptoticsError::Domain(n));
    }
    let n = n as f64;
    Ok(n.ln() / n)
}

/// Limit of `J_n / n` for the graphite walk.
pub fn counter_j_mean(p: f64) -> f64 {
    p / (2.0 - p)
}

/// Limit of `Var(J_n) / n` for the graphite walk.
pub fn counter_j_variance(p: f64) -> f64 {
    4.0 * p * (1.0 - p) / (2.0 - p).powi(3)
}
