//! Per-lattice strategy objects.
//!
//! A [`WalkModel`] owns the closed-form side of every identity the verifier
//! checks: class-resolved conditional moments, the centering term `R_n` and
//! the joint predictable bracket as affine functions of the counters. All
//! closed forms read their coefficients from an [`AsymptoticSummary`], so a
//! perturbed summary propagates into every check.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::asymptotics::{self, AsymptoticSummary, AsymptoticsError};
use crate::kernels::TransitionTable;
use crate::lattice::{LatticeKind, Sign, VertexClass};
use crate::walker::Counters;
use crate::{Mat3, Vec3};

pub trait WalkModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn kind(&self) -> LatticeKind;

    fn classes(&self) -> &'static [VertexClass] {
        self.kind().classes()
    }

    /// Sign processes whose martingale parts join `M` in the joint bracket.
    fn tracked_signs(&self) -> &'static [Sign];

    /// Every sign the model has a closed conditional law for.
    fn signs(&self) -> &'static [Sign];

    fn summary(&self, table: &TransitionTable) -> Result<AsymptoticSummary, AsymptoticsError>;

    /// `E[ξ' | class]`.
    fn closed_mean(&self, s: &AsymptoticSummary, class: VertexClass) -> Vec3;

    /// `E[ξ' ξ'ᵀ | class]`.
    fn closed_second_moment(&self, s: &AsymptoticSummary, class: VertexClass) -> Mat3;

    /// `E[s' | class]`.
    fn closed_sign_mean(&self, s: &AsymptoticSummary, class: VertexClass, sign: Sign) -> f64;

    /// `E[ξ' s' | class]`.
    fn closed_cross_moment(&self, s: &AsymptoticSummary, class: VertexClass, sign: Sign) -> Vec3;

    /// `R_n` given the counters at time `n - 1`.
    fn closed_centering(&self, s: &AsymptoticSummary, n: u64, prev: &Counters) -> Vec3;

    /// Joint bracket of `(M, N...)` at time `n`, with `N` ordered as
    /// [`WalkModel::tracked_signs`], given the counters at time `n - 1`.
    fn closed_joint_bracket(&self, s: &AsymptoticSummary, n: u64, prev: &Counters) -> DMatrix<f64>;

    /// One-step bracket increment from `class`.
    fn closed_bracket_increment(&self, s: &AsymptoticSummary, class: VertexClass) -> DMatrix<f64> {
        self.closed_joint_bracket(s, 1, &Counters::of_class(class))
    }
}

fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    a * b.transpose()
}

fn sym_outer(a: &Vec3, b: &Vec3) -> Mat3 {
    outer(a, b) + outer(b, a)
}

fn signs_of(class: VertexClass) -> (f64, f64, f64) {
    match class {
        VertexClass::Ice { .. } => (class.sign_value(Sign::Color), 0.0, 0.0),
        VertexClass::Graphite { .. } => (
            class.sign_value(Sign::Color),
            class.sign_value(Sign::Jump),
            class.sign_value(Sign::Altitude),
        ),
    }
}

fn assemble(m: &Mat3, cross: &[Vec3], scalars: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cross.len();
    let mut out = DMatrix::zeros(3 + d, 3 + d);
    out.view_mut((0, 0), (3, 3)).copy_from(m);
    for (q, c) in cross.iter().enumerate() {
        for r in 0..3 {
            out[(r, 3 + q)] = c[r];
            out[(3 + q, r)] = c[r];
        }
    }
    out.view_mut((3, 3), (d, d)).copy_from(scalars);
    out
}

#[derive(Debug, Default, Clone, Copy)]
pub struct IceModel;

impl WalkModel for IceModel {
    fn name(&self) -> &'static str {
        "ice"
    }

    fn kind(&self) -> LatticeKind {
        LatticeKind::Ice1h
    }

    fn tracked_signs(&self) -> &'static [Sign] {
        &[Sign::Color]
    }

    fn signs(&self) -> &'static [Sign] {
        &[Sign::Color]
    }

    fn summary(&self, table: &TransitionTable) -> Result<AsymptoticSummary, AsymptoticsError> {
        asymptotics::ice_summary(table)
    }

    fn closed_mean(&self, s: &AsymptoticSummary, class: VertexClass) -> Vec3 {
        let (e, _, _) = signs_of(class);
        s.mu + s.theta * e
    }

    fn closed_second_moment(&self, s: &AsymptoticSummary, class: VertexClass) -> Mat3 {
        let (e, _, _) = signs_of(class);
        s.sigma2 + outer(&s.mu, &s.mu) + outer(&s.theta, &s.theta) + (s.nu + sym_outer(&s.mu, &s.theta)) * e
    }

    fn closed_sign_mean(&self, s: &AsymptoticSummary, class: VertexClass, sign: Sign) -> f64 {
        assert_eq!(sign, Sign::Color, "ice tracks only the color sign");
        (2.0 * s.p - 1.0) * signs_of(class).0
    }

    fn closed_cross_moment(&self, s: &AsymptoticSummary, class: VertexClass, sign: Sign) -> Vec3 {
        assert_eq!(sign, Sign::Color, "ice tracks only the color sign");
        let e = signs_of(class).0;
        (s.zeta * 2.0 - self.closed_mean(s, class)) * e
    }

    fn closed_centering(&self, s: &AsymptoticSummary, n: u64, prev: &Counters) -> Vec3 {
        s.mu * n as f64 + s.theta * prev.i as f64
    }

    fn closed_joint_bracket(&self, s: &AsymptoticSummary, n: u64, prev: &Counters) -> DMatrix<f64> {
        let (n, i) = (n as f64, prev.i as f64);
        let p = s.p;
        let m = s.sigma2 * n + s.nu * i;
        let c = s.theta * (-2.0 * n * p) + (s.zeta - s.mu * p) * (2.0 * i);
        assemble(&m, &[c], &DMatrix::from_element(1, 1, 4.0 * p * (1.0 - p) * n))
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct GraphiteModel;

impl GraphiteModel {
    fn parts(s: &AsymptoticSummary) -> (Vec3, Vec3, Mat3, Mat3) {
        (
            s.m.expect("graphite summary carries m"),
            s.rho.expect("graphite summary carries rho"),
            s.gamma.expect("graphite summary carries gamma"),
            s.delta.expect("graphite summary carries delta"),
        )
    }
}

impl WalkModel for GraphiteModel {
    fn name(&self) -> &'static str {
        "graphite"
    }

    fn kind(&self) -> LatticeKind {
        LatticeKind::Graphite2h
    }

    fn tracked_signs(&self) -> &'static [Sign] {
        &[Sign::Jump, Sign::Altitude]
    }

    fn signs(&self) -> &'static [Sign] {
        &[Sign::Color, Sign::Jump, Sign::Altitude]
    }

    fn summary(&self, table: &TransitionTable) -> Result<AsymptoticSummary, AsymptoticsError> {
        asymptotics::graphite_summary(table)
    }

    fn closed_mean(&self, s: &AsymptoticSummary, class: VertexClass) -> Vec3 {
        let (m, rho, _, _) = Self::parts(s);
        let (i, j, k) = signs_of(class);
        s.mu + s.theta * i + m * j + rho * k
    }

    fn closed_second_moment(&self, s: &AsymptoticSummary, class: VertexClass) -> Mat3 {
        let (m, rho, gamma, delta) = Self::parts(s);
        let (mu, th) = (&s.mu, &s.theta);
        let (i, j, k) = signs_of(class);
        s.sigma2
            + outer(mu, mu)
            + outer(th, th)
            + outer(&m, &m)
            + outer(&rho, &rho)
            + (s.nu + sym_outer(mu, th) + sym_outer(&m, &rho)) * i
            + (gamma + sym_outer(mu, &m) + sym_outer(th, &rho)) * j
            + (delta + sym_outer(mu, &rho) + sym_outer(th, &m)) * k
    }

    fn closed_sign_mean(&self, s: &AsymptoticSummary, class: VertexClass, sign: Sign) -> f64 {
        let (i, j, k) = signs_of(class);
        let p = s.p;
        match sign {
            Sign::Color => -i,
            Sign::Jump => p - (1.0 - p) * j,
            Sign::Altitude => (1.0 - p) * k - p * i,
        }
    }

    fn closed_cross_moment(&self, s: &AsymptoticSummary, class: VertexClass, sign: Sign) -> Vec3 {
        let (i, j, k) = signs_of(class);
        let mean = self.closed_mean(s, class);
        match sign {
            Sign::Color => mean * -i,
            Sign::Jump => s.zeta * (1.0 + j) - mean * j,
            Sign::Altitude => mean * k - s.zeta * (i + k),
        }
    }

    fn closed_centering(&self, s: &AsymptoticSummary, n: u64, prev: &Counters) -> Vec3 {
        let (m, rho, _, _) = Self::parts(s);
        s.mu * n as f64 + s.theta * prev.i as f64 + m * prev.j as f64 + rho * prev.k as f64
    }

    fn closed_joint_bracket(&self, s: &AsymptoticSummary, n: u64, prev: &Counters) -> DMatrix<f64> {
        let (m, rho, gamma, delta) = Self::parts(s);
        let (n, i, j, k) = (n as f64, prev.i as f64, prev.j as f64, prev.k as f64);
        let p = s.p;
        let q = 2.0 * p * (1.0 - p);
        let bm = s.sigma2 * n + s.nu * i + gamma * j + delta * k;
        let drift = s.zeta - (s.mu + m) * p;
        let swing = (s.theta + rho) * p;
        let c = drift * (n + j) - swing * (i + k);
        let e = swing * (n + j) - drift * (i + k);
        let nn = q * (n + j);
        let d = -q * (i + k);
        assemble(&bm, &[c, e], &DMatrix::from_row_slice(2, 2, &[nn, d, d, nn]))
    }
}

/// Name-indexed collection of models.
pub struct ModelRegistry {
    models: BTreeMap<&'static str, Box<dyn WalkModel>>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self { models: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(IceModel));
        r.register(Box::new(GraphiteModel));
        r
    }

    /// Adds or replaces the model registered under its name.
    pub fn register(&mut self, model: Box<dyn WalkModel>) {
        self.models.insert(model.name(), model);
    }

    pub fn get(&self, name: &str) -> Option<&dyn WalkModel> {
        self.models.get(name).map(|m| m.as_ref())
    }

    pub fn for_kind(&self, kind: LatticeKind) -> Option<&dyn WalkModel> {
        self.models.values().find(|m| m.kind() == kind).map(|m| m.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.models.keys().copied().collect()
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// The built-in model for `kind`.
pub fn model_for(kind: LatticeKind) -> &'static dyn WalkModel {
    static ICE: IceModel = IceModel;
    static GRAPHITE: GraphiteModel = GraphiteModel;
    match kind {
        LatticeKind::Ice1h => &ICE,
        LatticeKind::Graphite2h => &GRAPHITE,
    }
}
