//! Seeded sampling of walks.
//!
//! [`Walker`] precomputes, per vertex class, the cumulative atom thresholds
//! and integer re-indexing of every move, so the inner loop touches only
//! integers and one uniform draw. The ledger path additionally accumulates
//! the martingale decomposition with compensated sums; the batch path keeps
//! nothing but the endpoint and the counters.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::accum::{pairwise_reduce, CompensatedArray, CompensatedSum, MomentAccumulator, ScalarMoments};
use crate::kernels::{
    conditional_mean, conditional_sign_mean, increment_distribution, joint_conditional_covariance,
    KernelError, TransitionTable,
};
use crate::lattice::{LatticeKind, LatticeState, Sign, VertexClass};
use crate::matrix_json;
use crate::model::model_for;
use crate::rng::{RngSpec, WalkRng};
use crate::{IncrementAtom, Mat3, Vec3};

/// Default cap on retained states in trajectory mode.
pub const TRAJECTORY_CAP: u64 = 10_000_000;

/// Replicates per parallel work unit; fixed so results do not depend on the
/// worker count.
pub const BATCH_CHUNK: u64 = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("trajectory of {steps} steps exceeds the cap of {cap} states")]
    TrajectoryCap { steps: u64, cap: u64 },
    #[error("a batch needs at least 2 replicates, got {0}")]
    TooFewReplicates(u64),
    #[error("checkpoints must be strictly increasing")]
    Checkpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulationMode {
    /// Keep every visited state (bounded by the cap).
    Trajectory { cap: u64 },
    /// O(1) memory.
    Summary,
}

impl SimulationMode {
    pub fn trajectory() -> Self {
        Self::Trajectory { cap: TRAJECTORY_CAP }
    }
}

/// Partial sums `I_n, J_n, K_n` of the sign processes from time 0. Ice only
/// uses `i`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub i: i64,
    pub j: i64,
    pub k: i64,
}

impl Counters {
    /// Counters of a one-element path sitting at `class`.
    pub fn of_class(class: VertexClass) -> Self {
        let [i, j, k] = class_signs(class);
        Self { i: i as i64, j: j as i64, k: k as i64 }
    }

    #[inline]
    fn add(&mut self, s: &[i8; 3]) {
        self.i += s[0] as i64;
        self.j += s[1] as i64;
        self.k += s[2] as i64;
    }
}

fn class_signs(class: VertexClass) -> [i8; 3] {
    [
        class.sign(Sign::Color).unwrap_or(0),
        class.sign(Sign::Jump).unwrap_or(0),
        class.sign(Sign::Altitude).unwrap_or(0),
    ]
}

#[derive(Debug, Clone, Copy, Default)]
struct AtomStep {
    dk: i64,
    dl: i64,
    dn: i64,
    next: u8,
}

#[derive(Debug, Clone)]
struct ClassRow {
    len: usize,
    /// Cumulative thresholds; the last used entry is +inf.
    cum: [f64; 5],
    atoms: [AtomStep; 5],
    full: Vec<IncrementAtom>,
}

/// Per-class quantities the ledger subtracts at each step.
#[derive(Debug, Clone)]
struct LedgerRow {
    mean: [f64; 3],
    sign_mean: Vec<f64>,
    cov: Vec<f64>,
}

/// Integer walker state used by the inner loops.
#[derive(Debug, Clone, Copy, Default)]
struct Cursor {
    k: i64,
    l: i64,
    n: i64,
    class: u8,
}

/// A validated table with precomputed stepping data.
#[derive(Debug, Clone)]
pub struct Walker {
    table: TransitionTable,
    classes: &'static [VertexClass],
    rows: Vec<ClassRow>,
    signs: Vec<[i8; 3]>,
    tracked: &'static [Sign],
    ledger_rows: Vec<LedgerRow>,
}

impl Walker {
    pub fn new(table: &TransitionTable) -> Result<Self, KernelError> {
        table.validate()?;
        let classes = table.kind.classes();
        let tracked = model_for(table.kind).tracked_signs();
        let mut rows = Vec::with_capacity(classes.len());
        let mut ledger_rows = Vec::with_capacity(classes.len());
        for &class in classes {
            let full = increment_distribution(table, class);
            let origin = LatticeState { cell_k: 0, cell_l: 0, sheet_n: 0, class };
            let mut row = ClassRow { len: full.len(), cum: [f64::INFINITY; 5], atoms: Default::default(), full };
            let mut acc = 0.0;
            for (q, atom) in row.full.iter().enumerate() {
                acc += atom.probability;
                row.cum[q] = acc;
                let to = origin.apply_move(atom.mv).expect("atom moves are admissible");
                row.atoms[q] = AtomStep {
                    dk: to.cell_k,
                    dl: to.cell_l,
                    dn: to.sheet_n,
                    next: to.class.index() as u8,
                };
            }
            row.cum[row.len - 1] = f64::INFINITY;
            rows.push(row);

            let mean = conditional_mean(table, class);
            ledger_rows.push(LedgerRow {
                mean: [mean.x, mean.y, mean.z],
                sign_mean: tracked.iter().map(|&s| conditional_sign_mean(table, class, s)).collect(),
                cov: joint_conditional_covariance(table, class, tracked).transpose().as_slice().to_vec(),
            });
        }
        Ok(Self {
            table: table.clone(),
            classes,
            rows,
            signs: classes.iter().map(|&c| class_signs(c)).collect(),
            tracked,
            ledger_rows,
        })
    }

    pub fn table(&self) -> &TransitionTable {
        &self.table
    }

    pub fn kind(&self) -> LatticeKind {
        self.table.kind
    }

    #[inline(always)]
    fn pick(&self, class: u8, rng: &mut WalkRng) -> usize {
        let row = &self.rows[class as usize];
        let u = rng.uniform();
        let mut q = 0;
        while u >= row.cum[q] {
            q += 1;
        }
        q
    }

    #[inline(always)]
    fn advance(&self, c: &mut Cursor, q: usize) {
        let a = &self.rows[c.class as usize].atoms[q];
        c.k += a.dk;
        c.l += a.dl;
        c.n += a.dn;
        c.class = a.next;
    }

    fn to_state(&self, c: &Cursor) -> LatticeState {
        LatticeState {
            cell_k: c.k,
            cell_l: c.l,
            sheet_n: c.n,
            class: self.classes[c.class as usize],
        }
    }

    fn cursor_of(&self, s: &LatticeState) -> Cursor {
        assert_eq!(s.kind(), self.kind(), "state belongs to a different lattice");
        Cursor { k: s.cell_k, l: s.cell_l, n: s.sheet_n, class: s.class.index() as u8 }
    }

    /// Samples one step by inverse CDF over the fixed atom order.
    pub fn step(&self, state: &LatticeState, rng: &mut WalkRng) -> (LatticeState, IncrementAtom) {
        let mut c = self.cursor_of(state);
        let q = self.pick(c.class, rng);
        let atom = self.rows[c.class as usize].full[q];
        self.advance(&mut c, q);
        (self.to_state(&c), atom)
    }

    /// Runs `n` steps from the origin, keeping the full ledger.
    pub fn simulate(&self, n: u64, spec: RngSpec, mode: SimulationMode) -> Result<WalkRecord, WalkError> {
        let mut states = match mode {
            SimulationMode::Trajectory { cap } => {
                if n.saturating_add(1) > cap {
                    return Err(WalkError::TrajectoryCap { steps: n, cap });
                }
                Some(Vec::with_capacity(n as usize + 1))
            }
            SimulationMode::Summary => None,
        };
        let mut rng = spec.build();
        let d = self.tracked.len();
        let dim = 3 + d;
        let mut m = CompensatedArray::zeros(3);
        let mut r = CompensatedArray::zeros(3);
        let mut nsum: Vec<CompensatedSum> = vec![CompensatedSum::default(); d];
        let mut bracket = CompensatedArray::zeros(dim * dim);

        let mut cur = Cursor::default();
        let mut counters = Counters::default();
        counters.add(&self.signs[0]);
        let mut prev = Counters::default();
        if let Some(s) = states.as_mut() {
            s.push(self.to_state(&cur));
        }
        let mut buf = [0.0; 3];
        for _ in 0..n {
            let from = cur.class as usize;
            let q = self.pick(cur.class, &mut rng);
            let atom = &self.rows[from].full[q];
            let lr = &self.ledger_rows[from];
            for (b, (x, mu)) in buf.iter_mut().zip(atom.displacement.iter().zip(&lr.mean)) {
                *b = x - mu;
            }
            m.add_slice(&buf);
            r.add_slice(&lr.mean);
            for (t, (&sign, acc)) in self.tracked.iter().zip(nsum.iter_mut()).enumerate() {
                acc.add(atom.class_after.sign_value(sign) - lr.sign_mean[t]);
            }
            bracket.add_slice(&lr.cov);

            self.advance(&mut cur, q);
            prev = counters;
            counters.add(&self.signs[cur.class as usize]);
            if let Some(s) = states.as_mut() {
                s.push(self.to_state(&cur));
            }
        }

        let state = self.to_state(&cur);
        let b = bracket.values();
        Ok(WalkRecord {
            kind: self.kind(),
            steps: n,
            spec,
            state,
            position: state.position(&self.table.geometry),
            counters,
            previous: prev,
            states,
            ledger: MartingaleLedger {
                signs: self.tracked.to_vec(),
                m: Vec3::from_iterator(m.values()),
                r: Vec3::from_iterator(r.values()),
                n: nsum.iter().map(CompensatedSum::value).collect(),
                bracket: DMatrix::from_row_slice(dim, dim, &b),
            },
        })
    }

    /// Endpoint and counters after `n` steps, no ledger.
    pub fn endpoint(&self, n: u64, spec: RngSpec) -> (LatticeState, Counters) {
        let mut rng = spec.build();
        let mut cur = Cursor::default();
        let mut counters = Counters::default();
        counters.add(&self.signs[0]);
        for _ in 0..n {
            let q = self.pick(cur.class, &mut rng);
            self.advance(&mut cur, q);
            counters.add(&self.signs[cur.class as usize]);
        }
        (self.to_state(&cur), counters)
    }

    /// One path observed at strictly increasing times.
    pub fn checkpoints(&self, times: &[u64], spec: RngSpec) -> Result<Vec<Checkpoint>, WalkError> {
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(WalkError::Checkpoints);
        }
        let mut rng = spec.build();
        let mut cur = Cursor::default();
        let mut counters = Counters::default();
        counters.add(&self.signs[0]);
        let mut done = 0u64;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            for _ in done..t {
                let q = self.pick(cur.class, &mut rng);
                self.advance(&mut cur, q);
                counters.add(&self.signs[cur.class as usize]);
            }
            done = t;
            let state = self.to_state(&cur);
            out.push(Checkpoint { n: t, position: state.position(&self.table.geometry), counters });
        }
        Ok(out)
    }

    /// `replicates` independent endpoints with stream ids
    /// `base.stream_id + r`, reduced over a fixed pairwise tree.
    pub fn run_batch(
        &self,
        n: u64,
        replicates: u64,
        base: RngSpec,
        projections: &[Vec3],
    ) -> Result<BatchStatistics, WalkError> {
        if replicates < 2 {
            return Err(WalkError::TooFewReplicates(replicates));
        }
        let units: Vec<Vec3> = projections.iter().map(|u| u.normalize()).collect();
        let chunks = replicates.div_ceil(BATCH_CHUNK);
        let scale = 1.0 / (n.max(1) as f64).sqrt();
        let geometry = self.table.geometry;
        let partials: Vec<BatchPartial> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut part = BatchPartial::new(units.len());
                let end = ((c + 1) * BATCH_CHUNK).min(replicates);
                for r in c * BATCH_CHUNK..end {
                    let (state, counters) = self.endpoint(n, base.with_stream(base.stream_id + r));
                    let x = state.position(&geometry) * scale;
                    part.push(&x, &counters, &units, n);
                }
                part
            })
            .collect();
        let total = pairwise_reduce(partials, |a, b| {
            let mut m = a.clone();
            m.merge(b);
            m
        })
        .expect("at least one chunk");
        Ok(total.finish(n, replicates, &units))
    }
}

/// Convenience form of [`Walker::step`] for one-off use.
pub fn step(
    state: &LatticeState,
    table: &TransitionTable,
    rng: &mut WalkRng,
) -> Result<(LatticeState, IncrementAtom), KernelError> {
    Ok(Walker::new(table)?.step(state, rng))
}

/// Convenience form of [`Walker::simulate`].
pub fn simulate(table: &TransitionTable, n: u64, spec: RngSpec, mode: SimulationMode) -> Result<WalkRecord, WalkError> {
    Walker::new(table)?.simulate(n, spec, mode)
}

/// Convenience form of [`Walker::run_batch`] with the coordinate axes only.
pub fn run_batch(table: &TransitionTable, n: u64, replicates: u64, base: RngSpec) -> Result<BatchStatistics, WalkError> {
    Walker::new(table)?.run_batch(n, replicates, base, &[])
}

/// Final values of the martingale decomposition `S_n = M_n + R_n` and the
/// accumulated joint bracket of `(M, N...)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleLedger {
    /// Sign processes behind the scalar martingales, in bracket order.
    pub signs: Vec<Sign>,
    #[serde(serialize_with = "matrix_json::vec3")]
    pub m: Vec3,
    /// Sum of the one-step conditional means.
    #[serde(serialize_with = "matrix_json::vec3")]
    pub r: Vec3,
    pub n: Vec<f64>,
    #[serde(serialize_with = "matrix_json::dmat")]
    pub bracket: DMatrix<f64>,
}

impl MartingaleLedger {
    pub fn bracket_m(&self) -> Mat3 {
        Mat3::from_fn(|r, c| self.bracket[(r, c)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkRecord {
    pub kind: LatticeKind,
    pub steps: u64,
    pub spec: RngSpec,
    /// Final state.
    pub state: LatticeState,
    /// `S_n`, the position of the final state.
    #[serde(serialize_with = "matrix_json::vec3")]
    pub position: Vec3,
    /// `I_n, J_n, K_n`.
    pub counters: Counters,
    /// `I_{n-1}, J_{n-1}, K_{n-1}` (zero when n = 0).
    pub previous: Counters,
    #[serde(skip)]
    pub states: Option<Vec<LatticeState>>,
    pub ledger: MartingaleLedger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub n: u64,
    #[serde(serialize_with = "matrix_json::vec3")]
    pub position: Vec3,
    pub counters: Counters,
}

#[derive(Debug, Clone)]
struct BatchPartial {
    vector: MomentAccumulator,
    coords: [ScalarMoments; 3],
    projections: Vec<ScalarMoments>,
    counters: [CompensatedSum; 3],
}

impl BatchPartial {
    fn new(projections: usize) -> Self {
        Self {
            vector: MomentAccumulator::default(),
            coords: Default::default(),
            projections: vec![ScalarMoments::default(); projections],
            counters: Default::default(),
        }
    }

    fn push(&mut self, x: &Vec3, c: &Counters, units: &[Vec3], n: u64) {
        self.vector.push(x);
        for a in 0..3 {
            self.coords[a].push(x[a]);
        }
        for (acc, u) in self.projections.iter_mut().zip(units) {
            acc.push(u.dot(x));
        }
        let n = n.max(1) as f64;
        self.counters[0].add(c.i as f64 / n);
        self.counters[1].add(c.j as f64 / n);
        self.counters[2].add(c.k as f64 / n);
    }

    fn merge(&mut self, other: &Self) {
        self.vector.merge(&other.vector);
        for a in 0..3 {
            self.coords[a].merge(&other.coords[a]);
            self.counters[a].merge(&other.counters[a]);
        }
        for (a, b) in self.projections.iter_mut().zip(&other.projections) {
            a.merge(b);
        }
    }

    fn finish(self, n: u64, replicates: u64, units: &[Vec3]) -> BatchStatistics {
        let sqrt_n = (n.max(1) as f64).sqrt();
        let moments = |m: &ScalarMoments| ProjectionMoments {
            direction: Vec3::zeros(),
            mean: m.mean(),
            variance: m.variance(),
            skewness: m.skewness(),
            kurtosis: m.excess_kurtosis() + 3.0,
        };
        let r = replicates as f64;
        BatchStatistics {
            replicates,
            n,
            mean_s: self.vector.mean() * sqrt_n,
            cov_scaled: self.vector.covariance(),
            coordinates: self.coords.iter().map(moments).collect(),
            projections: self
                .projections
                .iter()
                .zip(units)
                .map(|(m, u)| ProjectionMoments { direction: *u, ..moments(m) })
                .collect(),
            counter_means: [
                self.counters[0].value() / r,
                self.counters[1].value() / r,
                self.counters[2].value() / r,
            ],
        }
    }
}

/// Moments of `uᵀ S_n / √n` over the replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionMoments {
    #[serde(serialize_with = "matrix_json::vec3")]
    pub direction: Vec3,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Non-excess kurtosis (3 for a Gaussian).
    pub kurtosis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchStatistics {
    pub replicates: u64,
    pub n: u64,
    /// Average of `S_n`.
    #[serde(serialize_with = "matrix_json::vec3")]
    pub mean_s: Vec3,
    /// Empirical covariance of `S_n / √n`.
    #[serde(serialize_with = "matrix_json::mat3")]
    pub cov_scaled: Mat3,
    /// Per-coordinate moments of `S_n / √n` (direction left at zero).
    pub coordinates: Vec<ProjectionMoments>,
    pub projections: Vec<ProjectionMoments>,
    /// Averages of `I_n/n, J_n/n, K_n/n`.
    pub counter_means: [f64; 3],
}
