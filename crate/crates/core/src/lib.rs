//! Random walks on the three-dimensional ice-1h and graphite-2h crystal
//! lattices.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] exact integer vertex bookkeeping and the real embedding,
//! * [`kernels`] transition tables and one-step increment laws,
//! * [`asymptotics`] closed-form drift, covariance and bracket limits,
//! * [`model`] the per-lattice strategy trait and its name registry,
//! * [`walker`] seeded sampling, the martingale ledger and batch statistics,
//! * [`verify`] oracle, ledger and Monte-Carlo checks producing reports.

pub mod accum;
pub mod asymptotics;
pub mod kernels;
pub mod lattice;
mod matrix_json;
pub mod model;
pub mod rng;
pub mod verify;
pub mod walker;

pub use asymptotics::{AsymptoticSummary, DerivedRates};
pub use kernels::{HorizontalRows, IncrementAtom, KernelError, TransitionTable};
pub use lattice::{
    GeometryParams, LatticeError, LatticeKind, LatticeState, MoveLabel, Sign, VertexClass,
};
pub use model::{model_for, ModelRegistry, WalkModel};
pub use rng::RngSpec;
pub use walker::{BatchStatistics, Counters, MartingaleLedger, WalkRecord};

/// 3-vectors used for positions and increments.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 matrices used for second moments and covariances.
pub type Mat3 = nalgebra::Matrix3<f64>;
