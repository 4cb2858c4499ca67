//! Transition tables and exact one-step increment laws.
//!
//! A table is validated once; afterwards every conditional moment is a finite
//! sum over at most five [`IncrementAtom`]s, which is what the verification
//! layer uses as its brute-force oracle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{GeometryParams, LatticeKind, LatticeState, MoveLabel, Sign, VertexClass};
use crate::rng::WalkRng;
use crate::{Mat3, Vec3};

/// Tolerance for row normalizations and probability ranges.
pub const VALIDATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("row {row} sums to {sum} instead of {expected} (residual {residual:e})")]
    Normalization {
        row: String,
        sum: f64,
        expected: f64,
        residual: f64,
    },
    #[error("{what} = {value} is outside {range}")]
    Range {
        what: String,
        value: f64,
        range: &'static str,
    },
    #[error("horizontal rows do not match the {kind} lattice")]
    Shape { kind: LatticeKind },
}

/// Horizontal probability rows.
///
/// Ice: `[i][j']`. Graphite: `[i][j][k']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HorizontalRows {
    Ice([[f64; 3]; 2]),
    Graphite([[[f64; 3]; 2]; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    pub kind: LatticeKind,
    /// Total vertical jump probability from a jump-capable vertex.
    pub p: f64,
    /// Upward share of the vertical mass.
    pub alpha: f64,
    pub horizontal: HorizontalRows,
    pub geometry: GeometryParams,
}

impl TransitionTable {
    pub fn ice(geometry: GeometryParams, p: f64, alpha: f64, rows: [[f64; 3]; 2]) -> Self {
        Self {
            kind: LatticeKind::Ice1h,
            p,
            alpha,
            horizontal: HorizontalRows::Ice(rows),
            geometry,
        }
    }

    pub fn graphite(
        geometry: GeometryParams,
        p: f64,
        alpha: f64,
        rows: [[[f64; 3]; 2]; 2],
    ) -> Self {
        Self {
            kind: LatticeKind::Graphite2h,
            p,
            alpha,
            horizontal: HorizontalRows::Graphite(rows),
            geometry,
        }
    }

    /// Uniform horizontal rows: `(1-p)/3` from jump-capable vertices, `1/3`
    /// from blocked graphite vertices.
    pub fn symmetric(kind: LatticeKind, geometry: GeometryParams, p: f64, alpha: f64) -> Self {
        let open = [(1.0 - p) / 3.0; 3];
        match kind {
            LatticeKind::Ice1h => Self::ice(geometry, p, alpha, [open; 2]),
            LatticeKind::Graphite2h => {
                let blocked = [1.0 / 3.0; 3];
                Self::graphite(geometry, p, alpha, [[open, blocked]; 2])
            }
        }
    }

    /// The horizontal row used from `class`.
    pub fn row(&self, class: VertexClass) -> [f64; 3] {
        match (&self.horizontal, class) {
            (HorizontalRows::Ice(rows), VertexClass::Ice { black }) => rows[black as usize],
            (HorizontalRows::Graphite(rows), VertexClass::Graphite { black, blocked }) => {
                rows[black as usize][blocked as usize]
            }
            _ => panic!("class {class:?} does not belong to a {} table", self.kind),
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let unit = |what: String, value: f64, lo_open: bool, hi_open: bool| {
            let ok = value.is_finite()
                && if lo_open { value > 0.0 } else { value >= -VALIDATION_TOL }
                && if hi_open { value < 1.0 } else { value <= 1.0 + VALIDATION_TOL };
            if ok {
                Ok(())
            } else {
                let range = match (lo_open, hi_open) {
                    (true, true) => "(0, 1)",
                    _ => "[0, 1]",
                };
                Err(KernelError::Range { what, value, range })
            }
        };
        unit("p".into(), self.p, false, false)?;
        unit("alpha".into(), self.alpha, true, true)?;

        let check_row = |name: String, row: &[f64; 3], expected: f64| {
            for (k, &v) in row.iter().enumerate() {
                unit(format!("{name}[{k}]"), v, false, false)?;
            }
            let sum: f64 = row.iter().sum();
            let residual = sum - expected;
            if residual.abs() > VALIDATION_TOL {
                return Err(KernelError::Normalization {
                    row: name,
                    sum,
                    expected,
                    residual,
                });
            }
            Ok(())
        };

        match (&self.horizontal, self.kind) {
            (HorizontalRows::Ice(rows), LatticeKind::Ice1h) => {
                for (i, row) in rows.iter().enumerate() {
                    check_row(format!("{i}"), row, 1.0 - self.p)?;
                }
            }
            (HorizontalRows::Graphite(rows), LatticeKind::Graphite2h) => {
                for (i, pair) in rows.iter().enumerate() {
                    for (j, row) in pair.iter().enumerate() {
                        let expected = if j == 0 { 1.0 - self.p } else { 1.0 };
                        check_row(format!("(i={i}, j={j})"), row, expected)?;
                    }
                }
            }
            _ => return Err(KernelError::Shape { kind: self.kind }),
        }
        Ok(())
    }

    pub fn classes(&self) -> &'static [VertexClass] {
        self.kind.classes()
    }
}

fn random_row(total: f64, rng: &mut WalkRng) -> [f64; 3] {
    // uniform on the simplex via sorted spacings
    let (mut x, mut y) = (rng.uniform(), rng.uniform());
    if x > y {
        std::mem::swap(&mut x, &mut y);
    }
    let row = [x * total, (y - x) * total, 0.0];
    [row[0], row[1], total - row[0] - row[1]]
}

/// A valid table with uniformly random p, α, row mixtures and geometry in
/// `[0.5, 2)`. About one table in twenty has p pinned at 0 or 1.
pub fn random_table(kind: LatticeKind, rng: &mut WalkRng) -> TransitionTable {
    let geometry = GeometryParams::new(0.5 + 1.5 * rng.uniform(), 0.5 + 1.5 * rng.uniform())
        .expect("positive by construction");
    let p = match rng.uniform() {
        r if r < 0.025 => 0.0,
        r if r < 0.05 => 1.0,
        _ => rng.uniform(),
    };
    let alpha = 0.01 + 0.98 * rng.uniform();
    match kind {
        LatticeKind::Ice1h => {
            TransitionTable::ice(geometry, p, alpha, [random_row(1.0 - p, rng), random_row(1.0 - p, rng)])
        }
        LatticeKind::Graphite2h => {
            let mut rows = [[[0.0; 3]; 2]; 2];
            for pair in rows.iter_mut() {
                pair[0] = random_row(1.0 - p, rng);
                pair[1] = random_row(1.0, rng);
            }
            TransitionTable::graphite(geometry, p, alpha, rows)
        }
    }
}

/// One support point of the increment law `ξ_{n+1}` given the current class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementAtom {
    #[serde(rename = "move")]
    pub mv: MoveLabel,
    #[serde(serialize_with = "crate::matrix_json::vec3")]
    pub displacement: Vec3,
    pub probability: f64,
    pub class_after: VertexClass,
}

/// Full support of the one-step increment from `class`, in the fixed order
/// Up, Down, H0, H1, H2. Zero-probability atoms are dropped.
pub fn increment_distribution(table: &TransitionTable, class: VertexClass) -> Vec<IncrementAtom> {
    let g = table.geometry;
    let row = table.row(class);
    let probe = LatticeState { cell_k: 0, cell_l: 0, sheet_n: 0, class };
    MoveLabel::ALL
        .iter()
        .filter_map(|&mv| {
            let probability = match mv {
                MoveLabel::Up if class.can_jump() => table.alpha * table.p,
                MoveLabel::Down if class.can_jump() => (1.0 - table.alpha) * table.p,
                MoveLabel::Up | MoveLabel::Down => 0.0,
                h => row[h.direction().unwrap()],
            };
            if probability <= 0.0 {
                return None;
            }
            let u = mv.unit_displacement(class.is_black());
            let class_after = probe.apply_move(mv).expect("admissible by construction").class;
            Some(IncrementAtom {
                mv,
                displacement: Vec3::new(g.a * u[0], g.a * u[1], g.h * u[2]),
                probability,
                class_after,
            })
        })
        .collect()
}

fn expect<T>(atoms: &[IncrementAtom], zero: T, f: impl Fn(&IncrementAtom) -> T) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    atoms.iter().fold(zero, |acc, atom| acc + f(atom) * atom.probability)
}

/// `E[ξ' | class]`.
pub fn conditional_mean(table: &TransitionTable, class: VertexClass) -> Vec3 {
    expect(&increment_distribution(table, class), Vec3::zeros(), |a| a.displacement)
}

/// `E[ξ' ξ'ᵀ | class]`.
pub fn conditional_second_moment(table: &TransitionTable, class: VertexClass) -> Mat3 {
    expect(&increment_distribution(table, class), Mat3::zeros(), |a| {
        a.displacement * a.displacement.transpose()
    })
}

/// `E[s' | class]` for a sign process `s` evaluated after the step.
pub fn conditional_sign_mean(table: &TransitionTable, class: VertexClass, sign: Sign) -> f64 {
    expect(&increment_distribution(table, class), 0.0, |a| a.class_after.sign_value(sign))
}

/// `E[ξ' s' | class]`.
pub fn conditional_cross_moment(table: &TransitionTable, class: VertexClass, sign: Sign) -> Vec3 {
    expect(&increment_distribution(table, class), Vec3::zeros(), |a| {
        a.displacement * a.class_after.sign_value(sign)
    })
}

/// `E[s' t' | class]`.
pub fn conditional_sign_product(
    table: &TransitionTable,
    class: VertexClass,
    s: Sign,
    t: Sign,
) -> f64 {
    expect(&increment_distribution(table, class), 0.0, |a| {
        a.class_after.sign_value(s) * a.class_after.sign_value(t)
    })
}

/// Conditional covariance of the joint increment `(ξ', s'_1, ..., s'_d)`
/// given `class`: the per-step increment of the joint predictable bracket.
pub fn joint_conditional_covariance(
    table: &TransitionTable,
    class: VertexClass,
    signs: &[Sign],
) -> DMatrix<f64> {
    let atoms = increment_distribution(table, class);
    let dim = 3 + signs.len();
    let vector = |a: &IncrementAtom| {
        let mut v = vec![a.displacement.x, a.displacement.y, a.displacement.z];
        v.extend(signs.iter().map(|&s| a.class_after.sign_value(s)));
        nalgebra::DVector::from_vec(v)
    };
    let mean = expect(&atoms, nalgebra::DVector::zeros(dim), vector);
    let second = expect(&atoms, DMatrix::zeros(dim, dim), |a| {
        let v = vector(a);
        &v * v.transpose()
    });
    second - &mean * mean.transpose()
}
