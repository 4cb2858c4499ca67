//! Exact integer representation of the ice-1h and graphite-2h lattices.
//!
//! A vertex is stored as three integers `(k, l, n)` plus its class bits. The
//! real coordinates are only ever derived from those integers, never the
//! other way round, so class membership cannot drift.
//!
//! Embedding (`a` bond length, `h` sheet spacing, `s = sqrt(3)`):
//!
//! * ice, color `i`: `(a(i + 3k/2), a(s k/2 + s l), h n)`
//! * graphite, class `(i, j)`:
//!   `(a((-1)^(i+1) [j = 1] + 3k/2), a(s k/2 + s l), h(2n + [i != j]))`

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("geometry parameter `{name}` must be finite and > 0, got {value}")]
    Geometry { name: &'static str, value: f64 },
    #[error("state class {class:?} does not belong to the {kind} lattice")]
    WrongKind { class: VertexClass, kind: LatticeKind },
    #[error("embedded coordinates of {state:?} do not match its stored class")]
    Inconsistent { state: LatticeState },
    #[error("move {mv:?} is not admissible from class {class:?}")]
    Inadmissible { mv: MoveLabel, class: VertexClass },
}

/// Bond length `a` inside a sheet and spacing `h` between sheets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    pub a: f64,
    pub h: f64,
}

impl GeometryParams {
    pub fn new(a: f64, h: f64) -> Result<Self, LatticeError> {
        for (name, value) in [("a", a), ("h", h)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(LatticeError::Geometry { name, value });
            }
        }
        Ok(Self { a, h })
    }

    pub fn unit() -> Self {
        Self { a: 1.0, h: 1.0 }
    }
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self::unit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatticeKind {
    #[serde(rename = "ice")]
    Ice1h,
    #[serde(rename = "graphite")]
    Graphite2h,
}

impl LatticeKind {
    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::Ice1h => "ice",
            LatticeKind::Graphite2h => "graphite",
        }
    }

    pub fn classes(self) -> &'static [VertexClass] {
        match self {
            LatticeKind::Ice1h => &ICE_CLASSES,
            LatticeKind::Graphite2h => &GRAPHITE_CLASSES,
        }
    }
}

impl std::fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Local-geometry label of a vertex.
///
/// `black` is the horizontal color bit `i`. For graphite, `blocked` is the
/// bit `j`: set on sheet sites that have no vertical neighbor. Ice has no
/// `j` bit at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexClass {
    Ice { black: bool },
    Graphite { black: bool, blocked: bool },
}

pub const ICE_CLASSES: [VertexClass; 2] = [
    VertexClass::Ice { black: false },
    VertexClass::Ice { black: true },
];

/// Graphite classes in index order `V00, V10, V01, V11` (index `i + 2j`).
pub const GRAPHITE_CLASSES: [VertexClass; 4] = [
    VertexClass::Graphite { black: false, blocked: false },
    VertexClass::Graphite { black: true, blocked: false },
    VertexClass::Graphite { black: false, blocked: true },
    VertexClass::Graphite { black: true, blocked: true },
];

/// The ±1 sign processes attached to a vertex class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    /// `1 - 2i`: the ice `ε` or the graphite `i_n`.
    Color,
    /// `1 - 2j` (graphite only).
    Jump,
    /// `(1 - 2i)(1 - 2j)`, the altitude parity (graphite only).
    Altitude,
}

impl VertexClass {
    pub fn kind(self) -> LatticeKind {
        match self {
            VertexClass::Ice { .. } => LatticeKind::Ice1h,
            VertexClass::Graphite { .. } => LatticeKind::Graphite2h,
        }
    }

    pub fn is_black(self) -> bool {
        match self {
            VertexClass::Ice { black } | VertexClass::Graphite { black, .. } => black,
        }
    }

    /// Whether vertical moves are possible from this class.
    pub fn can_jump(self) -> bool {
        !matches!(self, VertexClass::Graphite { blocked: true, .. })
    }

    /// Dense index: ice `i`, graphite `i + 2j`.
    pub fn index(self) -> usize {
        match self {
            VertexClass::Ice { black } => black as usize,
            VertexClass::Graphite { black, blocked } => black as usize + 2 * blocked as usize,
        }
    }

    pub fn from_index(kind: LatticeKind, index: usize) -> Option<Self> {
        kind.classes().get(index).copied()
    }

    pub fn sign(self, which: Sign) -> Option<i8> {
        let color = if self.is_black() { -1 } else { 1 };
        match (self, which) {
            (_, Sign::Color) => Some(color),
            (VertexClass::Graphite { blocked, .. }, Sign::Jump) => Some(if blocked { -1 } else { 1 }),
            (VertexClass::Graphite { blocked, .. }, Sign::Altitude) => {
                Some(color * if blocked { -1 } else { 1 })
            }
            (VertexClass::Ice { .. }, _) => None,
        }
    }

    /// Sign that must exist for this class; panics on ice `Jump`/`Altitude`.
    pub(crate) fn sign_value(self, which: Sign) -> f64 {
        f64::from(self.sign(which).expect("sign not defined for this lattice"))
    }

    /// Short label such as `V0` or `V10`.
    pub fn label(self) -> &'static str {
        match self {
            VertexClass::Ice { black: false } => "V0",
            VertexClass::Ice { black: true } => "V1",
            VertexClass::Graphite { black: false, blocked: false } => "V00",
            VertexClass::Graphite { black: true, blocked: false } => "V10",
            VertexClass::Graphite { black: false, blocked: true } => "V01",
            VertexClass::Graphite { black: true, blocked: true } => "V11",
        }
    }

    // Offsets of the embedding in units of a (x) and h (z, added to the
    // sheet term).
    fn x_offset(self) -> f64 {
        match self {
            VertexClass::Ice { black } => black as u8 as f64,
            VertexClass::Graphite { blocked: false, .. } => 0.0,
            VertexClass::Graphite { black: false, blocked: true } => -1.0,
            VertexClass::Graphite { black: true, blocked: true } => 1.0,
        }
    }

    fn z_of_sheet(self, sheet: i64) -> f64 {
        match self {
            VertexClass::Ice { .. } => sheet as f64,
            VertexClass::Graphite { black, blocked } => {
                2.0 * sheet as f64 + if black != blocked { 1.0 } else { 0.0 }
            }
        }
    }
}

/// A single move from a vertex, in the fixed atom order used for sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveLabel {
    Up,
    Down,
    H0,
    H1,
    H2,
}

impl MoveLabel {
    pub const ALL: [MoveLabel; 5] = [
        MoveLabel::Up,
        MoveLabel::Down,
        MoveLabel::H0,
        MoveLabel::H1,
        MoveLabel::H2,
    ];

    pub fn horizontal(direction: usize) -> Option<Self> {
        [MoveLabel::H0, MoveLabel::H1, MoveLabel::H2].get(direction).copied()
    }

    /// Horizontal direction index, `None` for vertical moves.
    pub fn direction(self) -> Option<usize> {
        match self {
            MoveLabel::H0 => Some(0),
            MoveLabel::H1 => Some(1),
            MoveLabel::H2 => Some(2),
            MoveLabel::Up | MoveLabel::Down => None,
        }
    }

    pub fn is_vertical(self) -> bool {
        self.direction().is_none()
    }

    /// The move that undoes `self` from the image vertex.
    ///
    /// Direction `j` from a white vertex points the opposite way to direction
    /// `j` from a black one, so every horizontal move is its own inverse.
    pub fn inverse(self) -> Self {
        match self {
            MoveLabel::Up => MoveLabel::Down,
            MoveLabel::Down => MoveLabel::Up,
            h => h,
        }
    }

    /// Unit-free displacement for `a = h = 1`, taken from a vertex of the
    /// given color: `(cos(2πj/3 + iπ), sin(2πj/3 + iπ), 0)` or `(0, 0, ±1)`.
    pub(crate) fn unit_displacement(self, black: bool) -> [f64; 3] {
        const COS: [f64; 3] = [1.0, -0.5, -0.5];
        const SIN: [f64; 3] = [0.0, SQRT3 / 2.0, -SQRT3 / 2.0];
        match self {
            MoveLabel::Up => [0.0, 0.0, 1.0],
            MoveLabel::Down => [0.0, 0.0, -1.0],
            h => {
                let j = h.direction().unwrap();
                let s = if black { -1.0 } else { 1.0 };
                [s * COS[j], s * SIN[j], 0.0]
            }
        }
    }
}

/// Integer `(dk, dl)` of horizontal direction `j` from a vertex of the given
/// color. Identical on both lattices: graphite odd sheets are the ice pattern
/// shifted by `-a` in x.
const fn horizontal_delta(black: bool, direction: usize) -> (i64, i64) {
    match (black, direction) {
        (false, 0) => (0, 0),
        (false, 1) => (-1, 1),
        (false, _) => (-1, 0),
        (true, 0) => (0, 0),
        (true, 1) => (1, -1),
        (true, _) => (1, 0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeState {
    pub cell_k: i64,
    pub cell_l: i64,
    pub sheet_n: i64,
    pub class: VertexClass,
}

impl LatticeState {
    /// The origin, a white (jump-capable) vertex on sheet 0.
    pub fn origin(kind: LatticeKind) -> Self {
        Self {
            cell_k: 0,
            cell_l: 0,
            sheet_n: 0,
            class: kind.classes()[0],
        }
    }

    pub fn kind(&self) -> LatticeKind {
        self.class.kind()
    }

    pub fn position(&self, geometry: &GeometryParams) -> Vec3 {
        let k = self.cell_k as f64;
        let l = self.cell_l as f64;
        Vec3::new(
            geometry.a * (self.class.x_offset() + 1.5 * k),
            geometry.a * (SQRT3 / 2.0 * k + SQRT3 * l),
            geometry.h * self.class.z_of_sheet(self.sheet_n),
        )
    }

    /// Neighbor reached by `mv`; vertical moves from blocked graphite sites
    /// are rejected.
    pub fn apply_move(&self, mv: MoveLabel) -> Result<Self, LatticeError> {
        let mut next = *self;
        match (self.class, mv.direction()) {
            (class, Some(dir)) => {
                let (dk, dl) = horizontal_delta(class.is_black(), dir);
                next.cell_k += dk;
                next.cell_l += dl;
                next.class = match class {
                    VertexClass::Ice { black } => VertexClass::Ice { black: !black },
                    VertexClass::Graphite { black, blocked } => VertexClass::Graphite {
                        black: !black,
                        blocked: !blocked,
                    },
                };
            }
            (VertexClass::Ice { .. }, None) => {
                next.sheet_n += if mv == MoveLabel::Up { 1 } else { -1 };
            }
            (VertexClass::Graphite { blocked: true, .. }, None) => {
                return Err(LatticeError::Inadmissible { mv, class: self.class });
            }
            (VertexClass::Graphite { black, blocked: false }, None) => {
                // V00 on z = 2nh sits between V10 of sheets n-1 and n.
                next.sheet_n += match (black, mv) {
                    (false, MoveLabel::Up) | (true, MoveLabel::Down) => 0,
                    (false, _) => -1,
                    (true, _) => 1,
                };
                next.class = VertexClass::Graphite { black: !black, blocked: false };
            }
        }
        Ok(next)
    }
}

/// Returns the stored class of `state`, checking that it belongs to `kind`.
///
/// In debug builds the class is additionally recomputed from the embedded
/// coordinates (unit geometry) and compared.
pub fn classify(state: &LatticeState, kind: LatticeKind) -> Result<VertexClass, LatticeError> {
    if state.class.kind() != kind {
        return Err(LatticeError::WrongKind { class: state.class, kind });
    }
    if cfg!(debug_assertions) {
        check_embedding(state)?;
    }
    Ok(state.class)
}

/// Recomputes the class from coordinates and compares with the stored one.
pub fn check_embedding(state: &LatticeState) -> Result<(), LatticeError> {
    let geometry = GeometryParams::unit();
    match locate(&state.position(&geometry), &geometry, state.kind()) {
        Some(found) if found == *state => Ok(()),
        _ => Err(LatticeError::Inconsistent { state: *state }),
    }
}

/// Finds the lattice vertex at `point`, if there is one (within 1e-9 in
/// lattice units).
pub fn locate(point: &Vec3, geometry: &GeometryParams, kind: LatticeKind) -> Option<LatticeState> {
    const TOL: f64 = 1e-9;
    let near_int = |x: f64| {
        let r = x.round();
        ((x - r).abs() <= TOL).then_some(r as i64)
    };
    let xu = point.x / geometry.a;
    let yu = point.y / geometry.a;
    let zu = point.z / geometry.h;
    kind.classes().iter().find_map(|&class| {
        let k = near_int((xu - class.x_offset()) * 2.0 / 3.0)?;
        let l = near_int(yu / SQRT3 - k as f64 / 2.0)?;
        let n = match class {
            VertexClass::Ice { .. } => near_int(zu)?,
            VertexClass::Graphite { .. } => {
                let parity = class.z_of_sheet(0);
                let twice = near_int(zu - parity)?;
                if twice % 2 != 0 {
                    return None;
                }
                twice / 2
            }
        };
        Some(LatticeState { cell_k: k, cell_l: l, sheet_n: n, class })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ICE: LatticeKind = LatticeKind::Ice1h;
    const GRA: LatticeKind = LatticeKind::Graphite2h;

    fn state(k: i64, l: i64, n: i64, class: VertexClass) -> LatticeState {
        LatticeState { cell_k: k, cell_l: l, sheet_n: n, class }
    }

    #[test]
    fn origin_is_white() {
        assert_eq!(
            classify(&LatticeState::origin(ICE), ICE).unwrap(),
            VertexClass::Ice { black: false }
        );
        assert_eq!(classify(&LatticeState::origin(GRA), GRA).unwrap(), GRAPHITE_CLASSES[0]);
        assert_eq!(LatticeState::origin(GRA).position(&GeometryParams::unit()), Vec3::zeros());
    }

    #[test]
    fn graphite_up_from_origin_is_v10_at_height_h() {
        let up = LatticeState::origin(GRA).apply_move(MoveLabel::Up).unwrap();
        assert_eq!(classify(&up, GRA).unwrap(), VertexClass::Graphite { black: true, blocked: false });
        assert_eq!(up.position(&GeometryParams::unit()), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn ice_h0_from_origin_is_black_at_a() {
        let g = GeometryParams::new(1.3, 0.7).unwrap();
        let s = LatticeState::origin(ICE).apply_move(MoveLabel::H0).unwrap();
        assert_eq!(s.class, VertexClass::Ice { black: true });
        assert_eq!(s.position(&g), Vec3::new(1.3, 0.0, 0.0));
        assert_eq!(locate(&s.position(&g), &g, ICE), Some(s));
    }

    #[test]
    fn ice_up_keeps_class_and_cell() {
        let s = LatticeState::origin(ICE).apply_move(MoveLabel::Up).unwrap();
        assert_eq!(s, state(0, 0, 1, VertexClass::Ice { black: false }));
    }

    #[test]
    fn embedding_examples() {
        let g = GeometryParams::unit();
        let p = state(1, 0, 0, ICE_CLASSES[0]).position(&g);
        assert!((p - Vec3::new(1.5, SQRT3 / 2.0, 0.0)).norm() < 1e-15);
        let q = state(0, 0, 0, GRAPHITE_CLASSES[1]).position(&g);
        assert_eq!(q, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn ice_h1_from_white_goes_to_cell_minus_one_plus_one() {
        let s = state(3, -2, 5, ICE_CLASSES[0]).apply_move(MoveLabel::H1).unwrap();
        assert_eq!(s, state(2, -1, 5, ICE_CLASSES[1]));
    }

    #[test]
    fn blocked_graphite_site_rejects_vertical_moves() {
        let blocked = state(0, 0, 0, GRAPHITE_CLASSES[3]);
        for mv in [MoveLabel::Up, MoveLabel::Down] {
            assert!(matches!(blocked.apply_move(mv), Err(LatticeError::Inadmissible { .. })));
        }
    }

    #[test]
    fn wrong_kind_is_a_structural_error() {
        let s = LatticeState::origin(ICE);
        assert!(matches!(classify(&s, GRA), Err(LatticeError::WrongKind { .. })));
    }

    #[test]
    fn locate_rejects_off_lattice_points() {
        let g = GeometryParams::unit();
        assert_eq!(locate(&Vec3::new(0.5, 0.0, 0.0), &g, ICE), None);
        // z = h on the even graphite columns holds V10 only.
        assert_eq!(locate(&Vec3::new(1.0, 0.0, 1.0), &g, GRA), None);
    }

    #[test]
    fn signs_satisfy_parity_relations() {
        for c in GRAPHITE_CLASSES {
            let i = c.sign(Sign::Color).unwrap();
            let j = c.sign(Sign::Jump).unwrap();
            let k = c.sign(Sign::Altitude).unwrap();
            assert_eq!(i * j, k);
            assert_eq!(j * k, i);
            assert_eq!(i * k, j);
        }
        assert_eq!(ICE_CLASSES[1].sign(Sign::Jump), None);
    }

    #[test]
    fn class_index_round_trip() {
        for kind in [ICE, GRA] {
            for (idx, c) in kind.classes().iter().enumerate() {
                assert_eq!(c.index(), idx);
                assert_eq!(VertexClass::from_index(kind, idx), Some(*c));
            }
        }
    }

    fn any_state() -> impl Strategy<Value = LatticeState> {
        (-1000i64..1000, -1000i64..1000, -1000i64..1000, 0usize..6).prop_map(|(k, l, n, c)| {
            let class = if c < 2 { ICE_CLASSES[c] } else { GRAPHITE_CLASSES[c - 2] };
            state(k, l, n, class)
        })
    }

    proptest! {
        #[test]
        fn moves_round_trip_and_have_bond_length(
            s in any_state(),
            mv in prop::sample::select(MoveLabel::ALL.to_vec()),
            a in 0.1f64..10.0,
            h in 0.1f64..10.0,
        ) {
            let g = GeometryParams::new(a, h).unwrap();
            prop_assume!(s.class.can_jump() || !mv.is_vertical());
            let t = s.apply_move(mv).unwrap();
            prop_assert_eq!(t.apply_move(mv.inverse()).unwrap(), s);
            let d = (t.position(&g) - s.position(&g)).norm();
            let expected = if mv.is_vertical() { h } else { a };
            let scale = expected.max(s.position(&g).norm());
            prop_assert!((d - expected).abs() <= 1e-12 * scale);
            let unit = mv.unit_displacement(s.class.is_black());
            let disp = Vec3::new(a * unit[0], a * unit[1], h * unit[2]);
            prop_assert!((t.position(&g) - s.position(&g) - disp).norm() <= 1e-9);
            prop_assert_eq!(locate(&t.position(&g), &g, t.kind()), Some(t));
        }

        #[test]
        fn graphite_color_alternates_along_paths(
            moves in prop::collection::vec(0usize..5, 0..200)
        ) {
            let mut s = LatticeState::origin(GRA);
            for (step, &m) in moves.iter().enumerate() {
                let mv = if s.class.can_jump() { MoveLabel::ALL[m] } else { MoveLabel::ALL[2 + m % 3] };
                s = s.apply_move(mv).unwrap();
                let expected = if (step + 1) % 2 == 0 { 1 } else { -1 };
                prop_assert_eq!(s.class.sign(Sign::Color), Some(expected));
            }
        }
    }
}
