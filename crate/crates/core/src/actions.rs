//! Push actions and their discretization.
//!
//! A continuous push is a start point inside the bin plus one of 8 canonical
//! directions (multiples of 45 degrees, measured from +x toward +y in image
//! coordinates, so y grows downward); travel distance is fixed at
//! [`PUSH_DISTANCE`]. The discrete form quantizes the start onto a 28x28 grid
//! of 8-pixel bins and keeps the direction class, with class 8 reserved for
//! STOP. Decoding maps a bin to its center, so a quantize/decode cycle moves a
//! start by at most 4 pixels per axis and `discretize(continuize(d)) == d`
//! holds for every non-STOP discrete action.

use crate::scalar::Real;
use crate::{BIN_SIZE, GRID_STEP, N_DIRECTIONS, N_POS_BINS, PUSH_DISTANCE, STOP_CLASS};
use serde::{Deserialize, Serialize};

/// Continuous push: start point in pixels and a direction class in `[0, 8)`.
/// The travel distance is always [`PUSH_DISTANCE`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushAction {
    pub start: (f64, f64),
    pub direction_class: u8,
}

impl PushAction {
    pub fn new(start: (f64, f64), direction_class: u8) -> Self {
        debug_assert!((direction_class as usize) < N_DIRECTIONS);
        PushAction { start, direction_class }
    }

    /// True when the start point lies inside the bin.
    pub fn start_in_bin(&self) -> bool {
        let (x, y) = self.start;
        x >= 0.0 && x < BIN_SIZE as f64 && y >= 0.0 && y < BIN_SIZE as f64
    }
}

/// Discretized action: position bins in `[0, 28)` per axis and an orientation
/// class in `[0, 8]`, where 8 is STOP. Serializes as `[x_bin, y_bin, o_class]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u8; 3]", into = "[u8; 3]")]
pub struct DiscreteAction {
    pub x_bin: u8,
    pub y_bin: u8,
    pub o_class: u8,
}

impl From<[u8; 3]> for DiscreteAction {
    fn from(v: [u8; 3]) -> Self {
        DiscreteAction { x_bin: v[0], y_bin: v[1], o_class: v[2] }
    }
}

impl From<DiscreteAction> for [u8; 3] {
    fn from(a: DiscreteAction) -> Self {
        [a.x_bin, a.y_bin, a.o_class]
    }
}

impl DiscreteAction {
    /// Canonical STOP encoding; position bins are ignored when `o_class` is 8.
    pub const STOP: DiscreteAction = DiscreteAction { x_bin: 0, y_bin: 0, o_class: STOP_CLASS };

    pub fn new(x_bin: u8, y_bin: u8, o_class: u8) -> Self {
        let a = DiscreteAction { x_bin, y_bin, o_class };
        debug_assert!(a.in_range());
        a
    }

    pub fn is_stop(&self) -> bool {
        self.o_class == STOP_CLASS
    }

    /// True when every field lies in its declared range.
    pub fn in_range(&self) -> bool {
        (self.x_bin as usize) < N_POS_BINS
            && (self.y_bin as usize) < N_POS_BINS
            && self.o_class <= STOP_CLASS
    }
}

/// Unit vector of direction class `o` in image coordinates (y down).
/// Components are exact: 0, +-1, or +-sqrt(2)/2.
pub fn direction_vector<T: Real>(o: u8) -> (T, T) {
    let s = T::FRAC_1_SQRT_2();
    let one = T::one();
    let zero = T::zero();
    match o {
        0 => (one, zero),
        1 => (s, s),
        2 => (zero, one),
        3 => (-s, s),
        4 => (-one, zero),
        5 => (-s, -s),
        6 => (zero, -one),
        7 => (s, -s),
        _ => panic!("direction class {o} out of range"),
    }
}

/// Integer displacement of a full push along direction class `o`: the push
/// vector rounded to whole pixels (56 on an axis, 40 per component on a
/// diagonal), keeping box corners integral.
pub fn direction_displacement(o: u8) -> (i32, i32) {
    const DIAG: i32 = 40; // round(56 / sqrt(2))
    match o {
        0 => (PUSH_DISTANCE, 0),
        1 => (DIAG, DIAG),
        2 => (0, PUSH_DISTANCE),
        3 => (-DIAG, DIAG),
        4 => (-PUSH_DISTANCE, 0),
        5 => (-DIAG, -DIAG),
        6 => (0, -PUSH_DISTANCE),
        7 => (DIAG, -DIAG),
        _ => panic!("direction class {o} out of range"),
    }
}

/// Per-component sign of direction class `o`.
pub fn direction_step(o: u8) -> (i32, i32) {
    let (dx, dy) = direction_displacement(o);
    (dx.signum(), dy.signum())
}

/// Direction class nearest to an angle in degrees (from +x toward +y).
pub fn direction_class_from_angle(angle_deg: f64) -> u8 {
    ((angle_deg / 45.0).round().rem_euclid(8.0)) as u8
}

/// Quantize a push onto the discrete grid: `floor(px / 8)` per axis, direction
/// class preserved. The start must lie inside the bin.
pub fn discretize(action: &PushAction) -> DiscreteAction {
    debug_assert!(action.start_in_bin());
    let bin = |p: f64| ((p / GRID_STEP as f64).floor() as i64).clamp(0, N_POS_BINS as i64 - 1) as u8;
    DiscreteAction {
        x_bin: bin(action.start.0),
        y_bin: bin(action.start.1),
        o_class: action.direction_class,
    }
}

/// Decode a discrete action to the continuous push at the bin center
/// (`8 * bin + 4` per axis); `None` for STOP.
pub fn continuize(action: &DiscreteAction) -> Option<PushAction> {
    if action.is_stop() {
        return None;
    }
    debug_assert!(action.in_range());
    let center = |b: u8| (GRID_STEP * b as i32 + GRID_STEP / 2) as f64;
    Some(PushAction {
        start: (center(action.x_bin), center(action.y_bin)),
        direction_class: action.o_class,
    })
}

/// Center of a push stroke: the start advanced half the travel distance.
pub fn push_midpoint(action: &PushAction) -> (f64, f64) {
    let (dx, dy) = direction_vector::<f64>(action.direction_class);
    let half = PUSH_DISTANCE as f64 / 2.0;
    (action.start.0 + half * dx, action.start.1 + half * dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQ: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn direction_vectors_are_exact() {
        assert_eq!(direction_vector::<f64>(0), (1.0, 0.0));
        assert_eq!(direction_vector::<f64>(2), (0.0, 1.0));
        assert_eq!(direction_vector::<f64>(5), (-SQ, -SQ));
        assert_eq!(direction_vector::<f32>(1), (SQ as f32, SQ as f32));
    }

    #[test]
    fn opposite_classes_negate() {
        for o in 0..8u8 {
            let (x, y) = direction_vector::<f64>(o);
            let (nx, ny) = direction_vector::<f64>((o + 4) % 8);
            assert_eq!((x, y), (-nx, -ny), "class {o} vs {}", (o + 4) % 8);
        }
    }

    #[test]
    fn displacements_match_vectors() {
        for o in 0..8u8 {
            let (vx, vy) = direction_vector::<f64>(o);
            let (dx, dy) = direction_displacement(o);
            assert_eq!(dx, (PUSH_DISTANCE as f64 * vx).round() as i32);
            assert_eq!(dy, (PUSH_DISTANCE as f64 * vy).round() as i32);
        }
    }

    #[test]
    fn discretize_examples() {
        let a = PushAction::new((0.0, 0.0), 0);
        assert_eq!(discretize(&a), DiscreteAction::new(0, 0, 0));
        let b = PushAction::new((223.0, 223.0), direction_class_from_angle(315.0));
        assert_eq!(discretize(&b), DiscreteAction::new(27, 27, 7));
        let c = PushAction::new((8.0, 15.9), 2);
        assert_eq!(discretize(&c), DiscreteAction::new(1, 1, 2));
    }

    #[test]
    fn continuize_examples() {
        let a = continuize(&DiscreteAction::new(0, 0, 0)).unwrap();
        assert_eq!(a.start, (4.0, 4.0));
        assert_eq!(a.direction_class, 0);
        let b = continuize(&DiscreteAction::new(27, 27, 7)).unwrap();
        assert_eq!(b.start, (220.0, 220.0));
        assert!(continuize(&DiscreteAction::STOP).is_none());
        assert!(continuize(&DiscreteAction { x_bin: 5, y_bin: 5, o_class: 8 }).is_none());
    }

    #[test]
    fn roundtrip_over_full_grid() {
        for x in 0..N_POS_BINS as u8 {
            for y in 0..N_POS_BINS as u8 {
                for o in 0..N_DIRECTIONS as u8 {
                    let d = DiscreteAction::new(x, y, o);
                    let back = discretize(&continuize(&d).unwrap());
                    assert_eq!(back, d);
                }
            }
        }
    }

    #[test]
    fn quantization_moves_start_at_most_half_bin() {
        // Worst cases: bin edge (error exactly 4) and just under the next edge.
        for &px in &[0.0, 3.9, 4.0, 7.99, 120.5, 223.0] {
            let a = PushAction::new((px, px), 3);
            let decoded = continuize(&discretize(&a)).unwrap();
            assert!((decoded.start.0 - px).abs() <= 4.0, "px={px}");
            assert!((decoded.start.1 - px).abs() <= 4.0, "px={px}");
        }
    }

    #[test]
    fn angle_snapping() {
        assert_eq!(direction_class_from_angle(0.0), 0);
        assert_eq!(direction_class_from_angle(315.0), 7);
        assert_eq!(direction_class_from_angle(-45.0), 7);
        assert_eq!(direction_class_from_angle(91.0), 2);
    }

    #[test]
    fn midpoint_advances_half_push() {
        let m = push_midpoint(&PushAction::new((0.0, 0.0), 0));
        assert_eq!(m, (28.0, 0.0));
        let m2 = push_midpoint(&PushAction::new((100.0, 100.0), 2));
        assert_eq!(m2, (100.0, 128.0));
    }

    #[test]
    fn wire_form_is_a_triple() {
        let d = DiscreteAction::new(3, 14, 8);
        assert_eq!(serde_json::to_string(&d).unwrap(), "[3,14,8]");
        let back: DiscreteAction = serde_json::from_str("[3,14,8]").unwrap();
        assert_eq!(back, d);
    }
}
