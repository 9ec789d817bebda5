//! Integer pixel rectangles.
//!
//! All simulator geometry is axis-aligned boxes with integer corners, so area
//! and overlap computations are exact; fractions only appear when ratios are
//! taken. Boxes serialize as the 4-tuple `[x_min, y_min, x_max, y_max]`.

use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in pixel coordinates, `x_min <= x_max` and
/// `y_min <= y_max`. A box covers the half-open cell range
/// `[x_min, x_max) x [y_min, y_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 4]", into = "[i32; 4]")]
pub struct PixelBox {
    pub x_min: i32,
    pub y_min: i32,
    pub x_max: i32,
    pub y_max: i32,
}

impl From<[i32; 4]> for PixelBox {
    fn from(v: [i32; 4]) -> Self {
        PixelBox { x_min: v[0], y_min: v[1], x_max: v[2], y_max: v[3] }
    }
}

impl From<PixelBox> for [i32; 4] {
    fn from(b: PixelBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl PixelBox {
    pub fn new(x_min: i32, y_min: i32, x_max: i32, y_max: i32) -> Self {
        debug_assert!(x_min <= x_max && y_min <= y_max, "inverted box");
        PixelBox { x_min, y_min, x_max, y_max }
    }

    pub fn width(&self) -> i32 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> i32 {
        self.y_max - self.y_min
    }

    /// Pixel area; zero for degenerate boxes.
    pub fn area(&self) -> i64 {
        self.width() as i64 * self.height() as i64
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() == 0
    }

    /// Overlap area with `other`; touching edges count as zero.
    pub fn overlap_area(&self, other: &PixelBox) -> i64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0);
        w as i64 * h as i64
    }

    /// True when the boxes share positive area.
    pub fn overlaps(&self, other: &PixelBox) -> bool {
        self.overlap_area(other) > 0
    }

    /// True when the unit cell with corner `(x, y)` lies inside the box.
    pub fn contains_cell(&self, x: i32, y: i32) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    /// Center point in pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) as f64 / 2.0,
            (self.y_min + self.y_max) as f64 / 2.0,
        )
    }

    /// Diagonal length in pixels.
    pub fn diagonal(&self) -> f64 {
        (self.width() as f64).hypot(self.height() as f64)
    }

    pub fn translated(&self, dx: i32, dy: i32) -> PixelBox {
        PixelBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Shift the box (size preserved) so it lies inside `[0, side) x [0, side)`.
    /// The box must not be larger than the container.
    pub fn clamped_within(&self, side: i32) -> PixelBox {
        debug_assert!(self.width() <= side && self.height() <= side);
        let mut b = *self;
        if b.x_min < 0 {
            b = b.translated(-b.x_min, 0);
        }
        if b.x_max > side {
            b = b.translated(side - b.x_max, 0);
        }
        if b.y_min < 0 {
            b = b.translated(0, -b.y_min);
        }
        if b.y_max > side {
            b = b.translated(0, side - b.y_max);
        }
        b
    }
}
