//! Where things were drawn: the 3×3 placement grid, object size classes and
//! attribution of actions to annotated objects.
//!
//! Grid cells are addressed row-major, `(1, 1)` being upper-left. A point on
//! an interior cell boundary belongs to the higher-index cell.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::annotations::ObjectLabel;
use crate::stroke_log::{Canvas, DrawAction};

fn cell_index(coord: f64, extent: u32) -> usize {
    let idx = (3.0 * coord / f64::from(extent)).floor();
    if idx.is_nan() || idx < 0.0 {
        0
    } else {
        (idx as usize).min(2)
    }
}

/// 1-based `(row, column)` of the cell containing `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
}

impl GridCell {
    pub fn of(x: f64, y: f64, canvas: Canvas) -> Self {
        Self {
            row: cell_index(y, canvas.height) + 1,
            col: cell_index(x, canvas.width) + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementGrid {
    /// Point counts, row-major from upper-left.
    pub n: [[u64; 3]; 3],
    /// `n / Σn`; `None` when no points were binned.
    pub p: Option<[[f64; 3]; 3]>,
}

impl PlacementGrid {
    pub fn total(&self) -> u64 {
        self.n.iter().flatten().sum()
    }

    /// Probability of a 1-based cell, 0 when the grid is empty.
    pub fn probability(&self, cell: GridCell) -> f64 {
        self.p.map_or(0.0, |p| p[cell.row - 1][cell.col - 1])
    }
}

pub fn placement_grid<I>(points: I, canvas: Canvas) -> PlacementGrid
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut n = [[0u64; 3]; 3];
    for (x, y) in points {
        let cell = GridCell::of(x, y, canvas);
        n[cell.row - 1][cell.col - 1] += 1;
    }
    let total: u64 = n.iter().flatten().sum();
    let p = (total > 0).then(|| n.map(|row| row.map(|c| c as f64 / total as f64)));
    PlacementGrid { n, p }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    /// `None` unless `x_min < x_max` and `y_min < y_max`.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Option<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.is_valid().then_some(b)
    }

    fn is_valid(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }

    /// Intersection with the canvas; `None` if nothing remains.
    pub fn clipped(&self, canvas: Canvas) -> Option<Self> {
        Self::new(
            self.x_min.max(0.0),
            self.y_min.max(0.0),
            self.x_max.min(f64::from(canvas.width)),
            self.y_max.min(f64::from(canvas.height)),
        )
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.x_min <= other.x_max && other.x_min <= self.x_max && self.y_min <= other.y_max && other.y_min <= self.y_max
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Tiny,
    Normal,
    Huge,
}

impl SizeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tiny => "tiny",
            Self::Normal => "normal",
            Self::Huge => "huge",
        }
    }

    /// Below 1/9 is tiny, above 2/3 is huge; both bounds are normal.
    pub fn from_ratio(ratio: f64) -> Self {
        if ratio < 1.0 / 9.0 {
            Self::Tiny
        } else if ratio > 2.0 / 3.0 {
            Self::Huge
        } else {
            Self::Normal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeCategory {
    pub value: SizeClass,
    pub area_ratio: f64,
}

pub fn size_category(object_box: &BoundingBox, canvas: Canvas) -> SizeCategory {
    let area_ratio = (object_box.area() / canvas.area()).clamp(0.0, 1.0);
    SizeCategory {
        value: SizeClass::from_ratio(area_ratio),
        area_ratio,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vertical {
    Upper,
    Middle,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizontal {
    Left,
    Center,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectPlacement {
    pub cell: GridCell,
    pub vertical: Vertical,
    pub horizontal: Horizontal,
}

impl fmt::Display for ObjectPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match self.vertical {
            Vertical::Upper => "upper",
            Vertical::Middle => "middle",
            Vertical::Lower => "lower",
        };
        let h = match self.horizontal {
            Horizontal::Left => "left",
            Horizontal::Center => "center",
            Horizontal::Right => "right",
        };
        write!(f, "{v}-{h}")
    }
}

/// Grid cell of the box centroid and its semantic tag.
pub fn object_placement(object_box: &BoundingBox, canvas: Canvas) -> ObjectPlacement {
    let (cx, cy) = object_box.center();
    let cell = GridCell::of(cx, cy, canvas);
    let vertical = [Vertical::Upper, Vertical::Middle, Vertical::Lower][cell.row - 1];
    let horizontal = [Horizontal::Left, Horizontal::Center, Horizontal::Right][cell.col - 1];
    ObjectPlacement {
        cell,
        vertical,
        horizontal,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "label")]
pub enum Attribution {
    Object(ObjectLabel),
    Background,
}

impl Attribution {
    pub fn label(&self) -> Option<ObjectLabel> {
        match self {
            Self::Object(l) => Some(*l),
            Self::Background => None,
        }
    }
}

/// Minimum share of an action's points a box must hold to claim the action.
pub const ATTRIBUTION_MAJORITY: f64 = 0.5;

/// Assigns an action to the object whose box holds the largest share of its
/// points, provided that share is at least one half. Ties prefer the smaller
/// box, then the label that comes first in [`ObjectLabel`] order.
pub fn attribute_action(action: &DrawAction, objects: &[(ObjectLabel, BoundingBox)]) -> Attribution {
    if action.points.is_empty() {
        return Attribution::Background;
    }
    let total = action.points.len() as f64;
    let mut best: Option<(f64, f64, ObjectLabel)> = None;
    for (label, b) in objects {
        let inside = action.points.iter().filter(|p| b.contains(p.x, p.y)).count();
        let share = inside as f64 / total;
        if share < ATTRIBUTION_MAJORITY {
            continue;
        }
        let better = match best {
            None => true,
            Some((s, area, l)) => share > s || (share == s && (b.area() < area || (b.area() == area && *label < l))),
        };
        if better {
            best = Some((share, b.area(), *label));
        }
    }
    best.map_or(Attribution::Background, |(_, _, l)| Attribution::Object(l))
}
