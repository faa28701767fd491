//! Observable drawing characteristics derived from annotations and features.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnnotationSet, MarkerSet, ObjectLabel, PartLabel};
use crate::features::FeatureProfile;
use crate::spatial::{object_placement, size_category, BoundingBox, GridCell, SizeClass};
use crate::stroke_log::{ActionType, DrawingSession, Rgb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturePredicate {
    // omissions
    OmittedHouse,
    OmittedTree,
    OmittedPerson,
    NoDoor,
    NoWindow,
    LossOfFacialFeatures,
    LimbLoss,
    IncompletePerson,
    // parts and scene elements
    Roots,
    SmokingChimney,
    // classifier markers
    LeaningHouse,
    TwoDimensionalHouse,
    DeadTree,
    FlattenedCrown,
    PokerFace,
    SingleLineLimbs,
    // placement of the whole drawing
    PlacementLeft,
    PlacementRight,
    PlacementHigh,
    PlacementLow,
    PlacementUpperLeft,
    PlacementCentral,
    TopEdge,
    BottomEdge,
    LeftEdge,
    SideEdge,
    // size
    SmallDrawing,
    LargeDrawing,
    VerySmallObject,
    // line quality
    ThickLines,
    FaintLines,
    VeryFaintLines,
    // colour
    ColorWhite,
    ColorBrown,
    ColorPurple,
    ColorYellow,
    ColorOrange,
    ColorGreen,
    ColorBlue,
    ColorRed,
    AbsenceOfColor,
    ExcessiveColor,
    // only ever supplied externally
    ExcessiveSeparation,
    InappropriateBodyProportions,
    Fist,
    NoAdditionalDecoration,
    SimplifiedDrawing,
    StraightLineEmphasis,
}

impl FeaturePredicate {
    pub const ALL: [FeaturePredicate; 48] = [
        Self::OmittedHouse,
        Self::OmittedTree,
        Self::OmittedPerson,
        Self::NoDoor,
        Self::NoWindow,
        Self::LossOfFacialFeatures,
        Self::LimbLoss,
        Self::IncompletePerson,
        Self::Roots,
        Self::SmokingChimney,
        Self::LeaningHouse,
        Self::TwoDimensionalHouse,
        Self::DeadTree,
        Self::FlattenedCrown,
        Self::PokerFace,
        Self::SingleLineLimbs,
        Self::PlacementLeft,
        Self::PlacementRight,
        Self::PlacementHigh,
        Self::PlacementLow,
        Self::PlacementUpperLeft,
        Self::PlacementCentral,
        Self::TopEdge,
        Self::BottomEdge,
        Self::LeftEdge,
        Self::SideEdge,
        Self::SmallDrawing,
        Self::LargeDrawing,
        Self::VerySmallObject,
        Self::ThickLines,
        Self::FaintLines,
        Self::VeryFaintLines,
        Self::ColorWhite,
        Self::ColorBrown,
        Self::ColorPurple,
        Self::ColorYellow,
        Self::ColorOrange,
        Self::ColorGreen,
        Self::ColorBlue,
        Self::ColorRed,
        Self::AbsenceOfColor,
        Self::ExcessiveColor,
        Self::ExcessiveSeparation,
        Self::InappropriateBodyProportions,
        Self::Fist,
        Self::NoAdditionalDecoration,
        Self::SimplifiedDrawing,
        Self::StraightLineEmphasis,
    ];

    pub fn as_str(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .expect("unit variants serialize to strings")
    }
}

impl fmt::Display for FeaturePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str())
    }
}

impl FromStr for FeaturePredicate {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| ())
    }
}

/// Colour names used by the indicator rules. Black and greys map to none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaletteColor {
    White,
    Brown,
    Purple,
    Yellow,
    Orange,
    Green,
    Blue,
    Red,
}

impl PaletteColor {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::White => "white",
            Self::Brown => "brown",
            Self::Purple => "purple",
            Self::Yellow => "yellow",
            Self::Orange => "orange",
            Self::Green => "green",
            Self::Blue => "blue",
            Self::Red => "red",
        }
    }

    pub fn predicate(self) -> FeaturePredicate {
        match self {
            Self::White => FeaturePredicate::ColorWhite,
            Self::Brown => FeaturePredicate::ColorBrown,
            Self::Purple => FeaturePredicate::ColorPurple,
            Self::Yellow => FeaturePredicate::ColorYellow,
            Self::Orange => FeaturePredicate::ColorOrange,
            Self::Green => FeaturePredicate::ColorGreen,
            Self::Blue => FeaturePredicate::ColorBlue,
            Self::Red => FeaturePredicate::ColorRed,
        }
    }

    pub fn is_chromatic(self) -> bool {
        self != Self::White
    }
}

const HUE_CENTERS: [(PaletteColor, f64); 6] = [
    (PaletteColor::Red, 0.0),
    (PaletteColor::Orange, 30.0),
    (PaletteColor::Yellow, 58.0),
    (PaletteColor::Green, 120.0),
    (PaletteColor::Blue, 225.0),
    (PaletteColor::Purple, 285.0),
];

/// `(hue degrees, saturation, value)`.
fn hsv(c: Rgb) -> (f64, f64, f64) {
    let (r, g, b) = (f64::from(c.r) / 255.0, f64::from(c.g) / 255.0, f64::from(c.b) / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    (hue, sat, max)
}

/// Nearest palette colour by hue; low-saturation colours are white or none.
pub fn quantize_color(c: Rgb) -> Option<PaletteColor> {
    let (hue, sat, val) = hsv(c);
    if sat < 0.2 || val < 0.15 {
        return (sat < 0.2 && val >= 0.85).then_some(PaletteColor::White);
    }
    if (10.0..45.0).contains(&hue) && val < 0.65 {
        return Some(PaletteColor::Brown);
    }
    HUE_CENTERS
        .iter()
        .map(|&(color, center)| {
            let d = (hue - center).abs();
            (color, d.min(360.0 - d))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(color, _)| color)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredicateConfig {
    /// Mean drawing line width at or above which lines count as thick.
    pub thick_line_px: f64,
    /// Mean drawing opacity at or below which lines count as faint.
    pub faint_opacity: f64,
    pub very_faint_opacity: f64,
    /// Distance from a canvas side, as a fraction of that dimension, that
    /// counts as touching the edge.
    pub edge_margin: f64,
    /// Distinct chromatic palette colours that count as excessive.
    pub excessive_color_count: usize,
}

impl Default for PredicateConfig {
    fn default() -> Self {
        Self {
            thick_line_px: 8.0,
            faint_opacity: 0.35,
            very_faint_opacity: 0.15,
            edge_margin: 0.02,
            excessive_color_count: 6,
        }
    }
}

/// Palette colours of every draw and fill action, in log order.
pub fn action_colors(session: &DrawingSession) -> Vec<Option<PaletteColor>> {
    session
        .actions
        .iter()
        .filter(|a| a.action_type != ActionType::Erase)
        .map(|a| quantize_color(a.color))
        .collect()
}

fn part_union(annotations: &AnnotationSet, label: ObjectLabel) -> Option<BTreeSet<PartLabel>> {
    let mut found = false;
    let parts = annotations
        .objects
        .iter()
        .filter(|o| o.label == label)
        .inspect(|_| found = true)
        .flat_map(|o| o.parts.iter().map(|p| p.label))
        .collect();
    found.then_some(parts)
}

/// Deterministic set of characteristics for the indicator rules.
///
/// Externally supplied predicates in `annotations.predicates` are included
/// verbatim; characteristics without a computational definition are never
/// derived here.
pub fn derive_feature_predicates(
    annotations: &AnnotationSet,
    profile: &FeatureProfile,
    session: &DrawingSession,
    config: &PredicateConfig,
) -> BTreeSet<FeaturePredicate> {
    use FeaturePredicate as P;
    let mut out: BTreeSet<FeaturePredicate> = annotations.predicates.iter().copied().collect();
    let canvas = session.canvas;

    for (label, omitted) in [
        (ObjectLabel::House, P::OmittedHouse),
        (ObjectLabel::Tree, P::OmittedTree),
        (ObjectLabel::Person, P::OmittedPerson),
    ] {
        if !annotations.has(label) {
            out.insert(omitted);
        }
    }
    if let Some(house) = part_union(annotations, ObjectLabel::House) {
        if !house.contains(&PartLabel::Door) {
            out.insert(P::NoDoor);
        }
        if !house.contains(&PartLabel::Window) {
            out.insert(P::NoWindow);
        }
    }
    if let Some(tree) = part_union(annotations, ObjectLabel::Tree) {
        if tree.contains(&PartLabel::Root) {
            out.insert(P::Roots);
        }
    }
    if let Some(person) = part_union(annotations, ObjectLabel::Person) {
        let has = |p| person.contains(&p);
        if !(has(PartLabel::Eye) && has(PartLabel::Nose) && has(PartLabel::Mouth)) {
            out.insert(P::LossOfFacialFeatures);
        }
        if !(has(PartLabel::Hand) && has(PartLabel::Leg)) {
            out.insert(P::LimbLoss);
        }
        if !has(PartLabel::Head) || !(has(PartLabel::Hand) || has(PartLabel::Leg)) {
            out.insert(P::IncompletePerson);
        }
    }
    if annotations.has(ObjectLabel::ChimneySmoke) {
        out.insert(P::SmokingChimney);
    }

    let m = &annotations.markers;
    for (marker, predicate) in [
        (m.leaning_house, P::LeaningHouse),
        (m.house_2d, P::TwoDimensionalHouse),
        (m.dead_tree, P::DeadTree),
        (m.flattened_crown, P::FlattenedCrown),
        (m.poker_face, P::PokerFace),
        (m.single_line_limbs, P::SingleLineLimbs),
    ] {
        if MarkerSet::is_set(marker) {
            out.insert(predicate);
        }
    }

    if annotations
        .objects
        .iter()
        .any(|o| o.label.is_htp() && size_category(&o.bbox, canvas).value == SizeClass::Tiny)
    {
        out.insert(P::VerySmallObject);
    }
    if let Some(drawing) = annotations.objects.iter().map(|o| o.bbox).reduce(|a, b| a.union(&b)) {
        placement_predicates(&drawing, session, config, &mut out);
    }

    if let Some(draw) = &profile.line_width.draw {
        if draw.mean >= config.thick_line_px {
            out.insert(P::ThickLines);
        }
    }
    if let Some(opacity) = profile.mean_draw_opacity {
        if opacity <= config.faint_opacity {
            out.insert(P::FaintLines);
        }
        if opacity <= config.very_faint_opacity {
            out.insert(P::VeryFaintLines);
        }
    }

    let colors = action_colors(session);
    let palette: BTreeSet<PaletteColor> = colors.iter().flatten().copied().collect();
    out.extend(palette.iter().map(|c| c.predicate()));
    let chromatic = palette.iter().filter(|c| c.is_chromatic()).count();
    if !colors.is_empty() && chromatic == 0 {
        out.insert(P::AbsenceOfColor);
    }
    if chromatic >= config.excessive_color_count {
        out.insert(P::ExcessiveColor);
    }
    out
}

fn placement_predicates(
    drawing: &BoundingBox,
    session: &DrawingSession,
    config: &PredicateConfig,
    out: &mut BTreeSet<FeaturePredicate>,
) {
    use FeaturePredicate as P;
    let canvas = session.canvas;
    match size_category(drawing, canvas).value {
        SizeClass::Tiny => {
            out.insert(P::SmallDrawing);
        }
        SizeClass::Huge => {
            out.insert(P::LargeDrawing);
        }
        SizeClass::Normal => {}
    }

    let placement = object_placement(drawing, canvas);
    let GridCell { row, col } = placement.cell;
    if col == 1 {
        out.insert(P::PlacementLeft);
    }
    if col == 3 {
        out.insert(P::PlacementRight);
    }
    if row == 1 {
        out.insert(P::PlacementHigh);
    }
    if row == 3 {
        out.insert(P::PlacementLow);
    }
    if (row, col) == (1, 1) {
        out.insert(P::PlacementUpperLeft);
    }
    if (row, col) == (2, 2) {
        out.insert(P::PlacementCentral);
    }

    let (w, h) = (f64::from(canvas.width), f64::from(canvas.height));
    let (mx, my) = (config.edge_margin * w, config.edge_margin * h);
    let left = drawing.x_min <= mx;
    let right = drawing.x_max >= w - mx;
    if drawing.y_min <= my {
        out.insert(P::TopEdge);
    }
    if drawing.y_max >= h - my {
        out.insert(P::BottomEdge);
    }
    if left {
        out.insert(P::LeftEdge);
    }
    if left || right {
        out.insert(P::SideEdge);
    }
}
