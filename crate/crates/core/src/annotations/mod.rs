//! Detector and classifier outputs for one drawing, and the rules that turn
//! them (together with the computed features) into indicator findings.
//!
//! Annotation JSON:
//!
//! ```json
//! { "objects": [{ "label": "house", "confidence": 0.93,
//!                 "box": { "x_min": 10, "y_min": 20, "x_max": 300, "y_max": 280 },
//!                 "parts": [{ "label": "door", "box": [120, 180, 160, 280] }] }],
//!   "markers": { "leaning_house": true, "poker_face": { "value": false, "confidence": 0.7 } },
//!   "predicates": ["fist"] }
//! ```
//!
//! Boxes may be objects or `[x_min, y_min, x_max, y_max]` arrays and are
//! clipped to the canvas.

mod client;
pub mod indicators;
pub mod predicates;

pub use client::{fetch_annotations, FetchError};
pub use indicators::{map_indicators, IndicatorMatch, IndicatorRule, RULES};
pub use predicates::{derive_feature_predicates, FeaturePredicate, PredicateConfig};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spatial::BoundingBox;
use crate::stroke_log::Canvas;

/// Main object classes, in the fixed order used for tie-breaks and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectLabel {
    House,
    Tree,
    Person,
    Bird,
    Cloud,
    Flower,
    Mountain,
    Sun,
    ChimneySmoke,
}

impl ObjectLabel {
    pub const ALL: [ObjectLabel; 9] = [
        Self::House,
        Self::Tree,
        Self::Person,
        Self::Bird,
        Self::Cloud,
        Self::Flower,
        Self::Mountain,
        Self::Sun,
        Self::ChimneySmoke,
    ];
    pub const HTP: [ObjectLabel; 3] = [Self::House, Self::Tree, Self::Person];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::House => "house",
            Self::Tree => "tree",
            Self::Person => "person",
            Self::Bird => "bird",
            Self::Cloud => "cloud",
            Self::Flower => "flower",
            Self::Mountain => "mountain",
            Self::Sun => "sun",
            Self::ChimneySmoke => "chimney_smoke",
        }
    }

    /// Human-readable form used in descriptions.
    pub fn display_name(self) -> &'static str {
        match self {
            Self::ChimneySmoke => "chimney smoke",
            other => other.as_str(),
        }
    }

    pub fn is_htp(self) -> bool {
        Self::HTP.contains(&self)
    }

    /// Part classes a detector may report inside this object.
    pub fn parts(self) -> &'static [PartLabel] {
        use PartLabel::*;
        match self {
            Self::House => &[Chimney, Door, Roof, Window],
            Self::Tree => &[Branches, Crown, Fruit, Root, Trunk],
            Self::Person => &[Eye, Hand, Head, Leg, Mouth, Neck, Nose],
            _ => &[],
        }
    }
}

impl fmt::Display for ObjectLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Self::ALL.into_iter().find(|l| l.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartLabel {
    Chimney,
    Door,
    Roof,
    Window,
    Branches,
    Crown,
    Fruit,
    Root,
    Trunk,
    Eye,
    Hand,
    Head,
    Leg,
    Mouth,
    Neck,
    Nose,
}

impl PartLabel {
    pub const ALL: [PartLabel; 16] = [
        Self::Chimney,
        Self::Door,
        Self::Roof,
        Self::Window,
        Self::Branches,
        Self::Crown,
        Self::Fruit,
        Self::Root,
        Self::Trunk,
        Self::Eye,
        Self::Hand,
        Self::Head,
        Self::Leg,
        Self::Mouth,
        Self::Neck,
        Self::Nose,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Chimney => "chimney",
            Self::Door => "door",
            Self::Roof => "roof",
            Self::Window => "window",
            Self::Branches => "branches",
            Self::Crown => "crown",
            Self::Fruit => "fruit",
            Self::Root => "root",
            Self::Trunk => "trunk",
            Self::Eye => "eye",
            Self::Hand => "hand",
            Self::Head => "head",
            Self::Leg => "leg",
            Self::Mouth => "mouth",
            Self::Neck => "neck",
            Self::Nose => "nose",
        }
    }

    pub fn parent(self) -> ObjectLabel {
        ObjectLabel::HTP
            .into_iter()
            .find(|o| o.parts().contains(&self))
            .expect("every part belongs to a main object")
    }
}

impl fmt::Display for PartLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PartLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Self::ALL.into_iter().find(|l| l.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartAnnotation {
    pub label: PartLabel,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub label: ObjectLabel,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub confidence: f64,
    #[serde(default)]
    pub parts: Vec<PartAnnotation>,
}

impl ObjectAnnotation {
    pub fn has_part(&self, part: PartLabel) -> bool {
        self.parts.iter().any(|p| p.label == part)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub value: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// The six binary classifier findings. A marker is only present when the
/// object it describes was detected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkerSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaning_house: Option<Marker>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub house_2d: Option<Marker>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dead_tree: Option<Marker>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flattened_crown: Option<Marker>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poker_face: Option<Marker>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_line_limbs: Option<Marker>,
}

impl MarkerSet {
    pub const NAMES: [&'static str; 6] = [
        "leaning_house",
        "house_2d",
        "dead_tree",
        "flattened_crown",
        "poker_face",
        "single_line_limbs",
    ];

    /// `(name, object it describes, value)` for every marker slot.
    pub fn entries(&self) -> [(&'static str, ObjectLabel, Option<Marker>); 6] {
        [
            ("leaning_house", ObjectLabel::House, self.leaning_house),
            ("house_2d", ObjectLabel::House, self.house_2d),
            ("dead_tree", ObjectLabel::Tree, self.dead_tree),
            ("flattened_crown", ObjectLabel::Tree, self.flattened_crown),
            ("poker_face", ObjectLabel::Person, self.poker_face),
            ("single_line_limbs", ObjectLabel::Person, self.single_line_limbs),
        ]
    }

    fn slot(&mut self, name: &str) -> Option<&mut Option<Marker>> {
        Some(match name {
            "leaning_house" => &mut self.leaning_house,
            "house_2d" => &mut self.house_2d,
            "dead_tree" => &mut self.dead_tree,
            "flattened_crown" => &mut self.flattened_crown,
            "poker_face" => &mut self.poker_face,
            "single_line_limbs" => &mut self.single_line_limbs,
            _ => return None,
        })
    }

    pub fn is_set(marker: Option<Marker>) -> bool {
        marker.is_some_and(|m| m.value)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub objects: Vec<ObjectAnnotation>,
    #[serde(default)]
    pub markers: MarkerSet,
    /// Characteristics supplied by an external rater rather than derived here.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predicates: Vec<FeaturePredicate>,
}

impl AnnotationSet {
    pub fn first(&self, label: ObjectLabel) -> Option<&ObjectAnnotation> {
        self.objects.iter().find(|o| o.label == label)
    }

    pub fn has(&self, label: ObjectLabel) -> bool {
        self.first(label).is_some()
    }

    /// `(label, box)` pairs for action attribution.
    pub fn boxes(&self) -> Vec<(ObjectLabel, BoundingBox)> {
        self.objects.iter().map(|o| (o.label, o.bbox)).collect()
    }

    /// Distinct labels present, in class order.
    pub fn labels(&self) -> Vec<ObjectLabel> {
        let mut labels: Vec<_> = self.objects.iter().map(|o| o.label).collect();
        labels.sort();
        labels.dedup();
        labels
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnotationError {
    #[error("malformed annotation JSON: {0}")]
    Malformed(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("part {part:?} cannot belong to {parent}")]
    PartWithoutParent { part: String, parent: ObjectLabel },
    #[error("box of {0} lies outside the canvas or is degenerate")]
    BoxOutOfCanvas(String),
    #[error("marker {0} given without a detected {1}")]
    MarkerWithoutObject(&'static str, ObjectLabel),
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
}

impl AnnotationError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Malformed(_) => "MalformedAnnotations",
            Self::UnknownLabel(_) => "UnknownLabel",
            Self::PartWithoutParent { .. } => "PartWithoutParent",
            Self::BoxOutOfCanvas(_) => "BoxOutOfCanvas",
            Self::MarkerWithoutObject(..) => "MarkerWithoutObject",
            Self::InvalidConfidence(_) => "InvalidConfidence",
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawBox {
    Named {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    Array([f64; 4]),
}

impl RawBox {
    fn to_box(&self, canvas: Canvas, label: &str) -> Result<BoundingBox, AnnotationError> {
        let [a, b, c, d] = match *self {
            RawBox::Named {
                x_min,
                y_min,
                x_max,
                y_max,
            } => [x_min, y_min, x_max, y_max],
            RawBox::Array(v) => v,
        };
        BoundingBox::new(a, b, c, d)
            .and_then(|bb| bb.clipped(canvas))
            .ok_or_else(|| AnnotationError::BoxOutOfCanvas(label.to_string()))
    }
}

#[derive(Deserialize)]
struct RawPart {
    label: String,
    #[serde(rename = "box")]
    bbox: RawBox,
    #[serde(default = "one")]
    confidence: f64,
}

#[derive(Deserialize)]
struct RawObject {
    label: String,
    #[serde(rename = "box")]
    bbox: RawBox,
    #[serde(default = "one")]
    confidence: f64,
    #[serde(default)]
    parts: Vec<RawPart>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawMarker {
    Flag(bool),
    Scored { value: bool, confidence: Option<f64> },
}

#[derive(Deserialize)]
struct RawAnnotations {
    #[serde(default)]
    objects: Vec<RawObject>,
    #[serde(default)]
    markers: BTreeMap<String, RawMarker>,
    #[serde(default)]
    predicates: Vec<String>,
}

fn one() -> f64 {
    1.0
}

fn check_confidence(c: f64) -> Result<f64, AnnotationError> {
    if (0.0..=1.0).contains(&c) {
        Ok(c)
    } else {
        Err(AnnotationError::InvalidConfidence(c))
    }
}

/// Validates detector output against the class inventory and the canvas.
pub fn parse_annotations(raw: &[u8], canvas: Canvas) -> Result<AnnotationSet, AnnotationError> {
    let parsed: RawAnnotations = serde_json::from_slice(raw).map_err(|e| AnnotationError::Malformed(e.to_string()))?;

    let mut objects = Vec::with_capacity(parsed.objects.len());
    for raw_obj in &parsed.objects {
        let label: ObjectLabel = raw_obj
            .label
            .parse()
            .map_err(|_| AnnotationError::UnknownLabel(raw_obj.label.clone()))?;
        let bbox = raw_obj.bbox.to_box(canvas, &raw_obj.label)?;
        let mut parts = Vec::with_capacity(raw_obj.parts.len());
        for raw_part in &raw_obj.parts {
            let part: PartLabel = raw_part
                .label
                .parse()
                .map_err(|_| AnnotationError::UnknownLabel(raw_part.label.clone()))?;
            let part_box = raw_part.bbox.to_box(canvas, &raw_part.label)?;
            if part.parent() != label || !part_box.intersects(&bbox) {
                return Err(AnnotationError::PartWithoutParent {
                    part: raw_part.label.clone(),
                    parent: label,
                });
            }
            parts.push(PartAnnotation {
                label: part,
                bbox: part_box,
                confidence: check_confidence(raw_part.confidence)?,
            });
        }
        objects.push(ObjectAnnotation {
            label,
            bbox,
            confidence: check_confidence(raw_obj.confidence)?,
            parts,
        });
    }

    let mut markers = MarkerSet::default();
    for (name, raw_marker) in parsed.markers {
        let marker = match raw_marker {
            RawMarker::Flag(value) => Marker {
                value,
                confidence: None,
            },
            RawMarker::Scored { value, confidence } => Marker {
                value,
                confidence: confidence.map(check_confidence).transpose()?,
            },
        };
        *markers
            .slot(&name)
            .ok_or_else(|| AnnotationError::UnknownLabel(name.clone()))? = Some(marker);
    }
    for (name, owner, marker) in markers.entries() {
        if marker.is_some() && !objects.iter().any(|o| o.label == owner) {
            return Err(AnnotationError::MarkerWithoutObject(name, owner));
        }
    }

    let predicates = parsed
        .predicates
        .iter()
        .map(|p| p.parse().map_err(|_| AnnotationError::UnknownLabel(p.clone())))
        .collect::<Result<Vec<FeaturePredicate>, _>>()?;

    Ok(AnnotationSet {
        objects,
        markers,
        predicates,
    })
}
