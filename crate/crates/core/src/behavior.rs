//! Eraser usage, drawing order and per-object action counts.
//!
//! All three attribute actions to annotated objects with
//! [`attribute_action`]; anything unclaimed counts as background.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotations::ObjectLabel;
use crate::renderer::CoverageMask;
use crate::spatial::{attribute_action, Attribution, BoundingBox};
use crate::stroke_log::{ActionType, DrawingSession};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EraserProfile {
    pub events_total: usize,
    pub events_per_object: BTreeMap<ObjectLabel, usize>,
    pub background_events: usize,
    pub total_erase_time_s: f64,
    /// Pixels covered by at least one erase stroke.
    pub erased_area_px2: u64,
    pub erased_area_per_object: BTreeMap<ObjectLabel, u64>,
}

pub fn eraser_profile(session: &DrawingSession, objects: &[(ObjectLabel, BoundingBox)]) -> EraserProfile {
    let mut profile = EraserProfile::default();
    let mut all = CoverageMask::empty(session.canvas, 1);
    let mut per_object: BTreeMap<ObjectLabel, CoverageMask> = BTreeMap::new();

    for action in session.actions.iter().filter(|a| a.action_type == ActionType::Erase) {
        profile.events_total += 1;
        profile.total_erase_time_s += action.duration_s();
        let xy: Vec<_> = action.points.iter().map(|p| (p.x, p.y)).collect();
        let mask = CoverageMask::of_stroke(&xy, action.line_width, session.canvas);
        all.union_with(&mask);
        match attribute_action(action, objects) {
            Attribution::Object(label) => {
                *profile.events_per_object.entry(label).or_default() += 1;
                per_object
                    .entry(label)
                    .or_insert_with(|| CoverageMask::empty(session.canvas, 1))
                    .union_with(&mask);
            }
            Attribution::Background => profile.background_events += 1,
        }
    }
    profile.erased_area_px2 = all.count();
    profile.erased_area_per_object = per_object.into_iter().map(|(l, m)| (l, m.count())).collect();
    profile
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderEntry {
    pub label: ObjectLabel,
    /// Epoch ms of the first attributed stroke.
    pub first_stroke_start: i64,
    /// Epoch ms at which the last attributed stroke ended.
    pub completion: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawingOrder {
    pub sequence: Vec<OrderEntry>,
    pub first_drawn: Option<ObjectLabel>,
}

/// Objects in the order they were started; draw and erase strokes both count.
pub fn drawing_order(session: &DrawingSession, objects: &[(ObjectLabel, BoundingBox)]) -> DrawingOrder {
    let mut spans: BTreeMap<ObjectLabel, (i64, i64)> = BTreeMap::new();
    for action in session.strokes() {
        if let Attribution::Object(label) = attribute_action(action, objects) {
            let span = spans
                .entry(label)
                .or_insert((action.timestamp_start, action.timestamp_end));
            span.0 = span.0.min(action.timestamp_start);
            span.1 = span.1.max(action.timestamp_end);
        }
    }
    let mut sequence: Vec<_> = spans
        .into_iter()
        .map(|(label, (first_stroke_start, completion))| OrderEntry {
            label,
            first_stroke_start,
            completion,
        })
        .collect();
    sequence.sort_by_key(|e| (e.first_stroke_start, e.label));
    DrawingOrder {
        first_drawn: sequence.first().map(|e| e.label),
        sequence,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCounts {
    pub per_object: BTreeMap<ObjectLabel, usize>,
    pub background: usize,
    pub total: usize,
}

/// Every action, fills included, counted against the object it falls in.
pub fn action_counts(session: &DrawingSession, objects: &[(ObjectLabel, BoundingBox)]) -> ActionCounts {
    let mut counts = ActionCounts::default();
    for action in &session.actions {
        counts.total += 1;
        match attribute_action(action, objects) {
            Attribution::Object(label) => *counts.per_object.entry(label).or_default() += 1,
            Attribution::Background => counts.background += 1,
        }
    }
    counts
}
