//! The full feature profile of one session.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::annotations::predicates::{quantize_color, PaletteColor};
use crate::annotations::{AnnotationSet, ObjectLabel};
use crate::behavior::{action_counts, drawing_order, eraser_profile, OrderEntry};
use crate::kinematics::{
    analyze_stroke, inter_stroke_intervals, line_width_stats, LineWidthStats, SparcConfig, StrokeKinematics,
};
use crate::spatial::{
    attribute_action, object_placement, placement_grid, size_category, Attribution, BoundingBox, ObjectPlacement,
    PlacementGrid, SizeCategory,
};
use crate::stroke_log::{validate_timing, ActionType, Canvas, DrawingSession, TimingAnomaly};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub sparc: SparcConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEraser {
    pub events: usize,
    pub area_px2: u64,
}

/// Aggregates over every action attributed to one object class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectFeatures {
    pub instances: usize,
    /// Union of all instance boxes.
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub size: SizeCategory,
    pub placement: ObjectPlacement,
    pub actions: usize,
    pub strokes: usize,
    pub length_px: f64,
    pub duration_s: f64,
    pub speed_px_per_s: Option<f64>,
    pub sparc_sal: Option<f64>,
    pub eraser_events: usize,
    pub colors: Vec<PaletteColor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    pub session_id: String,
    pub canvas: Canvas,
    /// Epoch ms of the earliest action.
    pub start_ms: Option<i64>,
    pub action_count: usize,
    pub stroke_count: usize,
    /// Sum over draw and erase strokes.
    pub length_px: f64,
    pub duration_s: f64,
    /// Total length over total duration.
    pub speed_px_per_s: Option<f64>,
    /// Mean over strokes with a defined value.
    pub sparc_sal: Option<f64>,
    pub strokes: Vec<StrokeKinematics>,
    pub pauses_s: Vec<f64>,
    pub pause_total_s: f64,
    pub pause_median_s: Option<f64>,
    pub pause_mean_s: Option<f64>,
    pub pause_variance_s2: Option<f64>,
    pub line_width: LineWidthStats,
    pub mean_draw_opacity: Option<f64>,
    pub grid: PlacementGrid,
    pub eraser_events: usize,
    pub eraser_background_events: usize,
    pub eraser_time_s: f64,
    pub eraser_area_px2: u64,
    pub eraser_per_object: BTreeMap<ObjectLabel, ObjectEraser>,
    pub order: Vec<OrderEntry>,
    pub first_drawn: Option<ObjectLabel>,
    pub actions_per_object: BTreeMap<ObjectLabel, usize>,
    pub actions_background: usize,
    pub objects: BTreeMap<ObjectLabel, ObjectFeatures>,
    pub annotated: bool,
    pub timing_anomalies: Vec<TimingAnomaly>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn ratio(length: f64, duration: f64) -> Option<f64> {
    if duration > 0.0 {
        Some(length / duration)
    } else if length == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

pub fn compute_profile(
    session: &DrawingSession,
    annotations: Option<&AnnotationSet>,
    config: &AnalysisConfig,
) -> FeatureProfile {
    let boxes = annotations.map(AnnotationSet::boxes).unwrap_or_default();
    let strokes: Vec<StrokeKinematics> = session
        .strokes()
        .map(|a| analyze_stroke(a, &config.sparc).expect("strokes() yields only strokes"))
        .collect();
    let length_px: f64 = strokes.iter().map(|s| s.length_px).sum();
    let duration_s: f64 = strokes.iter().map(|s| s.duration_s).sum();
    let intervals = inter_stroke_intervals(session);
    let eraser = eraser_profile(session, &boxes);
    let order = drawing_order(session, &boxes);
    let counts = action_counts(session, &boxes);

    let mut eraser_per_object = BTreeMap::new();
    for (label, &events) in &eraser.events_per_object {
        eraser_per_object.insert(
            *label,
            ObjectEraser {
                events,
                area_px2: eraser.erased_area_per_object.get(label).copied().unwrap_or(0),
            },
        );
    }

    FeatureProfile {
        session_id: session.session_id.clone(),
        canvas: session.canvas,
        start_ms: session.start_ms(),
        action_count: session.actions.len(),
        stroke_count: strokes.len(),
        length_px,
        duration_s,
        speed_px_per_s: (!strokes.is_empty()).then(|| ratio(length_px, duration_s)).flatten(),
        sparc_sal: mean(strokes.iter().filter_map(|s| s.sparc_sal)),
        pauses_s: intervals.gaps,
        pause_total_s: intervals.total_pause,
        pause_median_s: intervals.median,
        pause_mean_s: intervals.mean,
        pause_variance_s2: intervals.variance,
        line_width: line_width_stats(session),
        mean_draw_opacity: mean(
            session
                .actions
                .iter()
                .filter(|a| a.action_type == ActionType::DrawLine)
                .map(|a| a.opacity),
        ),
        grid: placement_grid(session.all_points().map(|p| (p.x, p.y)), session.canvas),
        eraser_events: eraser.events_total,
        eraser_background_events: eraser.background_events,
        eraser_time_s: eraser.total_erase_time_s,
        eraser_area_px2: eraser.erased_area_px2,
        eraser_per_object,
        first_drawn: order.first_drawn,
        order: order.sequence,
        actions_per_object: counts.per_object,
        actions_background: counts.background,
        objects: annotations
            .map(|a| object_features(session, a, &strokes, &boxes))
            .unwrap_or_default(),
        annotated: annotations.is_some(),
        timing_anomalies: validate_timing(session),
        strokes,
    }
}

fn object_features(
    session: &DrawingSession,
    annotations: &AnnotationSet,
    strokes: &[StrokeKinematics],
    boxes: &[(ObjectLabel, BoundingBox)],
) -> BTreeMap<ObjectLabel, ObjectFeatures> {
    let by_order: BTreeMap<u32, &StrokeKinematics> = strokes.iter().map(|s| (s.order, s)).collect();
    let attributed: Vec<(Attribution, &crate::stroke_log::DrawAction)> = session
        .actions
        .iter()
        .map(|a| (attribute_action(a, boxes), a))
        .collect();

    let mut out = BTreeMap::new();
    for label in annotations.labels() {
        let instances: Vec<_> = annotations.objects.iter().filter(|o| o.label == label).collect();
        let bbox = instances
            .iter()
            .map(|o| o.bbox)
            .reduce(|a, b| a.union(&b))
            .expect("labels() only lists present objects");
        let mine: Vec<_> = attributed
            .iter()
            .filter(|(who, _)| *who == Attribution::Object(label))
            .map(|(_, a)| *a)
            .collect();
        let kin: Vec<&StrokeKinematics> = mine.iter().filter_map(|a| by_order.get(&a.order).copied()).collect();
        let length_px: f64 = kin.iter().map(|k| k.length_px).sum();
        let duration_s: f64 = kin.iter().map(|k| k.duration_s).sum();
        let colors: BTreeSet<PaletteColor> = mine
            .iter()
            .filter(|a| a.action_type != ActionType::Erase)
            .filter_map(|a| quantize_color(a.color))
            .collect();
        out.insert(
            label,
            ObjectFeatures {
                instances: instances.len(),
                bbox,
                size: size_category(&bbox, session.canvas),
                placement: object_placement(&bbox, session.canvas),
                actions: mine.len(),
                strokes: kin.len(),
                length_px,
                duration_s,
                speed_px_per_s: (!kin.is_empty()).then(|| ratio(length_px, duration_s)).flatten(),
                sparc_sal: mean(kin.iter().filter_map(|k| k.sparc_sal)),
                eraser_events: mine.iter().filter(|a| a.action_type == ActionType::Erase).count(),
                colors: colors.into_iter().collect(),
            },
        );
    }
    out
}
