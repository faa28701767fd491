//! Stroke-level motion features: path length, average speed, pauses between
//! strokes, speed profiles, smoothness and line-width statistics.

mod sparc;

pub use sparc::{sparc, SparcConfig, SparcError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stroke_log::{ActionType, DrawAction, DrawingSession, PointSample};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KinematicsError {
    #[error("action {0} is a bucket fill, not a stroke")]
    NotAStroke(u32),
    #[error("speed profile needs at least two points with distinct timestamps")]
    TooFewPoints,
}

/// Sum of Euclidean distances between consecutive points.
pub fn stroke_length(points: &[PointSample]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeKinematics {
    pub order: u32,
    pub action_type: ActionType,
    pub length_px: f64,
    pub duration_s: f64,
    /// `None` when the stroke has length but zero duration.
    pub speed_px_per_s: Option<f64>,
    /// `None` when the stroke is too short for a spectrum.
    pub sparc_sal: Option<f64>,
    pub line_width: f64,
}

/// Length, duration and average speed of a draw or erase action.
/// Smoothness is left unset; see [`analyze_stroke`].
pub fn stroke_speed(action: &DrawAction) -> Result<StrokeKinematics, KinematicsError> {
    if !action.action_type.is_stroke() {
        return Err(KinematicsError::NotAStroke(action.order));
    }
    let length_px = stroke_length(&action.points);
    let duration_s = action.duration_s();
    let speed_px_per_s = if duration_s > 0.0 {
        Some(length_px / duration_s)
    } else if length_px == 0.0 {
        Some(0.0)
    } else {
        None
    };
    Ok(StrokeKinematics {
        order: action.order,
        action_type: action.action_type,
        length_px,
        duration_s,
        speed_px_per_s,
        sparc_sal: None,
        line_width: action.line_width,
    })
}

/// [`stroke_speed`] plus SPARC smoothness where a profile can be built.
pub fn analyze_stroke(action: &DrawAction, config: &SparcConfig) -> Result<StrokeKinematics, KinematicsError> {
    let mut kin = stroke_speed(action)?;
    kin.sparc_sal = speed_profile(action, config.resample_hz)
        .ok()
        .and_then(|p| sparc(&p, config.amplitude_threshold, config.max_cutoff_hz).ok());
    Ok(kin)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub gaps: Vec<f64>,
    pub total_pause: f64,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub median: Option<f64>,
}

impl IntervalStats {
    pub fn from_gaps(gaps: Vec<f64>) -> Self {
        let total_pause = gaps.iter().sum();
        if gaps.is_empty() {
            return Self {
                gaps,
                total_pause,
                mean: None,
                variance: None,
                median: None,
            };
        }
        let n = gaps.len() as f64;
        let mean = total_pause / n;
        let variance = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = gaps.clone();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len().is_multiple_of(2) {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        } else {
            sorted[mid]
        };
        Self {
            gaps,
            total_pause,
            mean: Some(mean),
            variance: Some(variance),
            median: Some(median),
        }
    }
}

/// Pauses between consecutive strokes (draw or erase), in seconds.
/// Overlapping strokes clamp to a zero gap; variance is the population variance.
pub fn inter_stroke_intervals(session: &DrawingSession) -> IntervalStats {
    let strokes: Vec<&DrawAction> = session.strokes().collect();
    let gaps = strokes
        .windows(2)
        .map(|w| (w[1].timestamp_start - w[0].timestamp_end).max(0) as f64 / 1000.0)
        .collect();
    IntervalStats::from_gaps(gaps)
}

/// Uniformly resampled tangential speed of one stroke.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub source_action_order: u32,
    pub sample_rate_hz: f64,
    /// `(seconds since the first point, pixels per second)`.
    pub samples: Vec<(f64, f64)>,
}

impl SpeedProfile {
    /// Builds a profile from already-uniform speed samples starting at t = 0.
    pub fn from_uniform(source_action_order: u32, sample_rate_hz: f64, speeds: &[f64]) -> Self {
        let samples = speeds
            .iter()
            .enumerate()
            .map(|(i, &s)| (i as f64 / sample_rate_hz, s))
            .collect();
        Self {
            source_action_order,
            sample_rate_hz,
            samples,
        }
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.samples.iter().map(|&(_, s)| s).collect()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|&(t, s)| (t, s * k)).collect(),
            ..self.clone()
        }
    }
}

/// Piecewise speed knots `(segment midpoint seconds, speed)` before resampling.
///
/// Timestamps are made monotone with a running maximum, so a backwards jump
/// behaves as a zero-duration segment. Zero-duration displacement is carried
/// into the next timed segment; a trailing remainder folds into the last one.
pub fn speed_knots(points: &[PointSample]) -> Vec<(f64, f64)> {
    let Some(first) = points.first() else {
        return Vec::new();
    };
    let t0 = first.timestamp;
    let mut knots: Vec<(f64, f64, f64)> = Vec::new(); // (mid, distance, duration)
    let mut last_t = t0;
    let mut carried = 0.0;
    for w in points.windows(2) {
        carried += (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
        let t = w[1].timestamp.max(last_t);
        if t > last_t {
            let mid = ((last_t - t0) + (t - t0)) as f64 / 2000.0;
            knots.push((mid, carried, (t - last_t) as f64 / 1000.0));
            carried = 0.0;
            last_t = t;
        }
    }
    if let Some(last) = knots.last_mut() {
        last.1 += carried;
    }
    knots.into_iter().map(|(mid, d, dt)| (mid, d / dt)).collect()
}

/// Instantaneous speed per point pair, linearly resampled at `resample_hz`
/// from the first to the last speed knot.
pub fn speed_profile(action: &DrawAction, resample_hz: f64) -> Result<SpeedProfile, KinematicsError> {
    let knots = speed_knots(&action.points);
    if knots.is_empty() {
        return Err(KinematicsError::TooFewPoints);
    }
    let step = 1.0 / resample_hz;
    let start = knots[0].0;
    let span = knots[knots.len() - 1].0 - start;
    let count = (span * resample_hz + 1e-9).floor() as usize + 1;
    let mut samples = Vec::with_capacity(count);
    let mut seg = 0;
    for i in 0..count {
        let t = start + i as f64 * step;
        while seg + 1 < knots.len() - 1 && knots[seg + 1].0 <= t {
            seg += 1;
        }
        let speed = if knots.len() == 1 {
            knots[0].1
        } else {
            let (ta, sa) = knots[seg];
            let (tb, sb) = knots[seg + 1];
            let u = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            sa + (sb - sa) * u
        };
        samples.push((i as f64 * step, speed));
    }
    Ok(SpeedProfile {
        source_action_order: action.order,
        sample_rate_hz: resample_hz,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Most frequent width; ties go to the smaller width.
    pub mode: f64,
}

impl WidthStats {
    pub fn from_widths(widths: &[f64]) -> Option<Self> {
        if widths.is_empty() {
            return None;
        }
        let mut sorted = widths.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (mut mode, mut best) = (sorted[0], 0);
        let mut i = 0;
        while i < sorted.len() {
            let run = sorted[i..].iter().take_while(|&&w| w == sorted[i]).count();
            if run > best {
                best = run;
                mode = sorted[i];
            }
            i += run;
        }
        Some(Self {
            count: sorted.len(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            mode,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineWidthStats {
    pub draw: Option<WidthStats>,
    pub erase: Option<WidthStats>,
}

pub fn line_width_stats(session: &DrawingSession) -> LineWidthStats {
    let widths = |kind: ActionType| -> Vec<f64> {
        session
            .actions
            .iter()
            .filter(|a| a.action_type == kind)
            .map(|a| a.line_width)
            .collect()
    };
    LineWidthStats {
        draw: WidthStats::from_widths(&widths(ActionType::DrawLine)),
        erase: WidthStats::from_widths(&widths(ActionType::Erase)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stroke_log::{Canvas, PointerType, Rgb};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use serde_json::Map;

    fn pts(xy: &[(f64, f64)]) -> Vec<PointSample> {
        xy.iter()
            .enumerate()
            .map(|(i, &(x, y))| PointSample::new(x, y, PointerType::Pen, 1_000 + i as i64 * 10))
            .collect()
    }

    fn stroke(order: u32, kind: ActionType, start: i64, end: i64, points: Vec<PointSample>) -> DrawAction {
        DrawAction {
            order,
            action_type: kind,
            color: Rgb::BLACK,
            opacity: 1.0,
            line_width: 5.0,
            timestamp_start: start,
            timestamp_end: end,
            points,
            extra: Map::new(),
        }
    }

    fn session(actions: Vec<DrawAction>) -> DrawingSession {
        DrawingSession {
            session_id: "t".into(),
            canvas: Canvas::new(100, 100).unwrap(),
            actions,
            final_image: None,
            questionnaire: None,
        }
    }

    #[test]
    fn length_of_simple_paths() {
        assert_eq!(stroke_length(&pts(&[(0.0, 0.0), (3.0, 4.0)])), 5.0);
        assert_eq!(stroke_length(&pts(&[(0.0, 0.0), (0.0, 3.0), (4.0, 3.0)])), 7.0);
        assert_eq!(stroke_length(&pts(&[(7.0, 7.0)])), 0.0);
    }

    #[test]
    fn length_matches_resummation_for_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xy: Vec<(f64, f64)> = (0..100)
            .map(|_| (rng.random_range(0.0..800.0), rng.random_range(0.0..600.0)))
            .collect();
        let mut oracle = 0.0;
        for i in 1..xy.len() {
            let dx = xy[i].0 - xy[i - 1].0;
            let dy = xy[i].1 - xy[i - 1].1;
            oracle += (dx * dx + dy * dy).sqrt();
        }
        let got = stroke_length(&pts(&xy));
        assert!(((got - oracle) / oracle).abs() < 1e-9);
    }

    #[test]
    fn speed_examples() {
        let a = stroke(1, ActionType::DrawLine, 1_000, 2_000, pts(&[(0.0, 0.0), (3.0, 4.0)]));
        assert_eq!(stroke_speed(&a).unwrap().speed_px_per_s, Some(5.0));
        let b = stroke(
            1,
            ActionType::DrawLine,
            1_000,
            3_000,
            pts(&[(0.0, 0.0), (0.0, 3.0), (4.0, 3.0)]),
        );
        assert_eq!(stroke_speed(&b).unwrap().speed_px_per_s, Some(3.5));
    }

    #[test]
    fn speed_of_zero_duration_strokes() {
        let still = stroke(1, ActionType::DrawLine, 1_000, 1_000, pts(&[(1.0, 1.0), (1.0, 1.0)]));
        assert_eq!(stroke_speed(&still).unwrap().speed_px_per_s, Some(0.0));
        let jump = stroke(1, ActionType::DrawLine, 1_000, 1_000, pts(&[(1.0, 1.0), (5.0, 1.0)]));
        assert_eq!(stroke_speed(&jump).unwrap().speed_px_per_s, None);
        let fill = stroke(3, ActionType::BucketFill, 1_000, 1_000, pts(&[(1.0, 1.0)]));
        assert_eq!(stroke_speed(&fill), Err(KinematicsError::NotAStroke(3)));
    }

    #[test]
    fn interval_examples() {
        let s = session(vec![
            stroke(1, ActionType::DrawLine, 500, 1_000, pts(&[(0.0, 0.0)])),
            stroke(2, ActionType::DrawLine, 1_500, 2_000, pts(&[(0.0, 0.0)])),
        ]);
        assert_eq!(inter_stroke_intervals(&s).gaps, vec![0.5]);

        let single = inter_stroke_intervals(&session(vec![stroke(
            1,
            ActionType::DrawLine,
            1,
            2,
            pts(&[(0.0, 0.0)]),
        )]));
        assert!(single.gaps.is_empty());
        assert_eq!((single.mean, single.variance, single.median), (None, None, None));

        let stats = IntervalStats::from_gaps(vec![0.2, 0.8]);
        assert!((stats.median.unwrap() - 0.5).abs() < 1e-12);
        assert!((stats.mean.unwrap() - 0.5).abs() < 1e-12);
        assert!((stats.variance.unwrap() - 0.09).abs() < 1e-12);
    }

    #[test]
    fn overlapping_strokes_clamp_to_zero_gap() {
        let s = session(vec![
            stroke(1, ActionType::DrawLine, 500, 1_000, pts(&[(0.0, 0.0)])),
            stroke(2, ActionType::Erase, 990, 2_000, pts(&[(0.0, 0.0)])),
            stroke(3, ActionType::BucketFill, 2_100, 2_100, pts(&[(0.0, 0.0)])),
            stroke(4, ActionType::DrawLine, 3_000, 3_500, pts(&[(0.0, 0.0)])),
        ]);
        // the bucket fill is not a stroke: the second gap spans erase → draw
        assert_eq!(inter_stroke_intervals(&s).gaps, vec![0.0, 1.0]);
    }

    #[test]
    fn constant_profile_for_uniform_motion() {
        let points: Vec<PointSample> = (0..11)
            .map(|i| PointSample::new(i as f64 * 2.0, 0.0, PointerType::Pen, 1_000 + i * 10))
            .collect();
        let a = stroke(1, ActionType::DrawLine, 1_000, 1_100, points);
        let profile = speed_profile(&a, 100.0).unwrap();
        assert_eq!(profile.samples.len(), 10);
        for &(_, s) in &profile.samples {
            assert!((s - 200.0).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_needs_two_distinct_timestamps() {
        let one = stroke(1, ActionType::DrawLine, 1_000, 1_000, pts(&[(0.0, 0.0)]));
        assert_eq!(speed_profile(&one, 100.0), Err(KinematicsError::TooFewPoints));
        let same_time = vec![
            PointSample::new(0.0, 0.0, PointerType::Pen, 5),
            PointSample::new(3.0, 0.0, PointerType::Pen, 5),
        ];
        let two = stroke(1, ActionType::DrawLine, 5, 5, same_time);
        assert_eq!(speed_profile(&two, 100.0), Err(KinematicsError::TooFewPoints));
    }

    #[test]
    fn zero_duration_displacement_moves_to_next_segment() {
        let p = vec![
            PointSample::new(0.0, 0.0, PointerType::Pen, 1_000),
            PointSample::new(3.0, 0.0, PointerType::Pen, 1_000),
            PointSample::new(6.0, 0.0, PointerType::Pen, 1_010),
            PointSample::new(9.0, 0.0, PointerType::Pen, 1_005),
            PointSample::new(12.0, 0.0, PointerType::Pen, 1_030),
        ];
        let knots = speed_knots(&p);
        assert_eq!(knots.len(), 2);
        assert!((knots[0].0 - 0.005).abs() < 1e-12 && (knots[0].1 - 600.0).abs() < 1e-9);
        assert!((knots[1].0 - 0.020).abs() < 1e-12 && (knots[1].1 - 300.0).abs() < 1e-9);
    }

    /// Knots recomputed by hand, then interpolated by scanning every segment.
    #[test]
    fn irregular_profile_matches_piecewise_linear_oracle() {
        let times = [1_000i64, 1_013, 1_020, 1_047, 1_090, 1_101, 1_160, 1_200];
        let xs = [0.0, 2.0, 5.0, 6.0, 12.0, 14.0, 15.0, 25.0];
        let points: Vec<PointSample> = times
            .iter()
            .zip(xs)
            .map(|(&t, x)| PointSample::new(x, 0.5 * x, PointerType::Pen, t))
            .collect();
        let a = stroke(1, ActionType::DrawLine, 1_000, 1_200, points.clone());
        let profile = speed_profile(&a, 100.0).unwrap();

        let mut knots = Vec::new();
        for i in 1..times.len() {
            let dt = (times[i] - times[i - 1]) as f64 / 1000.0;
            let d = ((xs[i] - xs[i - 1]) * (1.0f64 + 0.25).sqrt()).abs();
            let mid = ((times[i] + times[i - 1]) as f64 / 2.0 - 1000.0) / 1000.0;
            knots.push((mid, d / dt));
        }
        let oracle = |t: f64| -> f64 {
            for w in knots.windows(2) {
                if t >= w[0].0 - 1e-12 && t <= w[1].0 + 1e-12 {
                    return w[0].1 + (w[1].1 - w[0].1) * (t - w[0].0) / (w[1].0 - w[0].0);
                }
            }
            panic!("t={t} outside knots");
        };
        assert_eq!(profile.samples.len(), 18);
        for &(t, s) in &profile.samples {
            let expected = oracle(t + knots[0].0);
            assert!((s - expected).abs() < 1e-6, "t={t}: {s} vs {expected}");
        }
    }

    #[test]
    fn width_statistics() {
        let mk = |w: f64, kind| DrawAction {
            line_width: w,
            ..stroke(1, kind, 1, 2, pts(&[(0.0, 0.0)]))
        };
        let uniform = session(vec![mk(5.0, ActionType::DrawLine); 3]);
        let stats = line_width_stats(&uniform).draw.unwrap();
        assert_eq!((stats.min, stats.max, stats.mean, stats.mode), (5.0, 5.0, 5.0, 5.0));
        assert!(line_width_stats(&uniform).erase.is_none());

        let mixed = session(vec![
            mk(2.0, ActionType::DrawLine),
            mk(8.0, ActionType::DrawLine),
            mk(2.0, ActionType::DrawLine),
            mk(20.0, ActionType::Erase),
            mk(10.0, ActionType::Erase),
        ]);
        let lw = line_width_stats(&mixed);
        let draw = lw.draw.unwrap();
        assert_eq!((draw.mode, draw.mean), (2.0, 4.0));
        let erase = lw.erase.unwrap();
        // brute-force recount
        assert_eq!(
            (erase.count, erase.min, erase.max, erase.mean, erase.mode),
            (2, 10.0, 20.0, 15.0, 10.0)
        );
    }

    proptest! {
        #[test]
        fn length_translation_and_scaling(
            xy in prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0), 1..40),
            dx in -100.0f64..100.0, dy in -100.0f64..100.0, k in 0.1f64..10.0,
        ) {
            let base = stroke_length(&pts(&xy));
            let moved: Vec<_> = xy.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
            let scaled: Vec<_> = xy.iter().map(|&(x, y)| (x * k, y * k)).collect();
            prop_assert!((stroke_length(&pts(&moved)) - base).abs() <= 1e-9 * base.max(1.0));
            prop_assert!((stroke_length(&pts(&scaled)) - k * base).abs() <= 1e-9 * (k * base).max(1.0));
        }

        #[test]
        fn speed_nonnegative_and_scales(
            xy in prop::collection::vec((0.0f64..500.0, 0.0f64..500.0), 2..30),
            duration in 1i64..5_000, k in 0.1f64..10.0,
        ) {
            let a = stroke(1, ActionType::DrawLine, 1_000, 1_000 + duration, pts(&xy));
            let v = stroke_speed(&a).unwrap().speed_px_per_s.unwrap();
            prop_assert!(v >= 0.0);
            let scaled: Vec<_> = xy.iter().map(|&(x, y)| (x * k, y * k)).collect();
            let b = stroke(1, ActionType::DrawLine, 1_000, 1_000 + duration, pts(&scaled));
            let vk = stroke_speed(&b).unwrap().speed_px_per_s.unwrap();
            prop_assert!((vk - k * v).abs() <= 1e-9 * (k * v).max(1.0));
        }

        #[test]
        fn pauses_plus_durations_fit_session_span(
            blocks in prop::collection::vec((0i64..2_000, 1i64..2_000), 1..20),
        ) {
            let mut t = 10_000;
            let mut actions = Vec::new();
            for (i, (gap, dur)) in blocks.iter().enumerate() {
                t += gap;
                actions.push(stroke(i as u32 + 1, ActionType::DrawLine, t, t + dur, pts(&[(0.0, 0.0)])));
                t += dur;
            }
            let s = session(actions);
            let stats = inter_stroke_intervals(&s);
            prop_assert!(stats.gaps.iter().all(|&g| g >= 0.0));
            let durations: f64 = s.actions.iter().map(|a| a.duration_s()).sum();
            let span = (s.actions.last().unwrap().timestamp_end - s.actions[0].timestamp_start) as f64 / 1000.0;
            prop_assert!(stats.total_pause + durations <= span + 1e-9);
        }
    }
}
