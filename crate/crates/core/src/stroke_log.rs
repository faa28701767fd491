//! Drawing-session action logs.
//!
//! A session is a JSON array of draw actions, each carrying its own point
//! trajectory with per-point millisecond timestamps:
//!
//! ```json
//! [{ "order": 1, "action_type": "drawLine", "color": "#000000", "opacity": 1,
//!    "line_width": 5, "timestamp_start": 1751293539626, "timestamp_end": 1751293540253,
//!    "points": [{ "x": 333.95, "y": 102.76, "pointerType": "mouse", "timestamp": 1751293539626 }] }]
//! ```
//!
//! Canvas dimensions are not part of the log and are supplied by the caller.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrokeLogError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("action {index}: missing field `{field}`")]
    MissingField { index: usize, field: &'static str },
    #[error("action {index}: invalid `{field}` value {value:?}")]
    InvalidEnum {
        index: usize,
        field: &'static str,
        value: String,
    },
    #[error("action with order {order} has no points")]
    EmptyPoints { order: u32 },
    #[error("duplicate action order {0}")]
    DuplicateOrder(u32),
    #[error("action orders must be 1..N without gaps: expected {expected}, found {found}")]
    OrderGap { expected: u32, found: u32 },
    #[error("action {index}: invalid `{field}`: {reason}")]
    InvalidValue {
        index: usize,
        field: &'static str,
        reason: String,
    },
    #[error("canvas dimensions must be positive, got {width}x{height}")]
    InvalidCanvas { width: u32, height: u32 },
}

impl StrokeLogError {
    /// Stable variant name, used for CLI exit messages and HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::MalformedJson(_) => "MalformedJson",
            Self::MissingField { .. } => "MissingField",
            Self::InvalidEnum { .. } => "InvalidEnum",
            Self::EmptyPoints { .. } => "EmptyPoints",
            Self::DuplicateOrder(_) => "DuplicateOrder",
            Self::OrderGap { .. } => "OrderGap",
            Self::InvalidValue { .. } => "InvalidValue",
            Self::InvalidCanvas { .. } => "InvalidCanvas",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointerType {
    Mouse,
    Pen,
    Touch,
}

impl FromStr for PointerType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "mouse" => Ok(Self::Mouse),
            "pen" => Ok(Self::Pen),
            "touch" => Ok(Self::Touch),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionType {
    #[serde(rename = "drawLine")]
    DrawLine,
    #[serde(rename = "erase")]
    Erase,
    #[serde(rename = "bucketFill")]
    BucketFill,
}

impl ActionType {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DrawLine => "drawLine",
            Self::Erase => "erase",
            Self::BucketFill => "bucketFill",
        }
    }

    /// Draw and erase actions have a trajectory; bucket fills do not.
    pub fn is_stroke(self) -> bool {
        !matches!(self, Self::BucketFill)
    }
}

impl FromStr for ActionType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "drawLine" => Ok(Self::DrawLine),
            "erase" => Ok(Self::Erase),
            "bucketFill" => Ok(Self::BucketFill),
            _ => Err(()),
        }
    }
}

/// 24-bit colour, written as `#rrggbb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const BLACK: Rgb = Rgb::new(0, 0, 0);
    pub const WHITE: Rgb = Rgb::new(255, 255, 255);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    /// Accepts `#rrggbb` and the short `#rgb` form.
    pub fn parse_hex(s: &str) -> Option<Self> {
        let hex = s.strip_prefix('#')?;
        let nibble = |c: u8| (c as char).to_digit(16).map(|d| d as u8);
        let bytes = hex.as_bytes();
        match bytes.len() {
            6 => {
                let byte = |i: usize| Some(nibble(bytes[i])? << 4 | nibble(bytes[i + 1])?);
                Some(Self::new(byte(0)?, byte(2)?, byte(4)?))
            }
            3 => {
                let byte = |i: usize| nibble(bytes[i]).map(|n| n << 4 | n);
                Some(Self::new(byte(0)?, byte(1)?, byte(2)?))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

impl Serialize for Rgb {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Rgb::parse_hex(&s).ok_or_else(|| D::Error::custom(format!("invalid colour {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub fn new(width: u32, height: u32) -> Result<Self, StrokeLogError> {
        if width == 0 || height == 0 {
            return Err(StrokeLogError::InvalidCanvas { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> f64 {
        f64::from(self.width) * f64::from(self.height)
    }
}

impl FromStr for Canvas {
    type Err = String;

    /// Parses `WIDTHxHEIGHT`, e.g. `800x600`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
        let width = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
        let height = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
        Canvas::new(width, height).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSample {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "pointerType")]
    pub pointer_type: PointerType,
    pub timestamp: i64,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl PointSample {
    pub fn new(x: f64, y: f64, pointer_type: PointerType, timestamp: i64) -> Self {
        Self {
            x,
            y,
            pointer_type,
            timestamp,
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawAction {
    pub order: u32,
    pub action_type: ActionType,
    pub color: Rgb,
    pub opacity: f64,
    pub line_width: f64,
    pub timestamp_start: i64,
    pub timestamp_end: i64,
    pub points: Vec<PointSample>,
    /// Fields outside the canonical schema, kept for re-serialization.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl DrawAction {
    pub fn duration_ms(&self) -> i64 {
        self.timestamp_end - self.timestamp_start
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ms().max(0) as f64 / 1000.0
    }
}

pub const QUESTIONS: [&str; 10] = [
    "Who do you imagine lives in this house?",
    "What feelings does this house give you?",
    "How old do you think the tree is?",
    "Is the tree alive or dead?",
    "Which season of the year do you think it is?",
    "Does this image remind you of anyone?",
    "How old do you think this person is?",
    "What do you think this person does?",
    "What might this person be thinking?",
    "What do you think this person feels?",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionAnswer {
    /// 1-based index into [`QUESTIONS`].
    pub question: usize,
    pub answer: String,
}

impl QuestionAnswer {
    pub fn question_text(&self) -> &'static str {
        QUESTIONS[self.question - 1]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default)]
    pub answers: Vec<QuestionAnswer>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuestionnaireError {
    #[error("malformed questionnaire JSON: {0}")]
    Malformed(String),
    #[error("at most 10 answers are accepted, got {0}")]
    TooManyAnswers(usize),
    #[error("unknown question number {0}")]
    UnknownQuestion(usize),
    #[error("question {0} answered twice")]
    DuplicateQuestion(usize),
}

impl QuestionnaireError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Malformed(_) => "MalformedQuestionnaire",
            Self::TooManyAnswers(_) => "TooManyAnswers",
            Self::UnknownQuestion(_) => "UnknownQuestion",
            Self::DuplicateQuestion(_) => "DuplicateQuestion",
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAnswer {
    Text(String),
    Keyed { question: usize, answer: String },
}

#[derive(Deserialize)]
struct RawQuestionnaire {
    #[serde(default)]
    age: Option<u32>,
    #[serde(default)]
    gender: Option<String>,
    #[serde(default)]
    answers: Vec<RawAnswer>,
}

/// Parses questionnaire answers, given either positionally as a list of
/// strings or as `{"question": n, "answer": "..."}` objects.
pub fn parse_questionnaire(raw: &[u8]) -> Result<QuestionnaireResponse, QuestionnaireError> {
    let parsed: RawQuestionnaire =
        serde_json::from_slice(raw).map_err(|e| QuestionnaireError::Malformed(e.to_string()))?;
    if parsed.answers.len() > QUESTIONS.len() {
        return Err(QuestionnaireError::TooManyAnswers(parsed.answers.len()));
    }
    let mut answers = Vec::with_capacity(parsed.answers.len());
    for (i, raw) in parsed.answers.into_iter().enumerate() {
        let (question, answer) = match raw {
            RawAnswer::Text(answer) => (i + 1, answer),
            RawAnswer::Keyed { question, answer } => (question, answer),
        };
        if question == 0 || question > QUESTIONS.len() {
            return Err(QuestionnaireError::UnknownQuestion(question));
        }
        if answers.iter().any(|a: &QuestionAnswer| a.question == question) {
            return Err(QuestionnaireError::DuplicateQuestion(question));
        }
        answers.push(QuestionAnswer { question, answer });
    }
    answers.sort_by_key(|a| a.question);
    Ok(QuestionnaireResponse {
        age: parsed.age,
        gender: parsed.gender,
        answers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawingSession {
    pub session_id: String,
    pub canvas: Canvas,
    pub actions: Vec<DrawAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub questionnaire: Option<QuestionnaireResponse>,
}

impl DrawingSession {
    pub fn strokes(&self) -> impl Iterator<Item = &DrawAction> {
        self.actions.iter().filter(|a| a.action_type.is_stroke())
    }

    /// All sampled points of every action, in log order.
    pub fn all_points(&self) -> impl Iterator<Item = &PointSample> {
        self.actions.iter().flat_map(|a| a.points.iter())
    }

    /// Serializes the action log back into the canonical JSON array.
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(&self.actions).expect("action log is always serializable")
    }

    /// Timestamp of the earliest action start, if any.
    pub fn start_ms(&self) -> Option<i64> {
        self.actions.iter().map(|a| a.timestamp_start).min()
    }
}

/// Content hash of the raw log, used as the default session identifier.
pub fn content_id(raw: &[u8]) -> String {
    let digest = Sha256::digest(raw);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

const ACTION_FIELDS: [&str; 8] = [
    "order",
    "action_type",
    "color",
    "opacity",
    "line_width",
    "timestamp_start",
    "timestamp_end",
    "points",
];
const POINT_FIELDS: [&str; 4] = ["x", "y", "pointerType", "timestamp"];

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    index: usize,
}

impl<'a> Fields<'a> {
    fn get(&self, field: &'static str) -> Result<&'a Value, StrokeLogError> {
        self.obj.get(field).ok_or(StrokeLogError::MissingField {
            index: self.index,
            field,
        })
    }

    fn invalid(&self, field: &'static str, reason: impl Into<String>) -> StrokeLogError {
        StrokeLogError::InvalidValue {
            index: self.index,
            field,
            reason: reason.into(),
        }
    }

    fn number(&self, field: &'static str) -> Result<f64, StrokeLogError> {
        let value = self
            .get(field)?
            .as_f64()
            .ok_or_else(|| self.invalid(field, "expected a number"))?;
        if !value.is_finite() {
            return Err(self.invalid(field, "must be finite"));
        }
        Ok(value)
    }

    fn timestamp(&self, field: &'static str) -> Result<i64, StrokeLogError> {
        let value = self.get(field)?;
        let ms = match value.as_i64() {
            Some(ms) => ms,
            None => value
                .as_f64()
                .filter(|v| v.is_finite())
                .map(|v| v.round() as i64)
                .ok_or_else(|| self.invalid(field, "expected epoch milliseconds"))?,
        };
        if ms <= 0 {
            return Err(self.invalid(field, "timestamp must be positive"));
        }
        Ok(ms)
    }

    fn string(&self, field: &'static str) -> Result<&'a str, StrokeLogError> {
        self.get(field)?
            .as_str()
            .ok_or_else(|| self.invalid(field, "expected a string"))
    }

    fn extras(&self, known: &[&str]) -> Map<String, Value> {
        self.obj
            .iter()
            .filter(|(k, _)| !known.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

fn parse_point(index: usize, value: &Value) -> Result<PointSample, StrokeLogError> {
    let obj = value.as_object().ok_or_else(|| StrokeLogError::InvalidValue {
        index,
        field: "points",
        reason: "point must be an object".into(),
    })?;
    let f = Fields { obj, index };
    let pointer = f.string("pointerType")?;
    let pointer_type = pointer.parse().map_err(|_| StrokeLogError::InvalidEnum {
        index,
        field: "pointerType",
        value: pointer.to_string(),
    })?;
    Ok(PointSample {
        x: f.number("x")?,
        y: f.number("y")?,
        pointer_type,
        timestamp: f.timestamp("timestamp")?,
        extra: f.extras(&POINT_FIELDS),
    })
}

fn parse_action(index: usize, value: &Value) -> Result<DrawAction, StrokeLogError> {
    let obj = value
        .as_object()
        .ok_or_else(|| StrokeLogError::MalformedJson(format!("action {index} is not an object")))?;
    let f = Fields { obj, index };

    let order = f.get("order")?;
    let order = order
        .as_u64()
        .filter(|&o| o >= 1 && o <= u64::from(u32::MAX))
        .ok_or_else(|| f.invalid("order", format!("expected a positive integer, got {order}")))? as u32;

    let kind = f.string("action_type")?;
    let action_type: ActionType = kind.parse().map_err(|_| StrokeLogError::InvalidEnum {
        index,
        field: "action_type",
        value: kind.to_string(),
    })?;

    let color = f.string("color")?;
    let color = Rgb::parse_hex(color).ok_or_else(|| f.invalid("color", format!("expected #rrggbb, got {color:?}")))?;

    let opacity = f.number("opacity")?;
    if !(0.0..=1.0).contains(&opacity) {
        return Err(f.invalid("opacity", format!("{opacity} is outside [0, 1]")));
    }
    let line_width = f.number("line_width")?;
    if line_width <= 0.0 {
        return Err(f.invalid("line_width", format!("{line_width} must be positive")));
    }

    let timestamp_start = f.timestamp("timestamp_start")?;
    let timestamp_end = f.timestamp("timestamp_end")?;
    if timestamp_start > timestamp_end {
        return Err(f.invalid("timestamp_end", "precedes timestamp_start"));
    }

    let points = f
        .get("points")?
        .as_array()
        .ok_or_else(|| f.invalid("points", "expected an array"))?
        .iter()
        .map(|p| parse_point(index, p))
        .collect::<Result<Vec<_>, _>>()?;
    if points.is_empty() {
        return Err(StrokeLogError::EmptyPoints { order });
    }
    if action_type == ActionType::BucketFill && points.len() != 1 {
        return Err(f.invalid(
            "points",
            format!("bucket fill carries exactly one point, got {}", points.len()),
        ));
    }

    Ok(DrawAction {
        order,
        action_type,
        color,
        opacity,
        line_width,
        timestamp_start,
        timestamp_end,
        points,
        extra: f.extras(&ACTION_FIELDS),
    })
}

/// Parses and validates an action log. Actions are re-sorted by `order`;
/// the session id defaults to a content hash of `raw`.
pub fn parse_session(raw: &[u8], canvas: Canvas) -> Result<DrawingSession, StrokeLogError> {
    let canvas = Canvas::new(canvas.width, canvas.height)?;
    let value: Value = serde_json::from_slice(raw).map_err(|e| StrokeLogError::MalformedJson(e.to_string()))?;
    let items = value
        .as_array()
        .ok_or_else(|| StrokeLogError::MalformedJson("expected a JSON array of actions".into()))?;

    let mut actions = items
        .iter()
        .enumerate()
        .map(|(i, v)| parse_action(i, v))
        .collect::<Result<Vec<_>, _>>()?;

    actions.sort_by_key(|a| a.order);
    for pair in actions.windows(2) {
        if pair[0].order == pair[1].order {
            return Err(StrokeLogError::DuplicateOrder(pair[0].order));
        }
    }
    for (expected, action) in (1u32..).zip(&actions) {
        if action.order != expected {
            return Err(StrokeLogError::OrderGap {
                expected,
                found: action.order,
            });
        }
    }

    Ok(DrawingSession {
        session_id: content_id(raw),
        canvas,
        actions,
        final_image: None,
        questionnaire: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimingAnomaly {
    /// A point timestamp earlier than its predecessor within the same action.
    NonMonotonePoint {
        order: u32,
        point: usize,
        previous_ms: i64,
        timestamp_ms: i64,
    },
    /// A point timestamp outside `[timestamp_start, timestamp_end]`.
    OutOfWindow {
        order: u32,
        point: usize,
        timestamp_ms: i64,
    },
    /// An action starting before its predecessor (by order) has ended.
    OverlappingActions {
        previous_order: u32,
        order: u32,
        overlap_ms: i64,
    },
}

/// Flags timestamp irregularities. Never fails and never mutates.
pub fn validate_timing(session: &DrawingSession) -> Vec<TimingAnomaly> {
    let mut anomalies = Vec::new();
    for action in &session.actions {
        let mut previous: Option<i64> = None;
        for (i, p) in action.points.iter().enumerate() {
            if let Some(prev) = previous {
                if p.timestamp < prev {
                    anomalies.push(TimingAnomaly::NonMonotonePoint {
                        order: action.order,
                        point: i,
                        previous_ms: prev,
                        timestamp_ms: p.timestamp,
                    });
                }
            }
            if p.timestamp < action.timestamp_start || p.timestamp > action.timestamp_end {
                anomalies.push(TimingAnomaly::OutOfWindow {
                    order: action.order,
                    point: i,
                    timestamp_ms: p.timestamp,
                });
            }
            previous = Some(previous.map_or(p.timestamp, |prev| prev.max(p.timestamp)));
        }
    }
    for pair in session.actions.windows(2) {
        let overlap = pair[0].timestamp_end - pair[1].timestamp_start;
        if overlap > 0 {
            anomalies.push(TimingAnomaly::OverlappingActions {
                previous_order: pair[0].order,
                order: pair[1].order,
                overlap_ms: overlap,
            });
        }
    }
    anomalies
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = r##"[{
        "order": 1, "action_type": "drawLine", "color": "#000000", "opacity": 1,
        "line_width": 5, "timestamp_start": 1751293539626, "timestamp_end": 1751293540253,
        "points": [{"x": 333.95, "y": 102.76, "pointerType": "mouse", "timestamp": 1751293539626}]
    }]"##;

    fn canvas() -> Canvas {
        Canvas::new(800, 600).unwrap()
    }

    fn action_json(order: u32, kind: &str, start: i64, end: i64, points: &str) -> String {
        format!(
            r##"{{"order":{order},"action_type":"{kind}","color":"#112233","opacity":0.5,
            "line_width":3,"timestamp_start":{start},"timestamp_end":{end},"points":[{points}]}}"##
        )
    }

    fn point_json(x: f64, y: f64, t: i64) -> String {
        format!(r#"{{"x":{x},"y":{y},"pointerType":"pen","timestamp":{t}}}"#)
    }

    #[test]
    fn parses_reference_record() {
        let session = parse_session(FIG2.as_bytes(), canvas()).unwrap();
        assert_eq!(session.actions.len(), 1);
        let a = &session.actions[0];
        assert_eq!(a.order, 1);
        assert_eq!(a.action_type, ActionType::DrawLine);
        assert_eq!(a.color, Rgb::BLACK);
        assert_eq!(a.opacity, 1.0);
        assert_eq!(a.line_width, 5.0);
        assert_eq!(a.timestamp_start, 1751293539626);
        assert_eq!(a.timestamp_end, 1751293540253);
        assert_eq!(a.points.len(), 1);
        assert_eq!(a.points[0].x, 333.95);
        assert_eq!(a.points[0].y, 102.76);
        assert_eq!(a.points[0].pointer_type, PointerType::Mouse);
    }

    #[test]
    fn empty_array_is_an_empty_session() {
        let session = parse_session(b"[]", canvas()).unwrap();
        assert!(session.actions.is_empty());
    }

    #[test]
    fn duplicate_order_rejected() {
        let a = action_json(1, "drawLine", 10, 20, &point_json(1.0, 1.0, 10));
        let raw = format!("[{a},{a}]");
        assert_eq!(
            parse_session(raw.as_bytes(), canvas()),
            Err(StrokeLogError::DuplicateOrder(1))
        );
    }

    #[test]
    fn each_malformed_fixture_yields_its_error() {
        let p = point_json(1.0, 1.0, 10);
        let cases: Vec<(String, &str)> = vec![
            ("{not json".into(), "MalformedJson"),
            ("{}".into(), "MalformedJson"),
            (r#"[{"order":1}]"#.into(), "MissingField"),
            (format!("[{}]", action_json(1, "spray", 10, 20, &p)), "InvalidEnum"),
            (format!("[{}]", action_json(1, "erase", 10, 20, "")), "EmptyPoints"),
            (format!("[{}]", action_json(2, "drawLine", 10, 20, &p)), "OrderGap"),
            (format!("[{}]", action_json(1, "drawLine", 30, 20, &p)), "InvalidValue"),
            (
                format!("[{}]", action_json(1, "bucketFill", 10, 20, &format!("{p},{p}"))),
                "InvalidValue",
            ),
        ];
        for (raw, kind) in cases {
            let err = parse_session(raw.as_bytes(), canvas()).unwrap_err();
            assert_eq!(err.kind(), kind, "{raw}: {err}");
        }
    }

    #[test]
    fn actions_resorted_and_extras_preserved() {
        let a2 = action_json(2, "erase", 30, 40, &point_json(2.0, 2.0, 30));
        let a1 = action_json(1, "drawLine", 10, 20, &point_json(1.0, 1.0, 10)).replacen('{', r#"{"brush":"soft","#, 1);
        let raw = format!("[{a2},{a1}]");
        let session = parse_session(raw.as_bytes(), canvas()).unwrap();
        assert_eq!(session.actions[0].order, 1);
        assert_eq!(session.actions[0].extra["brush"], "soft");
        let again = parse_session(&session.to_json(), canvas()).unwrap();
        assert_eq!(again.actions, session.actions);
    }

    #[test]
    fn timing_clean_session_has_no_anomalies() {
        let a1 = action_json(
            1,
            "drawLine",
            10,
            30,
            &[
                point_json(0.0, 0.0, 10),
                point_json(1.0, 0.0, 20),
                point_json(2.0, 0.0, 30),
            ]
            .join(","),
        );
        let a2 = action_json(2, "drawLine", 40, 50, &point_json(0.0, 0.0, 40));
        let session = parse_session(format!("[{a1},{a2}]").as_bytes(), canvas()).unwrap();
        assert!(validate_timing(&session).is_empty());
    }

    #[test]
    fn timing_flags_out_of_window_point() {
        let a = action_json(
            1,
            "drawLine",
            10,
            30,
            &[point_json(0.0, 0.0, 5), point_json(1.0, 0.0, 20)].join(","),
        );
        let session = parse_session(format!("[{a}]").as_bytes(), canvas()).unwrap();
        let anomalies = validate_timing(&session);
        assert_eq!(
            anomalies,
            vec![TimingAnomaly::OutOfWindow {
                order: 1,
                point: 0,
                timestamp_ms: 5
            }]
        );
    }

    #[test]
    fn timing_flags_overlap_between_actions() {
        let a1 = action_json(1, "drawLine", 1000, 2000, &point_json(0.0, 0.0, 1000));
        let a2 = action_json(2, "drawLine", 1990, 2500, &point_json(1.0, 1.0, 1990));
        let session = parse_session(format!("[{a1},{a2}]").as_bytes(), canvas()).unwrap();
        assert_eq!(
            validate_timing(&session),
            vec![TimingAnomaly::OverlappingActions {
                previous_order: 1,
                order: 2,
                overlap_ms: 10
            }]
        );
    }

    #[test]
    fn timing_flags_non_monotone_points() {
        let a = action_json(
            1,
            "drawLine",
            10,
            40,
            &[
                point_json(0.0, 0.0, 30),
                point_json(1.0, 0.0, 20),
                point_json(2.0, 0.0, 40),
            ]
            .join(","),
        );
        let session = parse_session(format!("[{a}]").as_bytes(), canvas()).unwrap();
        let anomalies = validate_timing(&session);
        assert_eq!(anomalies.len(), 1);
        assert!(matches!(anomalies[0], TimingAnomaly::NonMonotonePoint { point: 1, .. }));
    }

    #[test]
    fn questionnaire_positional_and_keyed() {
        let positional = parse_questionnaire(br#"{"age":29,"gender":"f","answers":["my family","calm"]}"#).unwrap();
        assert_eq!(positional.answers[1].question, 2);
        assert_eq!(
            positional.answers[0].question_text(),
            "Who do you imagine lives in this house?"
        );
        let keyed = parse_questionnaire(br#"{"answers":[{"question":4,"answer":"alive"}]}"#).unwrap();
        assert_eq!(keyed.answers[0].question, 4);
        assert_eq!(
            parse_questionnaire(br#"{"answers":[{"question":11,"answer":"x"}]}"#),
            Err(QuestionnaireError::UnknownQuestion(11))
        );
        let eleven = format!(r#"{{"answers":[{}]}}"#, [r#""a""#; 11].join(","));
        assert_eq!(
            parse_questionnaire(eleven.as_bytes()),
            Err(QuestionnaireError::TooManyAnswers(11))
        );
    }

    #[test]
    fn canvas_from_str() {
        assert_eq!(
            "800x600".parse::<Canvas>(),
            Ok(Canvas {
                width: 800,
                height: 600
            })
        );
        assert!("800".parse::<Canvas>().is_err());
        assert!("0x600".parse::<Canvas>().is_err());
    }

    #[test]
    fn colour_hex_forms() {
        assert_eq!(Rgb::parse_hex("#fff"), Some(Rgb::WHITE));
        assert_eq!(Rgb::parse_hex("#A0b1C2"), Some(Rgb::new(0xa0, 0xb1, 0xc2)));
        assert_eq!(Rgb::parse_hex("a0b1c2"), None);
        assert_eq!(Rgb::new(1, 2, 255).to_string(), "#0102ff");
    }
}
