//! Template-based textual description of a drawing and its process.
//!
//! Every clause records the input field it was rendered from, so the text can
//! be audited against the annotations and features it came from.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationSet, Marker, ObjectLabel};
use crate::features::FeatureProfile;
use crate::spatial::{object_placement, size_category, BoundingBox, GridCell};
use crate::stroke_log::{ActionType, Canvas, QuestionnaireResponse};

/// Bumped whenever template wording changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub text: String,
    /// Input field the clause renders, e.g. `annotations.markers.leaning_house`.
    pub source: String,
}

/// One rendered line: clauses joined with `"; "`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub clauses: Vec<Clause>,
}

impl Sentence {
    pub fn text(&self) -> String {
        self.clauses
            .iter()
            .map(|c| c.text.as_str())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<ObjectLabel>,
    pub sentences: Vec<Sentence>,
}

impl Section {
    pub fn lines(&self) -> Vec<String> {
        self.sentences.iter().map(Sentence::text).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub objects: Vec<Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub questionnaire: Option<Section>,
}

impl DescriptionDocument {
    /// Clause text → source field, over the whole document.
    pub fn provenance(&self) -> Vec<(String, String)> {
        self.sections()
            .flat_map(|(_, s)| s.sentences.iter())
            .flat_map(|s| s.clauses.iter())
            .map(|c| (c.text.clone(), c.source.clone()))
            .collect()
    }

    fn sections(&self) -> impl Iterator<Item = (&'static str, &Section)> {
        self.objects
            .iter()
            .map(|s| ("objects", s))
            .chain(self.scene.iter().map(|s| ("scene", s)))
            .chain(self.behavior.iter().map(|s| ("behavior", s)))
            .chain(self.questionnaire.iter().map(|s| ("questionnaire", s)))
    }

    /// Plain text with one `## header` per section group.
    pub fn render(&self, include_questionnaire: bool) -> String {
        let mut out = String::new();
        let mut push_group = |header: &str, blocks: Vec<Vec<String>>| {
            let blocks: Vec<_> = blocks.into_iter().filter(|b| !b.is_empty()).collect();
            if blocks.is_empty() {
                return;
            }
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "## {header}");
            for (i, block) in blocks.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                for line in block {
                    out.push_str(line);
                    out.push('\n');
                }
            }
        };
        push_group("objects", self.objects.iter().map(Section::lines).collect());
        push_group("scene", self.scene.iter().map(Section::lines).collect());
        push_group("behavior", self.behavior.iter().map(Section::lines).collect());
        if include_questionnaire {
            push_group("questionnaire", self.questionnaire.iter().map(Section::lines).collect());
        }
        out
    }
}

/// Retrieval query text; byte-stable for identical documents.
pub fn to_query(doc: &DescriptionDocument) -> String {
    doc.render(true)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DescriptionInput<'a> {
    pub annotations: Option<&'a AnnotationSet>,
    pub profile: Option<&'a FeatureProfile>,
    pub questionnaire: Option<&'a QuestionnaireResponse>,
    /// Needed for size and placement when no profile is given.
    pub canvas: Option<Canvas>,
}

fn clause(text: impl Into<String>, source: impl Into<String>) -> Clause {
    Clause {
        text: text.into(),
        source: source.into(),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn marker_clause(name: &str, text: &str, marker: Marker) -> Clause {
    let mut t = format!("{text}: {}", yes_no(marker.value));
    if let Some(c) = marker.confidence {
        let _ = write!(t, " (confidence {c:.2})");
    }
    clause(t, format!("annotations.markers.{name}"))
}

fn marker_text(name: &str) -> &'static str {
    match name {
        "leaning_house" => "leaning",
        "house_2d" => "two-dimensional",
        "dead_tree" => "dead",
        "flattened_crown" => "flattened crown",
        "poker_face" => "expressionless face",
        _ => "single-line limbs",
    }
}

fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn opt_num(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

fn object_section(label: ObjectLabel, input: &DescriptionInput<'_>, canvas: Option<Canvas>) -> Section {
    let name = label.display_name();
    let src = format!("annotations.objects[{label}]");
    let instances: Vec<_> = input
        .annotations
        .map(|a| a.objects.iter().filter(|o| o.label == label).collect())
        .unwrap_or_default();
    if instances.is_empty() {
        return Section {
            subject: Some(label),
            sentences: vec![Sentence {
                clauses: vec![clause(format!("{name}: omitted"), src)],
            }],
        };
    }
    let bbox: BoundingBox = instances
        .iter()
        .map(|o| o.bbox)
        .reduce(|a, b| a.union(&b))
        .expect("non-empty");

    let mut head = vec![clause(format!("{name}: present"), src.clone())];
    if let Some(canvas) = canvas {
        let size = size_category(&bbox, canvas);
        head.push(clause(format!("size: {}", size.value.as_str()), format!("{src}.box")));
    }
    if let Some(ann) = input.annotations {
        for (marker_name, owner, marker) in ann.markers.entries() {
            if let (true, Some(m)) = (owner == label, marker) {
                head.push(marker_clause(marker_name, marker_text(marker_name), m));
            }
        }
    }
    if let Some(canvas) = canvas {
        let size = size_category(&bbox, canvas);
        let placement = object_placement(&bbox, canvas);
        head.push(clause(format!("placement: {placement}"), format!("{src}.box")));
        head.push(clause(
            format!("area ratio: {:.3}", size.area_ratio),
            format!("{src}.box"),
        ));
    }
    if instances.len() > 1 {
        head.push(clause(format!("instances: {}", instances.len()), src.clone()));
    }
    let mut sentences = vec![Sentence { clauses: head }];

    if !label.parts().is_empty() {
        let present: Vec<_> = label
            .parts()
            .iter()
            .filter(|p| instances.iter().any(|o| o.has_part(**p)))
            .map(|p| p.as_str())
            .collect();
        let missing: Vec<_> = label
            .parts()
            .iter()
            .filter(|p| !instances.iter().any(|o| o.has_part(**p)))
            .map(|p| p.as_str())
            .collect();
        let list = |v: &[&str]| if v.is_empty() { "none".to_string() } else { v.join(", ") };
        sentences.push(Sentence {
            clauses: vec![
                clause(format!("parts: {}", list(&present)), format!("{src}.parts")),
                clause(format!("missing parts: {}", list(&missing)), format!("{src}.parts")),
            ],
        });
    }

    if let Some(f) = input.profile.and_then(|p| p.objects.get(&label)) {
        let psrc = format!("features.objects.{label}");
        let colors: Vec<_> = f.colors.iter().map(|c| c.as_str()).collect();
        let mut clauses = vec![
            clause(format!("actions: {}", f.actions), format!("{psrc}.actions")),
            clause(format!("strokes: {}", f.strokes), format!("{psrc}.strokes")),
            clause(
                format!(
                    "colors: {}",
                    if colors.is_empty() {
                        "none".to_string()
                    } else {
                        colors.join(", ")
                    }
                ),
                format!("{psrc}.colors"),
            ),
            clause(
                format!("mean speed: {} px/s", opt_num(f.speed_px_per_s, 1)),
                format!("{psrc}.speed_px_per_s"),
            ),
            clause(
                format!("smoothness: {}", opt_num(f.sparc_sal, 3)),
                format!("{psrc}.sparc_sal"),
            ),
            clause(
                format!("erasures: {}", f.eraser_events),
                format!("{psrc}.eraser_events"),
            ),
        ];
        if let Some(profile) = input.profile {
            if let Some(pos) = profile.order.iter().position(|e| e.label == label) {
                clauses.push(clause(
                    format!("drawn: {} of {}", ordinal(pos + 1), profile.order.len()),
                    "features.order",
                ));
            }
        }
        sentences.push(Sentence { clauses });
    }
    Section {
        subject: Some(label),
        sentences,
    }
}

fn cell_name(cell: GridCell) -> &'static str {
    const NAMES: [[&str; 3]; 3] = [
        ["upper-left", "upper-center", "upper-right"],
        ["middle-left", "middle-center", "middle-right"],
        ["lower-left", "lower-center", "lower-right"],
    ];
    NAMES[cell.row - 1][cell.col - 1]
}

fn scene_section(input: &DescriptionInput<'_>, canvas: Option<Canvas>) -> Option<Section> {
    let mut sentences = Vec::new();
    if let Some(ann) = input.annotations {
        let mut counts: BTreeMap<ObjectLabel, usize> = BTreeMap::new();
        for o in ann.objects.iter().filter(|o| !o.label.is_htp()) {
            *counts.entry(o.label).or_default() += 1;
        }
        let listed: Vec<_> = counts
            .iter()
            .map(|(l, &n)| {
                if n > 1 {
                    format!("{} ({n})", l.display_name())
                } else {
                    l.display_name().to_string()
                }
            })
            .collect();
        let mut clauses = vec![clause(
            format!(
                "environmental objects: {}",
                if listed.is_empty() {
                    "none".to_string()
                } else {
                    listed.join(", ")
                }
            ),
            "annotations.objects",
        )];
        let drawing = ann.objects.iter().map(|o| o.bbox).reduce(|a, b| a.union(&b));
        if let (Some(canvas), Some(drawing)) = (canvas, drawing) {
            clauses.push(clause(
                format!("overall placement: {}", object_placement(&drawing, canvas)),
                "annotations.objects.box",
            ));
            clauses.push(clause(
                format!("overall size: {}", size_category(&drawing, canvas).value.as_str()),
                "annotations.objects.box",
            ));
        }
        sentences.push(Sentence { clauses });
    }
    if let Some(grid) = input.profile.map(|p| &p.grid) {
        if grid.p.is_some() {
            let cells: Vec<GridCell> = (1..=3)
                .flat_map(|row| (1..=3).map(move |col| GridCell { row, col }))
                .collect();
            let shares: Vec<_> = cells
                .iter()
                .filter(|c| grid.n[c.row - 1][c.col - 1] > 0)
                .map(|&c| format!("{} {:.2}", cell_name(c), grid.probability(c)))
                .collect();
            let densest = cells
                .iter()
                .copied()
                .max_by(|a, b| {
                    grid.n[a.row - 1][a.col - 1]
                        .cmp(&grid.n[b.row - 1][b.col - 1])
                        .then((b.row, b.col).cmp(&(a.row, a.col)))
                })
                .expect("nine cells");
            sentences.push(Sentence {
                clauses: vec![
                    clause(format!("point distribution: {}", shares.join(", ")), "features.grid"),
                    clause(format!("densest region: {}", cell_name(densest)), "features.grid"),
                ],
            });
        }
    }
    (!sentences.is_empty()).then_some(Section {
        subject: None,
        sentences,
    })
}

fn behavior_section(profile: Option<&FeatureProfile>) -> Section {
    let Some(p) = profile else {
        return Section {
            subject: None,
            sentences: vec![Sentence {
                clauses: vec![clause("process data: not available", "features")],
            }],
        };
    };
    let count = |kind: ActionType| p.strokes.iter().filter(|s| s.action_type == kind).count();
    let draws = count(ActionType::DrawLine);
    let erases = count(ActionType::Erase);
    let mut sentences = vec![Sentence {
        clauses: vec![
            clause(format!("actions: {}", p.action_count), "features.action_count"),
            clause(format!("draw strokes: {draws}"), "features.strokes"),
            clause(format!("erase strokes: {erases}"), "features.strokes"),
            clause(
                format!("fills: {}", p.action_count - p.stroke_count),
                "features.action_count",
            ),
        ],
    }];

    if let Some(first) = p.first_drawn {
        let entry = &p.order[0];
        let start = p.start_ms.unwrap_or(entry.first_stroke_start);
        let sequence: Vec<_> = p.order.iter().map(|e| e.label.display_name()).collect();
        sentences.push(Sentence {
            clauses: vec![
                clause(format!("drawing order: {}", sequence.join(", ")), "features.order"),
                clause(
                    format!(
                        "first drawn: {} (completed at {:.1} s)",
                        first.display_name(),
                        (entry.completion - start) as f64 / 1000.0
                    ),
                    "features.first_drawn",
                ),
            ],
        });
    }

    sentences.push(Sentence {
        clauses: vec![
            clause(
                format!("total stroke length: {:.1} px", p.length_px),
                "features.length_px",
            ),
            clause(
                format!("total stroke time: {:.2} s", p.duration_s),
                "features.duration_s",
            ),
            clause(
                format!("mean speed: {} px/s", opt_num(p.speed_px_per_s, 1)),
                "features.speed_px_per_s",
            ),
            clause(
                format!("mean smoothness: {}", opt_num(p.sparc_sal, 3)),
                "features.sparc_sal",
            ),
        ],
    });

    let pauses = if p.pauses_s.is_empty() {
        vec![clause("pauses: none", "features.pauses_s")]
    } else {
        vec![
            clause(format!("pauses: {}", p.pauses_s.len()), "features.pauses_s"),
            clause(
                format!("total pause: {:.2} s", p.pause_total_s),
                "features.pause_total_s",
            ),
            clause(
                format!("mean pause: {} s", opt_num(p.pause_mean_s, 2)),
                "features.pause_mean_s",
            ),
            clause(
                format!("median pause: {} s", opt_num(p.pause_median_s, 2)),
                "features.pause_median_s",
            ),
            clause(
                format!("pause variance: {} s^2", opt_num(p.pause_variance_s2, 3)),
                "features.pause_variance_s2",
            ),
        ]
    };
    sentences.push(Sentence { clauses: pauses });

    let mut lines = Vec::new();
    for (name, stats) in [("draw", &p.line_width.draw), ("erase", &p.line_width.erase)] {
        if let Some(w) = stats {
            lines.push(clause(
                format!(
                    "{name} line width: mean {:.1}, min {:.1}, max {:.1}, mode {:.1} px",
                    w.mean, w.min, w.max, w.mode
                ),
                format!("features.line_width.{name}"),
            ));
        }
    }
    if let Some(o) = p.mean_draw_opacity {
        lines.push(clause(format!("mean opacity: {o:.2}"), "features.mean_draw_opacity"));
    }
    if !lines.is_empty() {
        sentences.push(Sentence { clauses: lines });
    }

    let eraser = if p.eraser_events == 0 {
        vec![clause("eraser: not used", "features.eraser_events")]
    } else {
        let mut c = vec![
            clause(format!("eraser events: {}", p.eraser_events), "features.eraser_events"),
            clause(
                format!("erasing time: {:.2} s", p.eraser_time_s),
                "features.eraser_time_s",
            ),
            clause(
                format!("erased area: {} px^2", p.eraser_area_px2),
                "features.eraser_area_px2",
            ),
        ];
        if !p.eraser_per_object.is_empty() {
            let per: Vec<_> = p
                .eraser_per_object
                .iter()
                .map(|(l, e)| format!("{} {}", l.display_name(), e.events))
                .collect();
            c.push(clause(
                format!("erasures by object: {}", per.join(", ")),
                "features.eraser_per_object",
            ));
        }
        c
    };
    sentences.push(Sentence { clauses: eraser });
    Section {
        subject: None,
        sentences,
    }
}

pub(crate) fn questionnaire_section(q: &QuestionnaireResponse) -> Section {
    let mut sentences = Vec::new();
    let mut who = Vec::new();
    if let Some(age) = q.age {
        who.push(clause(format!("age: {age}"), "questionnaire.age"));
    }
    if let Some(g) = &q.gender {
        who.push(clause(format!("gender: {g}"), "questionnaire.gender"));
    }
    if !who.is_empty() {
        sentences.push(Sentence { clauses: who });
    }
    for a in &q.answers {
        sentences.push(Sentence {
            clauses: vec![clause(
                format!("Q{} {} {}", a.question, a.question_text(), a.answer),
                format!("questionnaire.answers[{}]", a.question),
            )],
        });
    }
    Section {
        subject: None,
        sentences,
    }
}

pub fn generate_description(input: &DescriptionInput<'_>) -> DescriptionDocument {
    let canvas = input.canvas.or(input.profile.map(|p| p.canvas));
    DescriptionDocument {
        schema_version: SCHEMA_VERSION,
        session_id: input.profile.map(|p| p.session_id.clone()),
        objects: ObjectLabel::HTP
            .iter()
            .map(|&l| object_section(l, input, canvas))
            .collect(),
        scene: scene_section(input, canvas),
        behavior: Some(behavior_section(input.profile)),
        questionnaire: input.questionnaire.map(questionnaire_section),
    }
}
