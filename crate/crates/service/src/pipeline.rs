//! End-to-end analysis of one session.
//!
//! Stages run in a fixed order. A stage whose optional input is missing is
//! recorded as skipped, and so is every stage that depends on it.

use std::time::Duration;

use drawsight_core::annotations::{
    derive_feature_predicates, fetch_annotations, map_indicators, parse_annotations, AnnotationSet,
};
use drawsight_core::description::{generate_description, to_query, DescriptionInput};
use drawsight_core::features::compute_profile;
use drawsight_core::renderer::{decode_png, encode_png, fidelity, reconstruct_with, RenderOptions};
use drawsight_core::retrieval::{assemble_prompt, preprocess, retrieve, ChunkIndex, Embedder};
use drawsight_core::stroke_log::{content_id, parse_questionnaire, parse_session, Canvas};
use thiserror::Error;

use crate::config::Config;
use crate::llm::LlmClient;
use crate::record::{PassageRef, SessionRecord, Stage, StageReport, StageStatus};

/// Raw uploaded bytes.
#[derive(Debug, Clone, Default)]
pub struct PipelineInput {
    pub session_log: Vec<u8>,
    pub canvas: Option<Canvas>,
    pub final_png: Option<Vec<u8>>,
    pub annotations: Option<Vec<u8>>,
    pub questionnaire: Option<Vec<u8>>,
}

pub struct PipelineContext<'a> {
    pub config: &'a Config,
    pub embedder: &'a dyn Embedder,
    pub index: Option<&'a ChunkIndex>,
    pub llm: Option<&'a LlmClient>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at stage {stage}: {message}")]
pub struct StageError {
    pub stage: Stage,
    /// Variant name of the underlying error.
    pub kind: &'static str,
    pub message: String,
}

impl StageError {
    fn new(stage: Stage, kind: &'static str, err: impl std::fmt::Display) -> Self {
        Self {
            stage,
            kind,
            message: err.to_string(),
        }
    }

    /// Errors caused by the uploaded inputs rather than by a remote service.
    pub fn is_client_error(&self) -> bool {
        !matches!(self.kind, "Unreachable" | "Timeout" | "BadResponse")
    }
}

/// Identifier derived from every input, so distinct uploads never share a record.
pub fn session_id(input: &PipelineInput, canvas: Canvas) -> String {
    let mut key = Vec::new();
    for part in [
        Some(input.session_log.as_slice()),
        input.final_png.as_deref(),
        input.annotations.as_deref(),
        input.questionnaire.as_deref(),
    ] {
        match part {
            Some(bytes) => {
                key.extend((bytes.len() as u64).to_le_bytes());
                key.extend(bytes);
            }
            None => key.extend(u64::MAX.to_le_bytes()),
        }
    }
    key.extend(canvas.width.to_le_bytes());
    key.extend(canvas.height.to_le_bytes());
    content_id(&key)
}

struct Stages(Vec<StageReport>);

impl Stages {
    fn done(&mut self, stage: Stage) {
        self.0.push(StageReport {
            stage,
            status: StageStatus::Done,
        });
    }

    fn skip(&mut self, stage: Stage, reason: &str) {
        self.0.push(StageReport {
            stage,
            status: StageStatus::Skipped { reason: reason.into() },
        });
    }
}

pub fn pipeline_run(
    input: PipelineInput,
    ctx: &PipelineContext<'_>,
    created_at: u64,
) -> Result<SessionRecord, StageError> {
    let config = ctx.config;
    let mut stages = Stages(Vec::new());

    let final_image = input
        .final_png
        .as_deref()
        .map(decode_png)
        .transpose()
        .map_err(|e| StageError::new(Stage::Parse, "ImageDecode", e))?;
    let canvas = input
        .canvas
        .or_else(|| {
            final_image.as_ref().map(|i| Canvas {
                width: i.width(),
                height: i.height(),
            })
        })
        .unwrap_or(config.render.default_canvas);
    let mut session =
        parse_session(&input.session_log, canvas).map_err(|e| StageError::new(Stage::Parse, e.kind(), &e))?;
    let questionnaire = input
        .questionnaire
        .as_deref()
        .map(parse_questionnaire)
        .transpose()
        .map_err(|e| StageError::new(Stage::Parse, e.kind(), &e))?;
    session.session_id = session_id(&input, canvas);
    session.questionnaire = questionnaire.clone();
    stages.done(Stage::Parse);

    let annotations: Option<AnnotationSet> = match (&input.annotations, &config.inference.endpoint, &input.final_png) {
        (Some(raw), _, _) => {
            Some(parse_annotations(raw, canvas).map_err(|e| StageError::new(Stage::Annotations, e.kind(), &e))?)
        }
        (None, Some(endpoint), Some(png)) => Some(
            fetch_annotations(png, endpoint, canvas, Duration::from_secs(config.inference.timeout_s))
                .map_err(|e| StageError::new(Stage::Annotations, e.kind(), &e))?,
        ),
        _ => None,
    };
    match &annotations {
        Some(_) => stages.done(Stage::Annotations),
        None => stages.skip(
            Stage::Annotations,
            "no annotations supplied and no inference endpoint configured",
        ),
    }

    let features = compute_profile(&session, annotations.as_ref(), &config.analysis);
    stages.done(Stage::Kinematics);
    stages.done(Stage::Spatial);
    stages.done(Stage::Behavior);

    let reconstruction = reconstruct_with(
        &session,
        RenderOptions {
            supersample: config.render.supersample.max(1),
        },
    );
    let fidelity = match &final_image {
        Some(img) => {
            let f = fidelity(&reconstruction.image, img, config.render.resample_for_fidelity)
                .map_err(|e| StageError::new(Stage::Fidelity, "DimensionMismatch", e))?;
            stages.done(Stage::Fidelity);
            Some(f)
        }
        None => {
            stages.skip(Stage::Fidelity, "no final image supplied");
            None
        }
    };

    let (predicates, indicators, description) = match &annotations {
        Some(ann) => {
            let predicates = derive_feature_predicates(ann, &features, &session, &config.predicates);
            stages.done(Stage::Predicates);
            let indicators = map_indicators(&predicates);
            stages.done(Stage::Indicators);
            let description = generate_description(&DescriptionInput {
                annotations: Some(ann),
                profile: Some(&features),
                questionnaire: questionnaire.as_ref(),
                canvas: Some(canvas),
            });
            stages.done(Stage::Description);
            (Some(predicates), Some(indicators), Some(description))
        }
        None => {
            for stage in [Stage::Predicates, Stage::Indicators, Stage::Description] {
                stages.skip(stage, "requires annotations");
            }
            (None, None, None)
        }
    };

    let retrieved = match (&description, ctx.index) {
        (Some(doc), Some(index)) => {
            let query = preprocess(&to_query(doc));
            let hits = retrieve(index, ctx.embedder, &query, config.retrieval.top_k)
                .map_err(|e| StageError::new(Stage::Retrieve, e.kind(), &e))?;
            stages.done(Stage::Retrieve);
            Some(hits)
        }
        (None, _) => {
            stages.skip(Stage::Retrieve, "requires a description");
            None
        }
        (Some(_), None) => {
            stages.skip(Stage::Retrieve, "no corpus index loaded");
            None
        }
    };

    let prompt = match &description {
        Some(doc) => {
            let p = assemble_prompt(
                doc,
                retrieved.as_deref().unwrap_or(&[]),
                questionnaire.as_ref(),
                indicators.as_deref().unwrap_or(&[]),
            );
            stages.done(Stage::Prompt);
            Some(p)
        }
        None => {
            stages.skip(Stage::Prompt, "requires a description");
            None
        }
    };

    let llm_response = match (&prompt, ctx.llm) {
        (Some(p), Some(client)) => {
            let text = client
                .complete(p)
                .map_err(|e| StageError::new(Stage::Llm, e.kind(), &e))?;
            stages.done(Stage::Llm);
            Some(text)
        }
        (None, _) => {
            stages.skip(Stage::Llm, "requires a prompt");
            None
        }
        (Some(_), None) => {
            stages.skip(Stage::Llm, "no LLM endpoint configured");
            None
        }
    };

    Ok(SessionRecord {
        session_id: session.session_id.clone(),
        created_at,
        canvas,
        stages: stages.0,
        session_log: input.session_log,
        final_png: input.final_png,
        annotations,
        questionnaire,
        features,
        reconstruction_png: encode_png(&reconstruction.image),
        render_warnings: reconstruction.warnings,
        fidelity,
        predicates,
        indicators,
        description,
        retrieved: retrieved.map(|hits| hits.iter().map(PassageRef::from).collect()),
        prompt,
        llm_response,
    })
}
