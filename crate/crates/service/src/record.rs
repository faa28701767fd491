//! The persisted outcome of one pipeline run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use drawsight_core::annotations::{AnnotationSet, FeaturePredicate, IndicatorMatch};
use drawsight_core::description::DescriptionDocument;
use drawsight_core::features::FeatureProfile;
use drawsight_core::renderer::{Fidelity, RenderWarning};
use drawsight_core::retrieval::{Retrieved, Strategy};
use drawsight_core::stroke_log::{Canvas, QuestionnaireResponse};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Parse,
    Annotations,
    Kinematics,
    Spatial,
    Behavior,
    Fidelity,
    Predicates,
    Indicators,
    Description,
    Retrieve,
    Prompt,
    Llm,
}

impl Stage {
    pub const ALL: [Stage; 12] = [
        Stage::Parse,
        Stage::Annotations,
        Stage::Kinematics,
        Stage::Spatial,
        Stage::Behavior,
        Stage::Fidelity,
        Stage::Predicates,
        Stage::Indicators,
        Stage::Description,
        Stage::Retrieve,
        Stage::Prompt,
        Stage::Llm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::Annotations => "annotations",
            Stage::Kinematics => "kinematics",
            Stage::Spatial => "spatial",
            Stage::Behavior => "behavior",
            Stage::Fidelity => "fidelity",
            Stage::Predicates => "predicates",
            Stage::Indicators => "indicators",
            Stage::Description => "description",
            Stage::Retrieve => "retrieve",
            Stage::Prompt => "prompt",
            Stage::Llm => "llm",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StageStatus {
    Done,
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    #[serde(flatten)]
    pub status: StageStatus,
}

/// A retrieved passage without its embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageRef {
    pub chunk_id: u32,
    pub citation: String,
    pub strategy: Strategy,
    pub score: f64,
    pub text: String,
}

impl From<&Retrieved> for PassageRef {
    fn from(r: &Retrieved) -> Self {
        Self {
            chunk_id: r.chunk.id,
            citation: r.chunk.citation(),
            strategy: r.chunk.strategy,
            score: r.score,
            text: r.chunk.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub session_id: String,
    /// Unix seconds.
    pub created_at: u64,
    pub canvas: Canvas,
    pub stages: Vec<StageReport>,
    /// The uploaded action log, byte for byte.
    pub session_log: Vec<u8>,
    pub final_png: Option<Vec<u8>>,
    pub annotations: Option<AnnotationSet>,
    pub questionnaire: Option<QuestionnaireResponse>,
    pub features: FeatureProfile,
    pub reconstruction_png: Vec<u8>,
    pub render_warnings: Vec<RenderWarning>,
    pub fidelity: Option<Fidelity>,
    pub predicates: Option<BTreeSet<FeaturePredicate>>,
    pub indicators: Option<Vec<IndicatorMatch>>,
    pub description: Option<DescriptionDocument>,
    pub retrieved: Option<Vec<PassageRef>>,
    pub prompt: Option<String>,
    pub llm_response: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub session_id: String,
    pub created_at: u64,
    pub canvas: Canvas,
    pub stages: Vec<StageReport>,
    /// Artifact file name → SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("record types serialize");
    out.push(b'\n');
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("artifact {0} is missing")]
    Missing(&'static str),
    #[error("artifact {name} is unreadable: {message}")]
    Invalid { name: &'static str, message: String },
}

pub const SESSION_LOG: &str = "session.json";
pub const FINAL_PNG: &str = "final.png";
pub const ANNOTATIONS: &str = "annotations.json";
pub const QUESTIONNAIRE: &str = "questionnaire.json";
pub const FEATURES: &str = "features.json";
pub const RECONSTRUCTION: &str = "reconstruction.png";
pub const RENDER_WARNINGS: &str = "render_warnings.json";
pub const FIDELITY: &str = "fidelity.json";
pub const PREDICATES: &str = "predicates.json";
pub const INDICATORS: &str = "indicators.json";
pub const DESCRIPTION: &str = "description.json";
pub const DESCRIPTION_TEXT: &str = "description.txt";
pub const RETRIEVED: &str = "retrieved.json";
pub const PROMPT: &str = "prompt.txt";
pub const LLM_RESPONSE: &str = "llm_response.txt";

impl SessionRecord {
    pub fn stage(&self, stage: Stage) -> Option<&StageStatus> {
        self.stages.iter().find(|s| s.stage == stage).map(|s| &s.status)
    }

    pub fn features_json(&self) -> Vec<u8> {
        json(&self.features)
    }

    pub fn description_json(&self) -> Option<Vec<u8>> {
        self.description.as_ref().map(json)
    }

    /// Every artifact as (file name, bytes), in a fixed order.
    pub fn artifacts(&self) -> Vec<(&'static str, Vec<u8>)> {
        let mut out = vec![(SESSION_LOG, self.session_log.clone())];
        if let Some(png) = &self.final_png {
            out.push((FINAL_PNG, png.clone()));
        }
        if let Some(a) = &self.annotations {
            out.push((ANNOTATIONS, json(a)));
        }
        if let Some(q) = &self.questionnaire {
            out.push((QUESTIONNAIRE, json(q)));
        }
        out.push((FEATURES, self.features_json()));
        out.push((RECONSTRUCTION, self.reconstruction_png.clone()));
        out.push((RENDER_WARNINGS, json(&self.render_warnings)));
        if let Some(f) = &self.fidelity {
            out.push((FIDELITY, json(f)));
        }
        if let Some(p) = &self.predicates {
            out.push((PREDICATES, json(p)));
        }
        if let Some(i) = &self.indicators {
            out.push((INDICATORS, json(i)));
        }
        if let Some(d) = &self.description {
            out.push((DESCRIPTION, json(d)));
            out.push((DESCRIPTION_TEXT, d.render(true).into_bytes()));
        }
        if let Some(r) = &self.retrieved {
            out.push((RETRIEVED, json(r)));
        }
        if let Some(p) = &self.prompt {
            out.push((PROMPT, p.clone().into_bytes()));
        }
        if let Some(r) = &self.llm_response {
            out.push((LLM_RESPONSE, r.clone().into_bytes()));
        }
        out
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            session_id: self.session_id.clone(),
            created_at: self.created_at,
            canvas: self.canvas,
            stages: self.stages.clone(),
            artifacts: self
                .artifacts()
                .into_iter()
                .map(|(name, bytes)| (name.to_string(), sha256_hex(&bytes)))
                .collect(),
        }
    }

    pub fn manifest_json(&self) -> Vec<u8> {
        json(&self.manifest())
    }

    /// Rebuilds a record from its manifest and an artifact lookup.
    pub fn from_artifacts(
        manifest: Manifest,
        mut get: impl FnMut(&'static str) -> Option<Vec<u8>>,
    ) -> Result<Self, ArtifactError> {
        fn parse<T: serde::de::DeserializeOwned>(name: &'static str, bytes: Vec<u8>) -> Result<T, ArtifactError> {
            serde_json::from_slice(&bytes).map_err(|e| ArtifactError::Invalid {
                name,
                message: e.to_string(),
            })
        }
        let text = |name: &'static str, bytes: Vec<u8>| {
            String::from_utf8(bytes).map_err(|e| ArtifactError::Invalid {
                name,
                message: e.to_string(),
            })
        };
        let mut optional = |name: &'static str| {
            if manifest.artifacts.contains_key(name) {
                get(name).ok_or(ArtifactError::Missing(name)).map(Some)
            } else {
                Ok(None)
            }
        };
        let required = |v: Option<Vec<u8>>, name: &'static str| v.ok_or(ArtifactError::Missing(name));

        let session_log = required(optional(SESSION_LOG)?, SESSION_LOG)?;
        let final_png = optional(FINAL_PNG)?;
        let annotations = optional(ANNOTATIONS)?.map(|b| parse(ANNOTATIONS, b)).transpose()?;
        let questionnaire = optional(QUESTIONNAIRE)?.map(|b| parse(QUESTIONNAIRE, b)).transpose()?;
        let features = parse(FEATURES, required(optional(FEATURES)?, FEATURES)?)?;
        let reconstruction_png = required(optional(RECONSTRUCTION)?, RECONSTRUCTION)?;
        let render_warnings = parse(RENDER_WARNINGS, required(optional(RENDER_WARNINGS)?, RENDER_WARNINGS)?)?;
        let fidelity = optional(FIDELITY)?.map(|b| parse(FIDELITY, b)).transpose()?;
        let predicates = optional(PREDICATES)?.map(|b| parse(PREDICATES, b)).transpose()?;
        let indicators = optional(INDICATORS)?.map(|b| parse(INDICATORS, b)).transpose()?;
        let description = optional(DESCRIPTION)?.map(|b| parse(DESCRIPTION, b)).transpose()?;
        let retrieved = optional(RETRIEVED)?.map(|b| parse(RETRIEVED, b)).transpose()?;
        let prompt = optional(PROMPT)?.map(|b| text(PROMPT, b)).transpose()?;
        let llm_response = optional(LLM_RESPONSE)?.map(|b| text(LLM_RESPONSE, b)).transpose()?;

        Ok(Self {
            session_id: manifest.session_id,
            created_at: manifest.created_at,
            canvas: manifest.canvas,
            stages: manifest.stages,
            session_log,
            final_png,
            annotations,
            questionnaire,
            features,
            reconstruction_png,
            render_warnings,
            fidelity,
            predicates,
            indicators,
            description,
            retrieved,
            prompt,
            llm_response,
        })
    }
}
