//! Sentence embedding providers.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::http::{self, HttpError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("embedding {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding {0} is the zero vector")]
    ZeroVector(usize),
    #[error("provider returned {found} embeddings for {expected} inputs")]
    CountMismatch { expected: usize, found: usize },
    #[error("provider response is not valid: {0}")]
    InvalidResponse(String),
}

impl EmbedError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Http(HttpError::Unreachable(_)) => "Unreachable",
            Self::Http(HttpError::Timeout(_)) => "Timeout",
            Self::Http(HttpError::BadResponse { .. }) | Self::InvalidResponse(_) | Self::CountMismatch { .. } => {
                "BadResponse"
            }
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::ZeroVector(_) => "ZeroVector",
        }
    }
}

pub trait Embedder: Send + Sync {
    /// Identifies the model, so indexes built with another one are refused.
    fn provider_id(&self) -> String;

    /// One unit-norm vector per text, all of one dimension.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError>;
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// L2-normalizes each vector and checks they share one dimension.
pub fn normalize_batch(vectors: Vec<Vec<f64>>) -> Result<Vec<Vec<f32>>, EmbedError> {
    let expected = vectors.first().map_or(0, Vec::len);
    vectors
        .into_iter()
        .enumerate()
        .map(|(index, v)| {
            if v.len() != expected {
                return Err(EmbedError::DimensionMismatch {
                    index,
                    expected,
                    found: v.len(),
                });
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(EmbedError::ZeroVector(index));
            }
            Ok(v.iter().map(|x| (x / norm) as f32).collect())
        })
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Signed feature hashing of lowercase alphanumeric tokens.
///
/// Offline and deterministic, meant for tests and demos only: it measures
/// word overlap, not meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dimension: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dimension: 1024 }
    }
}

impl HashingEmbedder {
    pub fn vector(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for token in text
            .to_ascii_lowercase()
            .split(|c: char| !c.is_ascii_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let h = fnv1a(token.as_bytes());
            let slot = (h % self.dimension as u64) as usize;
            v[slot] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        v
    }
}

impl Embedder for HashingEmbedder {
    fn provider_id(&self) -> String {
        format!("hashing-fnv1a-{}", self.dimension)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        normalize_batch(texts.iter().map(|t| self.vector(t)).collect())
    }
}

/// Client for an embeddings endpoint speaking the common
/// `{"model", "input": [...]}` → `{"data": [{"embedding": [...]}]}` shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEmbedder {
    pub endpoint: String,
    pub model: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Inputs per request.
    pub batch_size: usize,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            timeout: Duration::from_secs(30),
            batch_size: 64,
        }
    }

    fn request(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let body = json!({ "model": self.model, "input": texts }).to_string();
        let auth = self.api_key.as_ref().map(|k| format!("Bearer {k}"));
        let headers: Vec<(&str, &str)> = auth.iter().map(|a| ("authorization", a.as_str())).collect();
        let raw = http::post(
            &self.endpoint,
            "application/json",
            &headers,
            body.as_bytes(),
            self.timeout,
        )?;
        let mut parsed: EmbeddingResponse =
            serde_json::from_slice(&raw).map_err(|e| EmbedError::InvalidResponse(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::CountMismatch {
                expected: texts.len(),
                found: parsed.data.len(),
            });
        }
        if parsed.data.iter().all(|d| d.index.is_some()) {
            parsed.data.sort_by_key(|d| d.index);
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }
}

impl Embedder for HttpEmbedder {
    fn provider_id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let mut raw = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size.max(1)) {
            raw.extend(self.request(batch)?);
        }
        normalize_batch(raw)
    }
}
