//! Runtime configuration: built-in defaults, then a TOML file, then
//! `DRAWSIGHT_*` environment variables.

use std::path::{Path, PathBuf};
use std::time::Duration;

use drawsight_core::annotations::PredicateConfig;
use drawsight_core::features::AnalysisConfig;
use drawsight_core::retrieval::{ChunkingConfig, Embedder, HashingEmbedder, HttpEmbedder, Strategy};
use drawsight_core::stroke_log::Canvas;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderProvider {
    /// Deterministic feature hashing. Offline and reproducible, but carries
    /// no semantics: for tests and demos only.
    Hashing,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub provider: EmbedderProvider,
    pub dimension: usize,
    pub endpoint: Option<String>,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_s: u64,
    pub batch_size: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            provider: EmbedderProvider::Hashing,
            dimension: 1024,
            endpoint: None,
            model: "text-embedding-3-small".into(),
            api_key_env: "DRAWSIGHT_EMBEDDING_API_KEY".into(),
            timeout_s: 30,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    /// Detection/classification service; used when no annotation file is given.
    pub endpoint: Option<String>,
    pub timeout_s: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            timeout_s: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Chat-completions endpoint. Unset means the pipeline stops at the prompt.
    pub endpoint: Option<String>,
    pub model: String,
    pub api_key_env: String,
    pub timeout_s: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: "gpt-4o-mini".into(),
            api_key_env: "DRAWSIGHT_LLM_API_KEY".into(),
            timeout_s: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub top_k: usize,
    /// Index loaded at startup by `serve` and used by `report` when no
    /// `--index` is passed.
    pub index_path: Option<PathBuf>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            top_k: 5,
            index_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub supersample: u32,
    /// Scale the uploaded PNG to the canvas before comparing.
    pub resample_for_fidelity: bool,
    /// Used when neither `--canvas` nor a final PNG gives the size.
    pub default_canvas: Canvas,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            supersample: 1,
            resample_for_fidelity: true,
            default_canvas: Canvas {
                width: 800,
                height: 600,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    pub store_root: PathBuf,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            store_root: PathBuf::from("drawsight-data"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub analysis: AnalysisConfig,
    pub predicates: PredicateConfig,
    pub chunking: ChunkingConfig,
    pub retrieval: RetrievalConfig,
    pub embedder: EmbedderConfig,
    pub inference: InferenceConfig,
    pub llm: LlmConfig,
    pub render: RenderConfig,
    pub server: ServerConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("invalid config file: {0}")]
    Parse(String),
    #[error("invalid value {value:?} for {var}")]
    Env { var: String, value: String },
    #[error("embedder provider `http` needs an endpoint")]
    MissingEmbeddingEndpoint,
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Read { .. } => "ConfigRead",
            Self::Parse(_) => "ConfigParse",
            Self::Env { .. } => "ConfigEnv",
            Self::MissingEmbeddingEndpoint => "MissingEmbeddingEndpoint",
        }
    }
}

/// Recognized environment overrides, in the order `config show` lists them.
pub const ENV_VARS: [&str; 16] = [
    "DRAWSIGHT_EMBEDDING_PROVIDER",
    "DRAWSIGHT_EMBEDDING_ENDPOINT",
    "DRAWSIGHT_EMBEDDING_MODEL",
    "DRAWSIGHT_INFERENCE_ENDPOINT",
    "DRAWSIGHT_LLM_ENDPOINT",
    "DRAWSIGHT_LLM_MODEL",
    "DRAWSIGHT_STORE_ROOT",
    "DRAWSIGHT_BIND",
    "DRAWSIGHT_PORT",
    "DRAWSIGHT_INDEX",
    "DRAWSIGHT_TOP_K",
    "DRAWSIGHT_CHUNK_STRATEGY",
    "DRAWSIGHT_KMEANS_SEED",
    "DRAWSIGHT_SEMANTIC_THRESHOLD",
    "DRAWSIGHT_THICK_LINE_PX",
    "DRAWSIGHT_FAINT_OPACITY",
];

fn parsed<T: std::str::FromStr>(var: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Env {
        var: var.into(),
        value: value.into(),
    })
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    /// Defaults, overlaid with `path` if given, then with the environment
    /// as seen through `env`.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
                    path: p.to_path_buf(),
                    message: e.to_string(),
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        config.apply_env(env)?;
        Ok(config)
    }

    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        for var in ENV_VARS {
            let Some(value) = env(var) else { continue };
            match var {
                "DRAWSIGHT_EMBEDDING_PROVIDER" => {
                    self.embedder.provider = match value.trim() {
                        "hashing" => EmbedderProvider::Hashing,
                        "http" => EmbedderProvider::Http,
                        _ => return Err(ConfigError::Env { var: var.into(), value }),
                    }
                }
                "DRAWSIGHT_EMBEDDING_ENDPOINT" => self.embedder.endpoint = Some(value),
                "DRAWSIGHT_EMBEDDING_MODEL" => self.embedder.model = value,
                "DRAWSIGHT_INFERENCE_ENDPOINT" => self.inference.endpoint = Some(value),
                "DRAWSIGHT_LLM_ENDPOINT" => self.llm.endpoint = Some(value),
                "DRAWSIGHT_LLM_MODEL" => self.llm.model = value,
                "DRAWSIGHT_STORE_ROOT" => self.server.store_root = PathBuf::from(value),
                "DRAWSIGHT_BIND" => self.server.bind = value,
                "DRAWSIGHT_PORT" => self.server.port = parsed(var, &value)?,
                "DRAWSIGHT_INDEX" => self.retrieval.index_path = Some(PathBuf::from(value)),
                "DRAWSIGHT_TOP_K" => self.retrieval.top_k = parsed(var, &value)?,
                "DRAWSIGHT_CHUNK_STRATEGY" => {
                    self.chunking.strategy = value.parse::<Strategy>().map_err(|_| ConfigError::Env {
                        var: var.into(),
                        value: value.clone(),
                    })?
                }
                "DRAWSIGHT_KMEANS_SEED" => self.chunking.kmeans_seed = parsed(var, &value)?,
                "DRAWSIGHT_SEMANTIC_THRESHOLD" => self.chunking.semantic_threshold = parsed(var, &value)?,
                "DRAWSIGHT_THICK_LINE_PX" => self.predicates.thick_line_px = parsed(var, &value)?,
                "DRAWSIGHT_FAINT_OPACITY" => self.predicates.faint_opacity = parsed(var, &value)?,
                _ => unreachable!("every listed variable is handled"),
            }
        }
        Ok(())
    }

    /// Builds the configured embedder. The API key is read from the
    /// environment here and never stored in the config.
    pub fn embedder(&self, env: impl Fn(&str) -> Option<String>) -> Result<Box<dyn Embedder>, ConfigError> {
        let e = &self.embedder;
        Ok(match e.provider {
            EmbedderProvider::Hashing => Box::new(HashingEmbedder { dimension: e.dimension }),
            EmbedderProvider::Http => {
                let endpoint = e.endpoint.clone().ok_or(ConfigError::MissingEmbeddingEndpoint)?;
                let mut client = HttpEmbedder::new(endpoint, e.model.clone());
                client.api_key = env(&e.api_key_env);
                client.timeout = Duration::from_secs(e.timeout_s);
                client.batch_size = e.batch_size.max(1);
                Box::new(client)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let text = Config::default().to_toml();
        assert!(text.contains("thick_line_px = 8.0"));
        assert!(text.contains("strategy = \"semantic\""));
        assert_eq!(Config::from_toml(&text).unwrap(), Config::default());
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c = Config::from_toml("[retrieval]\ntop_k = 3\n[analysis.sparc]\nmax_cutoff_hz = 10.0\n").unwrap();
        assert_eq!(c.retrieval.top_k, 3);
        assert_eq!(c.analysis.sparc.max_cutoff_hz, 10.0);
        assert_eq!(c.analysis.sparc.amplitude_threshold, 0.05);
        assert_eq!(c.chunking, ChunkingConfig::default());
    }

    #[test]
    fn environment_wins() {
        let env = |k: &str| match k {
            "DRAWSIGHT_TOP_K" => Some("9".to_string()),
            "DRAWSIGHT_CHUNK_STRATEGY" => Some("kmeans".to_string()),
            _ => None,
        };
        let c = Config::load(None, env).unwrap();
        assert_eq!(c.retrieval.top_k, 9);
        assert_eq!(c.chunking.strategy, Strategy::Kmeans);
        let bad = Config::load(None, |k: &str| (k == "DRAWSIGHT_PORT").then(|| "eighty".to_string()));
        assert_eq!(bad.unwrap_err().kind(), "ConfigEnv");
    }

    #[test]
    fn http_embedder_needs_endpoint() {
        let mut c = Config::default();
        c.embedder.provider = EmbedderProvider::Http;
        assert!(matches!(
            c.embedder(|_| None),
            Err(ConfigError::MissingEmbeddingEndpoint)
        ));
        assert!(Config::default()
            .embedder(|_| None)
            .unwrap()
            .provider_id()
            .starts_with("hashing"));
    }
}
