//! Command-line interface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drawsight_core::renderer::{decode_png, encode_png, reconstruct_at, reconstruct_with, RenderOptions};
use drawsight_core::retrieval::{
    build_index, preprocess, retrieve, ChunkIndex, ChunkingConfig, CorpusDocument, Embedder, IndexError, Strategy,
};
use drawsight_core::stroke_log::{parse_session, Canvas};

use crate::api::{parse_canvas, router, unix_now, AppState};
use crate::config::{Config, ConfigError, ENV_VARS};
use crate::llm::LlmClient;
use crate::pipeline::{pipeline_run, PipelineContext, PipelineInput, StageError};
use crate::record::{PassageRef, SessionRecord, Stage, StageStatus};
use crate::store::{write_record_dir, FileStore, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "drawsight", version, about = "Drawing-process analysis")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "DRAWSIGHT_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct SessionArgs {
    /// Action log JSON.
    pub session: PathBuf,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub questionnaire: Option<PathBuf>,
    /// Final PNG exported by the capture tool.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Canvas size as WIDTHxHEIGHT; defaults to the image size.
    #[arg(long, value_parser = parse_canvas)]
    pub canvas: Option<Canvas>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the feature profile of a session.
    Analyze(SessionArgs),
    /// Replay the log into a PNG.
    Reconstruct {
        #[command(flatten)]
        session: SessionArgs,
        /// Replay only what was drawn up to this epoch-ms timestamp.
        #[arg(long)]
        at: Option<i64>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Print the structured description.
    Describe(SessionArgs),
    #[command(subcommand)]
    Index(IndexCommand),
    /// Search an index with the contents of a file.
    Retrieve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query_file: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Run the whole pipeline and write a record directory.
    Report {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        /// Send the prompt to this chat-completions endpoint.
        #[arg(long)]
        llm_endpoint: Option<String>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        llm_endpoint: Option<String>,
    },
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Chunk and embed every .md and .txt file in a directory.
    Build {
        corpus: PathBuf,
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConfigCommand {
    /// Print the effective configuration.
    Show,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind}: {message}")]
pub struct CliError {
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn new(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new("Io", format!("{}: {e}", path.display()))
    }
}

impl From<StageError> for CliError {
    fn from(e: StageError) -> Self {
        Self::new(e.kind, e.to_string())
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_opt(path: &Option<PathBuf>) -> Result<Option<Vec<u8>>, CliError> {
    path.as_deref().map(read).transpose()
}

/// Honors `SOURCE_DATE_EPOCH` so builds and reports can be reproduced.
fn now() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(unix_now)
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok()
}

impl SessionArgs {
    fn input(&self) -> Result<PipelineInput, CliError> {
        Ok(PipelineInput {
            session_log: read(&self.session)?,
            canvas: self.canvas,
            final_png: read_opt(&self.image)?,
            annotations: read_opt(&self.annotations)?,
            questionnaire: read_opt(&self.questionnaire)?,
        })
    }
}

fn load_index(path: &Path) -> Result<ChunkIndex, CliError> {
    Ok(ChunkIndex::from_bytes(&read(path)?)?)
}

fn make_embedder(config: &Config) -> Result<Box<dyn Embedder>, CliError> {
    let embedder = config.embedder(env)?;
    if embedder.provider_id().starts_with("hashing") {
        eprintln!("note: using the hashing embedder, which is deterministic but not semantic");
    }
    Ok(embedder)
}

fn llm_client(config: &Config, endpoint: Option<String>) -> Option<LlmClient> {
    endpoint
        .or_else(|| config.llm.endpoint.clone())
        .map(|endpoint| LlmClient {
            endpoint,
            model: config.llm.model.clone(),
            api_key: env(&config.llm.api_key_env),
            timeout: Duration::from_secs(config.llm.timeout_s),
        })
}

fn run_pipeline(
    config: &Config,
    args: &SessionArgs,
    index: Option<&ChunkIndex>,
    llm: Option<&LlmClient>,
) -> Result<SessionRecord, CliError> {
    let hashing = drawsight_core::retrieval::HashingEmbedder::default();
    let configured;
    let embedder: &dyn Embedder = match index {
        Some(_) => {
            configured = make_embedder(config)?;
            configured.as_ref()
        }
        None => &hashing,
    };
    let ctx = PipelineContext {
        config,
        embedder,
        index,
        llm,
    };
    Ok(pipeline_run(args.input()?, &ctx, now())?)
}

fn write_out(out: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::new("Io", e.to_string()))
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.digits$}"))
}

fn features_text(record: &SessionRecord) -> String {
    let f = &record.features;
    let mut lines = vec![
        format!("session: {}", f.session_id),
        format!("canvas: {}x{}", f.canvas.width, f.canvas.height),
        format!("actions: {} ({} strokes)", f.action_count, f.stroke_count),
        format!("length: {:.1} px over {:.2} s", f.length_px, f.duration_s),
        format!("mean speed: {} px/s", opt(f.speed_px_per_s, 1)),
        format!("mean SPARC: {}", opt(f.sparc_sal, 3)),
        format!(
            "pauses: total {:.2} s, median {} s",
            f.pause_total_s,
            opt(f.pause_median_s, 2)
        ),
        format!(
            "eraser: {} events, {:.2} s, {} px²",
            f.eraser_events, f.eraser_time_s, f.eraser_area_px2
        ),
    ];
    if !f.order.is_empty() {
        let order: Vec<_> = f.order.iter().map(|e| e.label.as_str()).collect();
        lines.push(format!("order: {}", order.join(" → ")));
    }
    if let Some(fid) = &record.fidelity {
        lines.push(format!("fidelity: {:.4}", fid.pixel_match_ratio));
    }
    lines.join("\n") + "\n"
}

fn passages_text(hits: &[PassageRef]) -> String {
    let mut out = String::new();
    for (i, h) in hits.iter().enumerate() {
        out.push_str(&format!("[{}] {:.4} {}\n{}\n\n", i + 1, h.score, h.citation, h.text));
    }
    out
}

fn corpus_documents(dir: &Path) -> Result<Vec<CorpusDocument>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|x| x.to_str()), Some("md" | "txt")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(CorpusDocument { name, text })
        })
        .collect()
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let config = Config::load(cli.config.as_deref(), env)?;
    let json = cli.format == Format::Json;
    match cli.command {
        Command::Analyze(args) => {
            let record = run_pipeline(&config, &args, None, None)?;
            let bytes = if json {
                record.features_json()
            } else {
                features_text(&record).into_bytes()
            };
            write_out(out, &bytes)
        }
        Command::Reconstruct { session, at, output } => {
            let input = session.input()?;
            let canvas = match (input.canvas, &input.final_png) {
                (Some(c), _) => c,
                (None, Some(png)) => {
                    let img = decode_png(png).map_err(|e| CliError::new("ImageDecode", e.to_string()))?;
                    Canvas {
                        width: img.width(),
                        height: img.height(),
                    }
                }
                (None, None) => config.render.default_canvas,
            };
            let parsed = parse_session(&input.session_log, canvas)
                .map_err(|e| CliError::new(e.kind(), format!("{e} at stage parse")))?;
            let options = RenderOptions {
                supersample: config.render.supersample.max(1),
            };
            let rendered = match at {
                Some(t) => reconstruct_at(&parsed, t, options),
                None => reconstruct_with(&parsed, options),
            };
            fs::write(&output, encode_png(&rendered.image)).map_err(|e| CliError::io(&output, e))?;
            let summary = serde_json::json!({
                "output": output.display().to_string(),
                "width": canvas.width,
                "height": canvas.height,
                "warnings": rendered.warnings,
            });
            let text = if json {
                serde_json::to_string_pretty(&summary).expect("json") + "\n"
            } else {
                format!(
                    "wrote {} ({}x{}, {} warnings)\n",
                    output.display(),
                    canvas.width,
                    canvas.height,
                    rendered.warnings.len()
                )
            };
            write_out(out, text.as_bytes())
        }
        Command::Describe(args) => {
            let record = run_pipeline(&config, &args, None, None)?;
            let Some(doc) = &record.description else {
                let reason = match record.stage(Stage::Description) {
                    Some(StageStatus::Skipped { reason }) => reason.clone(),
                    _ => "not produced".into(),
                };
                return Err(CliError::new("StageSkipped", format!("description: {reason}")));
            };
            let bytes = if json {
                record.description_json().expect("description present")
            } else {
                doc.render(true).into_bytes()
            };
            write_out(out, &bytes)
        }
        Command::Index(IndexCommand::Build {
            corpus,
            strategy,
            output,
        }) => {
            let documents = corpus_documents(&corpus)?;
            let chunking = ChunkingConfig {
                strategy: strategy.unwrap_or(config.chunking.strategy),
                ..config.chunking
            };
            let embedder = make_embedder(&config)?;
            let index = build_index(&documents, &chunking, embedder.as_ref(), now())?;
            fs::write(&output, index.to_bytes()).map_err(|e| CliError::io(&output, e))?;
            let summary = serde_json::json!({
                "output": output.display().to_string(),
                "strategy": index.strategy,
                "provider_id": index.provider_id,
                "dimension": index.dimension,
                "chunks": index.chunks.len(),
                "documents": documents.len(),
            });
            let text = if json {
                serde_json::to_string_pretty(&summary).expect("json") + "\n"
            } else {
                format!(
                    "{} chunks ({}) from {} documents → {}\n",
                    index.chunks.len(),
                    index.strategy,
                    documents.len(),
                    output.display()
                )
            };
            write_out(out, text.as_bytes())
        }
        Command::Retrieve {
            index,
            query_file,
            top_k,
        } => {
            let index = load_index(&index)?;
            let query = String::from_utf8_lossy(&read(&query_file)?).into_owned();
            let embedder = make_embedder(&config)?;
            let hits = retrieve(
                &index,
                embedder.as_ref(),
                &preprocess(&query),
                top_k.unwrap_or(config.retrieval.top_k),
            )?;
            let refs: Vec<PassageRef> = hits.iter().map(PassageRef::from).collect();
            let text = if json {
                serde_json::to_string_pretty(&refs).expect("json") + "\n"
            } else {
                passages_text(&refs)
            };
            write_out(out, text.as_bytes())
        }
        Command::Report {
            session,
            index,
            output,
            llm_endpoint,
        } => {
            let index_path = index.or_else(|| config.retrieval.index_path.clone());
            let index = index_path.as_deref().map(load_index).transpose()?;
            let llm = llm_client(&config, llm_endpoint);
            let record = run_pipeline(&config, &session, index.as_ref(), llm.as_ref())?;
            write_record_dir(&record, &output)?;
            let text = if json {
                String::from_utf8(record.manifest_json()).expect("utf-8")
            } else {
                let mut s = format!("session {} → {}\n", record.session_id, output.display());
                for st in &record.stages {
                    match &st.status {
                        StageStatus::Done => s.push_str(&format!("  {:<12} done\n", st.stage.as_str())),
                        StageStatus::Skipped { reason } => {
                            s.push_str(&format!("  {:<12} skipped ({reason})\n", st.stage.as_str()))
                        }
                    }
                }
                s
            };
            write_out(out, text.as_bytes())
        }
        Command::Serve {
            port,
            store,
            index,
            llm_endpoint,
        } => {
            let mut config = config;
            if let Some(p) = port {
                config.server.port = p;
            }
            if let Some(s) = store {
                config.server.store_root = s;
            }
            if let Some(i) = index {
                config.retrieval.index_path = Some(i);
            }
            serve(config, llm_endpoint, out)
        }
        Command::Config(ConfigCommand::Show) => {
            let text = if json {
                serde_json::to_string_pretty(&config).expect("json") + "\n"
            } else {
                let mut s = config.to_toml();
                s.push_str("\n# environment overrides:\n");
                for var in ENV_VARS {
                    s.push_str(&format!("#   {var}\n"));
                }
                s
            };
            write_out(out, text.as_bytes())
        }
    }
}

fn serve(config: Config, llm_endpoint: Option<String>, out: &mut dyn Write) -> Result<(), CliError> {
    let store = FileStore::open(&config.server.store_root)?;
    let index = match &config.retrieval.index_path {
        Some(p) if p.exists() => Some(load_index(p)?),
        _ => None,
    };
    let embedder: Arc<dyn Embedder> = Arc::from(make_embedder(&config)?);
    let llm = llm_client(&config, llm_endpoint);
    let addr = format!("{}:{}", config.server.bind, config.server.port);
    let state = AppState::new(config, Arc::new(store), embedder, index).with_llm(llm);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("Io", e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::new("Bind", format!("{addr}: {e}")))?;
        write_out(out, format!("listening on http://{addr}\n").as_bytes())?;
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::new("Io", e.to_string()))
    })
}
