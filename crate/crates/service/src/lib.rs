//! Service layer for drawing-process analysis: configuration, the
//! end-to-end pipeline, session storage, the HTTP API and the CLI.

pub mod api;
pub mod cli;
pub mod config;
pub mod llm;
pub mod pipeline;
pub mod record;
pub mod store;
