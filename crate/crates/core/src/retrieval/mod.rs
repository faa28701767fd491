//! Knowledge-base retrieval: cleaning, chunking, embedding, exact search and
//! prompt assembly.

pub mod chunk;
pub mod embed;
pub mod evaluate;
pub mod index;
pub mod preprocess;
pub mod prompt;

pub use chunk::{chunk_char, chunk_kmeans, chunk_recursive, chunk_semantic, ChunkError};
pub use embed::{cosine, EmbedError, Embedder, HashingEmbedder, HttpEmbedder};
pub use evaluate::{evaluate_chunking, EvalQuery, StrategyScore};
pub use index::{
    build_index, retrieve, retrieve_vector, ChunkIndex, ChunkingConfig, CorpusDocument, IndexError, KnowledgeChunk,
    Retrieved, Strategy,
};
pub use preprocess::{preprocess, preprocess_document, CleanDocument, CleanSection};
pub use prompt::assemble_prompt;
