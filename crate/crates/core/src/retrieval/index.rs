//! Chunk index: build, persist, and exact cosine retrieval.
//!
//! File layout (little endian):
//!
//! ```text
//! magic "DSCI" | version u16 | provider_id str | dimension u32 | strategy u8
//! | built_at u64 (unix seconds) | count u32
//! then per chunk: record_len u32 | id u32 | text str | source_doc str
//!                 | path_len u16 | path str* | dimension × f32
//! ```
//!
//! where `str` is a u32 byte length followed by UTF-8.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::chunk::{
    chunk_char, chunk_kmeans, chunk_recursive, chunk_semantic, default_k, ChunkError, DEFAULT_KMEANS_SEED,
    DEFAULT_SEMANTIC_THRESHOLD, DEFAULT_SEPARATORS,
};
use super::embed::{cosine, EmbedError, Embedder};
use super::preprocess::preprocess_document;

const MAGIC: &[u8; 4] = b"DSCI";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Char,
    Recursive,
    Semantic,
    Kmeans,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Self::Char, Self::Recursive, Self::Semantic, Self::Kmeans];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Char => "char",
            Self::Recursive => "recursive",
            Self::Semantic => "semantic",
            Self::Kmeans => "kmeans",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(usize::from(c)).copied()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (char, recursive, semantic, kmeans)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkingConfig {
    pub strategy: Strategy,
    pub char_size: usize,
    pub char_overlap: usize,
    pub recursive_max_size: usize,
    pub semantic_threshold: f64,
    /// `None` picks `ceil(sentences / 8)` per section.
    pub kmeans_k: Option<usize>,
    pub kmeans_seed: u64,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Semantic,
            char_size: 500,
            char_overlap: 50,
            recursive_max_size: 500,
            semantic_threshold: DEFAULT_SEMANTIC_THRESHOLD,
            kmeans_k: None,
            kmeans_seed: DEFAULT_KMEANS_SEED,
        }
    }
}

impl ChunkingConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    pub id: u32,
    pub text: String,
    pub source_doc: String,
    pub section_path: Vec<String>,
    pub strategy: Strategy,
    pub embedding: Vec<f32>,
}

impl KnowledgeChunk {
    /// `source > heading > subheading`.
    pub fn citation(&self) -> String {
        std::iter::once(self.source_doc.as_str())
            .chain(self.section_path.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" > ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkIndex {
    pub provider_id: String,
    pub dimension: usize,
    pub strategy: Strategy,
    pub built_at: u64,
    pub chunks: Vec<KnowledgeChunk>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("corpus has no usable text")]
    EmptyCorpus,
    #[error("index is empty")]
    EmptyIndex,
    #[error("index was built with {index}, query embedder is {query}")]
    ProviderMismatch { index: String, query: String },
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("corrupt index file: {0}")]
    Corrupt(String),
}

impl IndexError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::EmptyCorpus => "EmptyCorpus",
            Self::EmptyIndex => "EmptyIndex",
            Self::ProviderMismatch { .. } => "ProviderMismatch",
            Self::Chunk(ChunkError::InvalidParams { .. }) => "InvalidParams",
            Self::Chunk(ChunkError::LengthMismatch { .. }) => "LengthMismatch",
            Self::Chunk(ChunkError::InvalidK { .. }) => "InvalidK",
            Self::Embed(e) => e.kind(),
            Self::Corrupt(_) => "CorruptIndex",
        }
    }
}

struct Draft {
    text: String,
    source_doc: String,
    section_path: Vec<String>,
}

fn sentence_groups(
    sentences: &[String],
    config: &ChunkingConfig,
    embedder: &dyn Embedder,
) -> Result<Vec<String>, IndexError> {
    let embeddings = embedder.embed(sentences)?;
    let groups = match config.strategy {
        Strategy::Semantic => chunk_semantic(sentences.len(), &embeddings, config.semantic_threshold)?,
        _ => {
            let k = config
                .kmeans_k
                .unwrap_or_else(|| default_k(sentences.len()))
                .min(sentences.len());
            chunk_kmeans(sentences.len(), &embeddings, k, config.kmeans_seed)?
        }
    };
    Ok(groups
        .into_iter()
        .map(|g| g.iter().map(|&i| sentences[i].as_str()).collect::<Vec<_>>().join("\n"))
        .collect())
}

/// Cleans, chunks and embeds a corpus. Chunks never cross section borders.
pub fn build_index(
    documents: &[CorpusDocument],
    config: &ChunkingConfig,
    embedder: &dyn Embedder,
    built_at: u64,
) -> Result<ChunkIndex, IndexError> {
    let mut drafts = Vec::new();
    for doc in documents {
        for section in preprocess_document(&doc.text).sections {
            let texts = match config.strategy {
                Strategy::Char => chunk_char(&section.text(), config.char_size, config.char_overlap)?,
                Strategy::Recursive => chunk_recursive(&section.text(), config.recursive_max_size, &DEFAULT_SEPARATORS),
                Strategy::Semantic | Strategy::Kmeans => sentence_groups(&section.sentences(), config, embedder)?,
            };
            drafts.extend(texts.into_iter().filter(|t| !t.trim().is_empty()).map(|text| Draft {
                text,
                source_doc: doc.name.clone(),
                section_path: section.section_path.clone(),
            }));
        }
    }
    if drafts.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    let texts: Vec<String> = drafts.iter().map(|d| d.text.clone()).collect();
    let embeddings = embedder.embed(&texts)?;
    let dimension = embeddings[0].len();
    let chunks = drafts
        .into_iter()
        .zip(embeddings)
        .enumerate()
        .map(|(i, (d, embedding))| KnowledgeChunk {
            id: i as u32,
            text: d.text,
            source_doc: d.source_doc,
            section_path: d.section_path,
            strategy: config.strategy,
            embedding,
        })
        .collect();
    Ok(ChunkIndex {
        provider_id: embedder.provider_id(),
        dimension,
        strategy: config.strategy,
        built_at,
        chunks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub chunk: KnowledgeChunk,
    pub score: f64,
}

/// Exact top-k by cosine; ties go to the lower chunk id.
pub fn retrieve_vector(index: &ChunkIndex, query: &[f32], top_k: usize) -> Result<Vec<Retrieved>, IndexError> {
    if index.chunks.is_empty() {
        return Err(IndexError::EmptyIndex);
    }
    let mut scored: Vec<(f64, &KnowledgeChunk)> =
        index.chunks.iter().map(|c| (cosine(query, &c.embedding), c)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.id.cmp(&b.1.id)));
    Ok(scored
        .into_iter()
        .take(top_k)
        .map(|(score, c)| Retrieved {
            chunk: c.clone(),
            score,
        })
        .collect())
}

pub fn retrieve(
    index: &ChunkIndex,
    embedder: &dyn Embedder,
    query_text: &str,
    top_k: usize,
) -> Result<Vec<Retrieved>, IndexError> {
    if index.chunks.is_empty() {
        return Err(IndexError::EmptyIndex);
    }
    let provider = embedder.provider_id();
    if provider != index.provider_id {
        return Err(IndexError::ProviderMismatch {
            index: index.provider_id.clone(),
            query: provider,
        });
    }
    let query = embedder.embed(&[query_text.to_string()])?.remove(0);
    retrieve_vector(index, &query, top_k)
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u32).to_le_bytes());
    out.extend(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| IndexError::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], IndexError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16, IndexError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn str(&mut self) -> Result<String, IndexError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| IndexError::Corrupt(e.to_string()))
    }
}

impl ChunkIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(MAGIC);
        out.extend(FORMAT_VERSION.to_le_bytes());
        put_str(&mut out, &self.provider_id);
        out.extend((self.dimension as u32).to_le_bytes());
        out.push(self.strategy.code());
        out.extend(self.built_at.to_le_bytes());
        out.extend((self.chunks.len() as u32).to_le_bytes());
        for c in &self.chunks {
            let mut rec = Vec::new();
            rec.extend(c.id.to_le_bytes());
            put_str(&mut rec, &c.text);
            put_str(&mut rec, &c.source_doc);
            rec.extend((c.section_path.len() as u16).to_le_bytes());
            for p in &c.section_path {
                put_str(&mut rec, p);
            }
            for v in &c.embedding {
                rec.extend(v.to_le_bytes());
            }
            out.extend((rec.len() as u32).to_le_bytes());
            out.extend(rec);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, IndexError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(IndexError::Corrupt("bad magic".into()));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(IndexError::Corrupt(format!("unsupported version {version}")));
        }
        let provider_id = r.str()?;
        let dimension = r.u32()? as usize;
        let strategy =
            Strategy::from_code(r.take(1)?[0]).ok_or_else(|| IndexError::Corrupt("unknown strategy".into()))?;
        let built_at = u64::from_le_bytes(r.array()?);
        let count = r.u32()? as usize;
        let mut chunks = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let mut rec = Reader {
                buf: r.take(len)?,
                pos: 0,
            };
            let id = rec.u32()?;
            let text = rec.str()?;
            let source_doc = rec.str()?;
            let path_len = rec.u16()?;
            let section_path = (0..path_len).map(|_| rec.str()).collect::<Result<_, _>>()?;
            let embedding = (0..dimension)
                .map(|_| rec.array().map(f32::from_le_bytes))
                .collect::<Result<Vec<_>, _>>()?;
            if rec.pos != len {
                return Err(IndexError::Corrupt(format!("record {id} has trailing bytes")));
            }
            chunks.push(KnowledgeChunk {
                id,
                text,
                source_doc,
                section_path,
                strategy,
                embedding,
            });
        }
        if r.pos != buf.len() {
            return Err(IndexError::Corrupt("trailing bytes after last record".into()));
        }
        Ok(Self {
            provider_id,
            dimension,
            strategy,
            built_at,
            chunks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::embed::HashingEmbedder;

    fn corpus() -> Vec<CorpusDocument> {
        vec![
            CorpusDocument {
                name: "trees.md".into(),
                text: "# Trees\nA dead tree suggests loss of vitality.\nRoots drawn heavily suggest a need for stability.\n\n## Crowns\nA flattened crown may reflect pressure.".into(),
            },
            CorpusDocument {
                name: "houses.md".into(),
                text: "# Houses\nA house without a door can indicate inaccessibility.\nSmoke from the chimney reflects inner tension.".into(),
            },
        ]
    }

    #[test]
    fn every_strategy_builds() {
        let e = HashingEmbedder::default();
        for s in Strategy::ALL {
            let idx = build_index(&corpus(), &ChunkingConfig::with_strategy(s), &e, 0).unwrap();
            assert!(!idx.chunks.is_empty(), "{s}");
            assert!(idx
                .chunks
                .iter()
                .all(|c| c.strategy == s && c.embedding.len() == idx.dimension));
            let ids: Vec<_> = idx.chunks.iter().map(|c| c.id).collect();
            assert_eq!(ids, (0..ids.len() as u32).collect::<Vec<_>>());
        }
    }

    #[test]
    fn self_query_ranks_first() {
        let e = HashingEmbedder::default();
        let idx = build_index(&corpus(), &ChunkingConfig::with_strategy(Strategy::Semantic), &e, 0).unwrap();
        for c in &idx.chunks {
            let top = retrieve(&idx, &e, &c.text, 1).unwrap();
            assert!((top[0].score - 1.0).abs() < 1e-6);
        }
        let crowns = idx
            .chunks
            .iter()
            .find(|c| c.section_path == ["Trees", "Crowns"])
            .unwrap();
        assert_eq!(crowns.citation(), "trees.md > Trees > Crowns");
    }

    #[test]
    fn errors() {
        let e = HashingEmbedder::default();
        let empty = [CorpusDocument {
            name: "x".into(),
            text: "the and of".into(),
        }];
        let err = build_index(&empty, &ChunkingConfig::default(), &e, 0).unwrap_err();
        assert_eq!(err.kind(), "EmptyCorpus");
        let idx = build_index(&corpus(), &ChunkingConfig::default(), &e, 0).unwrap();
        let other = HashingEmbedder { dimension: 64 };
        assert_eq!(
            retrieve(&idx, &other, "tree", 3).unwrap_err().kind(),
            "ProviderMismatch"
        );
        let none = ChunkIndex { chunks: vec![], ..idx };
        assert_eq!(retrieve(&none, &e, "tree", 3).unwrap_err().kind(), "EmptyIndex");
    }

    #[test]
    fn file_round_trip() {
        let e = HashingEmbedder { dimension: 32 };
        let idx = build_index(
            &corpus(),
            &ChunkingConfig::with_strategy(Strategy::Char),
            &e,
            1_760_000_000,
        )
        .unwrap();
        let bytes = idx.to_bytes();
        assert_eq!(ChunkIndex::from_bytes(&bytes).unwrap(), idx);
        assert!(ChunkIndex::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(ChunkIndex::from_bytes(b"NOPE").is_err());
    }
}
