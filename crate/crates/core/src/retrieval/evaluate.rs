//! Chunking quality: mean cosine between each query's top-ranked chunk and
//! the passage annotated as relevant to it.

use serde::{Deserialize, Serialize};

use super::embed::{cosine, Embedder};
use super::index::{retrieve, ChunkIndex, IndexError, Strategy};
use super::preprocess::preprocess;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub query: String,
    /// Raw text of the passage that should answer the query.
    pub relevant_passage: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyScore {
    pub strategy: Strategy,
    pub provider_id: String,
    pub mean_top1_cosine: f64,
    pub queries: usize,
}

/// Relevant passages are cleaned like the corpus before embedding.
pub fn evaluate_chunking(
    indexes: &[&ChunkIndex],
    queries: &[EvalQuery],
    embedder: &dyn Embedder,
) -> Result<Vec<StrategyScore>, IndexError> {
    let passages: Vec<String> = queries.iter().map(|q| preprocess(&q.relevant_passage)).collect();
    let relevant = embedder.embed(&passages)?;
    indexes
        .iter()
        .map(|index| {
            let mut total = 0.0;
            for (q, rel) in queries.iter().zip(&relevant) {
                let top = retrieve(index, embedder, &preprocess(&q.query), 1)?;
                total += top.first().map_or(0.0, |t| cosine(&t.chunk.embedding, rel));
            }
            Ok(StrategyScore {
                strategy: index.strategy,
                provider_id: index.provider_id.clone(),
                mean_top1_cosine: if queries.is_empty() {
                    0.0
                } else {
                    total / queries.len() as f64
                },
                queries: queries.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::embed::HashingEmbedder;
    use crate::retrieval::index::{build_index, ChunkingConfig, CorpusDocument};

    #[test]
    fn exact_passages_score_one() {
        let passages = [
            "A dead tree suggests a loss of vitality.",
            "Chimney smoke hints at inner tension.",
            "Missing doors point to inaccessibility.",
        ];
        let text = passages.join("\n\n");
        let docs = [CorpusDocument { name: "c".into(), text }];
        let e = HashingEmbedder::default();
        let mut config = ChunkingConfig::with_strategy(crate::retrieval::index::Strategy::Recursive);
        config.recursive_max_size = 40;
        let idx = build_index(&docs, &config, &e, 0).unwrap();
        let queries: Vec<_> = passages
            .iter()
            .map(|p| EvalQuery {
                query: p.to_string(),
                relevant_passage: p.to_string(),
            })
            .collect();
        let scores = evaluate_chunking(&[&idx], &queries, &e).unwrap();
        assert!((scores[0].mean_top1_cosine - 1.0).abs() < 1e-6, "{scores:?}");
    }
}
