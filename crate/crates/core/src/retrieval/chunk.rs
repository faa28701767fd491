//! The four chunking strategies.
//!
//! `chunk_char` and `chunk_recursive` work on cleaned text; the semantic and
//! k-means strategies group sentences by their embeddings and return groups
//! of sentence indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::embed::cosine;

pub const DEFAULT_SEPARATORS: [&str; 3] = ["\n\n", "\n", " "];
pub const DEFAULT_SEMANTIC_THRESHOLD: f64 = 0.75;
pub const DEFAULT_KMEANS_SEED: u64 = 42;
pub const KMEANS_MAX_ITERATIONS: usize = 50;
pub const KMEANS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChunkError {
    #[error("chunk size {size} must exceed overlap {overlap}")]
    InvalidParams { size: usize, overlap: usize },
    #[error("{sentences} sentences but {embeddings} embeddings")]
    LengthMismatch { sentences: usize, embeddings: usize },
    #[error("k = {k} is invalid for {n} sentences")]
    InvalidK { k: usize, n: usize },
}

/// Windows of `size` characters starting every `size - overlap` characters.
pub fn chunk_char(text: &str, size: usize, overlap: usize) -> Result<Vec<String>, ChunkError> {
    if size == 0 || size <= overlap {
        return Err(ChunkError::InvalidParams { size, overlap });
    }
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let end = (start + size).min(chars.len());
        out.push(chars[start..end].iter().collect());
        if end == chars.len() {
            break;
        }
        start += size - overlap;
    }
    Ok(out)
}

/// Splits at the coarsest separator that occurs, keeping each separator at
/// the end of the piece before it, then greedily merges neighbouring pieces
/// up to `max_size`. Oversized pieces recurse with the finer separators and
/// fall back to character windows. Concatenating the result gives `text`.
pub fn chunk_recursive(text: &str, max_size: usize, separators: &[&str]) -> Vec<String> {
    assert!(max_size > 0, "max_size must be positive");
    if text.is_empty() {
        return Vec::new();
    }
    split_recursive(text, max_size, separators)
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn split_recursive(text: &str, max_size: usize, separators: &[&str]) -> Vec<String> {
    if char_len(text) <= max_size {
        return vec![text.to_string()];
    }
    let Some(pos) = separators.iter().position(|s| !s.is_empty() && text.contains(s)) else {
        return chunk_char(text, max_size, 0).expect("max_size > 0");
    };
    let finer = &separators[pos + 1..];
    let mut out = Vec::new();
    let mut current = String::new();
    for piece in text.split_inclusive(separators[pos]) {
        if char_len(piece) > max_size {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.extend(split_recursive(piece, max_size, finer));
        } else if char_len(&current) + char_len(piece) <= max_size {
            current.push_str(piece);
        } else {
            out.push(std::mem::replace(&mut current, piece.to_string()));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

fn check_lengths(n: usize, embeddings: &[Vec<f32>]) -> Result<(), ChunkError> {
    if n != embeddings.len() {
        return Err(ChunkError::LengthMismatch {
            sentences: n,
            embeddings: embeddings.len(),
        });
    }
    Ok(())
}

/// Left-to-right grouping: a sentence joins the current group while its
/// cosine with the group's mean embedding is at least `threshold`.
pub fn chunk_semantic(
    sentence_count: usize,
    embeddings: &[Vec<f32>],
    threshold: f64,
) -> Result<Vec<Vec<usize>>, ChunkError> {
    check_lengths(sentence_count, embeddings)?;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut sum: Vec<f64> = Vec::new();
    for (i, e) in embeddings.iter().enumerate() {
        let joins = !groups.is_empty() && {
            let mean: Vec<f32> = sum.iter().map(|&s| s as f32).collect();
            cosine(e, &mean) >= threshold
        };
        if joins {
            groups.last_mut().expect("non-empty").push(i);
            for (s, &v) in sum.iter_mut().zip(e) {
                *s += f64::from(v);
            }
        } else {
            groups.push(vec![i]);
            sum = e.iter().map(|&v| f64::from(v)).collect();
        }
    }
    Ok(groups)
}

fn sq_dist(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &c)| (f64::from(x) - c).powi(2)).sum()
}

pub fn default_k(n: usize) -> usize {
    n.div_ceil(8).max(1)
}

/// k-means++ seeded from `seed`, then Lloyd iterations until no centroid
/// moves more than [`KMEANS_TOLERANCE`] or [`KMEANS_MAX_ITERATIONS`] pass.
/// Returns clusters in order of their first sentence, members in order.
pub fn chunk_kmeans(
    sentence_count: usize,
    embeddings: &[Vec<f32>],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, ChunkError> {
    check_lengths(sentence_count, embeddings)?;
    let n = embeddings.len();
    if k == 0 || k > n {
        return Err(ChunkError::InvalidK { k, n });
    }
    let dim = embeddings[0].len();
    let as_f64 = |e: &Vec<f32>| -> Vec<f64> { e.iter().map(|&v| f64::from(v)).collect() };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut centroids = vec![as_f64(&embeddings[chosen[0]])];
    while centroids.len() < k {
        let d2: Vec<f64> = embeddings
            .iter()
            .map(|e| centroids.iter().map(|c| sq_dist(e, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).expect("total > 0");
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        centroids.push(as_f64(&embeddings[next]));
    }

    let mut assign = vec![0usize; n];
    for _ in 0..KMEANS_MAX_ITERATIONS {
        for (i, e) in embeddings.iter().enumerate() {
            assign[i] = (0..k)
                .min_by(|&a, &b| sq_dist(e, &centroids[a]).total_cmp(&sq_dist(e, &centroids[b])))
                .expect("k > 0");
        }
        repair_empty(&mut assign, embeddings, &centroids, k);
        let mut next = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (i, e) in embeddings.iter().enumerate() {
            sizes[assign[i]] += 1;
            for (s, &v) in next[assign[i]].iter_mut().zip(e) {
                *s += f64::from(v);
            }
        }
        for (c, &size) in next.iter_mut().zip(&sizes) {
            for v in c.iter_mut() {
                *v /= size as f64;
            }
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift <= KMEANS_TOLERANCE {
            break;
        }
    }

    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in assign.iter().enumerate() {
        clusters[c].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    clusters.sort_by_key(|c| c[0]);
    Ok(clusters)
}

/// Gives every empty cluster the member farthest from its own centroid,
/// taken from clusters that have more than one member.
fn repair_empty(assign: &mut [usize], embeddings: &[Vec<f32>], centroids: &[Vec<f64>], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..assign.len())
            .filter(|&i| sizes[assign[i]] > 1)
            .max_by(|&a, &b| {
                let da = sq_dist(&embeddings[a], &centroids[assign[a]]);
                let db = sq_dist(&embeddings[b], &centroids[assign[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("k <= n leaves a cluster with spare members");
        assign[donor] = empty;
    }
}
