//! Corpus cleaning: ASCII folding, lowercasing, stopword removal and
//! rule-based lemmatization, with sentence and paragraph boundaries kept.
//!
//! Cleaned text puts one sentence per line and separates paragraphs with a
//! blank line. Markdown headings are not part of the text; they become the
//! `section_path` of the sentences under them.

use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

const STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const LEMMA_RULES: &str = include_str!("../../data/lemma_rules.txt");

fn data_lines(raw: &str) -> impl Iterator<Item = &str> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

static STOPWORD_SET: LazyLock<HashSet<&'static str>> = LazyLock::new(|| data_lines(STOPWORDS).collect());

struct Lemmatizer {
    words: HashMap<&'static str, &'static str>,
    keep: Vec<&'static str>,
    suffixes: Vec<(&'static str, &'static str, usize)>,
}

static LEMMATIZER: LazyLock<Lemmatizer> = LazyLock::new(|| {
    let mut lem = Lemmatizer {
        words: HashMap::new(),
        keep: Vec::new(),
        suffixes: Vec::new(),
    };
    for line in data_lines(LEMMA_RULES) {
        let fields: Vec<&'static str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["word", form, lemma] => {
                lem.words.insert(*form, *lemma);
            }
            ["keep", suffix] => lem.keep.push(suffix),
            ["suffix", from, to, min] => {
                let to = if *to == "-" { "" } else { *to };
                lem.suffixes.push((from, to, min.parse().expect("numeric stem length")));
            }
            _ => panic!("bad lemma rule: {line}"),
        }
    }
    lem
});

pub fn is_stopword(token: &str) -> bool {
    STOPWORD_SET.contains(token)
}

/// Lemma of a lowercase token under the shipped rules.
pub fn lemmatize(token: &str) -> String {
    let lem = &*LEMMATIZER;
    if let Some(l) = lem.words.get(token) {
        return (*l).to_string();
    }
    if lem.keep.iter().any(|k| token.ends_with(k)) {
        return token.to_string();
    }
    for (from, to, min) in &lem.suffixes {
        if let Some(stem) = token.strip_suffix(from) {
            if stem.len() >= *min {
                return format!("{stem}{to}");
            }
        }
    }
    token.to_string()
}

/// Content words of one sentence, lemmatized and space-joined.
pub fn clean_sentence(sentence: &str) -> String {
    sentence
        .to_ascii_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty() && !is_stopword(t))
        .map(lemmatize)
        .collect::<Vec<_>>()
        .join(" ")
}

fn split_sentences(paragraph: &str) -> Vec<&str> {
    let bytes = paragraph.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..bytes.len() {
        let end_mark = matches!(bytes[i], b'.' | b'!' | b'?');
        let boundary = i + 1 == bytes.len() || bytes[i + 1].is_ascii_whitespace();
        if end_mark && boundary {
            out.push(&paragraph[start..=i]);
            start = i + 1;
        }
    }
    if start < paragraph.len() {
        out.push(&paragraph[start..]);
    }
    out.into_iter().map(str::trim).filter(|s| !s.is_empty()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanSection {
    pub section_path: Vec<String>,
    /// Cleaned sentences, grouped by source paragraph.
    pub paragraphs: Vec<Vec<String>>,
}

impl CleanSection {
    pub fn text(&self) -> String {
        self.paragraphs
            .iter()
            .map(|p| p.join("\n"))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn sentences(&self) -> Vec<String> {
        self.paragraphs.iter().flatten().cloned().collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub sections: Vec<CleanSection>,
    /// Sentences that were nothing but stopwords and punctuation.
    pub dropped_sentences: usize,
}

impl CleanDocument {
    pub fn text(&self) -> String {
        self.sections
            .iter()
            .map(CleanSection::text)
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }
}

pub fn preprocess_document(raw: &str) -> CleanDocument {
    let ascii: String = raw.chars().filter(char::is_ascii).collect();
    let mut doc = CleanDocument::default();
    let mut path: Vec<String> = Vec::new();
    let mut paragraphs: Vec<Vec<String>> = Vec::new();
    let mut pending: Vec<&str> = Vec::new();

    fn flush_paragraph(pending: &mut Vec<&str>, paragraphs: &mut Vec<Vec<String>>, dropped: &mut usize) {
        if pending.is_empty() {
            return;
        }
        let joined = pending.join(" ");
        pending.clear();
        let mut sentences = Vec::new();
        for s in split_sentences(&joined) {
            let cleaned = clean_sentence(s);
            if cleaned.is_empty() {
                *dropped += 1;
            } else {
                sentences.push(cleaned);
            }
        }
        if !sentences.is_empty() {
            paragraphs.push(sentences);
        }
    }

    for line in ascii.lines() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            flush_paragraph(&mut pending, &mut paragraphs, &mut doc.dropped_sentences);
            if !paragraphs.is_empty() {
                doc.sections.push(CleanSection {
                    section_path: path.clone(),
                    paragraphs: std::mem::take(&mut paragraphs),
                });
            }
            let level = 1 + rest.chars().take_while(|&c| c == '#').count();
            let title = rest.trim_start_matches('#').trim().to_string();
            path.truncate(level - 1);
            path.push(title);
        } else if trimmed.is_empty() {
            flush_paragraph(&mut pending, &mut paragraphs, &mut doc.dropped_sentences);
        } else {
            pending.push(trimmed);
        }
    }
    flush_paragraph(&mut pending, &mut paragraphs, &mut doc.dropped_sentences);
    if !paragraphs.is_empty() {
        doc.sections.push(CleanSection {
            section_path: path,
            paragraphs,
        });
    }
    doc
}

/// Cleaned text of a whole document, headings removed.
pub fn preprocess(raw: &str) -> String {
    preprocess_document(raw).text()
}
