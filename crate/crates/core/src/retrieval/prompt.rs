//! Grounded interpretation prompt.

use std::fmt::Write as _;

use crate::annotations::IndicatorMatch;
use crate::description::{questionnaire_section, DescriptionDocument};
use crate::stroke_log::QuestionnaireResponse;

use super::index::Retrieved;

pub const PROMPT_VERSION: u32 = 1;

const FRAMING: &str = "You are assisting a qualified psychologist who is reviewing a House-Tree-Person drawing. \
The drawing has already been analysed; its objects, drawing process and the examinee's answers are summarised below. \
Offer cautious, non-diagnostic observations for the psychologist to weigh.";

const NO_CONTEXT: &str = "No reference context is available. Do not make symbolic or psychological claims about \
drawing features; describe only what the drawing summary states and say that no reference material was found.";

const INSTRUCTIONS: &str = "Ground every interpretive claim in one of the reference passages and cite it by its \
number, e.g. [2]. If no passage supports a claim, leave the claim out. Do not state a diagnosis.";

/// Fixed-template prompt; identical inputs give identical bytes.
pub fn assemble_prompt(
    doc: &DescriptionDocument,
    retrieved: &[Retrieved],
    questionnaire: Option<&QuestionnaireResponse>,
    indicators: &[IndicatorMatch],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FRAMING}\n");

    let _ = writeln!(out, "# Reference passages\n");
    if retrieved.is_empty() {
        let _ = writeln!(out, "{NO_CONTEXT}\n");
    } else {
        for (i, r) in retrieved.iter().enumerate() {
            let _ = writeln!(out, "[{}] {} (similarity {:.3})", i + 1, r.chunk.citation(), r.score);
            let _ = writeln!(out, "{}\n", r.chunk.text.trim_end());
        }
    }

    let _ = writeln!(out, "# Drawing description\n");
    let _ = writeln!(out, "{}", doc.render(false));

    if !indicators.is_empty() {
        let _ = writeln!(out, "# Characteristic-based indicators\n");
        for m in indicators {
            let features: Vec<_> = m.matched_features.iter().map(|f| f.as_str()).collect();
            let _ = writeln!(out, "- {} (matched: {})", m.meaning, features.join(", "));
        }
        out.push('\n');
    }

    let _ = writeln!(out, "# Questionnaire\n");
    match questionnaire {
        Some(q) if !q.answers.is_empty() || q.age.is_some() || q.gender.is_some() => {
            for line in questionnaire_section(q).lines() {
                let _ = writeln!(out, "{line}");
            }
            out.push('\n');
        }
        _ => {
            let _ = writeln!(out, "No questionnaire answers were provided.\n");
        }
    }

    let _ = writeln!(out, "# Instructions\n");
    let _ = writeln!(out, "{INSTRUCTIONS}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::description::{generate_description, DescriptionInput};
    use crate::retrieval::index::{KnowledgeChunk, Strategy};
    use crate::stroke_log::parse_questionnaire;

    fn chunk(id: u32, text: &str, path: &[&str]) -> Retrieved {
        Retrieved {
            chunk: KnowledgeChunk {
                id,
                text: text.into(),
                source_doc: "htp.md".into(),
                section_path: path.iter().map(|s| s.to_string()).collect(),
                strategy: Strategy::Semantic,
                embedding: vec![1.0],
            },
            score: 0.5,
        }
    }

    #[test]
    fn empty_context_abstains() {
        let doc = generate_description(&DescriptionInput::default());
        let p = assemble_prompt(&doc, &[], None, &[]);
        assert!(p.contains(NO_CONTEXT));
        assert!(p.contains("house: omitted"));
        assert!(p.contains("No questionnaire answers were provided."));
    }

    #[test]
    fn passages_cited_once_each() {
        let doc = generate_description(&DescriptionInput::default());
        let q = parse_questionnaire(br#"{"answers":["A painter."]}"#).unwrap();
        let chunks = [
            chunk(4, "dead tree loss vitality", &["Trees"]),
            chunk(9, "door absent inaccessibility", &["Houses", "Doors"]),
            chunk(1, "smoke chimney tension", &["Houses"]),
        ];
        let p = assemble_prompt(&doc, &chunks, Some(&q), &[]);
        for (i, c) in chunks.iter().enumerate() {
            assert_eq!(p.matches(&c.chunk.text).count(), 1);
            assert!(p.contains(&format!("[{}] {}", i + 1, c.chunk.citation())));
        }
        assert!(p.contains("htp.md > Houses > Doors"));
        assert!(!p.contains(NO_CONTEXT));
        assert!(p.contains("A painter."));
        assert_eq!(p, assemble_prompt(&doc, &chunks, Some(&q), &[]));
    }
}
