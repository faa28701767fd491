//! Characteristic → interpretation rules.
//!
//! Each rule fires when any of its characteristics is present. Findings are
//! ordered by the number of matched characteristics, then by table order.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::FeaturePredicate;

const RULE_TABLE: &str = include_str!("../../data/indicator_rules.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorRule {
    pub meaning: String,
    pub features: BTreeSet<FeaturePredicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorMatch {
    pub meaning: String,
    pub matched_features: Vec<FeaturePredicate>,
    /// Zero-based position of the rule in its table.
    pub rule_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleTableError {
    #[error("rule table is not valid JSON: {0}")]
    Malformed(String),
    #[error("rule {0} lists no characteristics")]
    EmptyRule(usize),
    #[error("meaning {0:?} appears twice")]
    DuplicateMeaning(String),
}

pub fn parse_rules(raw: &str) -> Result<Vec<IndicatorRule>, RuleTableError> {
    let rules: Vec<IndicatorRule> = serde_json::from_str(raw).map_err(|e| RuleTableError::Malformed(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for (i, rule) in rules.iter().enumerate() {
        if rule.features.is_empty() {
            return Err(RuleTableError::EmptyRule(i));
        }
        if !seen.insert(rule.meaning.as_str()) {
            return Err(RuleTableError::DuplicateMeaning(rule.meaning.clone()));
        }
    }
    Ok(rules)
}

/// The shipped table of thirteen interpretations.
pub static RULES: LazyLock<Vec<IndicatorRule>> =
    LazyLock::new(|| parse_rules(RULE_TABLE).expect("shipped rule table is valid"));

pub fn map_indicators(predicates: &BTreeSet<FeaturePredicate>) -> Vec<IndicatorMatch> {
    map_with_rules(&RULES, predicates)
}

pub fn map_with_rules(rules: &[IndicatorRule], predicates: &BTreeSet<FeaturePredicate>) -> Vec<IndicatorMatch> {
    let mut out: Vec<IndicatorMatch> = rules
        .iter()
        .enumerate()
        .filter_map(|(rule_index, rule)| {
            let matched: Vec<_> = rule.features.intersection(predicates).copied().collect();
            (!matched.is_empty()).then(|| IndicatorMatch {
                meaning: rule.meaning.clone(),
                matched_features: matched,
                rule_index,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        b.matched_features
            .len()
            .cmp(&a.matched_features.len())
            .then(a.rule_index.cmp(&b.rule_index))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use FeaturePredicate as P;

    fn first(predicates: &[P]) -> Option<String> {
        map_indicators(&predicates.iter().copied().collect())
            .into_iter()
            .next()
            .map(|m| m.meaning)
    }

    #[test]
    fn table_has_thirteen_rows() {
        assert_eq!(RULES.len(), 13);
        assert_eq!(RULES[5].meaning, "Normality");
    }

    #[test]
    fn single_characteristic_rows() {
        assert_eq!(
            first(&[P::LeaningHouse]).as_deref(),
            Some("Psychological conflict and sense of unreality")
        );
        assert_eq!(
            first(&[P::SmokingChimney]).as_deref(),
            Some("Nervousness, sensitivity, and irritability")
        );
        assert_eq!(first(&[]), None);
    }

    #[test]
    fn ordering_prefers_more_matches() {
        let found = map_indicators(&[P::LargeDrawing, P::ThickLines].into_iter().collect());
        assert_eq!(found[0].meaning, "Aggression");
        assert_eq!(found[0].matched_features, vec![P::LargeDrawing, P::ThickLines]);
        assert_eq!(found.len(), 3);
    }

    #[test]
    fn bad_tables_are_rejected() {
        assert!(matches!(parse_rules("{"), Err(RuleTableError::Malformed(_))));
        assert_eq!(
            parse_rules(r#"[{"meaning":"x","features":[]}]"#),
            Err(RuleTableError::EmptyRule(0))
        );
        assert!(parse_rules(r#"[{"meaning":"x","features":["not_a_feature"]}]"#).is_err());
    }
}
