//! Response parsing: label probabilities from top tokens, and pairwise
//! verdicts from generated text.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use rabbi_core::data::{LabelScale, Verdict, TIE_ALIASES};

use crate::templates::AnswerMode;
use crate::wire::TokenLogprob;

/// Extracts raw (unnormalized) label probabilities from first-position
/// top log-probabilities.
///
/// A token counts toward a label when its case-folded, trimmed text
/// equals the folded label, or is a non-empty prefix of exactly one
/// label (leading-token rule for labels spanning multiple tokens).
/// Token variants merge by probability summation. An empty result means
/// no scale label surfaced; callers flag the record invalid.
pub fn label_probs_from_top_tokens(
    top: &[TokenLogprob],
    scale: &LabelScale,
) -> BTreeMap<String, f64> {
    let folded_labels: Vec<(String, String)> = scale
        .labels
        .iter()
        .map(|e| (e.label.clone(), e.label.trim().to_lowercase()))
        .collect();

    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for entry in top {
        let folded = entry.token.trim().to_lowercase();
        if folded.is_empty() {
            continue;
        }
        let exact: Vec<&(String, String)> = folded_labels
            .iter()
            .filter(|(_, f)| *f == folded)
            .collect();
        let matched = if let Some(hit) = exact.first() {
            Some(&hit.0)
        } else {
            let prefix: Vec<&(String, String)> = folded_labels
                .iter()
                .filter(|(_, f)| f.starts_with(&folded))
                .collect();
            // A token that could start several labels is ambiguous.
            if prefix.len() == 1 {
                Some(&prefix[0].0)
            } else {
                None
            }
        };
        if let Some(label) = matched {
            *out.entry(label.clone()).or_insert(0.0) += entry.logprob.exp();
        }
    }
    out
}

/// What to look for in a pairwise answer.
#[derive(Debug, Clone)]
pub struct PairKeys {
    /// Answer key of the first-presented candidate (name, or "A").
    pub first: String,
    /// Answer key of the second-presented candidate (name, or "B").
    pub second: String,
    pub mode: AnswerMode,
}

impl PairKeys {
    pub fn for_names(first: impl Into<String>, second: impl Into<String>) -> Self {
        PairKeys {
            first: first.into(),
            second: second.into(),
            mode: AnswerMode::Name,
        }
    }

    pub fn letters() -> Self {
        PairKeys {
            first: "A".into(),
            second: "B".into(),
            mode: AnswerMode::Letter,
        }
    }
}

// Uppercase only: a case-insensitive match would confuse the article
// "a" ("it's a tie") with essay A.
fn letter_re(letter: &str) -> Regex {
    Regex::new(&format!(r"\b{letter}\b")).expect("static letter regex")
}

fn letter_a_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| letter_re("A"))
}

fn letter_b_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| letter_re("B"))
}

// Whole-word tie phrases; plain substring search would hit "tie"
// inside words like "priorities".
fn tie_phrase_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let alternation = TIE_ALIASES.join("|");
        Regex::new(&format!(r"(?i)\b({alternation})\b")).expect("static tie regex")
    })
}

/// Maps generated text to a verdict.
///
/// Exactly one matched answer key wins. When none or both keys match,
/// tie phrasing ("both", "equally good", ...) resolves to a tie and
/// anything else is invalid, so every response maps to exactly one
/// verdict.
pub fn parse_pairwise_text(text: &str, keys: &PairKeys) -> Verdict {
    let folded = text.to_lowercase();
    let (first_hit, second_hit) = match keys.mode {
        AnswerMode::Name => (
            folded.contains(&keys.first.to_lowercase()),
            folded.contains(&keys.second.to_lowercase()),
        ),
        AnswerMode::Letter => (
            letter_a_re().is_match(text),
            letter_b_re().is_match(text),
        ),
    };

    match (first_hit, second_hit) {
        (true, false) => Verdict::First,
        (false, true) => Verdict::Second,
        _ => {
            if tie_phrase_re().is_match(&folded) {
                Verdict::Tie
            } else {
                Verdict::Invalid
            }
        }
    }
}
