//! Prompt templates with placeholder substitution.
//!
//! Four templates ship built in: pointwise and pairwise variants for
//! resume screening and essay grading. Placeholders are written
//! `<name>`; rendering is byte-exact substitution and fails on any
//! unbound placeholder.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{ClientError, Result};

/// How a pairwise response names its winner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerMode {
    /// The model answers with a candidate's name (resume screening).
    Name,
    /// The model answers with a positional letter A/B (essay grading).
    Letter,
}

/// A chat prompt template: system text, user text, and the assistant
/// prefix the model continues from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub system: String,
    pub user: String,
    pub assistant_prefix: String,
    /// Placeholders filled per item (one slot pointwise, two pairwise).
    pub item_slots: Vec<String>,
    /// Set for pairwise templates.
    #[serde(default)]
    pub answer_mode: Option<AnswerMode>,
}

/// A rendered prompt ready to send.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
    pub assistant_prefix: String,
    /// Bindings that matched no placeholder.
    pub unused_bindings: Vec<String>,
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<([a-zA-Z][a-zA-Z0-9_]*)>").expect("static regex"))
}

impl PromptTemplate {
    /// All placeholders appearing in the system or user text.
    pub fn placeholders(&self) -> Vec<String> {
        let mut names: Vec<String> = placeholder_re()
            .captures_iter(&self.system)
            .chain(placeholder_re().captures_iter(&self.user))
            .map(|c| c[1].to_string())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Substitutes bindings into the template.
    ///
    /// Every placeholder must be bound; bindings that match nothing are
    /// reported back as warnings, not errors.
    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<RenderedPrompt> {
        let placeholders = self.placeholders();
        for name in &placeholders {
            if !bindings.contains_key(name) {
                return Err(ClientError::UnboundPlaceholder {
                    template: self.id.clone(),
                    placeholder: name.clone(),
                });
            }
        }
        let substitute = |text: &str| {
            let mut out = text.to_string();
            for name in &placeholders {
                out = out.replace(&format!("<{name}>"), &bindings[name]);
            }
            out
        };
        let unused_bindings = bindings
            .keys()
            .filter(|k| !placeholders.contains(k))
            .cloned()
            .collect();
        Ok(RenderedPrompt {
            system: substitute(&self.system),
            user: substitute(&self.user),
            assistant_prefix: self.assistant_prefix.clone(),
            unused_bindings,
        })
    }

    /// Wraps a pairwise item text for its slot position. Letter-mode
    /// prompts label the two items so the model can answer "A" or "B";
    /// name-mode items already carry the candidate's name.
    pub fn wrap_pair_text(&self, position: usize, text: &str) -> String {
        match self.answer_mode {
            Some(AnswerMode::Letter) => {
                let letter = if position == 0 { "A" } else { "B" };
                format!("Essay {letter}: {text}")
            }
            _ => text.to_string(),
        }
    }
}

pub const RESUME_POINTWISE: &str = "resume_pointwise";
pub const RESUME_PAIRWISE: &str = "resume_pairwise";
pub const ESSAY_POINTWISE: &str = "essay_pointwise";
pub const ESSAY_PAIRWISE: &str = "essay_pairwise";

/// Ids of the built-in templates.
pub fn builtin_template_ids() -> [&'static str; 4] {
    [
        RESUME_POINTWISE,
        RESUME_PAIRWISE,
        ESSAY_POINTWISE,
        ESSAY_PAIRWISE,
    ]
}

/// Looks up a built-in template by id.
pub fn builtin_template(id: &str) -> Result<PromptTemplate> {
    let t = match id {
        RESUME_POINTWISE => PromptTemplate {
            id: id.into(),
            system: "You are an HR assistance bot. You help hiring managers find the right \
                     candidate. Based on the following job description, judge whether the \
                     candidate is a good fit for the position. Respond succinctly with only \
                     \"Yes\" or \"No\". Job description: <job_description>"
                .into(),
            user: "Candidate: <resume>\nQuestion: Is this candidate a good fit for the job \
                   position?"
                .into(),
            assistant_prefix: "Answer:".into(),
            item_slots: vec!["resume".into()],
            answer_mode: None,
        },
        RESUME_PAIRWISE => PromptTemplate {
            id: id.into(),
            system: "You are an HR assistance bot. You help hiring managers find the right \
                     candidate. Evaluate candidates against the following job description: \
                     <job_description>"
                .into(),
            user: "Judge which of the following candidates is a better fit for the job \
                   position.\n<resume_1>\n<resume_2>\nRespond succinctly with only the name \
                   of the candidate."
                .into(),
            assistant_prefix: "Answer:".into(),
            item_slots: vec!["resume_1".into(), "resume_2".into()],
            answer_mode: Some(AnswerMode::Name),
        },
        ESSAY_POINTWISE => PromptTemplate {
            id: id.into(),
            system: "You are an essay grading assistant. Your task is to assess an opinion \
                     essay on whether <statement>. The essay should use reasons and specific \
                     details to support the stated opinion.\nEvaluate and grade the essay \
                     against the following scoring criteria on a scale from 1 to 5:\n\n\
                     Score 5: reasonably consistent mastery with occasional errors, \
                     effectively developing ideas with strong critical thinking and \
                     organization.\nScore 4: adequate mastery with lapses in quality, \
                     competently developing ideas with sufficient critical thinking and some \
                     organizational coherence.\nScore 3: developing mastery with notable \
                     weaknesses, inconsistently developing ideas with limited critical \
                     thinking and organizational coherence.\nScore 2: little mastery with \
                     significant flaws, vaguely developing ideas with weak critical thinking \
                     and poor organization.\nScore 1: very little or no mastery, failing to \
                     develop viable ideas with severe disorganization and pervasive errors"
                .into(),
            user: "Essay: <essay>\nRespond succinctly with only the number of the score for \
                   this essay."
                .into(),
            assistant_prefix: "Score:".into(),
            item_slots: vec!["essay".into()],
            answer_mode: None,
        },
        ESSAY_PAIRWISE => PromptTemplate {
            id: id.into(),
            system: "You are an essay grading assistant. Your task is to assess an opinion \
                     essay on whether <statement>. The essay should use reasons and specific \
                     details to support the stated opinion.\n\nA good essay should \
                     demonstrate the following characteristics:\n- An insightful point of \
                     view on the issue and critical thinking.\n- Clear coherence and smooth \
                     progression of ideas.\n- Clear and appropriate examples, reasons, and \
                     evidence to support its position.\n- Accurate vocabulary and meaningful \
                     variety in sentence structure.\n- Free of errors in grammar, usage, and \
                     mechanics.\nWhich of the following essays is better?"
                .into(),
            user: "<essay_A>\n<essay_B>\nRespond succinctly with only a letter of the essay."
                .into(),
            assistant_prefix: "Answer:".into(),
            item_slots: vec!["essay_A".into(), "essay_B".into()],
            answer_mode: Some(AnswerMode::Letter),
        },
        other => return Err(ClientError::UnknownTemplate(other.to_string())),
    };
    Ok(t)
}
