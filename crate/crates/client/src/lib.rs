//! Live prediction collection from a chat-completion endpoint.
//!
//! Wraps an HTTP chat-completion API behind the prompt templates used
//! for resume screening and essay grading, turning responses into the
//! crate-standard prediction records: pointwise label probabilities from
//! first-position top log-probabilities, and pairwise verdicts parsed
//! from generated text with both prompt orders issued per pair.
//!
//! Every request is cached on disk under its content hash, so reruns of
//! an unchanged dataset replay from cache without network traffic and
//! produce byte-identical output files.

mod cache;
mod collect;
mod config;
mod error;
mod http;
mod parse;
pub mod stub;
mod templates;
mod wire;

pub use cache::{request_hash, DiskCache};
pub use collect::{
    client_for, collect_run, load_collect_items, write_collect_items, CollectItem, CollectJob,
    CollectMode, CollectSummary,
};
pub use config::EndpointConfig;
pub use error::{ClientError, Result};
pub use http::{
    compare_pairwise_llm, score_pointwise_llm, ChatClient, Completion, PairwiseCall,
    PointwiseCall,
};
pub use parse::{label_probs_from_top_tokens, parse_pairwise_text, PairKeys};
pub use templates::{
    builtin_template, builtin_template_ids, AnswerMode, PromptTemplate, RenderedPrompt,
};
pub use wire::{ChatMessage, ChatRequest, ChatResponse, TokenLogprob};
