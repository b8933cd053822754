//! The chat-completion HTTP client: cache lookup, bounded retries, and
//! the two single-call prediction operations.

use std::time::Duration;

use rabbi_core::data::{LabelScale, PointwisePrediction, PredictionEvidence};

use crate::cache::{request_hash, DiskCache};
use crate::config::EndpointConfig;
use crate::error::{ClientError, Result};
use crate::parse::{label_probs_from_top_tokens, parse_pairwise_text, PairKeys};
use crate::templates::RenderedPrompt;
use crate::wire::{ChatMessage, ChatRequest, ChatResponse};

/// A completed call, with whether it was served from cache.
#[derive(Debug, Clone)]
pub struct Completion {
    pub response: ChatResponse,
    pub from_cache: bool,
}

pub struct ChatClient {
    config: EndpointConfig,
    http: reqwest::blocking::Client,
    auth: Option<String>,
    cache: Option<DiskCache>,
}

impl ChatClient {
    pub fn new(config: EndpointConfig, cache: Option<DiskCache>) -> Result<Self> {
        config.validate()?;
        let auth = config.auth_token()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ClientError::InvalidConfig(format!("http client: {e}")))?;
        Ok(ChatClient {
            config,
            http,
            auth,
            cache,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn request_for(&self, prompt: &RenderedPrompt, with_logprobs: bool) -> ChatRequest {
        let mut messages = vec![
            ChatMessage::system(&prompt.system),
            ChatMessage::user(&prompt.user),
        ];
        if !prompt.assistant_prefix.is_empty() {
            messages.push(ChatMessage::assistant(&prompt.assistant_prefix));
        }
        ChatRequest {
            model: self.config.model.clone(),
            messages,
            temperature: self.config.temperature,
            logprobs: with_logprobs.then_some(true),
            top_logprobs: with_logprobs.then_some(self.config.top_logprobs),
            max_tokens: self.config.max_tokens,
        }
    }

    fn post_once(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let mut builder = self.http.post(self.endpoint()).json(request);
        if let Some(token) = &self.auth {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| ClientError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = response.status();
        let body = response.text().map_err(|e| ClientError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        if !status.is_success() {
            return Err(ClientError::Status {
                status: status.as_u16(),
                body,
            });
        }
        serde_json::from_str(&body).map_err(|e| ClientError::BadResponse(e.to_string()))
    }

    fn post_with_retries(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let attempts = self.config.retries + 1;
        let mut last_error = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(
                    self.config.retry_backoff_ms * u64::from(attempt),
                ));
            }
            match self.post_once(request) {
                Ok(response) => return Ok(response),
                // Client-side 4xx failures won't heal on retry.
                Err(ClientError::Status { status, body }) if status < 500 && status != 429 => {
                    return Err(ClientError::Status { status, body });
                }
                Err(e) => last_error = Some(e),
            }
        }
        Err(match last_error.expect("at least one attempt") {
            ClientError::Transport { message, .. } => ClientError::Transport {
                attempts,
                message,
            },
            other => other,
        })
    }

    /// Sends a prompt, consulting the cache first. `tag` (the template
    /// id) participates in the cache key.
    pub fn complete(
        &self,
        tag: &str,
        prompt: &RenderedPrompt,
        with_logprobs: bool,
    ) -> Result<Completion> {
        let request = self.request_for(prompt, with_logprobs);
        let hash = request_hash(tag, &request)?;
        if let Some(cache) = &self.cache {
            if let Some(response) = cache.get(&hash)? {
                return Ok(Completion {
                    response,
                    from_cache: true,
                });
            }
        }
        let response = self.post_with_retries(&request)?;
        if let Some(cache) = &self.cache {
            cache.put(&hash, tag, &request, &response)?;
        }
        Ok(Completion {
            response,
            from_cache: false,
        })
    }
}

/// Outcome of one pointwise scoring call.
#[derive(Debug, Clone)]
pub struct PointwiseCall {
    pub prediction: Option<PointwisePrediction>,
    /// Set when no scale label surfaced in the top tokens.
    pub flagged: Option<String>,
    pub from_cache: bool,
}

/// Scores one candidate pointwise: the prompt is sent with log-probs
/// enabled and the first generated position's top tokens are folded
/// into raw label probabilities (normalization happens at scoring time).
pub fn score_pointwise_llm(
    client: &ChatClient,
    candidate_id: &str,
    tag: &str,
    prompt: &RenderedPrompt,
    scale: &LabelScale,
) -> Result<PointwiseCall> {
    let completion = client.complete(tag, prompt, true)?;
    let Some(top) = completion.response.first_position_top_logprobs() else {
        return Ok(PointwiseCall {
            prediction: None,
            flagged: Some("response carried no log-probabilities".into()),
            from_cache: completion.from_cache,
        });
    };
    let probs = label_probs_from_top_tokens(top, scale);
    if probs.is_empty() {
        return Ok(PointwiseCall {
            prediction: None,
            flagged: Some("no scale label among top tokens".into()),
            from_cache: completion.from_cache,
        });
    }
    Ok(PointwiseCall {
        prediction: Some(PointwisePrediction {
            candidate_id: candidate_id.to_string(),
            evidence: PredictionEvidence::LabelProbs(probs),
        }),
        flagged: None,
        from_cache: completion.from_cache,
    })
}

/// Outcome of one ordered pairwise comparison call.
#[derive(Debug, Clone)]
pub struct PairwiseCall {
    pub verdict: rabbi_core::data::Verdict,
    /// Transport-level failure annotation, if the verdict is INVALID
    /// because the call never produced text.
    pub error: Option<String>,
    pub from_cache: bool,
}

/// Runs one ordered pairwise comparison. Transport failures surface as
/// INVALID verdicts with the error preserved, so a collection run can
/// complete and report them.
pub fn compare_pairwise_llm(
    client: &ChatClient,
    tag: &str,
    prompt: &RenderedPrompt,
    keys: &PairKeys,
) -> PairwiseCall {
    match client.complete(tag, prompt, false) {
        Ok(completion) => {
            let verdict = completion
                .response
                .text()
                .map(|text| parse_pairwise_text(text, keys))
                .unwrap_or(rabbi_core::data::Verdict::Invalid);
            PairwiseCall {
                verdict,
                error: None,
                from_cache: completion.from_cache,
            }
        }
        Err(e) => PairwiseCall {
            verdict: rabbi_core::data::Verdict::Invalid,
            error: Some(e.to_string()),
            from_cache: false,
        },
    }
}
