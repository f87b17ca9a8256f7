//! Two-step vision-language judge over a chat-completions endpoint.
//!
//! Wire format (one POST per step, same conversation):
//!
//! ```text
//! { "model": "<model>",
//!   "messages": [
//!     { "role": "system", "content": [ { "type": "text", "text": SYSTEM_PROMPT } ] },
//!     { "role": "user", "content": [
//!         { "type": "text", "text": STEP1_PROMPT },
//!         { "type": "text", "text": "Complex instruction: <instruction>" },
//!         { "type": "image_url", "image_url": { "url": "data:image/png;base64,<source>" } } ] },
//!     // step 2 only:
//!     { "role": "assistant", "content": [ { "type": "text", "text": "<step-1 reply>" } ] },
//!     { "role": "user", "content": [
//!         { "type": "text", "text": STEP2_PROMPT },
//!         { "type": "image_url", "image_url": { "url": "data:image/png;base64,<generated>" } } ] } ] }
//! ```
//!
//! The reply text is read from `choices[0].message.content` (a string, or a
//! list of `{type: "text", text}` parts). The score is the last
//! `<s>…</s>` span of the step-2 reply.

use std::thread;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const SYSTEM_PROMPT: &str = "You are an expert evaluator for image editing. You will first be provided with a complex editing instruction and the source image to be edited, please analyze the complex task by rigorously tracking the editing transitions, and list all modifications that need to be reflected in the final edited image. Then you will be given an edited image for evaluation. You will need to examine carefully if the edited image accurately reflects all the required changes according to your reasoning. A successful edit should not have any extra changes that are not required by the instruction. The edited image should have minimal changes to reflect the modifications from the instruction. You need to provide a final rating for the editing result from 0 to 10, with 10 being the perfect edit that precisely reflects all changes while preserving everything else. Conclude your evaluation with the score wrapped with <s>...</s>.";

pub const STEP1_PROMPT: &str = "Please analyze the modifications that should be reflected in the final image by strictly reasoning over the editing trace, given the source image and the complex instruction. Modifications include but are not limited to object placement, object removal, object modification, background change, and camera movement.";

pub const STEP2_PROMPT: &str = "Please evaluate whether the edited image accurately reflects the modifications specified in the complex editing instruction based on your previous reasoning. Be critical of the changes made during the editing process. Conclude your assessment with a final score wrapped with <s>...<\\s>.";

pub const ENV_URL: &str = "FORGE_JUDGE_URL";
pub const ENV_KEY: &str = "FORGE_JUDGE_KEY";
pub const ENV_MODEL: &str = "FORGE_JUDGE_MODEL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout_secs: u64,
    /// Extra attempts after a transport failure.
    pub max_retries: u32,
    /// First backoff delay; doubles after every failed attempt.
    pub backoff_ms: u64,
    /// Conversations in flight at once in a batch.
    pub in_flight: usize,
}

impl JudgeConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> JudgeConfig {
        JudgeConfig {
            url: url.into(),
            api_key: None,
            model: model.into(),
            timeout_secs: 120,
            max_retries: 4,
            backoff_ms: 500,
            in_flight: 4,
        }
    }

    /// `None` (judge disabled) unless the endpoint variable is set.
    pub fn from_env() -> Option<JudgeConfig> {
        let url = std::env::var(ENV_URL).ok().filter(|u| !u.trim().is_empty())?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".to_string());
        let mut cfg = JudgeConfig::new(url, model);
        cfg.api_key = std::env::var(ENV_KEY).ok().filter(|k| !k.is_empty());
        Some(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JudgeError {
    #[error("judge unavailable: {0}")]
    Unavailable(String),
    #[error("malformed judge reply: {0}")]
    MalformedReply(String),
}

/// One item to judge: PNG bytes of the source and generated images.
#[derive(Debug, Clone)]
pub struct JudgeTask {
    pub source_png: Vec<u8>,
    pub instruction: String,
    pub generated_png: Vec<u8>,
}

/// Last `<s>…</s>` score in a reply; `<\s>` is accepted as a closing tag.
pub fn parse_score(reply: &str) -> Result<f64, JudgeError> {
    let start = reply.rfind("<s>").ok_or_else(|| JudgeError::MalformedReply("no <s> tag".into()))?;
    let rest = &reply[start + 3..];
    let end = rest
        .find("</s>")
        .or_else(|| rest.find("<\\s>"))
        .ok_or_else(|| JudgeError::MalformedReply("unterminated <s> tag".into()))?;
    let text = rest[..end].trim();
    let score: f64 = text.parse().map_err(|_| JudgeError::MalformedReply(format!("score {text:?} is not a number")))?;
    if !(0.0..=10.0).contains(&score) {
        return Err(JudgeError::MalformedReply(format!("score {score} outside 0..=10")));
    }
    Ok(score)
}

fn image_part(png: &[u8]) -> Value {
    let data = base64::engine::general_purpose::STANDARD.encode(png);
    json!({ "type": "image_url", "image_url": { "url": format!("data:image/png;base64,{data}") } })
}

fn text_part(text: &str) -> Value {
    json!({ "type": "text", "text": text })
}

fn reply_text(body: &Value) -> Result<String, JudgeError> {
    let content = &body["choices"][0]["message"]["content"];
    if let Some(s) = content.as_str() {
        return Ok(s.to_string());
    }
    if let Some(parts) = content.as_array() {
        let text: Vec<&str> = parts.iter().filter_map(|p| p["text"].as_str()).collect();
        if !text.is_empty() {
            return Ok(text.join(""));
        }
    }
    Err(JudgeError::MalformedReply("no choices[0].message.content".into()))
}

enum Failure {
    Retry(String),
    Fatal(JudgeError),
}

pub struct JudgeClient {
    cfg: JudgeConfig,
    agent: ureq::Agent,
}

impl JudgeClient {
    pub fn new(cfg: JudgeConfig) -> JudgeClient {
        let agent = ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(cfg.timeout_secs))).build().into();
        JudgeClient { cfg, agent }
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.cfg
    }

    fn post_once(&self, body: &Value) -> Result<Value, Failure> {
        let mut req = self.agent.post(&self.cfg.url);
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        match req.send_json(body) {
            Ok(mut resp) => resp
                .body_mut()
                .read_json::<Value>()
                .map_err(|e| Failure::Fatal(JudgeError::MalformedReply(format!("reply is not JSON: {e}")))),
            Err(ureq::Error::StatusCode(code)) if code == 429 || code >= 500 => Err(Failure::Retry(format!("HTTP {code}"))),
            Err(ureq::Error::StatusCode(code)) => Err(Failure::Fatal(JudgeError::Unavailable(format!("HTTP {code}")))),
            Err(e) => Err(Failure::Retry(e.to_string())),
        }
    }

    /// Posts with exponential backoff on transport failures, rate limiting
    /// and server errors.
    fn post(&self, body: &Value) -> Result<Value, JudgeError> {
        let mut delay = self.cfg.backoff_ms;
        for attempt in 0.. {
            match self.post_once(body) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(msg)) if attempt >= self.cfg.max_retries => return Err(JudgeError::Unavailable(msg)),
                Err(Failure::Retry(_)) => {}
            }
            thread::sleep(Duration::from_millis(delay));
            delay = delay.saturating_mul(2);
        }
        unreachable!("retry loop exits by returning")
    }

    /// Runs the analysis step and then the evaluation step of one
    /// conversation, returning the final score.
    pub fn judge(&self, task: &JudgeTask) -> Result<f64, JudgeError> {
        let mut messages = vec![
            json!({ "role": "system", "content": [text_part(SYSTEM_PROMPT)] }),
            json!({ "role": "user", "content": [
                text_part(STEP1_PROMPT),
                text_part(&format!("Complex instruction: {}", task.instruction)),
                image_part(&task.source_png),
            ] }),
        ];
        let analysis = reply_text(&self.post(&json!({ "model": self.cfg.model, "messages": messages }))?)?;
        messages.push(json!({ "role": "assistant", "content": [text_part(&analysis)] }));
        messages.push(json!({ "role": "user", "content": [text_part(STEP2_PROMPT), image_part(&task.generated_png)] }));
        let verdict = reply_text(&self.post(&json!({ "model": self.cfg.model, "messages": messages }))?)?;
        parse_score(&verdict)
    }

    /// Judges every task, keeping per-task failures instead of aborting.
    pub fn judge_batch(&self, tasks: &[JudgeTask]) -> Vec<Result<f64, JudgeError>> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(self.cfg.in_flight.max(1)).build();
        match pool {
            Ok(pool) => pool.install(|| {
                use rayon::prelude::*;
                tasks.par_iter().map(|t| self.judge(t)).collect()
            }),
            Err(_) => tasks.iter().map(|t| self.judge(t)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_are_read_from_the_last_tag() {
        assert_eq!(parse_score("...<s>5.0</s>"), Ok(5.0));
        assert_eq!(parse_score("first <s>2</s> then <s> 7.5 </s>"), Ok(7.5));
        assert_eq!(parse_score("<s>9<\\s>"), Ok(9.0));
        assert!(matches!(parse_score("I rate it 5"), Err(JudgeError::MalformedReply(_))));
        assert!(matches!(parse_score("<s>great</s>"), Err(JudgeError::MalformedReply(_))));
        assert!(matches!(parse_score("<s>11</s>"), Err(JudgeError::MalformedReply(_))));
    }

    #[test]
    fn reply_content_may_be_split_into_parts() {
        let body = json!({ "choices": [ { "message": { "content": [ { "type": "text", "text": "a" }, { "type": "text", "text": "b" } ] } } ] });
        assert_eq!(reply_text(&body).unwrap(), "ab");
        assert!(reply_text(&json!({})).is_err());
    }
}
