use serde_json::{json, Value};
use std::thread;

use super::{CompletionRequest, Generator, GeneratorConfig, GeneratorError};

/// Blocking client for `POST {base_url}/chat/completions`.
pub struct HttpGenerator {
    config: GeneratorConfig,
    agent: ureq::Agent,
    url: String,
}

enum Attempt {
    Transient(String),
    Fatal(GeneratorError),
}

impl HttpGenerator {
    pub fn new(config: GeneratorConfig) -> Result<Self, GeneratorError> {
        if config.base_url.is_empty() {
            return Err(GeneratorError::InvalidConfig("base_url is empty".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        Ok(HttpGenerator { config, agent, url })
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
            .collect();
        let mut body = json!({
            "messages": messages,
            "temperature": self.config.temperature,
            "seed": request.seed,
        });
        if !self.config.model_name.is_empty() {
            body["model"] = json!(self.config.model_name);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        let mut req = self.agent.post(&self.url);
        if !self.config.api_key.is_empty() {
            req = req.header("Authorization", &format!("Bearer {}", self.config.api_key.expose()));
        }
        let mut resp = req.send_json(body).map_err(|e| Attempt::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Transient(format!("reading body: {e}")))?;
        if status == 429 || status >= 500 {
            return Err(Attempt::Transient(format!("status {status}")));
        }
        if !(200..300).contains(&status) {
            let body = text.chars().take(512).collect();
            return Err(Attempt::Fatal(GeneratorError::Rejected { status, body }));
        }
        extract_content(&text).map_err(Attempt::Fatal)
    }
}

/// Pull `choices[0].message.content` out of a response body.
pub(crate) fn extract_content(text: &str) -> Result<String, GeneratorError> {
    let value: Value = serde_json::from_str(text).map_err(|e| GeneratorError::MalformedResponse(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| GeneratorError::MalformedResponse("missing choices[0].message.content".into()))
}

impl Generator for HttpGenerator {
    fn name(&self) -> &str {
        if self.config.model_name.is_empty() {
            "http"
        } else {
            &self.config.model_name
        }
    }

    fn temperature(&self) -> f64 {
        self.config.temperature
    }

    /// Transport errors, 429 and 5xx are retried up to `max_retries` times
    /// with exponential backoff; other failures return immediately.
    fn complete(&self, request: &CompletionRequest) -> Result<String, GeneratorError> {
        if request.messages.is_empty() {
            return Err(GeneratorError::EmptyMessages);
        }
        let body = self.body(request);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(content) => return Ok(content),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(last_error)) => {
                    if attempts > self.config.max_retries {
                        return Err(GeneratorError::Unavailable { attempts, last_error });
                    }
                    let delay = self.config.backoff(attempts - 1);
                    log::warn!("generator attempt {attempts} failed ({last_error}); retrying in {delay:?}");
                    thread::sleep(delay);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_content() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"สวัสดี"}}]}"#;
        assert_eq!(extract_content(ok).unwrap(), "สวัสดี");
        assert!(matches!(extract_content("{}"), Err(GeneratorError::MalformedResponse(_))));
        assert!(matches!(extract_content("not json"), Err(GeneratorError::MalformedResponse(_))));
    }

    #[test]
    fn empty_messages_is_precondition_error() {
        let g = HttpGenerator::new(GeneratorConfig { base_url: "http://127.0.0.1:9".into(), ..Default::default() }).unwrap();
        assert_eq!(g.complete(&CompletionRequest::new(vec![], 0)), Err(GeneratorError::EmptyMessages));
    }
}
