// SPDX-License-Identifier: Apache-2.0

//! Chat-completions client for OpenAI-compatible endpoints.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::warn;

use super::{LanguageModel, ModelError, Prompt, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    pub base_url: String,
    pub model: String,
    pub max_retries: u32,
    pub timeout_s: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            max_retries: 3,
            timeout_s: 120,
        }
    }
}

pub struct LiveModel {
    config: LiveConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl LiveModel {
    pub fn new(config: LiveConfig, api_key: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            api_key: api_key.into(),
            agent,
        }
    }

    /// Reads the key from `SPECSYN_API_KEY`.
    pub fn from_env(config: LiveConfig) -> Result<Self, ModelError> {
        let key =
            std::env::var("SPECSYN_API_KEY").map_err(|_| ModelError::Auth("SPECSYN_API_KEY is not set".into()))?;
        Ok(Self::new(config, key))
    }

    fn request(&self, prompt: &Prompt) -> Result<String, (bool, ModelError)> {
        let mut messages = vec![json!({"role": "system", "content": prompt.role_header})];
        for t in &prompt.turns {
            let role = match t.role {
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            messages.push(json!({"role": role, "content": t.content}));
        }
        let body = json!({"model": self.config.model, "messages": messages, "temperature": 0});
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| (true, ModelError::Transport(e.to_string())))?;
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err((false, ModelError::Auth(format!("HTTP {status}"))));
        }
        if status >= 400 {
            let retry = status == 429 || status >= 500;
            return Err((retry, ModelError::Transport(format!("HTTP {status}"))));
        }
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| (true, ModelError::Transport(e.to_string())))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| (false, ModelError::Transport("response without message content".into())))
    }
}

impl LanguageModel for LiveModel {
    fn complete(&self, prompt: &Prompt) -> Result<String, ModelError> {
        let mut attempt = 0;
        loop {
            match self.request(prompt) {
                Ok(s) => return Ok(s),
                Err((true, e)) if attempt < self.config.max_retries => {
                    attempt += 1;
                    warn!(attempt, error = %e, "model request failed, retrying");
                    std::thread::sleep(Duration::from_millis(500 << attempt));
                }
                Err((_, e)) => return Err(e),
            }
        }
    }
}
