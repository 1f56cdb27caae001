// SPDX-License-Identifier: Apache-2.0

//! Language-model clients: prompt representation, deterministic replay of
//! recorded transcripts, a live HTTP backend, and clause extraction.

mod extract;
mod live;
mod replay;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use extract::extract_clauses;
pub use live::{LiveConfig, LiveModel};
pub use replay::{FnModel, RecordingModel, ReplayModel, Transcript, TranscriptHeader, TranscriptRecord};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no recorded response for prompt {digest} ({purpose:?})")]
    ReplayMiss { digest: String, purpose: Purpose },
    #[error("model response contains no usable clauses")]
    ExtractionEmpty,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("bad transcript: {0}")]
    Transcript(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Sketch,
    Generate,
    Repair,
    Refine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub purpose: Purpose,
    /// System instructions.
    pub role_header: String,
    pub turns: Vec<Turn>,
}

impl Prompt {
    pub fn new(purpose: Purpose, role_header: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            purpose,
            role_header: role_header.into(),
            turns: vec![Turn {
                role: Role::User,
                content: user.into(),
            }],
        }
    }

    /// Flattened conversation; the digest is computed over this text.
    pub fn body(&self) -> String {
        let mut s = format!("[system]\n{}\n", self.role_header);
        for t in &self.turns {
            let r = match t.role {
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            s.push_str(&format!("[{r}]\n{}\n", t.content));
        }
        s
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.body().as_bytes()))
    }

    /// Text of the last user turn.
    pub fn last_user(&self) -> &str {
        self.turns
            .iter()
            .rev()
            .find(|t| t.role == Role::User)
            .map_or("", |t| t.content.as_str())
    }
}

pub trait LanguageModel: Send + Sync {
    fn complete(&self, prompt: &Prompt) -> Result<String, ModelError>;
}

impl<M: LanguageModel + ?Sized> LanguageModel for Box<M> {
    fn complete(&self, prompt: &Prompt) -> Result<String, ModelError> {
        (**self).complete(prompt)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn complete(&self, prompt: &Prompt) -> Result<String, ModelError> {
        (**self).complete(prompt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_depends_on_every_turn() {
        let a = Prompt::new(Purpose::Generate, "sys", "hello");
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.turns.push(Turn {
            role: Role::Assistant,
            content: "x".into(),
        });
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
