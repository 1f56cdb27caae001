// SPDX-License-Identifier: Apache-2.0

//! Transcripts of model exchanges, replay, and recording.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{LanguageModel, ModelError, Prompt, Purpose};

pub const TRANSCRIPT_FORMAT: &str = "specsyn-transcript";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub model: String,
}

impl Default for TranscriptHeader {
    fn default() -> Self {
        Self {
            format: TRANSCRIPT_FORMAT.into(),
            version: 1,
            model: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub digest: String,
    pub purpose: Purpose,
    pub response: String,
}

/// JSONL: one header line, then one record per exchange.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines
            .next()
            .ok_or_else(|| ModelError::Transcript("empty transcript".into()))?;
        let header: TranscriptHeader =
            serde_json::from_str(head).map_err(|e| ModelError::Transcript(format!("header: {e}")))?;
        if header.format != TRANSCRIPT_FORMAT {
            return Err(ModelError::Transcript(format!("unknown format `{}`", header.format)));
        }
        let mut records = Vec::new();
        for (i, l) in lines.enumerate() {
            records
                .push(serde_json::from_str(l).map_err(|e| ModelError::Transcript(format!("record {}: {e}", i + 1)))?);
        }
        Ok(Self { header, records })
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(&self.header).expect("header serializes");
        s.push('\n');
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn read(path: &Path) -> Result<Self, ModelError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

/// Answers prompts from a transcript; repeated digests are served in order.
#[derive(Debug, Default)]
pub struct ReplayModel {
    queues: Mutex<HashMap<String, VecDeque<String>>>,
}

impl ReplayModel {
    pub fn new(t: &Transcript) -> Self {
        let mut queues: HashMap<String, VecDeque<String>> = HashMap::new();
        for r in &t.records {
            queues
                .entry(r.digest.clone())
                .or_default()
                .push_back(r.response.clone());
        }
        Self {
            queues: Mutex::new(queues),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Ok(Self::new(&Transcript::read(path)?))
    }

    /// Responses not yet consumed.
    pub fn remaining(&self) -> usize {
        self.queues.lock().unwrap().values().map(VecDeque::len).sum()
    }
}

impl LanguageModel for ReplayModel {
    fn complete(&self, prompt: &Prompt) -> Result<String, ModelError> {
        let digest = prompt.digest();
        let mut q = self.queues.lock().unwrap();
        q.get_mut(&digest)
            .and_then(VecDeque::pop_front)
            .ok_or(ModelError::ReplayMiss {
                digest,
                purpose: prompt.purpose,
            })
    }
}

/// Wraps a model and records every exchange.
pub struct RecordingModel<M> {
    inner: M,
    records: Mutex<Vec<TranscriptRecord>>,
    model_name: String,
}

impl<M: LanguageModel> RecordingModel<M> {
    pub fn new(inner: M, model_name: impl Into<String>) -> Self {
        Self {
            inner,
            records: Mutex::new(Vec::new()),
            model_name: model_name.into(),
        }
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            header: TranscriptHeader {
                model: self.model_name.clone(),
                ..Default::default()
            },
            records: self.records.lock().unwrap().clone(),
        }
    }
}

impl<M: LanguageModel> LanguageModel for RecordingModel<M> {
    fn complete(&self, prompt: &Prompt) -> Result<String, ModelError> {
        let response = self.inner.complete(prompt)?;
        self.records.lock().unwrap().push(TranscriptRecord {
            digest: prompt.digest(),
            purpose: prompt.purpose,
            response: response.clone(),
        });
        Ok(response)
    }
}

/// A model backed by a function, for scripted runs.
pub struct FnModel<F>(pub F);

impl<F> LanguageModel for FnModel<F>
where
    F: Fn(&Prompt) -> String + Send + Sync,
{
    fn complete(&self, prompt: &Prompt) -> Result<String, ModelError> {
        Ok((self.0)(prompt))
    }
}
