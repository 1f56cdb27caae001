// SPDX-License-Identifier: Apache-2.0

//! Structured pipeline events.

use std::io::Write;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::model::Purpose;
use crate::spec::{ClauseId, PoiId, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    ModelCall {
        segment: usize,
        poi: Option<PoiId>,
        purpose: Purpose,
        digest: String,
    },
    VerifyCall {
        segment: usize,
        poi: Option<PoiId>,
        /// Variant id, or `None` for the original code.
        variant: Option<String>,
        submitted: usize,
        refuted: usize,
    },
    Variant {
        segment: usize,
        id: String,
        operator: String,
        line: usize,
    },
    VdrRound {
        segment: usize,
        poi: Option<PoiId>,
        round: usize,
        total: usize,
        refuted: usize,
        rate: f64,
    },
    ClauseStatus {
        id: ClauseId,
        poi: PoiId,
        status: Status,
    },
}

pub trait EventSink: Send + Sync {
    fn emit(&self, event: Event);
}

/// Discards events.
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&self, _: Event) {}
}

/// Keeps events in memory.
#[derive(Default)]
pub struct MemorySink(Mutex<Vec<Event>>);

impl MemorySink {
    pub fn events(&self) -> Vec<Event> {
        self.0.lock().unwrap().clone()
    }
}

impl EventSink for MemorySink {
    fn emit(&self, event: Event) {
        self.0.lock().unwrap().push(event);
    }
}

/// Writes one JSON object per line.
pub struct JsonlSink<W: Write + Send>(Mutex<W>);

impl<W: Write + Send> JsonlSink<W> {
    pub fn new(w: W) -> Self {
        Self(Mutex::new(w))
    }
}

impl<W: Write + Send> EventSink for JsonlSink<W> {
    fn emit(&self, event: Event) {
        let mut w = self.0.lock().unwrap();
        if let Ok(line) = serde_json::to_string(&event) {
            let _ = writeln!(w, "{line}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_lines_are_tagged() {
        let sink = JsonlSink::new(Vec::new());
        sink.emit(Event::Variant {
            segment: 0,
            id: "v0".into(),
            operator: "swap_add_sub".into(),
            line: 3,
        });
        let out = String::from_utf8(sink.0.into_inner().unwrap()).unwrap();
        assert!(out.starts_with("{\"event\":\"variant\""));
        assert!(out.ends_with("}\n"));
    }
}
