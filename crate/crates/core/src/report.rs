// SPDX-License-Identifier: Apache-2.0

//! Serializable run reports.

use serde::{Deserialize, Serialize};

use crate::refinement::VdrReport;
use crate::spec::{ClauseId, ClauseKind, Origin, PoiId, SpecClause, Status};
use crate::verifier::VerdictStatus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseRecord {
    pub id: ClauseId,
    pub kind: ClauseKind,
    pub predicate: String,
    pub poi: PoiId,
    pub status: Status,
    pub origin: Origin,
    pub round: usize,
    /// Verifier message for refuted clauses.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub diagnostic: String,
}

impl ClauseRecord {
    pub fn new(c: &SpecClause, diagnostic: impl Into<String>) -> Self {
        Self {
            id: c.id,
            kind: c.kind,
            predicate: c.predicate.clone(),
            poi: c.poi,
            status: c.status,
            origin: c.origin,
            round: c.round,
            diagnostic: diagnostic.into(),
        }
    }
}

/// One outer iteration at a point of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Model calls of the generation/repair loop in this round.
    pub model_calls: usize,
    /// Clauses accepted at the POI after this round.
    pub accepted: Vec<ClauseId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vdr: Option<VdrReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiReport {
    pub poi: PoiId,
    pub description: String,
    pub rounds: Vec<RoundRecord>,
    /// Why refinement stopped without reaching the threshold, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement_skipped: Option<String>,
}

impl PoiReport {
    pub fn vdr_history(&self) -> Vec<&VdrReport> {
        self.rounds.iter().filter_map(|r| r.vdr.as_ref()).collect()
    }

    pub fn model_calls(&self) -> usize {
        self.rounds.iter().map(|r| r.model_calls).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub id: usize,
    pub members: Vec<String>,
    pub sketch: String,
    pub pois: Vec<PoiReport>,
    /// VDR of the final clauses of the segment on a fresh variant sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_vdr: Option<VdrReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalVerdict {
    pub id: ClauseId,
    pub status: VerdictStatus,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub diagnostic: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalPass {
    /// Verdicts of the last iteration, over every remaining clause.
    pub verdicts: Vec<FinalVerdict>,
    /// Accepted clauses removed because they failed in the whole program.
    pub dropped: Vec<FinalVerdict>,
    pub iterations: usize,
    pub targets_total: usize,
    pub targets_proved: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolchainInfo {
    pub cc: String,
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub input: String,
    pub verifier: String,
    pub clauses: Vec<ClauseRecord>,
    /// Ids of the clauses in the final specification set.
    pub final_specs: Vec<ClauseId>,
    pub segments: Vec<SegmentReport>,
    pub final_pass: FinalPass,
    pub toolchain: ToolchainInfo,
}

impl SynthesisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
