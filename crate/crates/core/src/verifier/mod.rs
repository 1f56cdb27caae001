// SPDX-License-Identifier: Apache-2.0

//! Verifier backends: a deterministic bounded checker and an adapter for an
//! external deductive verifier.

mod external;
mod mock;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::InstrumentedSource;
use crate::spec::ClauseId;

pub use external::{parse_wp_output, ExternalConfig, ExternalVerifier};
pub use mock::{entails, Entailment, MockDomain, MockVerifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictStatus {
    Proved,
    Unproved,
    Timeout,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierVerdict {
    pub clause_id: ClauseId,
    pub status: VerdictStatus,
    pub diagnostic: String,
    pub goal_name: String,
}

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("verifier backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed verifier output: {0}")]
    MalformedOutput(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A backend that checks every labelled clause of an instrumented program.
///
/// Clauses present in the text without a label in `clause_labels` are
/// assumptions. One verdict is returned per labelled clause, in clause id
/// order.
pub trait Verifier: Send + Sync {
    fn name(&self) -> &str;
    fn verify(&self, program: &InstrumentedSource) -> Result<Vec<VerifierVerdict>, VerifierError>;
}

/// Clause ids with a `Proved` verdict.
pub fn proved_ids(verdicts: &[VerifierVerdict]) -> BTreeSet<ClauseId> {
    verdicts
        .iter()
        .filter(|v| v.status == VerdictStatus::Proved)
        .map(|v| v.clause_id)
        .collect()
}
