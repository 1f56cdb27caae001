// SPDX-License-Identifier: Apache-2.0

//! Adapter for an external WP-style verifier driven from the command line.

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;

use regex::Regex;
use serde::{Deserialize, Serialize};
use tracing::debug;

use super::{VerdictStatus, Verifier, VerifierError, VerifierVerdict};
use crate::frontend::InstrumentedSource;
use crate::spec::ClauseId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalConfig {
    /// Whitespace-separated command; `{file}`, `{timeout}` and `{props}`
    /// (comma-separated clause labels to check) are substituted.
    pub command: String,
    pub timeout_s: u64,
    /// Per-goal result line; named groups `goal` and `status`.
    pub goal_pattern: String,
    /// Summary line; named groups `proved` and `total`.
    pub summary_pattern: String,
    /// Annotation error line; named group `line`.
    pub error_pattern: String,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        Self {
            command: "frama-c -wp -wp-timeout {timeout} -wp-prop {props} {file}".into(),
            timeout_s: 10,
            goal_pattern:
                r"(?m)^\[wp\] (?:\[[^\]]*\] )?Goal (?P<goal>\S+) : (?P<status>Valid|Unknown|Timeout|Failed|Stepout)"
                    .into(),
            summary_pattern: r"Proved goals:\s*(?P<proved>\d+)\s*/\s*(?P<total>\d+)".into(),
            error_pattern: r"(?m)^\[kernel\][^\n]*?:(?P<line>\d+): (?:User )?[Ee]rror".into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExternalVerifier {
    pub config: ExternalConfig,
}

impl ExternalVerifier {
    pub fn new(config: ExternalConfig) -> Self {
        Self { config }
    }
}

fn regex(p: &str) -> Result<Regex, VerifierError> {
    Regex::new(p).map_err(|e| VerifierError::MalformedOutput(format!("bad pattern `{p}`: {e}")))
}

/// Maps verifier output to per-clause verdicts.
pub fn parse_wp_output(
    output: &str,
    program: &InstrumentedSource,
    cfg: &ExternalConfig,
) -> Result<Vec<VerifierVerdict>, VerifierError> {
    let goal_re = regex(&cfg.goal_pattern)?;
    let summary_re = regex(&cfg.summary_pattern)?;
    let error_re = regex(&cfg.error_pattern)?;

    let mk = |id: ClauseId, status, diagnostic: String| VerifierVerdict {
        clause_id: id,
        status,
        diagnostic,
        goal_name: program.clause_labels[&id].clone(),
    };

    // annotation errors: attributed by line, the rest is unchecked
    let err_lines: BTreeSet<usize> = error_re
        .captures_iter(output)
        .filter_map(|c| c.name("line")?.as_str().parse().ok())
        .collect();
    if !err_lines.is_empty() {
        let by_line: BTreeMap<usize, ClauseId> = program
            .clause_labels
            .iter()
            .filter_map(|(id, l)| program.label_lines.get(l).map(|ln| (*ln, *id)))
            .collect();
        let bad: BTreeSet<ClauseId> = err_lines.iter().filter_map(|l| by_line.get(l)).copied().collect();
        if bad.is_empty() {
            return Err(VerifierError::MalformedOutput(format!(
                "annotation error on line(s) {err_lines:?} matches no clause"
            )));
        }
        return Ok(program
            .clause_labels
            .keys()
            .map(|id| {
                if bad.contains(id) {
                    mk(*id, VerdictStatus::Invalid, "annotation error".into())
                } else {
                    mk(
                        *id,
                        VerdictStatus::Timeout,
                        "not checked after an annotation error".into(),
                    )
                }
            })
            .collect());
    }

    let summary = summary_re
        .captures(output)
        .ok_or_else(|| VerifierError::MalformedOutput("no proved-goals summary".into()))?;
    let proved: usize = summary["proved"]
        .parse()
        .map_err(|_| VerifierError::MalformedOutput("summary".into()))?;
    let total: usize = summary["total"]
        .parse()
        .map_err(|_| VerifierError::MalformedOutput("summary".into()))?;

    let mut worst: BTreeMap<ClauseId, (VerdictStatus, String)> = BTreeMap::new();
    let mut failed = 0;
    for c in goal_re.captures_iter(output) {
        let goal = &c["goal"];
        let status = match &c["status"] {
            "Valid" => continue,
            "Timeout" | "Stepout" => VerdictStatus::Timeout,
            _ => VerdictStatus::Unproved,
        };
        failed += 1;
        let Some((id, _)) = program
            .clause_labels
            .iter()
            .find(|(_, l)| goal.ends_with(l.as_str()) || goal.contains(&format!("{l}_")))
        else {
            return Err(VerifierError::MalformedOutput(format!(
                "failed goal `{goal}` matches no clause"
            )));
        };
        let e = worst.entry(*id).or_insert((status, goal.to_string()));
        if status == VerdictStatus::Unproved {
            *e = (status, goal.to_string());
        }
    }
    if total.saturating_sub(proved) > failed {
        return Err(VerifierError::MalformedOutput(format!(
            "{} goals failed but only {failed} are reported",
            total - proved
        )));
    }
    Ok(program
        .clause_labels
        .keys()
        .map(|id| match worst.get(id) {
            Some((s, goal)) => mk(*id, *s, format!("goal {goal}")),
            None => mk(*id, VerdictStatus::Proved, String::new()),
        })
        .collect())
}

impl Verifier for ExternalVerifier {
    fn name(&self) -> &str {
        "external"
    }

    fn verify(&self, program: &InstrumentedSource) -> Result<Vec<VerifierVerdict>, VerifierError> {
        let dir = tempfile::tempdir()?;
        let file = dir.path().join("unit.c");
        std::fs::write(&file, &program.text)?;
        let props = program.clause_labels.values().cloned().collect::<Vec<_>>().join(",");
        let mut parts = self.config.command.split_whitespace().map(|p| {
            p.replace("{file}", &file.to_string_lossy())
                .replace("{props}", &props)
                .replace("{timeout}", &self.config.timeout_s.to_string())
        });
        let prog = parts
            .next()
            .ok_or_else(|| VerifierError::BackendUnavailable("empty verifier command".into()))?;
        debug!(command = %self.config.command, "running external verifier");
        let out = Command::new(&prog).args(parts).output().map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => VerifierError::BackendUnavailable(format!("`{prog}` not found")),
            _ => VerifierError::Io(e),
        })?;
        let mut text = String::from_utf8_lossy(&out.stdout).into_owned();
        text.push_str(&String::from_utf8_lossy(&out.stderr));
        parse_wp_output(&text, program, &self.config)
    }
}
