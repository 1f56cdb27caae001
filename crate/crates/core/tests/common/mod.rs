// SPDX-License-Identifier: Apache-2.0

//! Fixtures and scripted models shared by integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use specsyn::config::RunConfig;
use specsyn::events::{EventSink, NullSink};
use specsyn::frontend::SourceUnit;
use specsyn::model::{LanguageModel, Prompt, Purpose};
use specsyn::refinement::VariantSource;
use specsyn::report::SynthesisReport;
use specsyn::spec::ClauseIds;
use specsyn::synthesis::synthesize_program;
use specsyn::unit::AnalyzedUnit;
use specsyn::verifier::MockVerifier;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn analyze_text(name: &str, text: &str) -> AnalyzedUnit {
    AnalyzedUnit::analyze(SourceUnit::new(name, text), &mut ClauseIds::default()).expect("fixture analyzes")
}

pub fn analyze(name: &str) -> AnalyzedUnit {
    let text = std::fs::read_to_string(fixture(name)).expect("fixture exists");
    analyze_text(name, &text)
}

pub fn config(name: &str) -> RunConfig {
    let text = std::fs::read_to_string(fixture(name)).expect("config exists");
    RunConfig::from_toml(&text).expect("config parses")
}

pub fn synthesize(
    unit: &AnalyzedUnit,
    model: &dyn LanguageModel,
    variants: &dyn VariantSource,
    cfg: &RunConfig,
) -> SynthesisReport {
    synthesize_with(unit, model, variants, cfg, &NullSink)
}

pub fn synthesize_with(
    unit: &AnalyzedUnit,
    model: &dyn LanguageModel,
    variants: &dyn VariantSource,
    cfg: &RunConfig,
    events: &dyn EventSink,
) -> SynthesisReport {
    let verifier = MockVerifier::new(cfg.verifier.domain.clone());
    synthesize_program(
        unit,
        unit.source.path.to_str().unwrap(),
        model,
        &verifier,
        variants,
        cfg,
        events,
    )
    .expect("synthesis runs")
}

/// Target location named in a generation, repair or refinement prompt.
pub fn target_of(p: &Prompt) -> &str {
    let u = p.last_user();
    let start = u
        .find("Target: ")
        .map(|i| i + "Target: ".len())
        .or_else(|| u.find("clauses for ").map(|i| i + "clauses for ".len()))
        .unwrap_or(0);
    let rest = &u[start..];
    let end = rest.find(['\n', ',', '.']).unwrap_or(rest.len());
    // descriptions end with a backticked function name
    match rest[..end].rfind('`') {
        Some(i) => &rest[..=i],
        None => &rest[..end],
    }
}

pub fn acsl(clauses: &[&str]) -> String {
    format!(
        "```acsl\n{}\n```\n",
        clauses.iter().map(|c| format!("{c};")).collect::<Vec<_>>().join("\n")
    )
}

/// Scripted answers for the two-function buffer comparison fixture.
pub fn buffers_script(p: &Prompt) -> String {
    if p.purpose == Purpose::Sketch {
        return if p.last_user().contains("check_same") && !p.last_user().contains("for (i = 0") {
            "P0: returns 0 when the first two cells agree and 1 otherwise".into()
        } else {
            "P0: i stays within 0..n and every cell before i agrees\nP1: result is 0 or 1, 0 exactly when the buffers agree".into()
        };
    }
    match target_of(p) {
        "loop #1 in function `bufs_differ`" => acsl(&[
            "loop invariant 0 <= i <= n",
            "loop invariant ret == 0",
            "loop invariant \\forall integer k; 0 <= k < i ==> b1[k] == b2[k]",
        ]),
        "contract of function `bufs_differ`" => acsl(&[
            "requires \\valid_read(b1 + (0 .. n - 1))",
            "requires \\valid_read(b2 + (0 .. n - 1))",
            "ensures \\result == 0 || \\result == 1",
            "ensures \\result == 0 <==> (\\forall integer k; 0 <= k < n ==> b1[k] == b2[k])",
        ]),
        "contract of function `check_same`" => acsl(&[
            "requires \\valid_read(a + (0 .. 1))",
            "requires \\valid_read(b + (0 .. 1))",
            "ensures \\result == 0 <==> (a[0] == b[0] && a[1] == b[1])",
        ]),
        other => panic!("unexpected target {other:?}"),
    }
}

/// Records the scripted model over the buffer comparison fixture.
pub fn record_buffers() -> (specsyn::model::Transcript, SynthesisReport) {
    use specsyn::model::{FnModel, RecordingModel};
    use specsyn::refinement::MutationSource;
    let unit = analyze("buffers.c");
    let cfg = config("buffers.toml");
    let rec = RecordingModel::new(FnModel(buffers_script), "scripted");
    let variants = MutationSource::from_config(&cfg).expect("catalog loads");
    let report = synthesize(&unit, &rec, &variants, &cfg);
    (rec.transcript(), report)
}
