// SPDX-License-Identifier: Apache-2.0

//! Precision, recall and proved-target counts against hand-written
//! reference annotations.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acsl::parse_predicate;
use crate::poi::PoiKind;
use crate::report::SynthesisReport;
use crate::spec::{ClauseId, ClauseIds, ClauseKind, Origin, PoiId, SpecClause, SpecSet, Status};
use crate::unit::{AnalyzedUnit, UnitError};
use crate::verifier::{entails, Entailment, MockDomain, VerdictStatus, Verifier, VerifierError, VerifierVerdict};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no generated clauses")]
    NoGenerated,
    #[error("reference clause at {0} has no matching point of interest in the subject")]
    UnresolvablePoi(String),
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMode {
    /// The generated clauses at the POI imply the reference clause.
    Entailment,
    /// Same kind and normalized predicate text at the same POI.
    Textual,
    /// Entailment where the checker supports it, textual otherwise.
    Mixed,
}

mod ratio_text {
    use num_rational::Ratio;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<u64>, D::Error> {
        let s = String::deserialize(d)?;
        let (n, m) = s.split_once('/').ok_or_else(|| D::Error::custom("expected `n/d`"))?;
        let n = n.trim().parse().map_err(D::Error::custom)?;
        let m: u64 = m.trim().parse().map_err(D::Error::custom)?;
        if m == 0 {
            return Err(D::Error::custom("zero denominator"));
        }
        Ok(Ratio::new(n, m))
    }
}

/// Reference annotations of one subject program, resolved to its POIs.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub clauses: SpecSet,
    pub targets: SpecSet,
}

impl GroundTruth {
    /// Reads the annotations of `reference`, an annotated copy of `subject`.
    pub fn resolve(subject: &AnalyzedUnit, reference: &AnalyzedUnit) -> Result<Self, EvalError> {
        let mut by_key = BTreeMap::new();
        for p in subject.pois.iter().flatten() {
            by_key.insert(p.structural_key(), p.id);
        }
        let mut out = Self::default();
        for c in reference.targets.iter() {
            let rp = reference
                .pois
                .iter()
                .flatten()
                .find(|p| p.id == c.poi)
                .expect("reference clause has a POI");
            let Some(&poi) = by_key.get(&rp.structural_key()) else {
                return Err(EvalError::UnresolvablePoi(rp.describe()));
            };
            let mut c = c.clone();
            c.poi = poi;
            if c.kind == ClauseKind::Assert {
                out.targets.insert(c);
            } else {
                out.clauses.insert(c);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub clause: String,
    pub poi: PoiId,
    pub covered: bool,
    pub mode: CoverageMode,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub generated_total: u64,
    pub verified_total: u64,
    #[serde(with = "ratio_text")]
    pub precision: Ratio<u64>,
    /// Set when a ratio had an empty denominator and was reported as 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    pub gt_total: u64,
    pub gt_covered: u64,
    #[serde(with = "ratio_text")]
    pub recall: Ratio<u64>,
    pub coverage_mode: CoverageMode,
    pub coverage: Vec<Coverage>,
    pub targets_total: u64,
    pub targets_proved: u64,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }
}

/// Fraction of generated clauses with a `Proved` verdict. Clauses without
/// a verdict count as not proved.
pub fn precision(generated: &SpecSet, verdicts: &[VerifierVerdict]) -> Result<Ratio<u64>, EvalError> {
    if generated.is_empty() {
        return Err(EvalError::NoGenerated);
    }
    let proved = generated
        .iter()
        .filter(|c| {
            verdicts
                .iter()
                .any(|v| v.clause_id == c.id && v.status == VerdictStatus::Proved)
        })
        .count();
    Ok(Ratio::new(proved as u64, generated.len() as u64))
}

fn textual(generated: &SpecSet, c: &SpecClause) -> bool {
    generated.contains_key(c)
}

/// Whether each reference clause is covered by `generated`.
///
/// With `domain` given, coverage is bounded entailment from the generated
/// clauses at the same POI, falling back to textual matching for clauses
/// the checker cannot interpret. Without it, matching is textual.
pub fn coverage(
    subject: &AnalyzedUnit,
    generated: &SpecSet,
    gt: &GroundTruth,
    domain: Option<&MockDomain>,
) -> (Vec<Coverage>, CoverageMode) {
    let mut out = Vec::new();
    let mut modes = (false, false);
    for c in gt.clauses.iter() {
        let poi = subject
            .pois
            .iter()
            .flatten()
            .find(|p| p.id == c.poi)
            .expect("resolved POI");
        let text_hit = textual(generated, c);
        let mut cov = Coverage {
            clause: c.render(),
            poi: c.poi,
            covered: text_hit,
            mode: CoverageMode::Textual,
            evidence: String::new(),
        };
        if let (Some(d), Ok(goal)) = (domain, parse_predicate(&c.predicate)) {
            let premises: Vec<_> = generated
                .iter()
                .filter(|g| g.poi == c.poi)
                .filter_map(|g| parse_predicate(&g.predicate).ok().map(|p| (g.kind, p)))
                .collect();
            let at_loop = poi.kind == PoiKind::LoopHead;
            match entails(&subject.decls, &poi.owner_name, at_loop, &premises, &(c.kind, goal), d) {
                Entailment::Holds => {
                    cov.covered = true;
                    cov.mode = CoverageMode::Entailment;
                }
                Entailment::Fails(cex) => {
                    cov.covered = false;
                    cov.mode = CoverageMode::Entailment;
                    cov.evidence = cex;
                }
                Entailment::Unsupported(why) => cov.evidence = why,
            }
        }
        match cov.mode {
            CoverageMode::Entailment => modes.0 = true,
            _ => modes.1 = true,
        }
        out.push(cov);
    }
    let mode = match modes {
        (true, true) => CoverageMode::Mixed,
        (true, false) => CoverageMode::Entailment,
        (false, _) => CoverageMode::Textual,
    };
    let mode = if domain.is_some() && out.is_empty() {
        CoverageMode::Entailment
    } else {
        mode
    };
    (out, mode)
}

/// Proved assertion targets over all assertion targets.
pub fn proved_targets(targets: &SpecSet, verdicts: &[VerifierVerdict]) -> (u64, u64) {
    let asserts: Vec<ClauseId> = targets
        .iter()
        .filter(|c| c.kind == ClauseKind::Assert)
        .map(|c| c.id)
        .collect();
    let proved = verdicts
        .iter()
        .filter(|v| v.status == VerdictStatus::Proved && asserts.contains(&v.clause_id))
        .count();
    (proved as u64, asserts.len() as u64)
}

/// Verifies the whole program with `generated` instrumented and counts the
/// proved assertion targets.
pub fn count_proved_targets(
    subject: &AnalyzedUnit,
    generated: &SpecSet,
    targets: &SpecSet,
    verifier: &dyn Verifier,
) -> Result<(u64, u64), EvalError> {
    if !targets.iter().any(|c| c.kind == ClauseKind::Assert) {
        return Ok((0, 0));
    }
    let mut specs = generated.clone();
    specs.extend(targets.iter().cloned());
    let verdicts = verifier.verify(&subject.final_text(&specs)?)?;
    Ok(proved_targets(targets, &verdicts))
}

/// Generated clauses of a report and the subset kept in the final set.
pub fn generated_from_report(report: &SynthesisReport) -> (Vec<SpecClause>, SpecSet) {
    let mut all = Vec::new();
    for r in report.clauses.iter().filter(|r| r.origin != Origin::Target) {
        let mut c = SpecClause::new(r.id, r.kind, r.predicate.clone(), r.poi, r.origin);
        c.status = r.status;
        c.round = r.round;
        all.push(c);
    }
    let kept = all
        .iter()
        .filter(|c| report.final_specs.contains(&c.id))
        .cloned()
        .collect();
    (all, kept)
}

/// Metrics of one synthesis report against the reference annotations.
///
/// Precision counts every generated clause (accepted or refuted); recall and
/// target counts use the final clause set.
pub fn evaluate(
    subject: &AnalyzedUnit,
    reference: &AnalyzedUnit,
    report: &SynthesisReport,
    verifier: &dyn Verifier,
    domain: Option<&MockDomain>,
) -> Result<MetricsReport, EvalError> {
    let gt = GroundTruth::resolve(subject, reference)?;
    let (all, kept) = generated_from_report(report);
    let mut flags = Vec::new();
    let verified = all.iter().filter(|c| c.status == Status::Verified).count() as u64;
    let precision = if all.is_empty() {
        flags.push("precision: no generated clauses".to_string());
        Ratio::new(0, 1)
    } else {
        Ratio::new(verified, all.len() as u64)
    };
    let (cov, coverage_mode) = coverage(subject, &kept, &gt, domain);
    let covered = cov.iter().filter(|c| c.covered).count() as u64;
    let recall = if cov.is_empty() {
        flags.push("recall: no reference clauses".to_string());
        Ratio::new(0, 1)
    } else {
        Ratio::new(covered, cov.len() as u64)
    };
    let mut targets = subject.targets.filter(|c| c.kind == ClauseKind::Assert);
    // reference-only assertions are renumbered past the subject's ids
    let mut ids = ClauseIds::starting_at(
        subject
            .targets
            .iter()
            .chain(kept.iter())
            .map(|c| c.id.0 + 1)
            .max()
            .unwrap_or(0),
    );
    for t in gt.targets.iter() {
        let mut t = t.clone();
        t.id = ids.fresh();
        targets.insert(t);
    }
    let (targets_proved, targets_total) = count_proved_targets(subject, &kept, &targets, verifier)?;
    Ok(MetricsReport {
        generated_total: all.len() as u64,
        verified_total: verified,
        precision,
        flags,
        gt_total: cov.len() as u64,
        gt_covered: covered,
        recall,
        coverage_mode,
        coverage: cov,
        targets_total,
        targets_proved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::SourceUnit;
    use crate::verifier::MockVerifier;

    const FIG: &str = "static int bufs_differ(const unsigned char *b1, const unsigned char *b2, unsigned int n)\n{\n    int ret = 0;\n    unsigned int i;\n    for (i = 0; i < n; i++) {\n        if (b1[i] != b2[i]) {\n            ret = 1;\n            break;\n        }\n    }\n    return ret;\n}\n\nint check_same(const unsigned char *a, const unsigned char *b)\n{\n    int r = bufs_differ(a, b, 2);\n    /*@ assert r == 0 || r == 1; */\n    return r;\n}\n";

    fn unit(text: &str) -> AnalyzedUnit {
        AnalyzedUnit::analyze(SourceUnit::new("t.c", text), &mut ClauseIds::default()).unwrap()
    }

    fn verdict(id: u64, ok: bool) -> VerifierVerdict {
        VerifierVerdict {
            clause_id: ClauseId(id),
            status: if ok {
                VerdictStatus::Proved
            } else {
                VerdictStatus::Unproved
            },
            diagnostic: String::new(),
            goal_name: String::new(),
        }
    }

    fn contract(u: &AnalyzedUnit, name: &str) -> PoiId {
        u.pois
            .iter()
            .flatten()
            .find(|p| p.owner_name == name && p.kind == PoiKind::FunctionContract)
            .unwrap()
            .id
    }

    #[test]
    fn precision_arithmetic() {
        let poi = PoiId { segment: 0, rank: 0 };
        let gen: SpecSet = (0..4)
            .map(|i| {
                SpecClause::new(
                    ClauseId(i),
                    ClauseKind::Ensures,
                    format!("\\result != {i}"),
                    poi,
                    Origin::Generated,
                )
            })
            .collect();
        let vs: Vec<_> = (0..4).map(|i| verdict(i, i != 2)).collect();
        assert_eq!(precision(&gen, &vs).unwrap(), Ratio::new(3, 4));
        assert!(matches!(precision(&SpecSet::new(), &[]), Err(EvalError::NoGenerated)));
    }

    #[test]
    fn entailment_covers_weaker_reference() {
        let s = unit(FIG);
        let r = unit(&FIG.replace(
            "static int bufs_differ",
            "/*@ ensures \\result >= 0; */\nstatic int bufs_differ",
        ));
        let gt = GroundTruth::resolve(&s, &r).unwrap();
        let poi = contract(&s, "bufs_differ");
        let gen: SpecSet = [SpecClause::new(
            ClauseId(9),
            ClauseKind::Ensures,
            "\\result == 0 || \\result == 1",
            poi,
            Origin::Generated,
        )]
        .into_iter()
        .collect();
        let (cov, mode) = coverage(&s, &gen, &gt, Some(&MockDomain::default()));
        assert_eq!(mode, CoverageMode::Entailment);
        assert!(cov[0].covered);
        let (cov, mode) = coverage(&s, &gen, &gt, None);
        assert_eq!(mode, CoverageMode::Textual);
        assert!(!cov[0].covered);
        let (cov, _) = coverage(&s, &SpecSet::new(), &gt, Some(&MockDomain::default()));
        assert!(!cov[0].covered);
    }

    #[test]
    fn targets_need_the_callee_contract() {
        let s = unit(FIG);
        let v = MockVerifier::default();
        let targets = s.targets.clone();
        assert_eq!(count_proved_targets(&s, &SpecSet::new(), &targets, &v).unwrap(), (0, 1));
        let poi = contract(&s, "bufs_differ");
        let gen: SpecSet = [SpecClause::new(
            ClauseId(9),
            ClauseKind::Ensures,
            "\\result == 0 || \\result == 1",
            poi,
            Origin::Generated,
        )]
        .into_iter()
        .collect();
        assert_eq!(count_proved_targets(&s, &gen, &targets, &v).unwrap(), (1, 1));
        assert_eq!(count_proved_targets(&s, &gen, &SpecSet::new(), &v).unwrap(), (0, 0));
    }
}
