// SPDX-License-Identifier: Apache-2.0

//! Variant discriminative rate and VDR-guided refinement.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use similar::TextDiff;
use thiserror::Error;

use crate::events::Event;
use crate::model::Purpose;
use crate::mutation::{
    filter_non_equivalent, generate_variants, Catalog, Equivalence, MutationError, Toolchain, Variant,
};
use crate::poi::PointOfInterest;
use crate::report::{PoiReport, RoundRecord};
use crate::spec::{ClauseId, Origin, SpecSet};
use crate::synthesis::prompts::{refine_prompt, RefineView};
use crate::synthesis::{Session, SynthesisError, Synthesizer};
use crate::unit::{AnalyzedUnit, UnitError};
use crate::verifier::{VerdictStatus, Verifier, VerifierError};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("no non-equivalent variants to measure against")]
    EmptyVariantSet,
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailingClause {
    pub id: ClauseId,
    pub status: VerdictStatus,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub diagnostic: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub id: String,
    pub operator: String,
    pub line: usize,
    pub refuted: bool,
    /// Submitted clauses not proved on the variant.
    pub failing: Vec<FailingClause>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VdrReport {
    pub round: usize,
    pub total: usize,
    pub refuted: usize,
    pub rate: f64,
    pub undistinguished: Vec<String>,
    pub outcomes: Vec<VariantOutcome>,
    pub equivalent_excluded: usize,
    pub compile_failed: usize,
    pub seed: u64,
}

impl VdrReport {
    pub fn meets(&self, t: f64) -> bool {
        self.rate >= t
    }
}

/// Number of undistinguished variants, the quantity refinement minimizes.
pub fn vdr_objective(r: &VdrReport) -> usize {
    r.total - r.refuted
}

/// Checks `submitted` on every variant of segment `seg`.
///
/// A variant is refuted when some submitted clause is not proved on it.
/// `assumed` clauses are instrumented but not checked.
pub fn compute_vdr(
    unit: &AnalyzedUnit,
    seg: usize,
    submitted: &SpecSet,
    assumed: &SpecSet,
    variants: &[Variant],
    verifier: &dyn Verifier,
) -> Result<VdrReport, RefineError> {
    if variants.is_empty() {
        return Err(RefineError::EmptyVariantSet);
    }
    let outcomes: Vec<Result<VariantOutcome, RefineError>> = variants
        .par_iter()
        .map(|v| {
            let mut failing = Vec::new();
            if !submitted.is_empty() {
                let inst = unit.verify_text(seg, &v.code, assumed, submitted)?;
                let verdicts = verifier.verify(&inst)?;
                for vd in verdicts {
                    if vd.status != VerdictStatus::Proved {
                        failing.push(FailingClause {
                            id: vd.clause_id,
                            status: vd.status,
                            diagnostic: vd.diagnostic,
                        });
                    }
                }
            }
            Ok(VariantOutcome {
                id: v.id.clone(),
                operator: v.operator_id.clone(),
                line: v.line,
                refuted: !failing.is_empty(),
                failing,
            })
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    let total = outcomes.len();
    let refuted = outcomes.iter().filter(|o| o.refuted).count();
    Ok(VdrReport {
        round: 0,
        total,
        refuted,
        rate: refuted as f64 / total as f64,
        undistinguished: outcomes.iter().filter(|o| !o.refuted).map(|o| o.id.clone()).collect(),
        outcomes,
        equivalent_excluded: 0,
        compile_failed: 0,
        seed: 0,
    })
}

/// Non-equivalent variants of one segment for one round.
#[derive(Debug, Clone, Default)]
pub struct VariantSample {
    pub variants: Vec<Variant>,
    pub equivalent_excluded: usize,
    pub compile_failed: usize,
    pub warnings: Vec<String>,
}

pub trait VariantSource: Send + Sync {
    fn sample(&self, unit: &AnalyzedUnit, seg: usize, seed: u64) -> Result<VariantSample, MutationError>;
}

/// Mutation catalog plus equivalence filtering.
pub struct MutationSource {
    pub catalog: Catalog,
    pub budget: usize,
    /// `None` disables equivalence filtering.
    pub toolchain: Option<Toolchain>,
}

impl MutationSource {
    /// Catalog, budget and toolchain of a run configuration.
    pub fn from_config(cfg: &crate::config::RunConfig) -> Result<Self, MutationError> {
        let catalog = match &cfg.catalog {
            Some(p) => Catalog::load(p)?,
            None => Catalog::builtin(),
        };
        Ok(Self {
            catalog,
            budget: cfg.mutation_budget,
            toolchain: (!cfg.no_tce).then(|| cfg.toolchain.clone()),
        })
    }
}

impl VariantSource for MutationSource {
    fn sample(&self, unit: &AnalyzedUnit, seg: usize, seed: u64) -> Result<VariantSample, MutationError> {
        let vs = generate_variants(&unit.segments[seg], &self.catalog, self.budget, seed)?;
        let Some(tc) = &self.toolchain else {
            return Ok(VariantSample {
                variants: vs
                    .into_iter()
                    .map(|mut v| {
                        v.equivalence = Some(Equivalence::NonEquivalent);
                        v
                    })
                    .collect(),
                warnings: vec!["equivalence filtering disabled".into()],
                ..Default::default()
            });
        };
        let code = &unit.segments[seg].code;
        let original = unit.compile_text(seg, code).unwrap_or_else(|_| code.clone());
        let out = filter_non_equivalent(
            vs,
            &original,
            |v| unit.compile_text(seg, &v.code).unwrap_or_else(|_| v.code.clone()),
            tc,
        );
        Ok(VariantSample {
            variants: out.kept,
            equivalent_excluded: out.equivalent,
            compile_failed: out.compile_failed,
            warnings: out.warnings,
        })
    }
}

/// The same variants every round, per segment.
#[derive(Debug, Clone, Default)]
pub struct FixedVariants(pub BTreeMap<usize, Vec<Variant>>);

impl VariantSource for FixedVariants {
    fn sample(&self, _: &AnalyzedUnit, seg: usize, _: u64) -> Result<VariantSample, MutationError> {
        Ok(VariantSample {
            variants: self.0.get(&seg).cloned().unwrap_or_default(),
            ..Default::default()
        })
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Variant seed for a round at a point of interest; `rank == None` is the
/// final measurement of a whole segment.
pub fn round_seed(seed: u64, seg: usize, rank: Option<usize>, round: usize) -> u64 {
    let r = rank.map_or(u64::MAX, |r| r as u64);
    splitmix(splitmix(splitmix(seed ^ seg as u64) ^ r) ^ round as u64)
}

/// Picks one undistinguished variant with a seeded generator.
pub fn pick_undistinguished<'a>(report: &VdrReport, variants: &'a [Variant], seed: u64) -> Option<&'a Variant> {
    let ids = &report.undistinguished;
    if ids.is_empty() {
        return None;
    }
    let i = ChaCha8Rng::seed_from_u64(seed).random_range(0..ids.len());
    variants.iter().find(|v| v.id == ids[i])
}

pub fn unified_diff(original: &str, variant: &str) -> String {
    TextDiff::from_lines(original, variant)
        .unified_diff()
        .context_radius(2)
        .header("original", "variant")
        .to_string()
}

fn measure(
    s: &Synthesizer<'_>,
    seg: usize,
    poi: &PointOfInterest,
    submitted: &SpecSet,
    round: usize,
) -> Result<Result<(VdrReport, Vec<Variant>), String>, SynthesisError> {
    let seed = round_seed(s.cfg.seed, seg, Some(poi.id.rank), round);
    let sample = match s.variants.sample(s.unit, seg, seed) {
        Ok(x) => x,
        Err(MutationError::NoApplicableSites(_)) => return Ok(Err("no applicable mutation sites".into())),
        Err(e) => return Err(RefineError::from(e).into()),
    };
    s.note_warnings(&sample.warnings);
    if sample.variants.is_empty() {
        return Ok(Err("no non-equivalent variants".into()));
    }
    for v in &sample.variants {
        s.events.emit(Event::Variant {
            segment: seg,
            id: v.id.clone(),
            operator: v.operator_id.clone(),
            line: v.line,
        });
    }
    let assumed = s.assumed().filter(|c| c.poi != poi.id || c.origin == Origin::Target);
    let mut r = compute_vdr(s.unit, seg, submitted, &assumed, &sample.variants, s.verifier)?;
    r.round = round;
    r.seed = seed;
    r.equivalent_excluded = sample.equivalent_excluded;
    r.compile_failed = sample.compile_failed;
    for o in &r.outcomes {
        s.events.emit(Event::VerifyCall {
            segment: seg,
            poi: Some(poi.id),
            variant: Some(o.id.clone()),
            submitted: submitted.len(),
            refuted: o.failing.len(),
        });
    }
    s.events.emit(Event::VdrRound {
        segment: seg,
        poi: Some(poi.id),
        round,
        total: r.total,
        refuted: r.refuted,
        rate: r.rate,
    });
    Ok(Ok((r, sample.variants)))
}

/// Generation, repair and VDR-guided refinement at one point of interest.
///
/// Each round runs the generation/repair loop, samples fresh variants and
/// measures the accepted clauses; rounds stop once the rate reaches `t` or
/// after `n_refine` rounds. Returns the accepted clauses.
pub fn refine_poi_specs(
    s: &mut Synthesizer<'_>,
    seg: usize,
    poi: &PointOfInterest,
    mut session: Session,
) -> Result<(SpecSet, PoiReport), SynthesisError> {
    let mut s_pos = SpecSet::new();
    let mut report = PoiReport {
        poi: poi.id,
        description: poi.describe(),
        rounds: Vec::new(),
        refinement_skipped: None,
    };
    if s.cfg.skip_if_strong {
        let existing = s
            .unit
            .targets
            .filter(|c| c.poi == poi.id && c.kind != crate::spec::ClauseKind::Assert);
        if !existing.is_empty() {
            if let Ok((r, _)) = measure(s, seg, poi, &existing, 0)? {
                if r.meets(s.cfg.t) {
                    report.rounds.push(RoundRecord {
                        round: 0,
                        model_calls: 0,
                        accepted: Vec::new(),
                        vdr: Some(r),
                    });
                    return Ok((s_pos, report));
                }
            }
        }
    }
    for round in 0..s.cfg.n_refine {
        let calls = s.generate_poi_specs(&mut session, seg, poi, &mut s_pos, round)?;
        let mut rec = RoundRecord {
            round,
            model_calls: calls,
            accepted: s_pos.iter().map(|c| c.id).collect(),
            vdr: None,
        };
        let (r, variants) = match measure(s, seg, poi, &s_pos, round)? {
            Ok(x) => x,
            Err(why) => {
                report.refinement_skipped = Some(why);
                report.rounds.push(rec);
                break;
            }
        };
        rec.vdr = Some(r.clone());
        report.rounds.push(rec);
        if r.meets(s.cfg.t) || round + 1 >= s.cfg.n_refine {
            break;
        }
        let Some(v) = pick_undistinguished(&r, &variants, r.seed) else {
            break;
        };
        let current: Vec<String> = s_pos.iter().map(|c| c.render()).collect();
        let distinguished: Vec<String> = r
            .outcomes
            .iter()
            .filter(|o| o.refuted)
            .take(3)
            .map(|o| {
                let f = &o.failing[0];
                let clause = s_pos.get(f.id).map_or_else(|| f.id.to_string(), |c| c.render());
                format!(
                    "{} ({} at line {}): `{}` fails: {}",
                    o.id, o.operator, o.line, clause, f.diagnostic
                )
            })
            .collect();
        let diff = unified_diff(&s.unit.segments[seg].code, &v.code);
        let text = refine_prompt(&RefineView {
            poi,
            current: &current,
            variant_id: &v.id,
            diff: &diff,
            variant_code: &v.code,
            distinguished: &distinguished,
        });
        session.push_user(text, Purpose::Refine);
    }
    Ok((s_pos, report))
}
