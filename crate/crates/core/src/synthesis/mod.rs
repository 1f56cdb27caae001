// SPDX-License-Identifier: Apache-2.0

//! Segment-wise specification generation with verifier-driven repair.

pub mod prompts;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;
use tracing::{debug, warn};

use crate::config::RunConfig;
use crate::events::{Event, EventSink};
use crate::model::{extract_clauses, LanguageModel, ModelError, Prompt, Purpose, Role, Turn};
use crate::poi::{PoiKind, PointOfInterest};
use crate::refinement::{compute_vdr, refine_poi_specs, round_seed, RefineError, VariantSource};
use crate::report::{ClauseRecord, FinalPass, FinalVerdict, SegmentReport, SynthesisReport, ToolchainInfo};
use crate::spec::{ClauseId, ClauseIds, ClauseKind, Origin, SpecClause, SpecSet, Status};
use crate::unit::{AnalyzedUnit, UnitError};
use crate::verifier::{VerdictStatus, Verifier, VerifierError};

use prompts::{
    generation_prompt, parse_hints, repair_prompt, show_dependencies, show_segment, sketch_prompt, Failure, ROLE_HEADER,
};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

impl From<crate::frontend::AttachmentError> for SynthesisError {
    fn from(e: crate::frontend::AttachmentError) -> Self {
        Self::Unit(e.into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sketch {
    pub segment_id: usize,
    pub text: String,
    /// Per-POI notes keyed by post-order rank.
    pub per_poi_hints: BTreeMap<usize, String>,
}

/// Asks for a short natural-language sketch of the segment's behavior.
///
/// Segments without points of interest get an empty sketch and no call.
pub fn generate_sketch(
    unit: &AnalyzedUnit,
    seg: usize,
    specs: &SpecSet,
    model: &dyn LanguageModel,
    events: &dyn EventSink,
) -> Result<Sketch, SynthesisError> {
    let pois = &unit.pois[seg];
    if pois.is_empty() {
        return Ok(Sketch {
            segment_id: seg,
            ..Default::default()
        });
    }
    let code = show_segment(unit, seg, specs, None)?;
    let deps = show_dependencies(unit, seg, specs)?;
    let prompt = Prompt::new(Purpose::Sketch, ROLE_HEADER, sketch_prompt(&code, &deps, pois));
    events.emit(Event::ModelCall {
        segment: seg,
        poi: None,
        purpose: Purpose::Sketch,
        digest: prompt.digest(),
    });
    let text = model.complete(&prompt)?;
    Ok(Sketch {
        segment_id: seg,
        per_poi_hints: parse_hints(&text, pois.iter().map(|p| p.id.rank)),
        text,
    })
}

/// Conversation with the model at one point of interest.
#[derive(Debug, Clone)]
pub struct Session {
    turns: Vec<Turn>,
    next: Purpose,
}

impl Session {
    pub fn new(user: String, purpose: Purpose) -> Self {
        Self {
            turns: vec![Turn {
                role: Role::User,
                content: user,
            }],
            next: purpose,
        }
    }

    pub fn push_user(&mut self, content: String, purpose: Purpose) {
        self.turns.push(Turn {
            role: Role::User,
            content,
        });
        self.next = purpose;
    }

    pub fn prompt(&self) -> Prompt {
        Prompt {
            purpose: self.next,
            role_header: ROLE_HEADER.into(),
            turns: self.turns.clone(),
        }
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    fn answered(&mut self, content: String) {
        self.turns.push(Turn {
            role: Role::Assistant,
            content,
        });
    }
}

/// State shared by every point of interest of a run.
pub struct Synthesizer<'a> {
    pub unit: &'a AnalyzedUnit,
    pub model: &'a dyn LanguageModel,
    pub verifier: &'a dyn Verifier,
    pub variants: &'a dyn VariantSource,
    pub cfg: &'a RunConfig,
    pub events: &'a dyn EventSink,
    ids: ClauseIds,
    /// Every produced clause in id order, with its last diagnostic.
    clauses: BTreeMap<ClauseId, (SpecClause, String)>,
    seen: BTreeMap<String, ClauseId>,
    warnings: RefCell<BTreeSet<String>>,
}

fn origin_of(purpose: Purpose) -> Origin {
    match purpose {
        Purpose::Refine => Origin::Refined,
        Purpose::Repair => Origin::Repaired,
        Purpose::Generate | Purpose::Sketch => Origin::Generated,
    }
}

fn kind_mismatch(poi: &PointOfInterest, kind: ClauseKind, round: usize) -> Option<&'static str> {
    match (poi.kind, kind) {
        (_, ClauseKind::Assert) => Some("assertions are not synthesized"),
        (PoiKind::FunctionContract, ClauseKind::Requires) if round > 0 => {
            Some("preconditions are not accepted during refinement")
        }
        (PoiKind::FunctionContract, ClauseKind::Requires | ClauseKind::Ensures) => None,
        (PoiKind::LoopHead, ClauseKind::LoopInvariant) => None,
        (PoiKind::FunctionContract, _) => Some("only requires/ensures clauses belong to a function contract"),
        (PoiKind::LoopHead, _) => Some("only loop invariants belong to a loop"),
    }
}

impl<'a> Synthesizer<'a> {
    pub fn new(
        unit: &'a AnalyzedUnit,
        model: &'a dyn LanguageModel,
        verifier: &'a dyn Verifier,
        variants: &'a dyn VariantSource,
        cfg: &'a RunConfig,
        events: &'a dyn EventSink,
    ) -> Self {
        let next = unit.targets.iter().map(|c| c.id.0 + 1).max().unwrap_or(0);
        Self {
            unit,
            model,
            verifier,
            variants,
            cfg,
            events,
            ids: ClauseIds::starting_at(next),
            clauses: BTreeMap::new(),
            seen: BTreeMap::new(),
            warnings: RefCell::new(BTreeSet::new()),
        }
    }

    /// Verified clauses so far plus the non-assert targets.
    pub fn assumed(&self) -> SpecSet {
        let mut s = self.unit.targets.filter(|c| c.kind != ClauseKind::Assert);
        s.extend(
            self.clauses
                .values()
                .filter(|(c, _)| c.status == Status::Verified)
                .map(|(c, _)| c.clone()),
        );
        s
    }

    pub(crate) fn note_warnings(&self, ws: &[String]) {
        let mut w = self.warnings.borrow_mut();
        for x in ws {
            if w.insert(x.clone()) {
                warn!("{x}");
            }
        }
    }

    fn record(&mut self, c: SpecClause, diagnostic: String) {
        self.events.emit(Event::ClauseStatus {
            id: c.id,
            poi: c.poi,
            status: c.status,
        });
        self.seen.insert(c.dedup_key(), c.id);
        self.clauses.insert(c.id, (c, diagnostic));
    }

    /// Generation/repair loop at `poi` for one refinement round.
    ///
    /// Verified clauses are added to `s_pos`. Stops when a round leaves no
    /// refuted candidate or after `n_repair` model calls; returns the number
    /// of calls made.
    pub fn generate_poi_specs(
        &mut self,
        session: &mut Session,
        seg: usize,
        poi: &PointOfInterest,
        s_pos: &mut SpecSet,
        round: usize,
    ) -> Result<usize, SynthesisError> {
        let mut calls = 0;
        while calls < self.cfg.n_repair {
            calls += 1;
            let prompt = session.prompt();
            let purpose = prompt.purpose;
            self.events.emit(Event::ModelCall {
                segment: seg,
                poi: Some(poi.id),
                purpose,
                digest: prompt.digest(),
            });
            let response = match self.model.complete(&prompt) {
                Ok(r) => r,
                Err(e @ (ModelError::Transport(_) | ModelError::ExtractionEmpty)) => {
                    warn!(poi = %poi.id, "model call failed: {e}");
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            session.answered(response.clone());
            let raw = match extract_clauses(&response, purpose) {
                Ok(r) => r,
                Err(ModelError::ExtractionEmpty) => {
                    let accepted: Vec<String> = s_pos.iter().map(|c| c.render()).collect();
                    session.push_user(repair_prompt(poi, &[], true, &accepted), Purpose::Repair);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let mut failures = Vec::new();
            let mut candidates = SpecSet::new();
            for r in raw {
                let mut c = SpecClause::new(ClauseId(0), r.kind, r.predicate, poi.id, origin_of(purpose));
                c.round = round;
                let key = c.dedup_key();
                if s_pos.contains_key(&c) || self.unit.targets.contains_key(&c) {
                    continue;
                }
                if let Some(old) = self.seen.get(&key) {
                    let (prev, diag) = &self.clauses[old];
                    if prev.status == Status::Refuted {
                        failures.push(Failure {
                            clause: prev.render(),
                            diagnostic: diag.clone(),
                        });
                    }
                    continue;
                }
                c.id = self.ids.fresh();
                if let Some(why) = kind_mismatch(poi, c.kind, round) {
                    c.settle(false);
                    failures.push(Failure {
                        clause: c.render(),
                        diagnostic: why.into(),
                    });
                    self.record(c, why.into());
                    continue;
                }
                candidates.insert(c);
            }
            if !candidates.is_empty() {
                let assumed = self.assumed();
                let inst = self
                    .unit
                    .verify_text(seg, &self.unit.segments[seg].code, &assumed, &candidates)?;
                let verdicts: BTreeMap<ClauseId, (VerdictStatus, String)> = match self.verifier.verify(&inst) {
                    Ok(vs) => vs
                        .into_iter()
                        .map(|v| (v.clause_id, (v.status, v.diagnostic)))
                        .collect(),
                    Err(e @ VerifierError::BackendUnavailable(_)) => return Err(e.into()),
                    Err(e) => {
                        warn!(poi = %poi.id, "verifier failed: {e}");
                        BTreeMap::new()
                    }
                };
                let mut refuted = 0;
                for mut c in candidates.iter().cloned() {
                    let (status, diag) = verdicts
                        .get(&c.id)
                        .cloned()
                        .unwrap_or((VerdictStatus::Invalid, "no verdict".into()));
                    let ok = status == VerdictStatus::Proved;
                    c.settle(ok);
                    if ok {
                        s_pos.insert(c.clone());
                    } else {
                        refuted += 1;
                        failures.push(Failure {
                            clause: c.render(),
                            diagnostic: diag.clone(),
                        });
                    }
                    self.record(c, if ok { String::new() } else { diag });
                }
                self.events.emit(Event::VerifyCall {
                    segment: seg,
                    poi: Some(poi.id),
                    variant: None,
                    submitted: candidates.len(),
                    refuted,
                });
            }
            debug!(poi = %poi.id, round, calls, failures = failures.len(), "generation step");
            if failures.is_empty() {
                break;
            }
            if calls < self.cfg.n_repair {
                let accepted: Vec<String> = s_pos.iter().map(|c| c.render()).collect();
                session.push_user(repair_prompt(poi, &failures, false, &accepted), Purpose::Repair);
            }
        }
        Ok(calls)
    }

    fn run_segment(&mut self, seg: usize, report: &mut SegmentReport) -> Result<(), SynthesisError> {
        let visible = self.assumed();
        let sketch = match generate_sketch(self.unit, seg, &visible, self.model, self.events) {
            Ok(s) => s,
            Err(e) => {
                self.note_warnings(&[format!("segment {seg}: sketch unavailable: {e}")]);
                Sketch {
                    segment_id: seg,
                    ..Default::default()
                }
            }
        };
        report.sketch = sketch.text.clone();
        for poi in &self.unit.pois[seg] {
            let visible = self.assumed();
            let code = show_segment(self.unit, seg, &visible, Some(poi))?;
            let deps = show_dependencies(self.unit, seg, &visible)?;
            let hint = sketch.per_poi_hints.get(&poi.id.rank).map_or("", String::as_str);
            let session = Session::new(
                generation_prompt(&sketch.text, &code, poi, hint, &deps),
                Purpose::Generate,
            );
            let (_, poi_report) = refine_poi_specs(self, seg, poi, session)?;
            report.pois.push(poi_report);
        }
        Ok(())
    }

    fn final_pass(&self) -> Result<(SpecSet, FinalPass), SynthesisError> {
        let mut specs = self.unit.targets.clone();
        specs.extend(
            self.clauses
                .values()
                .filter(|(c, _)| c.status == Status::Verified)
                .map(|(c, _)| c.clone()),
        );
        let mut pass = FinalPass::default();
        loop {
            pass.iterations += 1;
            let verdicts = self.verifier.verify(&self.unit.final_text(&specs)?)?;
            let failing: Vec<_> = verdicts
                .iter()
                .filter(|v| v.status != VerdictStatus::Proved)
                .filter(|v| specs.get(v.clause_id).is_some_and(|c| c.origin != Origin::Target))
                .collect();
            if failing.is_empty() {
                let (proved, total) = crate::eval::proved_targets(&self.unit.targets, &verdicts);
                pass.targets_proved = proved as usize;
                pass.targets_total = total as usize;
                pass.verdicts = verdicts
                    .into_iter()
                    .map(|v| FinalVerdict {
                        id: v.clause_id,
                        status: v.status,
                        diagnostic: v.diagnostic,
                    })
                    .collect();
                break;
            }
            for v in failing {
                specs.remove(v.clause_id);
                pass.dropped.push(FinalVerdict {
                    id: v.clause_id,
                    status: v.status,
                    diagnostic: v.diagnostic.clone(),
                });
            }
        }
        Ok((specs, pass))
    }

    fn final_vdr(&self, seg: usize, specs: &SpecSet) -> Result<Option<crate::refinement::VdrReport>, SynthesisError> {
        let seed = round_seed(self.cfg.seed, seg, None, 0);
        let sample = match self.variants.sample(self.unit, seg, seed) {
            Ok(s) if !s.variants.is_empty() => s,
            Ok(_) | Err(crate::mutation::MutationError::NoApplicableSites(_)) => return Ok(None),
            Err(e) => return Err(RefineError::from(e).into()),
        };
        self.note_warnings(&sample.warnings);
        let mine = |c: &SpecClause| c.poi.segment == seg && c.origin != Origin::Target;
        let submitted = specs.filter(mine);
        let assumed = specs.filter(|c| !mine(c));
        let mut r = compute_vdr(self.unit, seg, &submitted, &assumed, &sample.variants, self.verifier)?;
        r.seed = seed;
        r.equivalent_excluded = sample.equivalent_excluded;
        r.compile_failed = sample.compile_failed;
        Ok(Some(r))
    }
}

/// Runs the whole pipeline over every segment, dependencies first.
///
/// A model or backend failure in one segment is recorded in its report and
/// the remaining segments still run.
pub fn synthesize_program(
    unit: &AnalyzedUnit,
    input: &str,
    model: &dyn LanguageModel,
    verifier: &dyn Verifier,
    variants: &dyn VariantSource,
    cfg: &RunConfig,
    events: &dyn EventSink,
) -> Result<SynthesisReport, SynthesisError> {
    let mut s = Synthesizer::new(unit, model, verifier, variants, cfg, events);
    let mut order: Vec<usize> = (0..unit.segments.len()).collect();
    order.sort_by_key(|&i| unit.segments[i].topo_rank);
    let mut segments = BTreeMap::new();
    for seg in order {
        let mut report = SegmentReport {
            id: seg,
            members: unit.segments[seg].member_names.clone(),
            sketch: String::new(),
            pois: Vec::new(),
            final_vdr: None,
            error: None,
        };
        if let Err(e) = s.run_segment(seg, &mut report) {
            warn!(segment = seg, "segment failed: {e}");
            report.error = Some(e.to_string());
        }
        segments.insert(seg, report);
    }
    let (final_specs, final_pass) = s.final_pass()?;
    for (seg, report) in segments.iter_mut() {
        if report.error.is_none() && !unit.pois[*seg].is_empty() {
            report.final_vdr = s.final_vdr(*seg, &final_specs)?;
        }
    }
    let proved: BTreeSet<ClauseId> = final_pass
        .verdicts
        .iter()
        .filter(|v| v.status == VerdictStatus::Proved)
        .map(|v| v.id)
        .collect();
    let mut clauses: Vec<ClauseRecord> = unit
        .targets
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.status = if proved.contains(&c.id) {
                Status::Verified
            } else {
                Status::Refuted
            };
            ClauseRecord::new(&c, "")
        })
        .collect();
    clauses.extend(s.clauses.values().map(|(c, d)| ClauseRecord::new(c, d.clone())));
    clauses.sort_by_key(|c| c.id);
    let toolchain = if cfg.no_tce {
        ToolchainInfo::default()
    } else {
        ToolchainInfo {
            cc: cfg.toolchain.cc.clone(),
            flags: cfg.toolchain.flags.clone(),
            target: cfg.toolchain.target(),
            warnings: Vec::new(),
        }
    };
    let mut toolchain = toolchain;
    toolchain.warnings = s.warnings.borrow().iter().cloned().collect();
    Ok(SynthesisReport {
        input: input.to_string(),
        verifier: verifier.name().to_string(),
        clauses,
        final_specs: final_specs
            .iter()
            .filter(|c| c.origin != Origin::Target)
            .map(|c| c.id)
            .collect(),
        segments: segments.into_values().collect(),
        final_pass,
        toolchain,
    })
}
