// SPDX-License-Identifier: Apache-2.0

//! A parsed and segmented source unit, its target annotations, and the
//! assembly of self-contained texts handed to verifiers and compilers.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::acsl::split_clauses;
use crate::frontend::{
    instrument, parse_text, parse_unit, prototype_text, strip_instrumentation, strip_labels, AttachmentError,
    Declaration, FunctionDef, InstrumentedSource, ParseError, SourceUnit, Stmt, StmtKind,
};
use crate::poi::{extract_points_of_interest, pois_of_code, PoiKind, PointOfInterest};
use crate::segmentation::{
    build_dependency_graph, compute_segments, dependency_closure, DependencyGraph, Segment, SegmentationError,
};
use crate::spec::{ClauseIds, ClauseKind, Origin, SpecClause, SpecSet, Status};

#[derive(Debug, Error)]
pub enum UnitError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Attachment(#[from] AttachmentError),
    #[error("variant of segment {0} does not preserve its points of interest")]
    PoiMismatch(usize),
}

#[derive(Debug, Clone)]
pub struct AnalyzedUnit {
    pub source: SourceUnit,
    pub decls: Vec<Declaration>,
    pub graph: DependencyGraph,
    pub segments: Vec<Segment>,
    /// Points of interest per segment, indexed by segment id.
    pub pois: Vec<Vec<PointOfInterest>>,
    /// Annotations present in the input, as `Target` clauses.
    pub targets: SpecSet,
}

/// Calls `f` on every statement of `f` with its child-index path.
fn walk_paths<'a>(def: &'a FunctionDef, f: &mut dyn FnMut(&[usize], &'a Stmt)) {
    fn go<'a>(s: &'a Stmt, path: &mut Vec<usize>, f: &mut dyn FnMut(&[usize], &'a Stmt)) {
        f(path, s);
        for (i, c) in s.children().into_iter().enumerate() {
            path.push(i);
            go(c, path, f);
            path.pop();
        }
    }
    for (i, s) in def.body.stmts.iter().enumerate() {
        go(s, &mut vec![i], f);
    }
}

impl AnalyzedUnit {
    pub fn analyze(source: SourceUnit, ids: &mut ClauseIds) -> Result<Self, UnitError> {
        let decls = parse_unit(&source)?;
        let graph = build_dependency_graph(&decls)?;
        let segments = compute_segments(&graph);
        let mut pois = Vec::new();
        for s in &segments {
            pois.push(extract_points_of_interest(s)?);
        }
        let mut unit = Self {
            source,
            decls,
            graph,
            segments,
            pois,
            targets: SpecSet::new(),
        };
        unit.targets = unit.extract_targets(ids)?;
        Ok(unit)
    }

    pub fn segment_of(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.member_names.iter().any(|n| n == name))
    }

    fn poi_of(&self, seg: usize, owner: &str, kind: PoiKind, ordinal: Option<usize>) -> Option<&PointOfInterest> {
        self.pois[seg]
            .iter()
            .find(|p| p.owner_name == owner && p.kind == kind && p.loop_ordinal == ordinal)
    }

    fn extract_targets(&self, ids: &mut ClauseIds) -> Result<SpecSet, UnitError> {
        let mut out = SpecSet::new();
        for d in &self.decls {
            let Some(f) = d.function() else { continue };
            let Some(seg) = self.segment_of(&d.name) else { continue };
            let contract = self.poi_of(seg.id, &d.name, PoiKind::FunctionContract, None).cloned();
            let Some(contract) = contract else { continue };
            let mut push = |kind: ClauseKind, pred: String, poi, at| {
                let mut c = SpecClause::new(ids.fresh(), kind, pred, poi, Origin::Target);
                c.at = at;
                out.insert(c);
            };
            for a in &d.annots {
                for raw in split_clauses(&a.text).into_iter().flatten() {
                    if raw.kind.is_contract() {
                        push(raw.kind, raw.predicate, contract.id, None);
                    }
                }
            }
            // loops in post-order, to map invariants to their POI
            let mut loops: Vec<Vec<usize>> = Vec::new();
            for p in self.pois[seg.id]
                .iter()
                .filter(|p| p.owner_name == d.name && p.kind == PoiKind::LoopHead)
            {
                loops.push(p.path.clone());
            }
            let seg_decls = parse_text(&seg.code, &seg.type_names)?;
            let seg_fn = seg_decls
                .iter()
                .find(|x| x.name == d.name)
                .and_then(|x| x.function())
                .expect("segment contains its member");
            let mut sites = Vec::new();
            walk_paths(f, &mut |path, s| sites.push((path.to_vec(), s)));
            let mut blocks: Vec<(Vec<usize>, &crate::frontend::Block, &crate::frontend::Block)> =
                vec![(Vec::new(), &f.body, &seg_fn.body)];
            for (path, s) in &sites {
                let seg_stmt = seg_fn.stmt_at(path).expect("stripped code has the same structure");
                for a in &s.annots {
                    for raw in split_clauses(&a.text).into_iter().flatten() {
                        match raw.kind {
                            ClauseKind::LoopInvariant if s.is_loop() => {
                                let ord = loops.iter().position(|l| l == path);
                                if let Some(p) = self.poi_of(seg.id, &d.name, PoiKind::LoopHead, ord) {
                                    push(raw.kind, raw.predicate, p.id, None);
                                }
                            }
                            ClauseKind::Assert => push(raw.kind, raw.predicate, contract.id, Some(seg_stmt.span.start)),
                            _ => {}
                        }
                    }
                }
                if let (StmtKind::Block(b), StmtKind::Block(sb)) = (&s.kind, &seg_stmt.kind) {
                    blocks.push((path.clone(), b, sb));
                }
            }
            for (_, b, sb) in blocks {
                for a in &b.trailing_annots {
                    for raw in split_clauses(&a.text).into_iter().flatten() {
                        if raw.kind == ClauseKind::Assert {
                            push(raw.kind, raw.predicate, contract.id, Some(sb.close_brace()));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Forward prototypes of the functions defined in `code`.
    fn prototypes(code: &str, seg: &Segment) -> Result<String, ParseError> {
        let decls = parse_text(code, &seg.type_names)?;
        let mut out = String::new();
        for d in &decls {
            if let Some(p) = prototype_text(code, d) {
                out.push_str(&p);
                out.push('\n');
            }
        }
        Ok(out)
    }

    /// Self-contained text for checking `submitted` clauses of segment `seg`,
    /// whose code is `code` (the original or a variant).
    ///
    /// Dependency segments are included with their `assumed` clauses;
    /// `assumed` clauses of `seg` itself are also present. Only `submitted`
    /// clauses are labelled for checking. Assertions are left out.
    pub fn verify_text(
        &self,
        seg: usize,
        code: &str,
        assumed: &SpecSet,
        submitted: &SpecSet,
    ) -> Result<InstrumentedSource, UnitError> {
        let segment = &self.segments[seg];
        let no_asserts = |c: &SpecClause| c.kind != ClauseKind::Assert;
        let mut text = String::new();
        for d in dependency_closure(segment, &self.segments)? {
            let specs = assumed.filter(|c| c.poi.segment == d.id && no_asserts(c));
            let inst = instrument(&d.code, &specs, &self.pois[d.id])?;
            text.push_str(&Self::prototypes(&d.code, &d)?);
            text.push_str(&inst.text);
            text.push('\n');
        }
        let pois = if code == segment.code {
            self.pois[seg].clone()
        } else {
            let p = pois_of_code(segment, code)?;
            let same = p.len() == self.pois[seg].len()
                && p.iter()
                    .zip(&self.pois[seg])
                    .all(|(a, b)| a.structural_key() == b.structural_key());
            if !same {
                return Err(UnitError::PoiMismatch(seg));
            }
            p
        };
        let mut specs = assumed.filter(|c| c.poi.segment == seg && no_asserts(c));
        specs.extend(submitted.iter().filter(|c| no_asserts(c)).cloned());
        let inst = instrument(code, &specs, &pois)?;
        text.push_str(&Self::prototypes(code, segment)?);
        text.push_str(&inst.text);
        let wanted: BTreeSet<_> = submitted.iter().map(|c| c.id).collect();
        let labels = inst
            .clause_labels
            .into_iter()
            .filter(|(id, _)| wanted.contains(id))
            .collect();
        Ok(finish(text, labels))
    }

    /// The whole unit with every clause of `specs` instrumented and labelled.
    pub fn final_text(&self, specs: &SpecSet) -> Result<InstrumentedSource, UnitError> {
        let mut text = String::new();
        let mut labels = BTreeMap::new();
        for s in &self.segments {
            let inst = instrument(&s.code, &specs.filter(|c| c.poi.segment == s.id), &self.pois[s.id])?;
            text.push_str(&Self::prototypes(&s.code, s)?);
            text.push_str(&inst.text);
            text.push('\n');
            labels.extend(inst.clause_labels);
        }
        Ok(finish(text, labels))
    }

    /// Plain (annotation-free) text of segment `seg` with its dependencies,
    /// as handed to a compiler.
    pub fn compile_text(&self, seg: usize, code: &str) -> Result<String, UnitError> {
        let segment = &self.segments[seg];
        let mut text = String::new();
        for d in dependency_closure(segment, &self.segments)? {
            text.push_str(&Self::prototypes(&d.code, &d)?);
            text.push_str(&d.code);
            text.push('\n');
        }
        text.push_str(&Self::prototypes(code, segment)?);
        text.push_str(code);
        Ok(text)
    }

    /// The input source with every clause of `specs` at its point of
    /// interest, without labels. Annotations of the input are replaced.
    pub fn annotated_source(&self, specs: &SpecSet) -> Result<String, UnitError> {
        let mut edits: Vec<(usize, usize, String)> = Vec::new();
        for seg in &self.segments {
            let mut start = 0;
            for m in &seg.members {
                let Some(d) = self.decls.iter().find(|d| d.id == *m) else {
                    continue;
                };
                let stripped = strip_instrumentation(&d.text);
                let piece = stripped.trim_end();
                debug_assert_eq!(&seg.code[start..start + piece.len()], piece);
                let pois: Vec<PointOfInterest> = self.pois[seg.id]
                    .iter()
                    .filter(|p| p.owner_name == d.name && p.anchor >= start && p.anchor <= start + piece.len())
                    .map(|p| {
                        let mut p = p.clone();
                        p.anchor -= start;
                        p
                    })
                    .collect();
                let mine = specs
                    .iter()
                    .filter(|c| pois.iter().any(|p| p.id == c.poi))
                    .map(|c| {
                        let mut c = c.clone();
                        c.at = c.at.map(|a| a - start);
                        c
                    })
                    .collect();
                let inst = instrument(piece, &mine, &pois)?;
                let from = d.annots.iter().map(|a| a.span.start).fold(d.span.start, usize::min);
                let to = d.span.start + d.text.trim_end().len();
                edits.push((from, to, strip_labels(&inst.text)));
                start += piece.len() + 2;
            }
        }
        edits.sort_by_key(|e| e.0);
        let src = &self.source.text;
        let mut out = String::with_capacity(src.len());
        let mut pos = 0;
        for (from, to, text) in edits {
            if from < pos {
                continue;
            }
            out.push_str(&src[pos..from]);
            out.push_str(&text);
            pos = to;
        }
        out.push_str(&src[pos..]);
        Ok(out)
    }

    /// Verified generated clauses plus targets, the input of the final pass.
    pub fn accepted(specs: &SpecSet) -> SpecSet {
        specs.filter(|c| c.status == Status::Verified)
    }
}

fn finish(text: String, clause_labels: BTreeMap<crate::spec::ClauseId, String>) -> InstrumentedSource {
    let mut label_lines = BTreeMap::new();
    for label in clause_labels.values() {
        if let Some(pos) = text.find(&format!("{label}:")) {
            label_lines.insert(label.clone(), text[..pos].matches('\n').count() + 1);
        }
    }
    InstrumentedSource {
        text,
        clause_labels,
        label_lines,
    }
}
