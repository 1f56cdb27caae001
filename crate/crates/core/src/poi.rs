// SPDX-License-Identifier: Apache-2.0

//! Points of interest: function heads and loop heads, ranked in post-order.

use serde::{Deserialize, Serialize};

use crate::frontend::{parse_text, DeclId, Declaration, FunctionDef, ParseError, Stmt};
use crate::segmentation::Segment;
use crate::spec::PoiId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PoiKind {
    FunctionContract,
    LoopHead,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointOfInterest {
    pub id: PoiId,
    pub kind: PoiKind,
    /// Declaration id of the owning function in the source unit.
    pub owner: DeclId,
    pub owner_name: String,
    /// Child-index path from the function body root; empty for contracts.
    pub path: Vec<usize>,
    pub order_rank: usize,
    /// Post-order index among the loops of the owning function.
    pub loop_ordinal: Option<usize>,
    /// Byte offset in the segment code where the annotation block goes.
    pub anchor: usize,
}

impl PointOfInterest {
    pub fn describe(&self) -> String {
        match self.kind {
            PoiKind::FunctionContract => format!("contract of function `{}`", self.owner_name),
            PoiKind::LoopHead => format!(
                "loop #{} in function `{}`",
                self.loop_ordinal.unwrap_or(0) + 1,
                self.owner_name
            ),
        }
    }

    /// Identity that survives mutation of the code: owner, kind, loop ordinal.
    pub fn structural_key(&self) -> (String, PoiKind, Option<usize>) {
        (self.owner_name.clone(), self.kind, self.loop_ordinal)
    }
}

/// Extracts POIs of a segment in post-order rank order.
pub fn extract_points_of_interest(seg: &Segment) -> Result<Vec<PointOfInterest>, ParseError> {
    pois_of_code(seg, &seg.code)
}

/// Extracts POIs from `code`, an alternative text for `seg` (e.g. a variant).
pub fn pois_of_code(seg: &Segment, code: &str) -> Result<Vec<PointOfInterest>, ParseError> {
    let decls = parse_text(code, &seg.type_names)?;
    Ok(pois_of_decls(seg.id, &decls, |name| {
        seg.member_names.iter().position(|n| n == name).map(|i| seg.members[i])
    }))
}

/// Ranks POIs of already-parsed declarations; `owner_of` maps function names
/// to unit declaration ids (falling back to the local id).
pub fn pois_of_decls(
    segment: usize,
    decls: &[Declaration],
    owner_of: impl Fn(&str) -> Option<DeclId>,
) -> Vec<PointOfInterest> {
    let mut out = Vec::new();
    for d in decls {
        let Some(f) = d.function() else { continue };
        let owner = owner_of(&d.name).unwrap_or(d.id);
        let mut loops = Vec::new();
        for (i, s) in f.body.stmts.iter().enumerate() {
            post_order_loops(s, &mut vec![i], &mut loops);
        }
        for (ordinal, (path, anchor)) in loops.into_iter().enumerate() {
            let rank = out.len();
            out.push(PointOfInterest {
                id: PoiId { segment, rank },
                kind: PoiKind::LoopHead,
                owner,
                owner_name: d.name.clone(),
                path,
                order_rank: rank,
                loop_ordinal: Some(ordinal),
                anchor,
            });
        }
        let rank = out.len();
        out.push(PointOfInterest {
            id: PoiId { segment, rank },
            kind: PoiKind::FunctionContract,
            owner,
            owner_name: d.name.clone(),
            path: Vec::new(),
            order_rank: rank,
            loop_ordinal: None,
            anchor: d.span.start,
        });
    }
    out
}

fn post_order_loops(s: &Stmt, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, usize)>) {
    for (i, c) in s.children().into_iter().enumerate() {
        path.push(i);
        post_order_loops(c, path, out);
        path.pop();
    }
    if s.is_loop() {
        out.push((path.clone(), s.span.start));
    }
}

/// Finds the loop statement of `f` with the given post-order ordinal.
pub fn loop_by_ordinal(f: &FunctionDef, ordinal: usize) -> Option<(Vec<usize>, &Stmt)> {
    let mut loops = Vec::new();
    for (i, s) in f.body.stmts.iter().enumerate() {
        post_order_loops(s, &mut vec![i], &mut loops);
    }
    let (path, _) = loops.into_iter().nth(ordinal)?;
    let stmt = f.stmt_at(&path)?;
    Some((path, stmt))
}
