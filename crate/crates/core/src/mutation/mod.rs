// SPDX-License-Identifier: Apache-2.0

//! Semantic mutation of segments and trivial-compiler-equivalence filtering.

mod catalog;
mod sites;
mod tce;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

use crate::frontend::{parse_text, ParseError, Span};
use crate::poi::pois_of_code;
use crate::segmentation::Segment;

pub use catalog::{Catalog, Category, MutationOperator, Rule};
pub use sites::{edits_for, Edit};
pub use tce::{filter_non_equivalent, tce_classify, FilterOutcome, TceError, Toolchain};

#[derive(Debug, Error)]
pub enum MutationError {
    #[error("segment {0} has no applicable mutation sites")]
    NoApplicableSites(usize),
    #[error("bad mutation catalog: {0}")]
    Catalog(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Equivalence {
    NonEquivalent,
    Equivalent,
    CompileFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub id: String,
    pub segment_id: usize,
    pub operator_id: String,
    pub category: Category,
    /// Replaced byte range of the original segment code.
    pub site: Span,
    pub line: usize,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<Equivalence>,
}

/// All (operator, edit) pairs applicable to `code`, catalog order then source order.
pub fn applicable_pairs(code: &str, seg: &Segment, catalog: &Catalog) -> Result<Vec<(usize, Edit)>, MutationError> {
    let decls = parse_text(code, &seg.type_names)?;
    let mut out = Vec::new();
    for (i, op) in catalog.operators.iter().enumerate() {
        for e in edits_for(op, code, &decls) {
            out.push((i, e));
        }
    }
    Ok(out)
}

fn splice(code: &str, e: &Edit) -> String {
    format!("{}{}{}", &code[..e.span.start], e.text, &code[e.span.end..])
}

/// Applies an edit and checks the result: it must parse, differ from the
/// original, and keep the segment's points of interest.
fn apply_checked(seg: &Segment, e: &Edit, keys: &[(String, crate::poi::PoiKind, Option<usize>)]) -> Option<String> {
    let code = splice(&seg.code, e);
    if code == seg.code {
        return None;
    }
    let pois = pois_of_code(seg, &code).ok()?;
    let same = pois.len() == keys.len() && pois.iter().zip(keys).all(|(p, k)| &p.structural_key() == k);
    same.then_some(code)
}

/// Samples up to `budget` distinct valid variants of `seg`, uniformly over
/// applicable (operator, site) pairs, without replacement.
pub fn generate_variants(
    seg: &Segment,
    catalog: &Catalog,
    budget: usize,
    seed: u64,
) -> Result<Vec<Variant>, MutationError> {
    let pairs = applicable_pairs(&seg.code, seg, catalog)?;
    if pairs.is_empty() {
        return Err(MutationError::NoApplicableSites(seg.id));
    }
    let keys: Vec<_> = pois_of_code(seg, &seg.code)?
        .iter()
        .map(|p| p.structural_key())
        .collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut chosen: Vec<(usize, String)> = Vec::new();
    for i in order {
        if chosen.len() >= budget {
            break;
        }
        let Some(code) = apply_checked(seg, &pairs[i].1, &keys) else {
            debug!(pair = i, "discarding invalid mutation");
            continue;
        };
        if seen.insert(code.clone()) {
            chosen.push((i, code));
        }
    }
    chosen.sort_by_key(|(i, _)| *i);
    Ok(chosen
        .into_iter()
        .enumerate()
        .map(|(n, (i, code))| {
            let (op, e) = &pairs[i];
            let op = &catalog.operators[*op];
            Variant {
                id: format!("v{n}"),
                segment_id: seg.id,
                operator_id: op.id.clone(),
                category: op.category,
                site: e.span,
                line: seg.code[..e.span.start].matches('\n').count() + 1,
                code,
                equivalence: None,
            }
        })
        .collect())
}
