// SPDX-License-Identifier: Apache-2.0

//! Insertion and removal of ACSL annotation blocks in source text.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poi::PointOfInterest;
use crate::spec::{ClauseId, ClauseKind, PoiId, SpecSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttachmentError {
    #[error("clause {clause} attaches to unknown point of interest {poi}")]
    UnknownPoi { clause: ClauseId, poi: PoiId },
    #[error("assertion {0} has no program point")]
    MissingAssertPoint(ClauseId),
    #[error("clause {clause} anchor {offset} lies outside the text")]
    OutOfRange { clause: ClauseId, offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentedSource {
    pub text: String,
    pub clause_labels: BTreeMap<ClauseId, String>,
    /// 1-based line of each label in `text`.
    pub label_lines: BTreeMap<String, usize>,
}

/// Removes clause labels from instrumented text.
pub fn strip_labels(text: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"SPSN_\d+_\d+_\d+:\s*").unwrap())
        .replace_all(text, "")
        .into_owned()
}

pub fn clause_label(poi: PoiId, seq: usize) -> String {
    format!("SPSN_{}_{}_{}", poi.segment, poi.rank, seq)
}

/// Inserts every clause of `specs` before its point of interest.
///
/// Contract clauses go in one block before the function, loop invariants in
/// one block before the loop, assertions at their recorded offsets. A block
/// whose anchor starts its line is placed on a line of its own with the
/// anchor's indentation; otherwise it is placed inline.
pub fn instrument(
    segment_text: &str,
    specs: &SpecSet,
    pois: &[PointOfInterest],
) -> Result<InstrumentedSource, AttachmentError> {
    let by_id: BTreeMap<PoiId, &PointOfInterest> = pois.iter().map(|p| (p.id, p)).collect();
    let mut ordered: Vec<_> = specs.iter().collect();
    ordered.sort_by_key(|c| c.id);

    let mut seq: BTreeMap<PoiId, usize> = BTreeMap::new();
    let mut clause_labels = BTreeMap::new();
    // (offset, group) -> rendered clauses; group 0 = assertions, 1 = POI block
    let mut blocks: BTreeMap<(usize, u8), Vec<(ClauseKind, ClauseId, String)>> = BTreeMap::new();
    for c in ordered {
        let poi = by_id.get(&c.poi).ok_or(AttachmentError::UnknownPoi {
            clause: c.id,
            poi: c.poi,
        })?;
        let (offset, group) = if c.kind == ClauseKind::Assert {
            (c.at.ok_or(AttachmentError::MissingAssertPoint(c.id))?, 0)
        } else {
            (poi.anchor, 1)
        };
        if offset > segment_text.len() {
            return Err(AttachmentError::OutOfRange { clause: c.id, offset });
        }
        let n = seq.entry(c.poi).or_insert(0);
        let label = clause_label(c.poi, *n);
        *n += 1;
        let rendered = format!("{} {}: {};", c.kind.keyword(), label, c.predicate.trim());
        clause_labels.insert(c.id, label);
        blocks
            .entry((offset, group))
            .or_default()
            .push((c.kind, c.id, rendered));
    }

    let mut text = segment_text.to_string();
    // descending so earlier offsets stay valid; at equal offsets the POI
    // block is inserted first so the assertion block ends up before it
    for ((offset, _), mut clauses) in blocks.into_iter().rev() {
        clauses.sort_by_key(|(k, id, _)| (*k, *id));
        let line_start = text[..offset].rfind('\n').map(|i| i + 1).unwrap_or(0);
        let indent = &text[line_start..offset];
        if indent.chars().all(|c| c == ' ' || c == '\t') {
            let sep = format!("\n{indent}    ");
            let body = clauses.iter().map(|c| c.2.as_str()).collect::<Vec<_>>().join(&sep);
            let block = format!("{indent}/*@ {body} */\n");
            text.insert_str(line_start, &block);
        } else {
            let body = clauses.iter().map(|c| c.2.as_str()).collect::<Vec<_>>().join(" ");
            text.insert_str(offset, &format!("/*@ {body} */"));
        }
    }

    let mut label_lines = BTreeMap::new();
    for label in clause_labels.values() {
        if let Some(pos) = text.find(&format!("{label}:")) {
            let line = text[..pos].matches('\n').count() + 1;
            label_lines.insert(label.clone(), line);
        }
    }
    Ok(InstrumentedSource {
        text,
        clause_labels,
        label_lines,
    })
}

/// Wraps hand-written text whose labelled clauses (`kind SPSN_..: P;`) are
/// all to be checked; ids are assigned in order of appearance.
pub fn labeled_source(text: &str) -> InstrumentedSource {
    let mut clause_labels = BTreeMap::new();
    let mut label_lines = BTreeMap::new();
    let mut pos = 0;
    while let Some(k) = text[pos..].find("SPSN_") {
        let start = pos + k;
        let end = text[start..]
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .map_or(text.len(), |e| start + e);
        pos = end;
        if !text[end..].starts_with(':') {
            continue;
        }
        let label = text[start..end].to_string();
        if label_lines.contains_key(&label) {
            continue;
        }
        label_lines.insert(label.clone(), text[..start].matches('\n').count() + 1);
        clause_labels.insert(ClauseId(clause_labels.len() as u64), label);
    }
    InstrumentedSource {
        text: text.to_string(),
        clause_labels,
        label_lines,
    }
}

/// Removes all `/*@ ... */` and `//@ ...` annotations.
///
/// A block that occupies its own line (only whitespace before it, newline
/// right after) is removed together with that line. String and character
/// literals and ordinary comments are left untouched.
pub fn strip_instrumentation(text: &str) -> String {
    let b = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut copied = 0;
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => {
                let q = b[i];
                i += 1;
                while i < b.len() && b[i] != q && b[i] != b'\n' {
                    if b[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i += 1;
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                let end = text[i + 2..].find("*/").map(|k| i + 2 + k + 2).unwrap_or(b.len());
                if b.get(i + 2) == Some(&b'@') {
                    remove(text, &mut out, &mut copied, i, end);
                }
                i = end;
            }
            b'/' if b.get(i + 1) == Some(&b'/') => {
                let end = text[i..].find('\n').map(|k| i + k).unwrap_or(b.len());
                if b.get(i + 2) == Some(&b'@') {
                    remove(text, &mut out, &mut copied, i, end);
                }
                i = end;
            }
            _ => i += 1,
        }
    }
    out.push_str(&text[copied.min(text.len())..]);
    out
}

fn remove(text: &str, out: &mut String, copied: &mut usize, start: usize, end: usize) {
    let line_start = text[..start].rfind('\n').map(|k| k + 1).unwrap_or(0);
    let own_line = line_start >= *copied
        && text[line_start..start].chars().all(|c| c == ' ' || c == '\t')
        && text.as_bytes().get(end) == Some(&b'\n');
    if own_line {
        out.push_str(&text[*copied..line_start]);
        *copied = end + 1;
    } else {
        out.push_str(&text[*copied..start]);
        *copied = end;
    }
}
