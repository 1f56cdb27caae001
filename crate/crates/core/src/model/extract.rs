// SPDX-License-Identifier: Apache-2.0

//! Pulls ACSL clauses out of free-form model responses.

use tracing::debug;

use super::{ModelError, Purpose};
use crate::acsl::{parse_predicate, split_clauses, RawClause};

/// Contents of fenced code blocks, language tag removed.
fn fences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let Some(close) = after.find("```") else { break };
        let mut body = &after[..close];
        if let Some(nl) = body.find('\n') {
            let tag = body[..nl].trim();
            if !tag.contains(char::is_whitespace) && !tag.contains(';') {
                body = &body[nl + 1..];
            }
        }
        out.push(body);
        rest = &after[close + 3..];
    }
    out
}

/// Inner texts of `/*@ ... */` blocks.
fn annot_blocks(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("/*@") {
        let after = &rest[open + 3..];
        let Some(close) = after.find("*/") else { break };
        out.push(&after[..close]);
        rest = &after[close + 2..];
    }
    out
}

/// Extracts requires / ensures / loop invariant / assert clauses.
///
/// Fenced blocks are preferred; inside them `/*@ */` blocks are preferred
/// over raw text. Without fences, bare `/*@ */` blocks are used, then the
/// whole response. Clauses whose predicate does not parse are dropped.
pub fn extract_clauses(response: &str, purpose: Purpose) -> Result<Vec<RawClause>, ModelError> {
    let fenced = fences(response);
    let chunks: Vec<&str> = if !fenced.is_empty() {
        let inner: Vec<&str> = fenced.iter().flat_map(|f| annot_blocks(f)).collect();
        if inner.is_empty() {
            fenced
        } else {
            inner
        }
    } else {
        let blocks = annot_blocks(response);
        if blocks.is_empty() {
            vec![response]
        } else {
            blocks
        }
    };
    let mut out: Vec<RawClause> = Vec::new();
    for chunk in chunks {
        for c in split_clauses(chunk) {
            match c {
                Ok(c) => match parse_predicate(&c.predicate) {
                    Ok(_) => {
                        if !out.iter().any(|o| o.kind == c.kind && o.predicate == c.predicate) {
                            out.push(c);
                        }
                    }
                    Err(e) => debug!(predicate = %c.predicate, error = %e, "dropping unparsable clause"),
                },
                Err(e) => debug!(error = %e, "skipping piece"),
            }
        }
    }
    if out.is_empty() {
        debug!(?purpose, "no clauses extracted");
        return Err(ModelError::ExtractionEmpty);
    }
    Ok(out)
}
