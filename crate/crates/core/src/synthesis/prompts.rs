// SPDX-License-Identifier: Apache-2.0

//! Prompt templates and context assembly.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

pub use crate::frontend::strip_labels;
use crate::frontend::{instrument, AttachmentError};
use crate::poi::{PoiKind, PointOfInterest};
use crate::spec::{ClauseId, ClauseKind, Origin, SpecClause, SpecSet};
use crate::unit::{AnalyzedUnit, UnitError};

pub const INFILL: &str = "/* >>>INFILL<<< */";

pub const ROLE_HEADER: &str = "You are an expert in deductive verification of C programs with ACSL \
specifications. You write precise, verifiable ACSL clauses.";

const ANSWER_FORMAT: &str = "Answer with the clauses in a single ```acsl fenced block, one clause per line, \
each terminated by a semicolon.";

fn tag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[-*#>]+\s*)?\**P(\d+)\**\s*[:.)\-]").unwrap())
}

/// Segment code with `specs` instrumented and labels removed. When `target`
/// is given, its annotation position is marked with the infill placeholder.
pub fn show_segment(
    unit: &AnalyzedUnit,
    seg: usize,
    specs: &SpecSet,
    target: Option<&PointOfInterest>,
) -> Result<String, AttachmentError> {
    let mut shown = specs.filter(|c| c.poi.segment == seg);
    if let Some(p) = target {
        // sorts last in its block: maximal id and the last kind at the POI
        let kind = match p.kind {
            PoiKind::FunctionContract => ClauseKind::Ensures,
            PoiKind::LoopHead => ClauseKind::LoopInvariant,
        };
        shown.insert(SpecClause::new(
            ClauseId(u64::MAX),
            kind,
            "__INFILL__",
            p.id,
            Origin::Generated,
        ));
    }
    let inst = instrument(&unit.segments[seg].code, &shown, &unit.pois[seg])?;
    let mut text = strip_labels(&inst.text);
    if let Some(p) = target {
        let kind = match p.kind {
            PoiKind::FunctionContract => "ensures",
            PoiKind::LoopHead => "loop invariant",
        };
        let clause = format!("{kind} __INFILL__;");
        let at = text.find(&clause).expect("sentinel is instrumented");
        if text[..at].ends_with("/*@ ") && text[at + clause.len()..].starts_with(" */") {
            text.replace_range(at - 4..at + clause.len() + 3, INFILL);
        } else {
            let cut_from = text[..at].trim_end().len();
            text.replace_range(cut_from..at + clause.len(), "");
            let block = text[..cut_from].rfind("/*@").expect("block start");
            let line_start = text[..block].rfind('\n').map_or(0, |i| i + 1);
            let indent = &text[line_start..block];
            let marker = if indent.chars().all(char::is_whitespace) {
                format!("{INFILL}\n{indent}")
            } else {
                format!("{INFILL} ")
            };
            text.insert_str(block, &marker);
        }
    }
    Ok(text)
}

/// Code of the dependency closure of `seg`, dependencies first, with their
/// accepted clauses instrumented.
pub fn show_dependencies(unit: &AnalyzedUnit, seg: usize, specs: &SpecSet) -> Result<String, UnitError> {
    let closure = crate::segmentation::dependency_closure(&unit.segments[seg], &unit.segments)?;
    let mut parts = Vec::new();
    for d in closure {
        parts.push(show_segment(unit, d.id, specs, None)?);
    }
    Ok(parts.join("\n"))
}

pub fn poi_tag(p: &PointOfInterest) -> String {
    format!("P{}", p.id.rank)
}

pub fn sketch_prompt(code: &str, deps: &str, pois: &[PointOfInterest]) -> String {
    let mut s = format!(
        "Consider the following C program segment:\n```c\n{code}\n```\n\
         Your task is to write a specification sketch for this segment: a plan describing the \
         specifications it needs.\n\
         1. For every point of interest listed below, analyze the expected number, kind and meaning of \
         the ACSL clauses at that location.\n\
         2. Be specific, referring to the code and to what each clause should establish.\n\
         3. Take the dependencies between specifications into account, in particular what is needed \
         to verify higher-level specifications and the assertions in the code.\n\
         Points of interest:\n"
    );
    for p in pois {
        s.push_str(&format!("- {}: {}\n", poi_tag(p), p.describe()));
    }
    s.push_str("Start the notes for each point of interest on a new line beginning with its tag, such as `P0:`.\n");
    if !deps.trim().is_empty() {
        s.push_str(&format!(
            "You might need the following code segments as dependencies:\n```c\n{deps}\n```\n"
        ));
    }
    s
}

/// Per-POI notes: lines following a `P<rank>:` tag up to the next tag.
pub fn parse_hints(text: &str, ranks: impl IntoIterator<Item = usize>) -> BTreeMap<usize, String> {
    let mut hints: BTreeMap<usize, String> = ranks.into_iter().map(|r| (r, String::new())).collect();
    let mut cur: Option<usize> = None;
    for line in text.lines() {
        if let Some(c) = tag_re().captures(line) {
            let rank: usize = c[1].parse().unwrap_or(usize::MAX);
            cur = hints.contains_key(&rank).then_some(rank);
            if let Some(r) = cur {
                let rest = line[c.get(0).unwrap().end()..].trim();
                if !rest.is_empty() {
                    hints.get_mut(&r).unwrap().push_str(rest);
                }
            }
            continue;
        }
        if let Some(r) = cur {
            let h = hints.get_mut(&r).unwrap();
            if !line.trim().is_empty() {
                if !h.is_empty() {
                    h.push('\n');
                }
                h.push_str(line.trim());
            }
        }
    }
    hints
}

fn kind_instruction(p: &PointOfInterest) -> &'static str {
    match p.kind {
        PoiKind::FunctionContract => "Give `requires` and `ensures` clauses forming the contract of the function.",
        PoiKind::LoopHead => {
            "Give `loop invariant` clauses for the loop that hold on entry and are preserved by every iteration."
        }
    }
}

pub fn generation_prompt(sketch: &str, code: &str, poi: &PointOfInterest, hint: &str, deps: &str) -> String {
    let mut s = String::new();
    s.push_str("## Specification sketch\n");
    s.push_str(if sketch.trim().is_empty() {
        "(none)"
    } else {
        sketch.trim()
    });
    s.push_str("\n\n## Target segment\n");
    s.push_str(&format!(
        "Target: {}\nThe target location is marked with `{INFILL}`.\n",
        poi.describe()
    ));
    s.push_str(&format!("```c\n{code}\n```\n\n## Instructions\n"));
    s.push_str("Write ACSL clauses for the marked location. ");
    s.push_str(kind_instruction(poi));
    s.push_str(" The clauses must be verifiable on the code as written. ");
    if !hint.trim().is_empty() {
        s.push_str(&format!("Notes from the sketch for this location: {}. ", hint.trim()));
    }
    s.push_str(ANSWER_FORMAT);
    s.push_str("\n\n## Dependencies\n");
    if deps.trim().is_empty() {
        s.push_str("(none)\n");
    } else {
        s.push_str(&format!("```c\n{deps}\n```\n"));
    }
    s
}

/// A clause that failed, for repair and refinement prompts.
pub struct Failure {
    pub clause: String,
    pub diagnostic: String,
}

pub fn repair_prompt(
    poi: &PointOfInterest,
    failures: &[Failure],
    extraction_failed: bool,
    accepted: &[String],
) -> String {
    let mut s = String::new();
    if extraction_failed {
        s.push_str("Your previous answer contained no usable ACSL clauses.\n");
    }
    if !failures.is_empty() {
        s.push_str("The following clauses could not be verified:\n");
        for f in failures {
            s.push_str(&format!("- `{}`: {}\n", f.clause, f.diagnostic));
        }
    }
    if !accepted.is_empty() {
        s.push_str("Clauses already verified at this location:\n");
        for a in accepted {
            s.push_str(&format!("- `{a}`\n"));
        }
    }
    s.push_str(&format!(
        "Analyze the errors and give corrected clauses for {}. {} {ANSWER_FORMAT}\n",
        poi.describe(),
        kind_instruction(poi)
    ));
    s
}

pub struct RefineView<'a> {
    pub poi: &'a PointOfInterest,
    pub current: &'a [String],
    pub variant_id: &'a str,
    pub diff: &'a str,
    pub variant_code: &'a str,
    /// Evidence from variants the current clauses already refute.
    pub distinguished: &'a [String],
}

pub fn refine_prompt(v: &RefineView<'_>) -> String {
    let mut s = format!(
        "The clauses for {} verify on the original segment, but they also hold on variant {} below, \
         which is not equivalent to the original.\n",
        v.poi.describe(),
        v.variant_id
    );
    s.push_str("Current clauses:\n");
    for c in v.current {
        s.push_str(&format!("- `{c}`\n"));
    }
    s.push_str(&format!(
        "Difference between the original and the variant:\n```diff\n{}```\n",
        v.diff
    ));
    s.push_str(&format!("Full variant:\n```c\n{}\n```\n", v.variant_code));
    if !v.distinguished.is_empty() {
        s.push_str("Variants already distinguished by the current clauses:\n");
        for d in v.distinguished {
            s.push_str(&format!("- {d}\n"));
        }
    }
    s.push_str(&format!(
        "Analyze the syntactic and semantic differences between the variant and the original and propose \
         new clauses for {} that hold on the original and capture these differences. Only `ensures` and \
         `loop invariant` clauses are accepted in this step. {ANSWER_FORMAT}\n",
        v.poi.describe()
    ));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::SourceUnit;
    use crate::spec::{ClauseIds, Status};

    fn unit(src: &str) -> AnalyzedUnit {
        AnalyzedUnit::analyze(SourceUnit::new("t.c", src), &mut ClauseIds::default()).unwrap()
    }

    #[test]
    fn trivial_function_has_one_marker() {
        let u = unit("int inc(int x)\n{\n    return x + 1;\n}\n");
        let p = &u.pois[0][0];
        let code = show_segment(&u, 0, &SpecSet::new(), Some(p)).unwrap();
        assert_eq!(code.matches(INFILL).count(), 1);
        assert!(code.starts_with(&format!("{INFILL}\nint inc")));
        let body = generation_prompt("", &code, p, "", "");
        assert_eq!(body.matches(INFILL).count(), 2);
        assert!(body.contains("Target: contract of function `inc`"));
    }

    #[test]
    fn marker_shares_a_block_with_existing_clauses() {
        let u = unit("/*@ requires x < 100; */\nint inc(int x)\n{\n    return x + 1;\n}\n");
        let p = &u.pois[0][0];
        let code = show_segment(&u, 0, &u.targets, Some(p)).unwrap();
        assert!(
            code.starts_with(&format!("{INFILL}\n/*@ requires x < 100; */\nint inc")),
            "{code}"
        );
    }

    #[test]
    fn dependencies_carry_verified_clauses_in_order() {
        let u = unit("int a(int x) { return x; }\nint b(int x) { return a(x); }\nint c(int x) { return b(x); }\n");
        let mut specs = SpecSet::new();
        let mut c = SpecClause::new(
            ClauseId(9),
            ClauseKind::Ensures,
            "\\result == x",
            u.pois[0][0].id,
            Origin::Generated,
        );
        c.status = Status::Verified;
        specs.insert(c);
        let deps = show_dependencies(&u, 2, &specs).unwrap();
        let ia = deps.find("int a(").unwrap();
        let ib = deps.find("int b(").unwrap();
        assert!(ia < ib);
        assert!(deps.contains("/*@ ensures \\result == x; */"));
        assert!(!deps.contains("SPSN_"));
    }

    #[test]
    fn hints_by_tag() {
        let h = parse_hints(
            "Overview.\nP0: invariant on i\n  bounds 0..n\n**P1**: contract\n- P7: ignored\n",
            [0, 1, 2],
        );
        assert_eq!(h[&0], "invariant on i\nbounds 0..n");
        assert_eq!(h[&1], "contract");
        assert_eq!(h[&2], "");
    }
}
