// SPDX-License-Identifier: Apache-2.0

//! Specification clauses and deduplicated clause sets.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::acsl::dedup_key;
pub use crate::acsl::ClauseKind;

/// Identifies a point of interest: owning segment and post-order rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PoiId {
    pub segment: usize,
    pub rank: usize,
}

impl fmt::Display for PoiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.segment, self.rank)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClauseId(pub u64);

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Candidate,
    Verified,
    Refuted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Generated,
    Repaired,
    Refined,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecClause {
    pub id: ClauseId,
    pub kind: ClauseKind,
    pub predicate: String,
    pub poi: PoiId,
    pub status: Status,
    pub origin: Origin,
    /// Refinement round in which the clause was produced (0 = generation).
    pub round: usize,
    /// Byte offset in the segment code for `Assert` clauses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<usize>,
}

impl SpecClause {
    pub fn new(id: ClauseId, kind: ClauseKind, predicate: impl Into<String>, poi: PoiId, origin: Origin) -> Self {
        Self {
            id,
            kind,
            predicate: predicate.into(),
            poi,
            status: Status::Candidate,
            origin,
            round: 0,
            at: None,
        }
    }

    pub fn dedup_key(&self) -> String {
        let key = dedup_key(self.kind, &self.predicate);
        match self.at {
            Some(at) => format!("{} @{}:{}", key, self.poi, at),
            None => format!("{} @{}", key, self.poi),
        }
    }

    /// Moves a clause out of `Candidate`; other transitions are ignored.
    pub fn settle(&mut self, verified: bool) {
        if self.status == Status::Candidate {
            self.status = if verified { Status::Verified } else { Status::Refuted };
        }
    }

    pub fn render(&self) -> String {
        format!("{} {};", self.kind.keyword(), self.predicate.trim())
    }
}

/// Ordered clause collection without lexical duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecSet {
    pub clauses: Vec<SpecClause>,
    pub dedup_keys: BTreeSet<String>,
}

impl SpecSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `c` unless a clause with the same dedup key is present.
    pub fn insert(&mut self, c: SpecClause) -> bool {
        if self.dedup_keys.insert(c.dedup_key()) {
            self.clauses.push(c);
            true
        } else {
            false
        }
    }

    pub fn contains_key(&self, c: &SpecClause) -> bool {
        self.dedup_keys.contains(&c.dedup_key())
    }

    pub fn extend(&mut self, it: impl IntoIterator<Item = SpecClause>) {
        for c in it {
            self.insert(c);
        }
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SpecClause> {
        self.clauses.iter()
    }

    pub fn at_poi(&self, poi: PoiId) -> SpecSet {
        self.filter(|c| c.poi == poi)
    }

    pub fn filter(&self, f: impl Fn(&SpecClause) -> bool) -> SpecSet {
        let mut s = SpecSet::new();
        s.extend(self.clauses.iter().filter(|c| f(c)).cloned());
        s
    }

    pub fn remove(&mut self, id: ClauseId) -> Option<SpecClause> {
        let i = self.clauses.iter().position(|c| c.id == id)?;
        let c = self.clauses.remove(i);
        self.dedup_keys.remove(&c.dedup_key());
        Some(c)
    }

    pub fn get(&self, id: ClauseId) -> Option<&SpecClause> {
        self.clauses.iter().find(|c| c.id == id)
    }
}

impl FromIterator<SpecClause> for SpecSet {
    fn from_iter<I: IntoIterator<Item = SpecClause>>(iter: I) -> Self {
        let mut s = SpecSet::new();
        s.extend(iter);
        s
    }
}

impl<'a> IntoIterator for &'a SpecSet {
    type Item = &'a SpecClause;
    type IntoIter = std::slice::Iter<'a, SpecClause>;

    fn into_iter(self) -> Self::IntoIter {
        self.clauses.iter()
    }
}

/// Allocates clause ids in increasing order.
#[derive(Debug, Clone, Default)]
pub struct ClauseIds {
    next: u64,
}

impl ClauseIds {
    pub fn starting_at(next: u64) -> Self {
        Self { next }
    }

    pub fn fresh(&mut self) -> ClauseId {
        let id = ClauseId(self.next);
        self.next += 1;
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clause(id: u64, kind: ClauseKind, p: &str) -> SpecClause {
        SpecClause::new(ClauseId(id), kind, p, PoiId { segment: 0, rank: 0 }, Origin::Generated)
    }

    #[test]
    fn whitespace_duplicates_collapse() {
        let mut s = SpecSet::new();
        assert!(s.insert(clause(0, ClauseKind::Ensures, "\\result >= 0")));
        assert!(!s.insert(clause(1, ClauseKind::Ensures, "\\result>=0 ;")));
        assert!(s.insert(clause(2, ClauseKind::Requires, "\\result >= 0")));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn same_text_at_different_pois_is_kept() {
        let mut s = SpecSet::new();
        s.insert(clause(0, ClauseKind::Ensures, "x > 0"));
        let mut c = clause(1, ClauseKind::Ensures, "x > 0");
        c.poi.rank = 1;
        assert!(s.insert(c));
    }

    #[test]
    fn status_transitions_only_from_candidate() {
        let mut c = clause(0, ClauseKind::Ensures, "x > 0");
        c.settle(true);
        assert_eq!(c.status, Status::Verified);
        c.settle(false);
        assert_eq!(c.status, Status::Verified);
    }

    #[test]
    fn remove_frees_the_key() {
        let mut s = SpecSet::new();
        s.insert(clause(0, ClauseKind::Ensures, "x > 0"));
        s.remove(ClauseId(0));
        assert!(s.insert(clause(1, ClauseKind::Ensures, "x > 0")));
    }
}
