// SPDX-License-Identifier: Apache-2.0

//! Declaration dependency graph, SCC condensation, and segment ordering.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{strip_instrumentation, DeclId, DeclKind, Declaration};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentationError {
    #[error("duplicate declaration name `{0}`")]
    DuplicateName(String),
    #[error("segment {from} depends on unknown segment {to}")]
    DanglingDependency { from: usize, to: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub nodes: Vec<DeclId>,
    /// `(from, to)`: `from` references `to`.
    pub edges: BTreeSet<(DeclId, DeclId)>,
    /// Referenced names with no declaration in the unit.
    pub external: BTreeMap<DeclId, BTreeSet<String>>,
    pub names: BTreeMap<DeclId, String>,
    /// Annotation-free source text of each node.
    pub code: BTreeMap<DeclId, String>,
    pub type_names: BTreeSet<String>,
}

impl DependencyGraph {
    /// Graph over bare nodes `0..n`, for algorithms and tests.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            nodes: (0..n).map(DeclId).collect(),
            edges: edges.into_iter().map(|(a, b)| (DeclId(a), DeclId(b))).collect(),
            names: (0..n).map(|i| (DeclId(i), format!("n{i}"))).collect(),
            ..Default::default()
        }
    }

    fn successors(&self) -> BTreeMap<DeclId, Vec<DeclId>> {
        let mut m: BTreeMap<DeclId, Vec<DeclId>> = self.nodes.iter().map(|n| (*n, Vec::new())).collect();
        for (a, b) in &self.edges {
            m.entry(*a).or_default().push(*b);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: usize,
    pub members: Vec<DeclId>,
    pub member_names: Vec<String>,
    pub code: String,
    pub deps: BTreeSet<usize>,
    pub topo_rank: usize,
    pub external_refs: BTreeSet<String>,
    /// Typedef names visible to the segment code.
    pub type_names: BTreeSet<String>,
}

pub fn build_dependency_graph(decls: &[Declaration]) -> Result<DependencyGraph, SegmentationError> {
    let mut ordinary: BTreeMap<&str, DeclId> = BTreeMap::new();
    let mut tags: BTreeMap<&str, DeclId> = BTreeMap::new();
    for d in decls {
        for n in d.ordinary_names() {
            if ordinary.insert(n, d.id).is_some() {
                return Err(SegmentationError::DuplicateName(n.to_string()));
            }
        }
        for t in &d.tags {
            if tags.insert(t, d.id).is_some() {
                return Err(SegmentationError::DuplicateName(t.clone()));
            }
        }
    }
    let mut g = DependencyGraph::default();
    for d in decls {
        g.nodes.push(d.id);
        g.names.insert(d.id, d.name.clone());
        g.code.insert(d.id, strip_instrumentation(&d.text));
        if d.kind == DeclKind::TypeDef {
            g.type_names.extend(d.ordinary_names().into_iter().map(String::from));
        }
        let mut ext = BTreeSet::new();
        for r in &d.referenced_names {
            let targets: Vec<DeclId> = ordinary
                .get(r.as_str())
                .into_iter()
                .chain(tags.get(r.as_str()))
                .copied()
                .collect();
            if targets.is_empty() {
                ext.insert(r.clone());
            }
            for t in targets {
                g.edges.insert((d.id, t));
            }
        }
        if !ext.is_empty() {
            g.external.insert(d.id, ext);
        }
    }
    Ok(g)
}

/// Tarjan's algorithm; components are emitted dependencies-first.
fn tarjan(g: &DependencyGraph) -> Vec<Vec<DeclId>> {
    struct St {
        index: BTreeMap<DeclId, usize>,
        low: BTreeMap<DeclId, usize>,
        on_stack: BTreeSet<DeclId>,
        stack: Vec<DeclId>,
        next: usize,
        out: Vec<Vec<DeclId>>,
    }
    let succ = g.successors();
    let mut st = St {
        index: BTreeMap::new(),
        low: BTreeMap::new(),
        on_stack: BTreeSet::new(),
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    // explicit call stack: (node, next successor position)
    for &root in &g.nodes {
        if st.index.contains_key(&root) {
            continue;
        }
        let mut frames: Vec<(DeclId, usize)> = vec![(root, 0)];
        st.index.insert(root, st.next);
        st.low.insert(root, st.next);
        st.next += 1;
        st.stack.push(root);
        st.on_stack.insert(root);
        while let Some((v, pos)) = frames.last().copied() {
            let vs = &succ[&v];
            if pos < vs.len() {
                frames.last_mut().unwrap().1 += 1;
                let w = vs[pos];
                if !st.index.contains_key(&w) {
                    st.index.insert(w, st.next);
                    st.low.insert(w, st.next);
                    st.next += 1;
                    st.stack.push(w);
                    st.on_stack.insert(w);
                    frames.push((w, 0));
                } else if st.on_stack.contains(&w) {
                    let lw = st.index[&w];
                    let lv = st.low.get_mut(&v).unwrap();
                    *lv = (*lv).min(lw);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                let lv = st.low[&v];
                let lp = st.low.get_mut(&parent).unwrap();
                *lp = (*lp).min(lv);
            }
            if st.low[&v] == st.index[&v] {
                let mut comp = Vec::new();
                loop {
                    let w = st.stack.pop().unwrap();
                    st.on_stack.remove(&w);
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort();
                st.out.push(comp);
            }
        }
    }
    st.out
}

/// Condenses the graph into segments listed in dependency-first order.
pub fn compute_segments(graph: &DependencyGraph) -> Vec<Segment> {
    let comps = tarjan(graph);
    let mut seg_of: BTreeMap<DeclId, usize> = BTreeMap::new();
    for (i, c) in comps.iter().enumerate() {
        for d in c {
            seg_of.insert(*d, i);
        }
    }
    comps
        .iter()
        .enumerate()
        .map(|(i, members)| {
            let deps = graph
                .edges
                .iter()
                .filter(|(a, _)| seg_of[a] == i)
                .map(|(_, b)| seg_of[b])
                .filter(|s| *s != i)
                .collect();
            let code = members
                .iter()
                .filter_map(|m| graph.code.get(m))
                .map(|c| c.trim_end().to_string())
                .collect::<Vec<_>>()
                .join("\n\n");
            Segment {
                id: i,
                members: members.clone(),
                member_names: members.iter().map(|m| graph.names[m].clone()).collect(),
                code: if code.is_empty() { code } else { code + "\n" },
                deps,
                topo_rank: i,
                external_refs: members
                    .iter()
                    .filter_map(|m| graph.external.get(m))
                    .flatten()
                    .cloned()
                    .collect(),
                type_names: graph.type_names.clone(),
            }
        })
        .collect()
}

/// Transitive dependencies of `seg`, in topological order, excluding `seg`.
pub fn dependency_closure(seg: &Segment, all: &[Segment]) -> Result<Vec<Segment>, SegmentationError> {
    let by_id: BTreeMap<usize, &Segment> = all.iter().map(|s| (s.id, s)).collect();
    let mut seen = BTreeSet::new();
    let mut work: Vec<usize> = seg.deps.iter().copied().collect();
    let mut from = seg.id;
    while let Some(d) = work.pop() {
        let Some(s) = by_id.get(&d) else {
            return Err(SegmentationError::DanglingDependency { from, to: d });
        };
        if d != seg.id && seen.insert(d) {
            from = d;
            work.extend(s.deps.iter().copied());
        }
    }
    let mut out: Vec<Segment> = seen.into_iter().map(|i| by_id[&i].clone()).collect();
    out.sort_by_key(|s| s.topo_rank);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_unit, SourceUnit};

    fn segs(src: &str) -> (Vec<Declaration>, Vec<Segment>) {
        let d = parse_unit(&SourceUnit::new("t.c", src)).unwrap();
        let g = build_dependency_graph(&d).unwrap();
        (d, compute_segments(&g))
    }

    #[test]
    fn independent_functions() {
        let d = parse_unit(&SourceUnit::new("t.c", "int a(void){return 0;} int b(void){return 1;}")).unwrap();
        let g = build_dependency_graph(&d).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn chain_is_dependencies_first() {
        let (_, s) = segs("int c(void){return 0;}\nint b(void){return c();}\nint a(void){return b();}\n");
        let names: Vec<_> = s.iter().map(|s| s.member_names[0].as_str()).collect();
        assert_eq!(names, vec!["c", "b", "a"]);
        let closure = dependency_closure(&s[2], &s).unwrap();
        let cn: Vec<_> = closure.iter().map(|s| s.member_names[0].as_str()).collect();
        assert_eq!(cn, vec!["c", "b"]);
        assert!(dependency_closure(&s[0], &s).unwrap().is_empty());
    }

    #[test]
    fn mutual_recursion_is_one_segment() {
        let (_, s) = segs("int g(int);\nint f(int n){return n ? g(n-1) : 0;}\nint g(int n){return n ? f(n-1) : 1;}\n");
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].member_names, vec!["f", "g"]);
        assert!(s[0].deps.is_empty());
    }

    #[test]
    fn external_references_are_recorded_not_edges() {
        let d = parse_unit(&SourceUnit::new("t.c", "int f(int n){ return abs(n); }")).unwrap();
        let g = build_dependency_graph(&d).unwrap();
        assert!(g.edges.is_empty());
        let s = compute_segments(&g);
        assert!(s[0].external_refs.contains("abs"));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let d = parse_unit(&SourceUnit::new("t.c", "int x; int x;")).unwrap();
        assert_eq!(
            build_dependency_graph(&d),
            Err(SegmentationError::DuplicateName("x".into()))
        );
    }

    #[test]
    fn tag_and_typedef_share_a_name() {
        let (_, s) = segs("struct point { int x; };\ntypedef struct point point;\nint f(point *p){ return p->x; }\n");
        assert_eq!(s.len(), 3);
        assert_eq!(s[2].member_names, vec!["f"]);
    }

    #[test]
    fn segment_code_drops_annotations() {
        let (_, s) = segs("int f(int n) {\n  /*@ assert n == n; */\n  return n;\n}\n");
        assert_eq!(s[0].code, "int f(int n) {\n  return n;\n}\n");
    }

    #[test]
    fn dangling_dependency() {
        let mut s = vec![Segment {
            id: 0,
            members: vec![DeclId(0)],
            member_names: vec!["a".into()],
            code: String::new(),
            deps: [7].into_iter().collect(),
            topo_rank: 0,
            external_refs: BTreeSet::new(),
            type_names: BTreeSet::new(),
        }];
        let seg = s.remove(0);
        assert_eq!(
            dependency_closure(&seg, std::slice::from_ref(&seg)),
            Err(SegmentationError::DanglingDependency { from: 0, to: 7 })
        );
    }
}
