// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance checks, one line of output per criterion.

mod common;
mod oracles;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use specsyn::config::RunConfig;
use specsyn::eval::{self, CoverageMode};
use specsyn::events::{Event, MemorySink};
use specsyn::frontend::{labeled_source, Span};
use specsyn::model::{FnModel, Prompt, Purpose, RecordingModel, ReplayModel, Transcript};
use specsyn::mutation::{generate_variants, tce_classify, Catalog, Category, Equivalence, Toolchain, Variant};
use specsyn::poi::{loop_by_ordinal, PoiKind};
use specsyn::refinement::{vdr_objective, FixedVariants, MutationSource, VariantSample, VariantSource, VdrReport};
use specsyn::report::SynthesisReport;
use specsyn::segmentation::{compute_segments, DependencyGraph};
use specsyn::unit::AnalyzedUnit;
use specsyn::verifier::{MockDomain, MockVerifier, VerdictStatus, Verifier};

use common::{acsl, analyze, analyze_text, buffers_script, config, synthesize, synthesize_with, target_of};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn all_vdrs(r: &SynthesisReport) -> Vec<&VdrReport> {
    let mut out = Vec::new();
    for s in &r.segments {
        for p in &s.pois {
            out.extend(p.vdr_history());
        }
        out.extend(s.final_vdr.as_ref());
    }
    out
}

fn variant(seg: usize, id: &str, op: &str, category: Category, code: String) -> Variant {
    Variant {
        id: id.into(),
        segment_id: seg,
        operator_id: op.into(),
        category,
        site: Span::new(0, 0),
        line: 1,
        code,
        equivalence: Some(Equivalence::NonEquivalent),
    }
}

/// Final clauses of a report plus the input annotations, re-verified on the
/// whole unit.
fn reverify_final(unit: &AnalyzedUnit, report: &SynthesisReport) -> Result<(), String> {
    let (_, kept) = eval::generated_from_report(report);
    let mut specs = unit.targets.clone();
    specs.extend(kept.iter().cloned());
    let inst = unit.final_text(&specs).map_err(|e| e.to_string())?;
    let verdicts = MockVerifier::default().verify(&inst).map_err(|e| e.to_string())?;
    for v in &verdicts {
        ensure(v.status == VerdictStatus::Proved, || {
            format!("final clause {} is {:?}: {}", v.clause_id, v.status, v.diagnostic)
        })?;
    }
    ensure(verdicts.len() == specs.len(), || {
        format!("{} verdicts for {} clauses", verdicts.len(), specs.len())
    })
}

// ---------------------------------------------------------------------------

fn c1_scc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..200 {
        let n = rng.random_range(1..=12usize);
        let density = rng.random_range(0.0..0.35);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if rng.random_bool(density) {
                    edges.push((a, b));
                }
            }
        }
        let segs = compute_segments(&DependencyGraph::from_edges(n, edges.clone()));
        let expected = oracles::scc_partition(n, &edges);
        let got: BTreeSet<BTreeSet<usize>> = segs.iter().map(|s| s.members.iter().map(|d| d.0).collect()).collect();
        ensure(got == expected, || {
            format!("case {case}: partition {got:?} != {expected:?}")
        })?;
        let mut seg_of = vec![usize::MAX; n];
        for s in &segs {
            for m in &s.members {
                seg_of[m.0] = s.id;
            }
        }
        let rank: BTreeMap<usize, usize> = segs.iter().map(|s| (s.id, s.topo_rank)).collect();
        let ranks: BTreeSet<usize> = rank.values().copied().collect();
        ensure(ranks.len() == segs.len(), || format!("case {case}: duplicate ranks"))?;
        for (a, b) in &edges {
            let (sa, sb) = (seg_of[*a], seg_of[*b]);
            if sa != sb {
                ensure(rank[&sb] < rank[&sa], || {
                    format!("case {case}: n{b} not before its user n{a}")
                })?;
                let s = segs.iter().find(|s| s.id == sa).unwrap();
                ensure(s.deps.contains(&sb), || format!("case {case}: missing dependency"))?;
            }
        }
    }
    Ok("200 graphs match the reachability partition, dependencies first".into())
}

// ---------------------------------------------------------------------------

/// Random function whose loops are numbered in creation order; returns the
/// source and the loop numbers in the expected post-order.
fn nested_loop_function(rng: &mut ChaCha8Rng) -> (String, Vec<usize>) {
    fn block(rng: &mut ChaCha8Rng, depth: usize, next: &mut usize, post: &mut Vec<usize>, ind: usize) -> String {
        let pad = "    ".repeat(ind);
        let mut s = String::new();
        for _ in 0..rng.random_range(1..=3) {
            if depth < 3 && rng.random_bool(0.6) {
                let k = *next;
                *next += 1;
                let body = block(rng, depth + 1, next, post, ind + 1);
                match rng.random_range(0..3) {
                    0 => s.push_str(&format!("{pad}for (i{k} = 0; i{k} < n; i{k}++) {{\n{body}{pad}}}\n")),
                    1 => s.push_str(&format!(
                        "{pad}i{k} = 0;\n{pad}while (i{k} < n) {{\n{pad}    i{k}++;\n{body}{pad}}}\n"
                    )),
                    _ => s.push_str(&format!(
                        "{pad}i{k} = 0;\n{pad}do {{\n{pad}    i{k}++;\n{body}{pad}}} while (i{k} < n);\n"
                    )),
                }
                post.push(k);
            } else {
                s.push_str(&format!("{pad}s++;\n"));
            }
        }
        s
    }
    let mut next = 0;
    let mut post = Vec::new();
    let body = block(rng, 0, &mut next, &mut post, 1);
    let decls: String = (0..next).map(|k| format!("    int i{k};\n")).collect();
    (
        format!("int f(int n)\n{{\n    int s = 0;\n{decls}{body}    return s;\n}}\n"),
        post,
    )
}

fn c2_poi_order() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let re = Regex::new(r"i(\d+)").unwrap();
    let mut loops = 0;
    let mut deepest = 0;
    for case in 0..50 {
        let (src, expected) = nested_loop_function(&mut rng);
        let unit = analyze_text("gen.c", &src);
        let seg = &unit.segments[0];
        let pois = &unit.pois[0];
        ensure(pois.len() == expected.len() + 1, || {
            format!("case {case}: {} POIs\n{src}", pois.len())
        })?;
        let f = unit.decls.iter().find_map(|d| d.function()).unwrap();
        let mut got = Vec::new();
        for (i, p) in pois.iter().enumerate() {
            ensure(p.order_rank == i && p.id.rank == i, || {
                format!("case {case}: rank mismatch")
            })?;
            if i + 1 == pois.len() {
                ensure(p.kind == PoiKind::FunctionContract, || {
                    format!("case {case}: contract not last")
                })?;
                continue;
            }
            ensure(p.kind == PoiKind::LoopHead && p.loop_ordinal == Some(i), || {
                format!("case {case}: bad loop POI")
            })?;
            let k: usize = re.captures(&seg.code[p.anchor..]).unwrap()[1].parse().unwrap();
            got.push(k);
            let (path, _) = loop_by_ordinal(f, i).unwrap();
            ensure(path == p.path, || format!("case {case}: path mismatch"))?;
            deepest = deepest.max(p.path.len().div_ceil(2));
        }
        ensure(got == expected, || {
            format!("case {case}: order {got:?}, expected {expected:?}\n{src}")
        })?;
        loops += expected.len();
    }
    Ok(format!(
        "50 functions, {loops} loops, nesting up to {deepest}, inner loops first"
    ))
}

// ---------------------------------------------------------------------------

fn c3_mock_vs_enumerator() -> Outcome {
    let verifier = MockVerifier::default();
    let fixtures = oracles::verifier_fixtures();
    let mut clauses = 0;
    let mut refuted = 0;
    for fx in &fixtures {
        let text = fx.source();
        let got = verifier
            .verify(&labeled_source(&text))
            .map_err(|e| format!("{}: {e}", fx.name))?;
        let want = fx.expected();
        ensure(got.len() == want.len(), || {
            format!("{}: {} verdicts, expected {}", fx.name, got.len(), want.len())
        })?;
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            let g = (
                g.status,
                if g.status == VerdictStatus::Proved {
                    String::new()
                } else {
                    g.diagnostic.clone()
                },
            );
            ensure(&g == w, || {
                format!("{} clause {i}: mock {g:?}, enumerator {w:?}", fx.name)
            })?;
            clauses += 1;
            refuted += usize::from(w.0 != VerdictStatus::Proved);
        }
    }
    Ok(format!(
        "{} fixtures, {clauses} clauses ({refuted} with counterexamples) agree",
        fixtures.len()
    ))
}

// ---------------------------------------------------------------------------

fn differ_unit() -> AnalyzedUnit {
    analyze("bufs_differ.c")
}

fn differ_variants(unit: &AnalyzedUnit) -> FixedVariants {
    let code = &unit.segments[0].code;
    let ret2 = code.replacen("ret = 1;", "ret = 2;", 1);
    let eq = code.replacen("b1[i] != b2[i]", "b1[i] == b2[i]", 1);
    assert!(ret2 != *code && eq != *code);
    FixedVariants(BTreeMap::from([(
        0,
        vec![
            variant(0, "v-ret", "returned_assign_inc", Category::ReturnAlter, ret2),
            variant(0, "v-eq", "swap_ne_eq", Category::OperatorSwap, eq),
        ],
    )]))
}

const RANGE: &str = "ensures \\result == 0 || \\result == 1";
const IFF: &str = "ensures \\result == 0 <==> (\\forall integer k; 0 <= k < n ==> b1[k] == b2[k])";

fn differ_script(p: &Prompt) -> String {
    match (p.purpose, target_of(p)) {
        (Purpose::Sketch, _) => "P0: cells before i agree\nP1: 0 exactly when the buffers agree".into(),
        (_, "loop #1 in function `bufs_differ`") => acsl(&[
            "loop invariant 0 <= i <= n",
            "loop invariant \\forall integer k; 0 <= k < i ==> b1[k] == b2[k]",
        ]),
        (Purpose::Refine, _) if p.last_user().contains("ret = 2") => acsl(&[RANGE]),
        (Purpose::Refine, _) => acsl(&[IFF]),
        _ => acsl(&[
            "requires \\valid_read(b1 + (0 .. n - 1))",
            "requires \\valid_read(b2 + (0 .. n - 1))",
            "ensures \\result >= 0",
            IFF,
        ]),
    }
}

fn differ_run(t: f64) -> SynthesisReport {
    let unit = differ_unit();
    let cfg = RunConfig {
        t,
        n_refine: 3,
        ..RunConfig::default()
    };
    synthesize(&unit, &FnModel(differ_script), &differ_variants(&unit), &cfg)
}

fn check_vdr_arithmetic(r: &VdrReport) -> Result<(), String> {
    let refuted = r.outcomes.iter().filter(|o| o.refuted).count();
    ensure(r.total == r.outcomes.len() && r.total > 0, || {
        format!("total {} vs {} outcomes", r.total, r.outcomes.len())
    })?;
    ensure(r.refuted == refuted, || format!("refuted {} vs {refuted}", r.refuted))?;
    ensure(r.rate == r.refuted as f64 / r.total as f64, || {
        format!("rate {} != {}/{}", r.rate, r.refuted, r.total)
    })?;
    ensure(vdr_objective(r) == r.total - r.refuted, || "objective".into())?;
    ensure(r.undistinguished.len() == vdr_objective(r), || {
        "undistinguished count".into()
    })?;
    ensure(r.outcomes.iter().all(|o| o.refuted == !o.failing.is_empty()), || {
        "refuted flag".into()
    })
}

/// Rounds stop at the first one reaching `t`, or after `n_refine`.
fn check_exit(report: &SynthesisReport, t: f64, n_refine: usize) -> Result<(), String> {
    for s in &report.segments {
        for p in &s.pois {
            if p.refinement_skipped.is_some() {
                continue;
            }
            ensure(!p.rounds.is_empty() && p.rounds.len() <= n_refine, || {
                format!("{}: {} rounds", p.description, p.rounds.len())
            })?;
            let rates: Vec<f64> = p.rounds.iter().map(|r| r.vdr.as_ref().unwrap().rate).collect();
            for r in &rates[..rates.len() - 1] {
                ensure(*r < t, || format!("{}: continued after rate {r} >= {t}", p.description))?;
            }
            if rates.len() < n_refine {
                ensure(*rates.last().unwrap() >= t, || {
                    format!("{}: stopped early below {t}", p.description)
                })?;
            }
        }
    }
    Ok(())
}

fn c4_vdr_arithmetic() -> Outcome {
    ensure(RunConfig::default().t == 0.75, || "default threshold".into())?;
    let mut checked = 0;
    let mut cases: Vec<(SynthesisReport, f64, usize)> = Vec::new();
    for t in [0.5, 0.75, 1.0] {
        cases.push((differ_run(t), t, 3));
    }
    let cfg = config("buffers.toml");
    let unit = analyze("buffers.c");
    let replay = ReplayModel::load(&common::fixture("buffers.jsonl")).map_err(|e| e.to_string())?;
    let golden = synthesize(&unit, &replay, &MutationSource::from_config(&cfg).unwrap(), &cfg);
    cases.push((golden, cfg.t, cfg.n_refine));
    for (r, t, n) in &cases {
        for v in all_vdrs(r) {
            check_vdr_arithmetic(v)?;
            checked += 1;
        }
        check_exit(r, *t, *n)?;
    }
    // the boundary rate exits
    let half = &cases[0].0.segments[0].pois[1];
    let r0 = half.rounds[0].vdr.as_ref().unwrap();
    ensure(r0.rate == 0.5 && half.rounds.len() == 1, || {
        format!("t = 0.5: rate {} after {} rounds", r0.rate, half.rounds.len())
    })?;
    Ok(format!(
        "{checked} reports consistent, exit at rate >= t (0.5 boundary hit), default t = 0.75"
    ))
}

// ---------------------------------------------------------------------------

fn adversarial_script(counter: &AtomicUsize, p: &Prompt) -> String {
    if p.purpose == Purpose::Sketch {
        return "P0: adds one".into();
    }
    let k = counter.fetch_add(1, Ordering::SeqCst);
    acsl(&[&format!("ensures \\result == {}", 100 + k), "ensures \\result > x - 5"])
}

fn c5_budgets() -> Outcome {
    let unit = analyze_text("inc.c", "int inc(int x)\n{\n    return x + 1;\n}\n");
    let code = &unit.segments[0].code;
    let variants = FixedVariants(BTreeMap::from([(
        0,
        vec![
            variant(
                0,
                "v-sub",
                "swap_add_sub",
                Category::OperatorSwap,
                code.replace("x + 1", "x - 1"),
            ),
            variant(
                0,
                "v-two",
                "const_inc",
                Category::ConstantPerturb,
                code.replace("x + 1", "x + 2"),
            ),
        ],
    )]));
    let cfg = RunConfig::default();
    let counter = AtomicUsize::new(0);
    let rec = RecordingModel::new(FnModel(|p: &Prompt| adversarial_script(&counter, p)), "adversarial");
    let sink = MemorySink::default();
    let report = synthesize_with(&unit, &rec, &variants, &cfg, &sink);
    let poi = &report.segments[0].pois[0];
    ensure(poi.rounds.len() == 5, || format!("{} refine rounds", poi.rounds.len()))?;
    for r in &poi.rounds {
        ensure(r.model_calls == 5, || {
            format!("round {}: {} model calls", r.round, r.model_calls)
        })?;
    }
    let mut by_purpose: BTreeMap<String, usize> = BTreeMap::new();
    for e in sink.events() {
        if let Event::ModelCall { purpose, .. } = e {
            *by_purpose.entry(format!("{purpose:?}")).or_default() += 1;
        }
    }
    let want = BTreeMap::from([
        ("Generate".to_string(), 1),
        ("Refine".to_string(), 4),
        ("Repair".to_string(), 20),
        ("Sketch".to_string(), 1),
    ]);
    ensure(by_purpose == want, || format!("model calls by purpose {by_purpose:?}"))?;
    // replay reproduces the run without the live script
    let transcript = Transcript::parse(&rec.transcript().to_jsonl()).map_err(|e| e.to_string())?;
    let replay = ReplayModel::new(&transcript);
    let again = synthesize(&unit, &replay, &variants, &cfg);
    ensure(again.to_json() == report.to_json(), || "replay differs".into())?;
    ensure(replay.remaining() == 0, || {
        format!("{} responses unused", replay.remaining())
    })?;
    let (_, kept) = eval::generated_from_report(&report);
    ensure(!kept.is_empty(), || "nothing accepted".into())?;
    ensure(kept.iter().all(|c| c.predicate == "\\result > x - 5"), || {
        "a refuted clause was kept".into()
    })?;
    reverify_final(&unit, &report)?;
    Ok("5 rounds x 5 calls (1 generate, 4 refine, 20 repair); replay identical; kept clauses verify".into())
}

// ---------------------------------------------------------------------------

const LOOP_POOL: &[&str] = &[
    "loop invariant 0 <= i <= n",
    "loop invariant ret == 0",
    "loop invariant \\forall integer k; 0 <= k < i ==> b1[k] == b2[k]",
    "loop invariant i >= 0",
    "loop invariant i < n",
    "loop invariant ret == 1",
];
const CONTRACT_POOL: &[&str] = &[
    RANGE,
    IFF,
    "ensures \\result >= 0",
    "ensures \\result <= 1",
    "ensures \\result == 1",
    "ensures \\result == 0 ==> n >= 0",
    "ensures \\result == 1 ==> n > 0",
];

fn pool_script(run: u64, p: &Prompt) -> String {
    if p.purpose == Purpose::Sketch {
        return "P0: scan".into();
    }
    let seed = u64::from_str_radix(&p.digest()[..16], 16).unwrap() ^ run;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = if target_of(p).starts_with("loop") {
        LOOP_POOL
    } else {
        CONTRACT_POOL
    };
    let mut picked: Vec<&str> = Vec::new();
    if !target_of(p).starts_with("loop") && p.purpose == Purpose::Generate {
        picked.push("requires \\valid_read(b1 + (0 .. n - 1))");
        picked.push("requires \\valid_read(b2 + (0 .. n - 1))");
    }
    for _ in 0..rng.random_range(1..=2) {
        picked.push(pool[rng.random_range(0..pool.len())]);
    }
    acsl(&picked)
}

fn c6_monotonic() -> Outcome {
    let unit = differ_unit();
    let all = generate_variants(&unit.segments[0], &Catalog::builtin(), 12, 3).map_err(|e| e.to_string())?;
    let variants = FixedVariants(BTreeMap::from([(0, all)]));
    let cfg = RunConfig {
        t: 1.0,
        ..RunConfig::default()
    };
    let mut rounds = 0;
    let mut increases = 0;
    for run in 0..20u64 {
        let report = synthesize(&unit, &FnModel(|p: &Prompt| pool_script(run, p)), &variants, &cfg);
        for p in &report.segments[0].pois {
            let mut prev: Option<BTreeSet<String>> = None;
            for r in &p.rounds {
                let v = r.vdr.as_ref().unwrap();
                let refuted: BTreeSet<String> = v.outcomes.iter().filter(|o| o.refuted).map(|o| o.id.clone()).collect();
                if let Some(prev) = &prev {
                    ensure(prev.is_subset(&refuted), || {
                        format!(
                            "run {run}, {} round {}: {prev:?} not within {refuted:?}",
                            p.description, r.round
                        )
                    })?;
                    increases += usize::from(refuted.len() > prev.len());
                }
                prev = Some(refuted);
                rounds += 1;
            }
        }
    }
    Ok(format!(
        "20 runs, {rounds} rounds, refuted sets never shrink ({increases} strict increases)"
    ))
}

// ---------------------------------------------------------------------------

fn c7_golden() -> Outcome {
    let cfg = config("buffers.toml");
    let start = Instant::now();
    let mut outputs = Vec::new();
    let unit = analyze("buffers.c");
    for _ in 0..3 {
        let replay = ReplayModel::load(&common::fixture("buffers.jsonl")).map_err(|e| e.to_string())?;
        let report = synthesize(&unit, &replay, &MutationSource::from_config(&cfg).unwrap(), &cfg);
        ensure(replay.remaining() == 0, || "transcript not fully used".into())?;
        outputs.push(report);
    }
    let elapsed = start.elapsed();
    let json = outputs[0].to_json();
    ensure(outputs.iter().all(|r| r.to_json() == json), || {
        "reports differ across runs".into()
    })?;
    let report = &outputs[0];
    ensure(report.segments.iter().all(|s| s.error.is_none()), || {
        "segment error".into()
    })?;
    reverify_final(&unit, report)?;
    let mut rates = Vec::new();
    for s in &report.segments {
        let v = s.final_vdr.as_ref().ok_or("no final VDR")?;
        ensure(v.total <= cfg.mutation_budget && v.meets(0.75), || {
            format!("segment {}: {}/{}", s.id, v.refuted, v.total)
        })?;
        rates.push(format!("{}/{}", v.refuted, v.total));
    }
    let fp = &report.final_pass;
    ensure(fp.targets_total == 1 && fp.targets_proved == 1, || {
        format!("targets {}/{}", fp.targets_proved, fp.targets_total)
    })?;
    ensure(elapsed.as_secs_f64() < 60.0, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "final specs verify, final VDR {}, assert proved, 3 identical reports in {:.1}s",
        rates.join(" and "),
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------

fn c8_return_variant() -> Outcome {
    let report = differ_run(0.75);
    let poi = report.segments[0]
        .pois
        .iter()
        .find(|p| p.description == "contract of function `bufs_differ`")
        .ok_or("no contract POI")?;
    ensure(poi.rounds.len() >= 2, || format!("{} rounds", poi.rounds.len()))?;
    let (r0, r1) = (poi.rounds[0].vdr.as_ref().unwrap(), poi.rounds[1].vdr.as_ref().unwrap());
    ensure(r0.undistinguished == vec!["v-ret".to_string()], || {
        format!("round 0 undistinguished {:?}", r0.undistinguished)
    })?;
    ensure(!r1.undistinguished.contains(&"v-ret".to_string()), || {
        "return variant survives the refine round".into()
    })?;
    ensure(r1.rate > r0.rate, || format!("rate {} -> {}", r0.rate, r1.rate))?;
    let accepted: Vec<&str> = report
        .clauses
        .iter()
        .filter(|c| poi.rounds[1].accepted.contains(&c.id) && c.round == 1)
        .map(|c| c.predicate.as_str())
        .collect();
    ensure(accepted == vec!["\\result == 0 || \\result == 1"], || {
        format!("round 1 added {accepted:?}")
    })?;
    reverify_final(&differ_unit(), &report)?;
    Ok(format!(
        "return variant refuted after one refine round, VDR {} -> {}",
        r0.rate, r1.rate
    ))
}

// ---------------------------------------------------------------------------

/// Keeps every sampled variant so reports can be checked afterwards.
struct Recorded<S> {
    inner: S,
    seen: Mutex<BTreeMap<(usize, String), String>>,
}

impl<S: VariantSource> VariantSource for Recorded<S> {
    fn sample(
        &self,
        unit: &AnalyzedUnit,
        seg: usize,
        seed: u64,
    ) -> Result<VariantSample, specsyn::mutation::MutationError> {
        let s = self.inner.sample(unit, seg, seed)?;
        let mut seen = self.seen.lock().unwrap();
        for v in &s.variants {
            seen.insert((seg, v.id.clone()), v.code.clone());
        }
        Ok(s)
    }
}

fn c9_tce() -> Outcome {
    let tc = Toolchain::default();
    let plain = "int add(int a, int b)\n{\n    return a + b;\n}\n";
    match tce_classify(plain, plain, &tc) {
        Ok(Equivalence::Equivalent) => {}
        Ok(other) => return Err(format!("identical source classified {other:?}")),
        Err(e) => {
            eprintln!("warning: no usable C compiler ({e}); skipping");
            return Ok(format!("SKIPPED: no compiler ({e})"));
        }
    }
    let live = tce_classify(plain, &plain.replace("a + b", "a - b"), &tc).map_err(|e| e.to_string())?;
    ensure(live == Equivalence::NonEquivalent, || {
        format!("live + to - classified {live:?}")
    })?;
    let unit = analyze("buffers.c");
    let cfg = RunConfig {
        no_tce: false,
        ..config("buffers.toml")
    };
    let source = Recorded {
        inner: MutationSource::from_config(&cfg).unwrap(),
        seen: Mutex::new(BTreeMap::new()),
    };
    let report = synthesize(&unit, &FnModel(buffers_script), &source, &cfg);
    let seen = source.seen.lock().unwrap();
    let mut measured = 0;
    let mut excluded = 0;
    for s in &report.segments {
        let original = unit.compile_text(s.id, &unit.segments[s.id].code).unwrap();
        let mut vdrs: Vec<&VdrReport> = s.pois.iter().flat_map(|p| p.vdr_history()).collect();
        vdrs.extend(s.final_vdr.as_ref());
        for v in vdrs {
            excluded += v.equivalent_excluded;
            for o in &v.outcomes {
                let code = &seen[&(s.id, o.id.clone())];
                let text = unit.compile_text(s.id, code).unwrap();
                let e = tce_classify(&original, &text, &tc).map_err(|e| e.to_string())?;
                ensure(e != Equivalence::Equivalent, || {
                    format!("equivalent variant {} measured", o.id)
                })?;
                measured += 1;
            }
        }
    }
    Ok(format!("identical: Equivalent; live +/-: NonEquivalent; {measured} measured variants all non-equivalent ({excluded} excluded)"))
}

// ---------------------------------------------------------------------------

fn corpus_script(p: &Prompt) -> String {
    if p.purpose == Purpose::Sketch {
        return "P0: straightforward".into();
    }
    let clauses: &[&str] = match target_of(p) {
        "contract of function `inc`" => &["ensures \\result == x + 1", "ensures \\result == x"],
        "contract of function `max`" => &["ensures \\result >= a", "ensures \\result >= b", "ensures \\result > a"],
        "contract of function `clamp0`" => &["ensures \\result >= x && \\result >= 0"],
        "loop #1 in function `count`" => &["loop invariant 0 <= i", "loop invariant s == i"],
        "contract of function `count`" => &["requires n >= 0", "ensures \\result == n"],
        "contract of function `twice`" => &["ensures \\result == x + x", "ensures \\result == x"],
        "contract of function `g`" => &["ensures \\result == y + y"],
        other => panic!("unexpected target {other:?}"),
    };
    acsl(clauses)
}

/// Tallies precision straight from the report JSON.
fn json_precision(json: &str) -> (u64, u64) {
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    let mut verified = 0;
    let mut total = 0;
    for c in v["clauses"].as_array().unwrap() {
        if c["origin"] == "Target" {
            continue;
        }
        total += 1;
        verified += u64::from(c["status"] == "Verified");
    }
    (verified, total)
}

fn c10_metrics() -> Outcome {
    // name, precision, recall with entailment, recall textual
    let expected: [(&str, (u64, u64), (u64, u64), (u64, u64)); 5] = [
        ("inc", (1, 2), (1, 1), (1, 1)),
        ("max", (2, 3), (2, 3), (2, 3)),
        ("clamp0", (1, 1), (2, 2), (0, 2)),
        ("count", (4, 4), (3, 3), (3, 3)),
        ("twice", (2, 3), (2, 2), (0, 2)),
    ];
    let cfg = RunConfig::default();
    let verifier = MockVerifier::default();
    let domain = MockDomain::default();
    let (mut pv, mut pt, mut rc, mut rt) = (0, 0, 0, 0);
    for (name, prec, rec, textual) in expected {
        let subject = analyze(&format!("corpus/{name}.c"));
        let reference = analyze(&format!("corpus/{name}.gt.c"));
        let report = synthesize(&subject, &FnModel(corpus_script), &FixedVariants::default(), &cfg);
        let m = eval::evaluate(&subject, &reference, &report, &verifier, Some(&domain)).map_err(|e| e.to_string())?;
        ensure(m.precision == Ratio::new(prec.0, prec.1), || {
            format!("{name}: precision {}", m.precision)
        })?;
        ensure(m.recall == Ratio::new(rec.0, rec.1), || {
            format!("{name}: recall {}", m.recall)
        })?;
        ensure(m.coverage_mode == CoverageMode::Entailment, || {
            format!("{name}: mode {:?}", m.coverage_mode)
        })?;
        ensure(m.to_json().contains("\"coverage_mode\": \"entailment\""), || {
            format!("{name}: mode not disclosed")
        })?;
        let (v, t) = json_precision(&report.to_json());
        ensure(
            Ratio::new(v, t) == m.precision && (m.verified_total, m.generated_total) == (v, t),
            || format!("{name}: JSON tally {v}/{t}"),
        )?;
        let m2 = eval::evaluate(&subject, &reference, &report, &verifier, None).map_err(|e| e.to_string())?;
        ensure(m2.recall == Ratio::new(textual.0, textual.1), || {
            format!("{name}: textual recall {}", m2.recall)
        })?;
        ensure(m2.coverage_mode == CoverageMode::Textual, || {
            format!("{name}: textual mode {:?}", m2.coverage_mode)
        })?;
        if name == "twice" {
            ensure(m.targets_total == 1 && m.targets_proved == 1, || {
                format!("{name}: targets {}/{}", m.targets_proved, m.targets_total)
            })?;
        }
        pv += m.verified_total;
        pt += m.generated_total;
        rc += m.gt_covered;
        rt += m.gt_total;
    }
    ensure(Ratio::new(pv, pt) == Ratio::new(10, 13), || {
        format!("corpus precision {pv}/{pt}")
    })?;
    ensure(Ratio::new(rc, rt) == Ratio::new(10, 11), || {
        format!("corpus recall {rc}/{rt}")
    })?;
    Ok("per-file and corpus precision 10/13, recall 10/11 (entailment; textual disclosed separately)".into())
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("segmentation matches an SCC oracle", c1_scc),
        ("points of interest in post-order", c2_poi_order),
        (
            "mock verifier agrees with exhaustive enumeration",
            c3_mock_vs_enumerator,
        ),
        ("VDR arithmetic and threshold exit", c4_vdr_arithmetic),
        ("repair and refine budgets under an adversarial model", c5_budgets),
        ("refinement never loses distinguished variants", c6_monotonic),
        ("golden replay", c7_golden),
        ("return-value variant refuted by refinement", c8_return_variant),
        ("equivalence filtering", c9_tce),
        ("precision and recall", c10_metrics),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|s| s == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
