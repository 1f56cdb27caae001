// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::io::Write;

use proptest::prelude::*;

use specsyn::acsl::{dedup_key, split_clauses, ClauseKind};
use specsyn::config::{Overrides, RunConfig};
use specsyn::frontend::labeled_source;
use specsyn::model::{FnModel, LanguageModel, Prompt, Purpose, RecordingModel, ReplayModel, Transcript};
use specsyn::refinement::{round_seed, vdr_objective, VdrReport};
use specsyn::verifier::{MockVerifier, VerdictStatus, Verifier};

fn report(total: usize, refuted: usize) -> VdrReport {
    VdrReport {
        round: 0,
        total,
        refuted,
        rate: refuted as f64 / total as f64,
        undistinguished: Vec::new(),
        outcomes: Vec::new(),
        equivalent_excluded: 0,
        compile_failed: 0,
        seed: 0,
    }
}

const PREDICATES: &[&str] = &[
    "x >= 0",
    "\\result == x + 1",
    "(\\forall integer k; 0 <= k < n ==> a[k] == 0)",
    "\\forall integer k; 0 <= k < n ==> a[k] != 0",
    "\\result == 0 <==> (\\exists integer k; 0 <= k < n && a[k] < 0)",
    "\\valid_read(a + (0 .. n - 1))",
    "(x > 0 ? x : -x) >= 0",
];

proptest! {
    #[test]
    fn threshold_is_rate_at_least_t(total in 1usize..200, frac in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        let refuted = ((total as f64) * frac).floor() as usize;
        let r = report(total, refuted);
        prop_assert_eq!(vdr_objective(&r), total - refuted);
        prop_assert_eq!(r.meets(t), refuted as f64 / total as f64 >= t);
        // more refuted variants never lowers the rate
        if refuted < total {
            prop_assert!(report(total, refuted + 1).rate > r.rate);
        }
    }

    #[test]
    fn round_seeds_are_deterministic(seed: u64, seg in 0usize..8, rank in 0usize..8, round in 0usize..8) {
        prop_assert_eq!(round_seed(seed, seg, Some(rank), round), round_seed(seed, seg, Some(rank), round));
        prop_assert_ne!(round_seed(seed, seg, Some(rank), round), round_seed(seed, seg, Some(rank), round + 1));
    }

    #[test]
    fn clause_blocks_split_into_their_clauses(
        picks in prop::collection::vec((0usize..PREDICATES.len(), prop::bool::ANY), 1..6),
        sep in prop::sample::select(vec![" ", "\n    ", "\n  @ "]),
    ) {
        let text: String = picks
            .iter()
            .map(|(i, ens)| format!("{} {};", if *ens { "ensures" } else { "requires" }, PREDICATES[*i]))
            .collect::<Vec<_>>()
            .join(sep);
        let got = split_clauses(&text);
        prop_assert_eq!(got.len(), picks.len());
        for (g, (i, ens)) in got.iter().zip(&picks) {
            let g = g.as_ref().unwrap();
            let kind = if *ens { ClauseKind::Ensures } else { ClauseKind::Requires };
            prop_assert_eq!(g.kind, kind);
            prop_assert_eq!(dedup_key(g.kind, &g.predicate), dedup_key(kind, PREDICATES[*i]));
        }
    }

    #[test]
    fn spacing_does_not_change_dedup_key(i in 0usize..PREDICATES.len(), pad in "[ \n]{0,3}") {
        let spaced = PREDICATES[i].replace(' ', &format!(" {pad}"));
        prop_assert_eq!(dedup_key(ClauseKind::Ensures, &spaced), dedup_key(ClauseKind::Ensures, PREDICATES[i]));
    }

    /// `\result != k` for the identity function fails exactly at `x = k`
    /// when k is inside the explored range.
    #[test]
    fn mock_counterexample_is_the_violating_input(k in -12i64..12) {
        let text = format!("/*@ ensures SPSN_0_0_0: \\result != {k}; */\nint id(int x) {{ return x; }}\n");
        let v = MockVerifier::default().verify(&labeled_source(&text)).unwrap();
        if (-8..=8).contains(&k) {
            prop_assert_eq!(v[0].status, VerdictStatus::Unproved);
            prop_assert_eq!(v[0].diagnostic.clone(), format!("counterexample: x = {k}"));
        } else {
            prop_assert_eq!(v[0].status, VerdictStatus::Proved);
        }
    }

    #[test]
    fn transcripts_replay_what_was_recorded(users in prop::collection::vec("[a-z ]{0,12}", 1..8)) {
        let rec = RecordingModel::new(FnModel(|p: &Prompt| p.last_user().chars().rev().collect::<String>()), "t");
        let prompts: Vec<Prompt> = users.iter().map(|u| Prompt::new(Purpose::Generate, "sys", u.clone())).collect();
        let answers: Vec<String> = prompts.iter().map(|p| rec.complete(p).unwrap()).collect();
        let t = Transcript::parse(&rec.transcript().to_jsonl()).unwrap();
        let replay = ReplayModel::new(&t);
        for (p, a) in prompts.iter().zip(&answers) {
            prop_assert_eq!(&replay.complete(p).unwrap(), a);
        }
        prop_assert_eq!(replay.remaining(), 0);
    }

    /// Flags override the environment, which overrides the file.
    #[test]
    fn config_precedence(file in prop::option::of(1usize..9), env in prop::option::of(1usize..9), flag in prop::option::of(1usize..9)) {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        if let Some(v) = file {
            writeln!(f, "n_refine = {v}").unwrap();
        }
        let mut vars = BTreeMap::new();
        if let Some(v) = env {
            vars.insert("SPECSYN_N_REFINE".to_string(), v.to_string());
        }
        let flags = Overrides { n_refine: flag, ..Overrides::default() };
        let c = RunConfig::load(Some(f.path()), &vars, &flags).unwrap();
        prop_assert_eq!(c.n_refine, flag.or(env).or(file).unwrap_or(5));
    }
}
