// SPDX-License-Identifier: Apache-2.0

//! Trivial compiler equivalence: variants whose optimized object code is
//! byte-identical to the original's are equivalent.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::warn;

use super::{Equivalence, Variant};

#[derive(Debug, Error)]
pub enum TceError {
    #[error("C compiler `{0}` not found")]
    ToolchainMissing(String),
    #[error("original segment does not compile: {0}")]
    OriginalFailed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Toolchain {
    /// Compiler command; extra words are passed as leading arguments.
    pub cc: String,
    pub flags: Vec<String>,
}

impl Default for Toolchain {
    fn default() -> Self {
        Self {
            cc: "cc".into(),
            flags: ["-O2", "-c", "-g0", "-fno-ident", "-fkeep-static-functions", "-w"]
                .map(String::from)
                .to_vec(),
        }
    }
}

impl Toolchain {
    fn command(&self) -> Command {
        let mut words = self.cc.split_whitespace();
        let mut c = Command::new(words.next().unwrap_or("cc"));
        c.args(words);
        c
    }

    /// Target triple reported by the compiler, if it answers `-dumpmachine`.
    pub fn target(&self) -> Option<String> {
        let out = self.command().arg("-dumpmachine").output().ok()?;
        out.status
            .success()
            .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
    }

    /// Object bytes for `text`, or `None` when compilation fails. Results
    /// are memoized per process.
    fn compile(&self, text: &str) -> Result<Option<Vec<u8>>, TceError> {
        static CACHE: OnceLock<Mutex<HashMap<[u8; 32], Option<Vec<u8>>>>> = OnceLock::new();
        let mut h = Sha256::new();
        h.update(self.cc.as_bytes());
        for f in &self.flags {
            h.update([0]);
            h.update(f.as_bytes());
        }
        h.update([1]);
        h.update(text.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(hit) = cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let obj = self.compile_uncached(text)?;
        cache.lock().unwrap().insert(key, obj.clone());
        Ok(obj)
    }

    fn compile_uncached(&self, text: &str) -> Result<Option<Vec<u8>>, TceError> {
        let dir = tempfile::tempdir()?;
        let src = dir.path().join("unit.c");
        let obj = dir.path().join("unit.o");
        std::fs::write(&src, text)?;
        let out = self
            .command()
            .args(&self.flags)
            .arg(&src)
            .arg("-o")
            .arg(&obj)
            .current_dir(dir.path())
            .output()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => TceError::ToolchainMissing(self.cc.clone()),
                _ => TceError::Io(e),
            })?;
        if !out.status.success() {
            return Ok(None);
        }
        Ok(Some(read(&obj)?))
    }
}

fn read(p: &Path) -> Result<Vec<u8>, TceError> {
    Ok(std::fs::read(p)?)
}

/// Compares compiled `original` and `variant` texts.
pub fn tce_classify(original: &str, variant: &str, tc: &Toolchain) -> Result<Equivalence, TceError> {
    let orig = tc
        .compile(original)?
        .ok_or_else(|| TceError::OriginalFailed("compiler rejected the original".into()))?;
    classify_against(&orig, variant, tc)
}

fn classify_against(orig: &[u8], variant: &str, tc: &Toolchain) -> Result<Equivalence, TceError> {
    Ok(match tc.compile(variant)? {
        None => Equivalence::CompileFailed,
        Some(obj) if obj == orig => Equivalence::Equivalent,
        Some(_) => Equivalence::NonEquivalent,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub kept: Vec<Variant>,
    pub equivalent: usize,
    pub compile_failed: usize,
    pub warnings: Vec<String>,
}

/// Classifies each variant and keeps the non-equivalent ones, order preserved.
///
/// `texts` maps a variant to the text handed to the compiler (the variant
/// code with its dependencies); `original` is the same for the original.
/// Without a usable toolchain every variant is kept as non-equivalent and
/// a warning is recorded.
pub fn filter_non_equivalent(
    variants: Vec<Variant>,
    original: &str,
    texts: impl Fn(&Variant) -> String + Sync,
    tc: &Toolchain,
) -> FilterOutcome {
    let fallback = |variants: Vec<Variant>, why: String| {
        warn!("{why}; treating all variants as non-equivalent");
        FilterOutcome {
            kept: variants
                .into_iter()
                .map(|mut v| {
                    v.equivalence = Some(Equivalence::NonEquivalent);
                    v
                })
                .collect(),
            warnings: vec![format!("{why}; equivalence not checked")],
            ..Default::default()
        }
    };
    let orig = match tc.compile(original) {
        Ok(Some(o)) => o,
        Ok(None) => return fallback(variants, "original segment does not compile".into()),
        Err(e) => return fallback(variants, e.to_string()),
    };
    let classes: Vec<Result<Equivalence, TceError>> = variants
        .par_iter()
        .map(|v| classify_against(&orig, &texts(v), tc))
        .collect();
    let mut out = FilterOutcome::default();
    for (mut v, c) in variants.into_iter().zip(classes) {
        let c = match c {
            Ok(c) => c,
            Err(e) => {
                out.warnings.push(format!("{}: {e}; kept as non-equivalent", v.id));
                Equivalence::NonEquivalent
            }
        };
        v.equivalence = Some(c);
        match c {
            Equivalence::NonEquivalent => out.kept.push(v),
            Equivalence::Equivalent => out.equivalent += 1,
            Equivalence::CompileFailed => out.compile_failed += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toolchain() -> Option<Toolchain> {
        let tc = Toolchain::default();
        tc.target().map(|_| tc)
    }

    #[test]
    fn reflexive_and_live_change() {
        let Some(tc) = toolchain() else {
            eprintln!("warning: no C compiler, skipping");
            return;
        };
        let orig = "int f(int x) { int y = x + 3; return y * 2; }\n";
        assert_eq!(tce_classify(orig, orig, &tc).unwrap(), Equivalence::Equivalent);
        let live = "int f(int x) { int y = x - 3; return y * 2; }\n";
        assert_eq!(tce_classify(orig, live, &tc).unwrap(), Equivalence::NonEquivalent);
        let dead = "int f(int x) { int y = x + 3; y = y; return y * 2; }\n";
        assert_eq!(tce_classify(orig, dead, &tc).unwrap(), Equivalence::Equivalent);
        assert_eq!(
            tce_classify(orig, "int f(int x) { return }", &tc).unwrap(),
            Equivalence::CompileFailed
        );
    }

    #[test]
    fn missing_toolchain_keeps_everything() {
        let tc = Toolchain {
            cc: "definitely-not-a-compiler".into(),
            ..Default::default()
        };
        let v = Variant {
            id: "v0".into(),
            segment_id: 0,
            operator_id: "x".into(),
            category: super::super::Category::OperatorSwap,
            site: crate::frontend::Span::new(0, 1),
            line: 1,
            code: "int f(void) { return 1; }".into(),
            equivalence: None,
        };
        let out = filter_non_equivalent(vec![v], "int f(void) { return 0; }", |v| v.code.clone(), &tc);
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].equivalence, Some(Equivalence::NonEquivalent));
        assert_eq!(out.warnings.len(), 1);
    }
}
