// SPDX-License-Identifier: Apache-2.0

//! Reference implementations used to check the library independently.

#![allow(dead_code)]

use std::collections::BTreeSet;

use specsyn::verifier::VerdictStatus;

/// Strongly connected components via transitive closure (Floyd–Warshall).
pub fn scc_partition(n: usize, edges: &[(usize, usize)]) -> BTreeSet<BTreeSet<usize>> {
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n)
        .map(|v| (0..n).filter(|&u| reach[v][u] && reach[u][v]).collect())
        .collect()
}

/// Concrete value of a parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum In {
    Int(i128),
    Buf(Vec<i128>),
}

impl In {
    pub fn int(&self) -> i128 {
        match self {
            In::Int(v) => *v,
            In::Buf(_) => panic!("scalar expected"),
        }
    }

    pub fn buf(&self) -> &[i128] {
        match self {
            In::Buf(b) => b,
            In::Int(_) => panic!("buffer expected"),
        }
    }

    pub fn buf_mut(&mut self) -> &mut Vec<i128> {
        match self {
            In::Buf(b) => b,
            In::Int(_) => panic!("buffer expected"),
        }
    }

    fn show(&self, name: &str) -> String {
        match self {
            In::Int(v) => format!("{name} = {v}"),
            In::Buf(b) => format!(
                "{name} = {{{}}}",
                b.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

/// Parameter domains: an integer range, or buffers of length 0..=3 over a
/// cell range.
#[derive(Debug, Clone, Copy)]
pub enum Dom {
    Int(i128, i128),
    Buf(i128, i128),
}

pub const INT: Dom = Dom::Int(-8, 8);
pub const UINT: Dom = Dom::Int(0, 8);
pub const IBUF: Dom = Dom::Buf(-1, 1);
pub const UBUF: Dom = Dom::Buf(0, 1);

/// 0, 1, -1, 2, -2, ... restricted to `lo..=hi`, starting from the value
/// closest to zero.
fn outward(lo: i128, hi: i128) -> Vec<i128> {
    let start = 0.clamp(lo, hi);
    let mut out = vec![start];
    for k in 1.. {
        let before = out.len();
        if start + k <= hi {
            out.push(start + k);
        }
        if start - k >= lo {
            out.push(start - k);
        }
        if out.len() == before {
            break;
        }
    }
    out
}

fn values(d: Dom) -> Vec<In> {
    match d {
        Dom::Int(lo, hi) => outward(lo, hi).into_iter().map(In::Int).collect(),
        Dom::Buf(lo, hi) => {
            let cells = outward(lo, hi);
            let mut out = vec![In::Buf(Vec::new())];
            let mut layer: Vec<Vec<i128>> = vec![Vec::new()];
            for _ in 0..3 {
                let mut next = Vec::new();
                for prefix in &layer {
                    for c in &cells {
                        let mut v = prefix.clone();
                        v.push(*c);
                        next.push(v);
                    }
                }
                out.extend(next.iter().cloned().map(In::Buf));
                layer = next;
            }
            out
        }
    }
}

/// All argument tuples, first parameter outermost.
fn tuples(doms: &[Dom]) -> Vec<Vec<In>> {
    let mut out: Vec<Vec<In>> = vec![Vec::new()];
    for d in doms {
        let vals = values(*d);
        out = out
            .into_iter()
            .flat_map(|prefix| {
                vals.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// `\valid_read(p + (0 .. n - 1))`.
pub fn valid(b: &In, n: i128) -> bool {
    n <= 0 || b.buf().len() as i128 >= n
}

pub type Post = fn(&[In], &[In], i128) -> bool;

/// A function with a precondition and postconditions, and its Rust model.
pub struct Fixture {
    pub name: &'static str,
    pub params: &'static [(&'static str, Dom)],
    pub requires: Option<(&'static str, fn(&[In]) -> bool)>,
    pub body: &'static str,
    pub run: fn(&mut [In]) -> i128,
    /// ACSL text and model of each `ensures` clause; the model receives the
    /// arguments before and after the call and the result.
    pub ensures: Vec<(&'static str, Post)>,
}

impl Fixture {
    pub fn source(&self) -> String {
        let mut s = String::from("/*@");
        if let Some((r, _)) = &self.requires {
            s.push_str(&format!(" requires {r};\n   "));
        }
        for (i, (e, _)) in self.ensures.iter().enumerate() {
            s.push_str(&format!(" ensures SPSN_0_0_{i}: {e};\n   "));
        }
        s.push_str(" */\n");
        s.push_str(self.body);
        s
    }

    /// Verdicts by exhaustive enumeration: the first input, in enumeration
    /// order, meeting the precondition and violating a clause is reported.
    pub fn expected(&self) -> Vec<(VerdictStatus, String)> {
        let doms: Vec<Dom> = self.params.iter().map(|p| p.1).collect();
        let mut out: Vec<Option<String>> = vec![None; self.ensures.len()];
        for args in tuples(&doms) {
            if let Some((_, pre)) = &self.requires {
                if !pre(&args) {
                    continue;
                }
            }
            let mut after = args.clone();
            let r = (self.run)(&mut after);
            for (i, (_, post)) in self.ensures.iter().enumerate() {
                if out[i].is_none() && !post(&args, &after, r) {
                    let shown: Vec<String> = self.params.iter().zip(&args).map(|((n, _), v)| v.show(n)).collect();
                    out[i] = Some(format!("counterexample: {}", shown.join(", ")));
                }
            }
        }
        out.into_iter()
            .map(|o| match o {
                None => (VerdictStatus::Proved, String::new()),
                Some(d) => (VerdictStatus::Unproved, d),
            })
            .collect()
    }
}

fn tri(n: i128) -> i128 {
    n * (n - 1) / 2
}

pub fn verifier_fixtures() -> Vec<Fixture> {
    vec![
        Fixture {
            name: "inc",
            params: &[("x", INT)],
            requires: None,
            body: "int inc(int x) { return x + 1; }\n",
            run: |a| a[0].int() + 1,
            ensures: vec![
                ("\\result == x + 1", |a, _, r| r == a[0].int() + 1),
                ("\\result == 2", |_, _, r| r == 2),
                ("\\result >= 1", |_, _, r| r >= 1),
            ],
        },
        Fixture {
            name: "dbl",
            params: &[("x", INT)],
            requires: None,
            body: "int dbl(int x) { return x * 2; }\n",
            run: |a| a[0].int() * 2,
            ensures: vec![
                ("\\result == x + x", |a, _, r| r == 2 * a[0].int()),
                ("\\result > x", |a, _, r| r > a[0].int()),
            ],
        },
        Fixture {
            name: "max",
            params: &[("a", INT), ("b", INT)],
            requires: None,
            body: "int max(int a, int b) { if (a > b) return a; return b; }\n",
            run: |a| a[0].int().max(a[1].int()),
            ensures: vec![
                ("\\result >= a", |a, _, r| r >= a[0].int()),
                ("\\result >= b", |a, _, r| r >= a[1].int()),
                ("\\result == a", |a, _, r| r == a[0].int()),
            ],
        },
        Fixture {
            name: "min",
            params: &[("a", INT), ("b", INT)],
            requires: None,
            body: "int min(int a, int b) { int m = a; if (b < a) m = b; return m; }\n",
            run: |a| a[0].int().min(a[1].int()),
            ensures: vec![
                ("\\result <= a && \\result <= b", |a, _, r| r <= a[0].int() && r <= a[1].int()),
                ("\\result == a || \\result == b", |a, _, r| r == a[0].int() || r == a[1].int()),
                ("\\result < b", |a, _, r| r < a[1].int()),
            ],
        },
        Fixture {
            name: "abs",
            params: &[("x", INT)],
            requires: None,
            body: "int abs_(int x) { if (x < 0) return -x; return x; }\n",
            run: |a| a[0].int().abs(),
            ensures: vec![
                ("\\result >= 0", |_, _, r| r >= 0),
                ("\\result == x", |a, _, r| r == a[0].int()),
            ],
        },
        Fixture {
            name: "sign",
            params: &[("x", INT)],
            requires: None,
            body: "int sign(int x) { if (x > 0) return 1; if (x < 0) return -1; return 0; }\n",
            run: |a| a[0].int().signum(),
            ensures: vec![
                ("\\result >= -1 && \\result <= 1", |_, _, r| (-1..=1).contains(&r)),
                ("\\result == 1 ==> x > 0", |a, _, r| r != 1 || a[0].int() > 0),
                ("\\result != 0", |_, _, r| r != 0),
            ],
        },
        Fixture {
            name: "sub",
            params: &[("a", INT), ("b", INT)],
            requires: None,
            body: "int sub(int a, int b) { return a - b; }\n",
            run: |a| a[0].int() - a[1].int(),
            ensures: vec![
                ("\\result + b == a", |a, _, r| r + a[1].int() == a[0].int()),
                ("\\result <= a", |a, _, r| r <= a[0].int()),
            ],
        },
        Fixture {
            name: "clamp",
            params: &[("x", INT)],
            requires: None,
            body: "int clamp(int x) { if (x > 5) return 5; if (x < -5) return -5; return x; }\n",
            run: |a| a[0].int().clamp(-5, 5),
            ensures: vec![
                ("\\result <= 5", |_, _, r| r <= 5),
                ("\\result >= x", |a, _, r| r >= a[0].int()),
            ],
        },
        Fixture {
            name: "half",
            params: &[("x", INT)],
            requires: Some(("x > 0", |a| a[0].int() > 0)),
            body: "int half(int x) { return x / 2; }\n",
            run: |a| a[0].int() / 2,
            ensures: vec![
                ("\\result < x", |a, _, r| r < a[0].int()),
                ("\\result * 2 == x", |a, _, r| r * 2 == a[0].int()),
            ],
        },
        Fixture {
            name: "square",
            params: &[("x", INT)],
            requires: Some(("x >= 0 && x <= 4", |a| (0..=4).contains(&a[0].int()))),
            body: "int square(int x) { return x * x; }\n",
            run: |a| a[0].int() * a[0].int(),
            ensures: vec![
                ("\\result >= x", |a, _, r| r >= a[0].int()),
                ("\\result <= 16", |_, _, r| r <= 16),
                ("\\result > x", |a, _, r| r > a[0].int()),
            ],
        },
        Fixture {
            name: "uinc",
            params: &[("u", UINT)],
            requires: None,
            body: "unsigned int uinc(unsigned int u) { return u + 1; }\n",
            run: |a| a[0].int() + 1,
            ensures: vec![
                ("\\result > u", |a, _, r| r > a[0].int()),
                ("\\result >= 1", |_, _, r| r >= 1),
                ("\\result == 1", |_, _, r| r == 1),
            ],
        },
        Fixture {
            name: "sum_below",
            params: &[("n", INT)],
            requires: Some(("n >= 0", |a| a[0].int() >= 0)),
            body: "int sum_below(int n) { int s = 0; int i; for (i = 0; i < n; i++) s += i; return s; }\n",
            run: |a| tri(a[0].int()),
            ensures: vec![
                ("\\result >= 0", |_, _, r| r >= 0),
                ("\\result == n * (n - 1) / 2", |a, _, r| r == tri(a[0].int())),
                ("\\result < n", |a, _, r| r < a[0].int()),
            ],
        },
        Fixture {
            name: "countdown",
            params: &[("n", INT)],
            requires: None,
            body: "int countdown(int n) { int c = 0; while (n > 0) { n--; c++; } return c; }\n",
            run: |a| a[0].int().max(0),
            ensures: vec![
                ("\\result >= 0", |_, _, r| r >= 0),
                ("\\result == 0 ==> n <= 0", |a, _, r| r != 0 || a[0].int() <= 0),
                ("\\result == n", |a, _, r| r == a[0].int()),
            ],
        },
        Fixture {
            name: "first",
            params: &[("a", IBUF), ("n", INT)],
            requires: Some(("n >= 1 && \\valid_read(a + (0 .. n - 1))", |a| a[1].int() >= 1 && valid(&a[0], a[1].int()))),
            body: "int first(const int *a, int n) { return a[0]; }\n",
            run: |a| a[0].buf()[0],
            ensures: vec![
                ("\\result == a[0]", |a, _, r| r == a[0].buf()[0]),
                ("\\result >= 0", |_, _, r| r >= 0),
            ],
        },
        Fixture {
            name: "bsum",
            params: &[("a", IBUF), ("n", INT)],
            requires: Some(("n >= 0 && \\valid_read(a + (0 .. n - 1))", |a| a[1].int() >= 0 && valid(&a[0], a[1].int()))),
            body: "int bsum(const int *a, int n) { int s = 0; int i; for (i = 0; i < n; i++) s += a[i]; return s; }\n",
            run: |a| a[0].buf()[..a[1].int() as usize].iter().sum(),
            ensures: vec![
                ("\\result <= n", |a, _, r| r <= a[1].int()),
                ("\\result >= -n", |a, _, r| r >= -a[1].int()),
                ("\\result >= 0", |_, _, r| r >= 0),
            ],
        },
        Fixture {
            name: "eq2",
            params: &[("a", UBUF), ("b", UBUF)],
            requires: Some((
                "\\valid_read(a + (0 .. 1)) && \\valid_read(b + (0 .. 1))",
                |a| valid(&a[0], 2) && valid(&a[1], 2),
            )),
            body: "int eq2(const unsigned char *a, const unsigned char *b) { return a[0] == b[0] && a[1] == b[1]; }\n",
            run: |a| i128::from(a[0].buf()[..2] == a[1].buf()[..2]),
            ensures: vec![
                ("\\result == 0 || \\result == 1", |_, _, r| r == 0 || r == 1),
                ("\\result == 1 <==> a[0] == b[0] && a[1] == b[1]", |a, _, r| (r == 1) == (a[0].buf()[..2] == a[1].buf()[..2])),
                ("\\result == 1", |_, _, r| r == 1),
            ],
        },
        Fixture {
            name: "has_zero",
            params: &[("a", IBUF), ("n", INT)],
            requires: Some(("n >= 0 && \\valid_read(a + (0 .. n - 1))", |a| a[1].int() >= 0 && valid(&a[0], a[1].int()))),
            body: "int has_zero(const int *a, int n) { int i; for (i = 0; i < n; i++) { if (a[i] == 0) return 1; } return 0; }\n",
            run: |a| i128::from(a[0].buf()[..a[1].int() as usize].contains(&0)),
            ensures: vec![
                (
                    "\\result == 0 ==> (\\forall integer k; 0 <= k < n ==> a[k] != 0)",
                    |a, _, r| r != 0 || a[0].buf()[..a[1].int() as usize].iter().all(|c| *c != 0),
                ),
                ("\\result == 0", |_, _, r| r == 0),
            ],
        },
        Fixture {
            name: "neg",
            params: &[("x", INT)],
            requires: None,
            body: "int neg(int x) { return -x; }\n",
            run: |a| -a[0].int(),
            ensures: vec![
                ("\\result + x == 0", |a, _, r| r + a[0].int() == 0),
                ("\\result <= 0", |_, _, r| r <= 0),
            ],
        },
        Fixture {
            name: "rem",
            params: &[("x", INT), ("y", INT)],
            requires: Some(("y > 0", |a| a[1].int() > 0)),
            body: "int rem(int x, int y) { return x % y; }\n",
            run: |a| a[0].int() % a[1].int(),
            ensures: vec![
                ("\\result < y", |a, _, r| r < a[1].int()),
                ("\\result >= 0", |_, _, r| r >= 0),
            ],
        },
        Fixture {
            name: "both",
            params: &[("a", INT), ("b", INT)],
            requires: None,
            body: "int both(int a, int b) { return a > 0 && b > 0; }\n",
            run: |a| i128::from(a[0].int() > 0 && a[1].int() > 0),
            ensures: vec![
                ("\\result == 1 ==> a > 0", |a, _, r| r != 1 || a[0].int() > 0),
                ("\\result == 1 ==> a > b", |a, _, r| r != 1 || a[0].int() > a[1].int()),
            ],
        },
        Fixture {
            name: "cinc",
            params: &[("x", INT)],
            requires: None,
            body: "int cinc(char x) { return x + 1; }\n",
            run: |a| a[0].int() + 1,
            ensures: vec![
                ("\\result > x", |a, _, r| r > a[0].int()),
                ("\\result <= 8", |_, _, r| r <= 8),
            ],
        },
        Fixture {
            name: "first_neg",
            params: &[("a", IBUF), ("n", INT)],
            requires: Some(("n >= 0 && \\valid_read(a + (0 .. n - 1))", |a| a[1].int() >= 0 && valid(&a[0], a[1].int()))),
            body: "int first_neg(const int *a, int n) { int i; for (i = 0; i < n; i++) { if (a[i] < 0) break; } return i; }\n",
            run: |a| {
                let n = a[1].int() as usize;
                a[0].buf()[..n].iter().position(|c| *c < 0).unwrap_or(n) as i128
            },
            ensures: vec![
                ("\\result >= 0 && \\result <= n", |a, _, r| r >= 0 && r <= a[1].int()),
                ("\\result < n ==> a[\\result] < 0", |a, _, r| r >= a[1].int() || a[0].buf()[r as usize] < 0),
                ("\\result < n", |a, _, r| r < a[1].int()),
            ],
        },
        Fixture {
            name: "set3",
            params: &[("p", IBUF)],
            requires: Some(("\\valid(p)", |a| valid(&a[0], 1))),
            body: "void set3(int *p) { *p = 3; }\n",
            run: |a| {
                a[0].buf_mut()[0] = 3;
                0
            },
            ensures: vec![
                ("*p == 3", |_, after, _| after[0].buf()[0] == 3),
                ("*p == \\old(*p)", |before, after, _| after[0].buf()[0] == before[0].buf()[0]),
            ],
        },
        Fixture {
            name: "swap",
            params: &[("a", IBUF), ("b", IBUF)],
            requires: Some(("\\valid(a) && \\valid(b)", |a| valid(&a[0], 1) && valid(&a[1], 1))),
            body: "void swap(int *a, int *b) { int t = *a; *a = *b; *b = t; }\n",
            run: |a| {
                let (x, y) = (a[0].buf()[0], a[1].buf()[0]);
                a[0].buf_mut()[0] = y;
                a[1].buf_mut()[0] = x;
                0
            },
            ensures: vec![
                ("*a == \\old(*b) && *b == \\old(*a)", |b, f, _| {
                    f[0].buf()[0] == b[1].buf()[0] && f[1].buf()[0] == b[0].buf()[0]
                }),
                ("*a == *b", |_, f, _| f[0].buf()[0] == f[1].buf()[0]),
            ],
        },
        Fixture {
            name: "pairs",
            params: &[("n", INT)],
            requires: Some(("n >= 0 && n <= 4", |a| (0..=4).contains(&a[0].int()))),
            body: "int pairs(int n) { int s = 0; int i; int j; for (i = 0; i < n; i++) { for (j = 0; j < i; j++) { s++; } } return s; }\n",
            run: |a| tri(a[0].int()),
            ensures: vec![
                ("\\result >= 0", |_, _, r| r >= 0),
                ("\\result == n * (n - 1) / 2", |a, _, r| r == tri(a[0].int())),
                ("\\result <= n", |a, _, r| r <= a[0].int()),
            ],
        },
        Fixture {
            name: "upper",
            params: &[("x", INT), ("y", INT)],
            requires: None,
            body: "int upper(int x, int y) { int r = x; if (y > x) r = y; return r; }\n",
            run: |a| a[0].int().max(a[1].int()),
            ensures: vec![
                ("\\result >= x", |a, _, r| r >= a[0].int()),
                ("\\result > y", |a, _, r| r > a[1].int()),
            ],
        },
        Fixture {
            name: "id",
            params: &[("x", INT)],
            requires: None,
            body: "int id(int x) { return x; }\n",
            run: |a| a[0].int(),
            ensures: vec![
                ("\\result == x", |a, _, r| r == a[0].int()),
                ("\\result != 0", |_, _, r| r != 0),
                ("\\result * \\result >= 0", |_, _, r| r * r >= 0),
            ],
        },
        Fixture {
            name: "udec",
            params: &[("u", UINT)],
            requires: None,
            body: "unsigned int udec(unsigned int u) { return u - 1; }\n",
            run: |a| (a[0].int() - 1).rem_euclid(1 << 32),
            ensures: vec![
                ("\\result < u", |a, _, r| r < a[0].int()),
                ("\\result + 1 == u", |a, _, r| r + 1 == a[0].int()),
                ("\\result >= 0", |_, _, r| r >= 0),
            ],
        },
        Fixture {
            name: "common_steps",
            params: &[("a", INT), ("b", INT)],
            requires: Some(("a >= 0 && b >= 0", |a| a[0].int() >= 0 && a[1].int() >= 0)),
            body: "int common_steps(int a, int b) { int c = 0; while (a > 0 && b > 0) { a--; b--; c++; } return c; }\n",
            run: |a| a[0].int().min(a[1].int()),
            ensures: vec![
                ("\\result <= a && \\result <= b", |a, _, r| r <= a[0].int() && r <= a[1].int()),
                ("\\result == a", |a, _, r| r == a[0].int()),
            ],
        },
        Fixture {
            name: "at_least_once",
            params: &[("n", INT)],
            requires: None,
            body: "int at_least_once(int n) { int c = 0; do { c++; n--; } while (n > 0); return c; }\n",
            run: |a| a[0].int().max(1),
            ensures: vec![
                ("\\result >= 1", |_, _, r| r >= 1),
                ("\\result == n", |a, _, r| r == a[0].int()),
            ],
        },
    ]
}
