#![allow(dead_code)]

use std::collections::BTreeSet;

use kernelspace::search::{self, Engine};
use kernelspace::stdlib::{corpus, corpus_dir, CorpusEntry, RunResult, Session};
use kernelspace::vm::render::{int_text, render};
use kernelspace::vm::{Config, TOP};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub mod machine;

pub fn session() -> Session {
    Session::new(Config::default())
}

pub fn run(src: &str, config: Config) -> (RunResult, Vec<String>) {
    let mut s = Session::new(config);
    let r = s.eval(src).expect("compiles");
    (r, std::mem::take(&mut s.vm.log))
}

/// Every solution of `script`, rendered.
pub fn all_solutions(s: &mut Session, script: &str) -> Vec<String> {
    let t = search::solve(s, Engine::All, script, None).expect("search finishes");
    search::list_items(s, &t)
        .expect("a list")
        .iter()
        .map(|x| render(&s.vm, x, TOP))
        .collect()
}

pub fn entries() -> Vec<CorpusEntry> {
    corpus(&corpus_dir()).expect("corpus readable")
}

pub fn entry(name: &str) -> CorpusEntry {
    entries().into_iter().find(|e| e.name == name).expect("corpus entry")
}

pub fn configs() -> Vec<Config> {
    let mut out = Vec::new();
    for slice in [1, 7, 1000] {
        for reverse_queue in [false, true] {
            out.push(Config {
                slice,
                reverse_queue,
                ..Config::default()
            });
        }
    }
    out
}

/// Choice trees: programs made of nested choice statements.
pub mod trees {
    use proptest::prelude::*;

    #[derive(Clone, Debug)]
    pub enum Tree {
        Leaf(u8),
        Fail,
        Choice(Vec<Tree>),
        /// `X = A#B` with A from the first tree, then B from the second.
        Seq(Box<Tree>, Box<Tree>),
    }

    pub fn arb_tree() -> impl Strategy<Value = Tree> {
        let leaf = prop_oneof![4 => (0u8..10).prop_map(Tree::Leaf), 1 => Just(Tree::Fail)];
        leaf.prop_recursive(6, 64, 3, |inner| {
            prop_oneof![
                3 => prop::collection::vec(inner.clone(), 2..=3).prop_map(Tree::Choice),
                1 => (inner.clone(), inner).prop_map(|(a, b)| Tree::Seq(Box::new(a), Box::new(b))),
            ]
        })
    }

    pub fn depth(t: &Tree) -> usize {
        match t {
            Tree::Leaf(_) | Tree::Fail => 0,
            Tree::Choice(ts) => 1 + ts.iter().map(depth).max().unwrap_or(0),
            Tree::Seq(a, b) => 1 + depth(a).max(depth(b)),
        }
    }

    /// A statement constraining `x`.
    pub fn stmt(t: &Tree, x: &str, n: &mut usize) -> String {
        match t {
            Tree::Leaf(v) => format!("{x} = {v}"),
            Tree::Fail => "fail".into(),
            Tree::Choice(ts) => {
                let alts: Vec<String> = ts.iter().map(|t| stmt(t, x, n)).collect();
                format!("choice {} end", alts.join(" [] "))
            }
            Tree::Seq(a, b) => {
                *n += 1;
                let (l, r) = (format!("L{n}"), format!("R{n}"));
                format!(
                    "local {l} {r} in {x} = {l}#{r} {} {} end",
                    stmt(a, &l, n),
                    stmt(b, &r, n)
                )
            }
        }
    }

    pub fn script(t: &Tree) -> String {
        format!("proc {{$ X}} {} end", stmt(t, "X", &mut 0))
    }

    fn text(t: &str, nested: bool) -> String {
        if nested {
            format!("({t})")
        } else {
            t.to_string()
        }
    }

    /// Solutions in depth-first, left-to-right order, with whether each
    /// one is a pair.
    fn solve(t: &Tree) -> Vec<(String, bool)> {
        match t {
            Tree::Leaf(v) => vec![(v.to_string(), false)],
            Tree::Fail => vec![],
            Tree::Choice(ts) => ts.iter().flat_map(solve).collect(),
            Tree::Seq(a, b) => {
                let bs = solve(b);
                let mut out = Vec::new();
                for (x, xp) in solve(a) {
                    for (y, yp) in &bs {
                        out.push((format!("{}#{}", text(&x, xp), text(y, *yp)), true));
                    }
                }
                out
            }
        }
    }

    pub fn oracle(t: &Tree) -> Vec<String> {
        solve(t).into_iter().map(|(s, _)| s).collect()
    }

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum Status {
        Failed,
        Succeeded,
        Alternatives(usize),
    }

    impl Status {
        pub fn text(self) -> String {
            match self {
                Status::Failed => "failed".into(),
                Status::Succeeded => "succeeded".into(),
                Status::Alternatives(n) => format!("alternatives({n})"),
            }
        }
    }

    /// What asking a space running `t` reports.
    pub fn status(t: &Tree) -> Status {
        match t {
            Tree::Leaf(_) => Status::Succeeded,
            Tree::Fail => Status::Failed,
            Tree::Choice(ts) => Status::Alternatives(ts.len()),
            Tree::Seq(a, b) => match status(a) {
                Status::Succeeded => status(b),
                other => other,
            },
        }
    }

    /// The tree left after committing the pending choice to alternative k.
    pub fn commit(t: &Tree, k: usize) -> Tree {
        match t {
            Tree::Choice(ts) => ts[k - 1].clone(),
            Tree::Seq(a, b) => {
                if status(a) == Status::Succeeded {
                    Tree::Seq(a.clone(), Box::new(commit(b, k)))
                } else {
                    Tree::Seq(Box::new(commit(a, k)), b.clone())
                }
            }
            other => other.clone(),
        }
    }

    /// The value of a succeeded tree.
    pub fn value(t: &Tree) -> String {
        oracle(t).remove(0)
    }
}

/// Small finite-domain models with a brute-force solver.
pub mod models {
    use super::*;

    #[derive(Clone, Debug)]
    pub enum Con {
        /// sum(coef * var) rel c, with rel `=:` or `=<:`
        Linear(Vec<(i64, usize)>, bool, i64),
        Neq(usize, usize),
        Distinct(Vec<usize>),
        /// x * y = z
        Times(usize, usize, usize),
    }

    #[derive(Clone, Debug)]
    pub struct Model {
        pub doms: Vec<(i64, i64)>,
        pub cons: Vec<Con>,
    }

    pub fn random(rng: &mut StdRng) -> Model {
        let n = rng.gen_range(1..=4);
        let doms = (0..n)
            .map(|_| {
                let lo = rng.gen_range(0..=6);
                (lo, rng.gen_range(lo..=6))
            })
            .collect();
        let mut cons = Vec::new();
        for _ in 0..rng.gen_range(0..=3) {
            let c = match rng.gen_range(0..4) {
                0 => {
                    let k = rng.gen_range(1..=n);
                    let terms = (0..k).map(|_| (rng.gen_range(-3..=3), rng.gen_range(0..n))).collect();
                    Con::Linear(terms, rng.gen_bool(0.5), rng.gen_range(-4..=12))
                }
                1 => Con::Neq(rng.gen_range(0..n), rng.gen_range(0..n)),
                2 => {
                    let mut vs: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
                    if vs.is_empty() {
                        vs.push(0);
                    }
                    Con::Distinct(vs)
                }
                _ => Con::Times(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)),
            };
            cons.push(c);
        }
        Model { doms, cons }
    }

    fn var(i: usize) -> String {
        format!("V{i}")
    }

    pub fn script(m: &Model) -> String {
        let n = m.doms.len();
        let names: Vec<String> = (0..n).map(var).collect();
        let mut body = format!("Sol = sol({})\n", names.join(" "));
        for (i, (lo, hi)) in m.doms.iter().enumerate() {
            body += &format!("{} ::: {lo}#{hi}\n", var(i));
        }
        for c in &m.cons {
            body += &match c {
                Con::Linear(ts, le, k) => {
                    let sum: Vec<String> = ts.iter().map(|(a, v)| format!("{}*{}", int_text(*a), var(*v))).collect();
                    let rel = if *le { "=<:" } else { "=:" };
                    format!("{} {rel} {}\n", sum.join(" + "), int_text(*k))
                }
                Con::Neq(a, b) => format!("{} \\=: {}\n", var(*a), var(*b)),
                Con::Distinct(vs) => {
                    let vs: Vec<String> = vs.iter().map(|v| var(*v)).collect();
                    format!("{{FD.distinct [{}]}}\n", vs.join(" "))
                }
                Con::Times(x, y, z) => format!("{} * {} =: {}\n", var(*x), var(*y), var(*z)),
            };
        }
        body += "{FD.distribute ff Sol}\n";
        format!("proc {{$ Sol}} {} in\n{body}end", names.join(" "))
    }

    pub fn holds(m: &Model, vals: &[i64]) -> bool {
        m.cons.iter().all(|c| match c {
            Con::Linear(ts, le, k) => {
                let s: i64 = ts.iter().map(|(a, v)| a * vals[*v]).sum();
                if *le {
                    s <= *k
                } else {
                    s == *k
                }
            }
            Con::Neq(a, b) => vals[*a] != vals[*b],
            Con::Distinct(vs) => {
                let set: BTreeSet<i64> = vs.iter().map(|v| vals[*v]).collect();
                set.len() == vs.len()
            }
            Con::Times(x, y, z) => vals[*x] * vals[*y] == vals[*z],
        })
    }

    /// Every assignment satisfying the model, rendered like the engine's
    /// solutions.
    pub fn brute_force(m: &Model) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut vals: Vec<i64> = m.doms.iter().map(|d| d.0).collect();
        loop {
            if holds(m, &vals) {
                let parts: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
                out.insert(format!("sol({})", parts.join(" ")));
            }
            let mut i = 0;
            loop {
                if i == vals.len() {
                    return out;
                }
                if vals[i] < m.doms[i].1 {
                    vals[i] += 1;
                    break;
                }
                vals[i] = m.doms[i].0;
                i += 1;
            }
        }
    }

    pub fn seeded(seed: u64) -> StdRng {
        StdRng::seed_from_u64(seed)
    }
}

/// Fractions by exhaustive search over digit permutations.
pub fn fractions_oracle() -> BTreeSet<[i64; 9]> {
    fn permute(k: usize, digits: &mut [i64; 9], out: &mut BTreeSet<[i64; 9]>) {
        if k == 9 {
            let [a, b, c, d, e, f, g, h, i] = *digits;
            let (bc, ef, hi) = (10 * b + c, 10 * e + f, 10 * h + i);
            if a * ef * hi + d * bc * hi + g * bc * ef == bc * ef * hi {
                out.insert(*digits);
            }
            return;
        }
        for j in k..9 {
            digits.swap(k, j);
            permute(k + 1, digits, out);
            digits.swap(k, j);
        }
    }
    let mut out = BTreeSet::new();
    permute(0, &mut [1, 2, 3, 4, 5, 6, 7, 8, 9], &mut out);
    out
}

/// Digits of a rendered `sol(a:.. b:.. ..)` record.
pub fn fraction_digits(s: &str) -> [i64; 9] {
    let inner = s.strip_prefix("sol(").and_then(|x| x.strip_suffix(')')).expect("sol record");
    let mut out = [0; 9];
    for (k, part) in inner.split_whitespace().enumerate() {
        out[k] = part.split_once(':').expect("feature").1.parse().expect("digit");
    }
    out
}

/// The father facts, in clause order.
pub const FATHER: [(&str, &str); 7] = [
    ("terach", "abraham"),
    ("terach", "nachor"),
    ("terach", "haran"),
    ("abraham", "isaac"),
    ("haran", "lot"),
    ("haran", "milcah"),
    ("haran", "yiscah"),
];

/// Children of anyone, enumerated over the facts in clause order.
pub fn children2_oracle() -> String {
    let kids: Vec<&str> = FATHER.iter().map(|(_, c)| *c).collect();
    format!("[{}]", kids.join(" "))
}

/// Random dataflow programs: threads in shuffled order, each waiting for
/// earlier results, plus lazy streams.
pub fn dataflow_program(seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(4..10);
    let mut threads = Vec::new();
    for i in 0..n {
        let stmt = if i < 2 {
            format!("X{i} = {}", rng.gen_range(1..20))
        } else {
            let a = rng.gen_range(0..i);
            let b = rng.gen_range(0..i);
            match rng.gen_range(0..3) {
                0 => format!("X{i} = X{a} + X{b}"),
                1 => format!("X{i} = if X{a} < X{b} then X{b} - X{a} else X{a} * 2 end"),
                _ => format!("X{i} = {{Sum {{Take {{Ints X{a}}} 5}}}} + X{b}"),
            }
        };
        threads.push(format!("thread {stmt} end"));
    }
    // shuffle thread creation order
    for i in (1..threads.len()).rev() {
        let j = rng.gen_range(0..=i);
        threads.swap(i, j);
    }
    let vars: Vec<String> = (0..n).map(|i| format!("X{i}")).collect();
    format!(
        "declare
         fun lazy {{Ints N}} N|{{Ints N+1}} end
         fun {{Take Xs N}} if N == 0 then nil else case Xs of X|Xr then X|{{Take Xr N-1}} end end end
         fun {{Sum Xs}} case Xs of nil then 0 [] X|Xr then X + {{Sum Xr}} end end
         declare {vs} in
         {threads}
         {{ForAll [{vs}] Browse}}",
        vs = vars.join(" "),
        threads = threads.join("\n")
    )
}
