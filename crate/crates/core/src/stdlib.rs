//! The library every program starts with, and a session that runs source
//! text against one machine.

use std::path::{Path, PathBuf};
use std::rc::Rc;

use crate::ast::desugar::Desugarer;
use crate::ast::parser::parse;
use crate::ast::CompileError;
use crate::symbol::Symbol;
use crate::term::Term;
use crate::vm::{Config, Outcome, Vm, TOP};

pub const PRELUDE: &str = include_str!("prelude.oz");

/// Result of feeding source text to a session.
#[derive(Clone, Debug, PartialEq)]
pub enum RunResult {
    Halted,
    /// Top-level threads suspended forever.
    Deadlock(usize),
    BudgetExhausted,
    /// Exceptions escaped top-level threads.
    Uncaught(Vec<String>),
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunResult::Halted => 0,
            RunResult::Uncaught(_) => 1,
            RunResult::BudgetExhausted => 3,
            RunResult::Deadlock(_) => 4,
        }
    }
}

/// A machine plus the names declared so far.
pub struct Session {
    pub vm: Vm,
    desugarer: Desugarer,
}

impl Session {
    pub fn new(config: Config) -> Session {
        let vm = Vm::new(config);
        let desugarer = Desugarer::new(vm.global_names());
        let mut s = Session { vm, desugarer };
        let budget = s.vm.config.max_reductions;
        s.vm.config.max_reductions = u64::MAX;
        for src in [PRELUDE, crate::search::SOURCE] {
            let r = s.eval(src).expect("library compiles");
            assert_eq!(r, RunResult::Halted, "library runs");
        }
        s.vm.config.max_reductions = budget;
        s.vm.stats = Default::default();
        s.vm.trace.clear();
        if let Some(dis) = s.vm.global("Dis") {
            s.define("`Dis`", dis);
        }
        s
    }

    pub fn define(&mut self, name: &str, value: Term) {
        self.vm.define_global(name, value);
        self.desugarer.declare_global(Symbol::intern(name));
    }

    /// Compiles and runs each top-level unit in turn, each in a fresh thread
    /// that is run to quiescence before the next unit starts.
    pub fn eval(&mut self, src: &str) -> Result<RunResult, CompileError> {
        let prog = parse(src)?;
        let mut units = Vec::with_capacity(prog.units.len());
        for unit in &prog.units {
            let (names, kernel) = self.desugarer.unit(unit)?;
            units.push((names, kernel));
        }
        let errors_before = self.vm.uncaught.len();
        let mut outcome = Outcome::Halted;
        for (names, kernel) in units {
            for n in names {
                let v = self.vm.fresh(TOP);
                self.vm.globals = self.vm.globals.bind(n, v);
            }
            let env = self.vm.globals.clone();
            self.vm.spawn(Rc::new(kernel), env, TOP);
            outcome = self.vm.run();
            if outcome == Outcome::BudgetExhausted {
                break;
            }
        }
        let errors: Vec<String> = self.vm.uncaught[errors_before..]
            .iter()
            .map(|e| crate::vm::render::render(&self.vm, e, TOP))
            .collect();
        Ok(match outcome {
            Outcome::BudgetExhausted => RunResult::BudgetExhausted,
            _ if !errors.is_empty() => RunResult::Uncaught(errors),
            Outcome::Deadlock(ts) => RunResult::Deadlock(ts.len()),
            Outcome::Halted => RunResult::Halted,
        })
    }
}

/// Runs a program in a fresh session and returns the result with the log.
pub fn run_source(src: &str, config: Config) -> Result<(RunResult, Vec<String>), CompileError> {
    let mut s = Session::new(config);
    let r = s.eval(src)?;
    Ok((r, std::mem::take(&mut s.vm.log)))
}

/// A program shipped with its expected output.
#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub path: PathBuf,
    pub source: String,
    pub golden: Vec<String>,
    pub tags: Vec<String>,
    pub exit: i32,
}

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Loads `<dir>/<section>/<name>.oz` with the matching `.golden` files,
/// sorted by path.
pub fn corpus(dir: &Path) -> std::io::Result<Vec<CorpusEntry>> {
    let mut out = Vec::new();
    let mut sections: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    sections.sort();
    for section in sections {
        let mut files: Vec<PathBuf> = std::fs::read_dir(&section)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "oz"))
            .collect();
        files.sort();
        for path in files {
            let source = std::fs::read_to_string(&path)?;
            let golden_text = std::fs::read_to_string(path.with_extension("golden"))?;
            let golden = golden_text.lines().map(str::to_string).collect();
            let (tags, exit) = header(&source);
            let name = format!(
                "{}/{}",
                section.file_name().unwrap().to_string_lossy(),
                path.file_stem().unwrap().to_string_lossy()
            );
            out.push(CorpusEntry {
                name,
                path,
                source,
                golden,
                tags,
                exit,
            });
        }
    }
    Ok(out)
}

/// Reads the `% tags:` and `% exit:` comment lines at the top of a file.
fn header(src: &str) -> (Vec<String>, i32) {
    let mut tags = Vec::new();
    let mut exit = 0;
    for line in src.lines().take_while(|l| l.starts_with('%')) {
        let body = line.trim_start_matches('%').trim();
        if let Some(rest) = body.strip_prefix("tags:") {
            tags.extend(rest.split_whitespace().map(str::to_string));
        } else if let Some(rest) = body.strip_prefix("exit:") {
            exit = rest.trim().parse().unwrap_or(0);
        }
    }
    (tags, exit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str) -> (RunResult, Vec<String>) {
        run_source(src, Config::default()).unwrap()
    }

    #[test]
    fn prelude_loads() {
        let s = Session::new(Config::default());
        assert!(s.vm.global("Search").is_some());
    }

    #[test]
    fn browse_and_arithmetic() {
        let (r, log) = run("local X in X = 3 + 4 * 2 {Browse X} end");
        assert_eq!(r, RunResult::Halted);
        assert_eq!(log, vec!["11"]);
    }

    #[test]
    fn forall_in_order() {
        let (_, log) = run("{ForAll [1 2 3] Browse}");
        assert_eq!(log, vec!["1", "2", "3"]);
    }

    #[test]
    fn header_lines() {
        let (tags, exit) = header("% tags: lazy concurrent\n% exit: 4\nskip\n");
        assert_eq!(tags, vec!["lazy", "concurrent"]);
        assert_eq!(exit, 4);
    }
}
