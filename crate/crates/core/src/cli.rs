//! Command-line front end: `run`, `repl` and `corpus`.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::stdlib::{corpus, corpus_dir, CorpusEntry, RunResult, Session};
use crate::vm::Config;

#[derive(Parser, Debug)]
#[command(name = "kernelspace", version, about = "Run kernel-language programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a program file.
    Run {
        file: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Read declarations and statements interactively.
    Repl {
        #[command(flatten)]
        flags: Flags,
    },
    /// Run the bundled programs against their expected output.
    Corpus {
        #[command(flatten)]
        flags: Flags,
        /// Only entries with this tag.
        #[arg(long)]
        tag: Option<String>,
        /// Corpus directory.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Flags {
    /// Reductions per time slice.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u32).range(1..))]
    pub slice: u32,
    /// Total reduction budget.
    #[arg(long = "max-red", default_value_t = 400_000_000)]
    pub max_red: u64,
    /// Print scheduler events to stderr.
    #[arg(long)]
    pub trace: bool,
    /// Put newly runnable threads at the front of the run queue.
    #[arg(long = "reverse-queue")]
    pub reverse_queue: bool,
}

impl Flags {
    pub fn config(&self) -> Config {
        Config {
            slice: self.slice,
            max_reductions: self.max_red.max(self.slice as u64),
            trace: self.trace,
            reverse_queue: self.reverse_queue,
        }
    }
}

pub fn main_with(cli: Cli) -> i32 {
    match cli.command {
        Command::Run { file, flags } => cmd_run(&file, &flags.config()),
        Command::Repl { flags } => cmd_repl(&flags.config()),
        Command::Corpus { flags, tag, dir } => {
            cmd_corpus(&dir.unwrap_or_else(corpus_dir), tag.as_deref(), &flags.config())
        }
    }
}

fn flush(session: &mut Session, out: &mut impl Write) {
    for line in session.vm.log.drain(..) {
        let _ = writeln!(out, "{line}");
    }
    if session.vm.config.trace {
        let mut err = std::io::stderr().lock();
        for line in session.vm.trace.drain(..) {
            let _ = writeln!(err, "{line}");
        }
    }
}

fn report(session: &Session, r: &RunResult) {
    match r {
        RunResult::Halted => {}
        RunResult::Uncaught(es) => {
            for e in es {
                eprintln!("uncaught exception: {e}");
            }
        }
        RunResult::BudgetExhausted => eprintln!("reduction budget exhausted"),
        RunResult::Deadlock(_) => {
            for (t, v) in session.vm.blocked_threads() {
                eprintln!("deadlock: thread {} waits on _V{}", t.0, v.0);
            }
        }
    }
}

pub fn cmd_run(path: &Path, config: &Config) -> i32 {
    let src = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return 2;
        }
    };
    let mut session = Session::new(config.clone());
    let r = session.eval(&src);
    flush(&mut session, &mut std::io::stdout().lock());
    match r {
        Ok(r) => {
            report(&session, &r);
            r.exit_code()
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            2
        }
    }
}

/// Inputs are separated by blank lines or end at a line ending in `;;`.
pub fn cmd_repl(config: &Config) -> i32 {
    let mut session = Session::new(config.clone());
    let stdin = std::io::stdin();
    let mut buf = String::new();
    prompt(&buf);
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let end = line.trim_end().ends_with(";;");
        if line.trim().is_empty() && buf.trim().is_empty() {
            prompt(&buf);
            continue;
        }
        if end {
            buf.push_str(line.trim_end().trim_end_matches(";;"));
        } else if !line.trim().is_empty() {
            buf.push_str(&line);
        }
        buf.push('\n');
        if end || line.trim().is_empty() {
            repl_input(&mut session, &buf);
            buf.clear();
        }
        prompt(&buf);
    }
    if !buf.trim().is_empty() {
        repl_input(&mut session, &buf);
    }
    0
}

fn prompt(buf: &str) {
    let mut err = std::io::stderr().lock();
    let _ = write!(err, "{}", if buf.is_empty() { "oz> " } else { "..> " });
    let _ = err.flush();
}

fn repl_input(session: &mut Session, src: &str) {
    let r = session.eval(src);
    flush(session, &mut std::io::stdout().lock());
    match r {
        Ok(RunResult::Deadlock(_)) => {
            let n = session.vm.blocked_threads().len();
            eprintln!("blocked: {n} thread{}", if n == 1 { "" } else { "s" });
        }
        Ok(r) => report(session, &r),
        Err(e) => eprintln!("{e}"),
    }
}

/// Outcome of one corpus entry.
pub struct EntryReport {
    pub name: String,
    pub passed: bool,
    pub exit: i32,
    pub log: Vec<String>,
}

pub fn run_entry(entry: &CorpusEntry, config: &Config) -> EntryReport {
    let mut session = Session::new(config.clone());
    let exit = match session.eval(&entry.source) {
        Ok(r) => r.exit_code(),
        Err(_) => 2,
    };
    let log = std::mem::take(&mut session.vm.log);
    EntryReport {
        name: entry.name.clone(),
        passed: exit == entry.exit && log == entry.golden,
        exit,
        log,
    }
}

pub fn cmd_corpus(dir: &Path, tag: Option<&str>, config: &Config) -> i32 {
    let entries = match corpus(dir) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{}: {e}", dir.display());
            return 2;
        }
    };
    let mut failed = 0;
    let mut ran = 0;
    for entry in entries.iter().filter(|e| tag.is_none_or(|t| e.tags.iter().any(|x| x == t))) {
        ran += 1;
        let rep = run_entry(entry, config);
        println!("{:<4} {}", if rep.passed { "pass" } else { "FAIL" }, rep.name);
        if !rep.passed {
            failed += 1;
            if rep.exit != entry.exit {
                eprintln!("{}: exit {} (expected {})", rep.name, rep.exit, entry.exit);
            }
            eprint!("{}", diff(&entry.golden, &rep.log, &entry.name));
        }
    }
    println!("{} passed, {} failed", ran - failed, failed);
    if failed == 0 {
        0
    } else {
        1
    }
}

/// Unified diff of two line lists, as one hunk.
pub fn diff(expected: &[String], actual: &[String], name: &str) -> String {
    let n = expected.len();
    let m = actual.len();
    // longest common subsequence table
    let mut lcs = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if expected[i] == actual[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let mut out = format!("--- {name}.golden\n+++ {name} (actual)\n@@ -1,{n} +1,{m} @@\n");
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && expected[i] == actual[j] {
            out.push_str(&format!(" {}\n", expected[i]));
            i += 1;
            j += 1;
        } else if j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j]) {
            out.push_str(&format!("+{}\n", actual[j]));
            j += 1;
        } else {
            out.push_str(&format!("-{}\n", expected[i]));
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn diff_marks_changes() {
        let d = diff(&lines(&["a", "b", "c"]), &lines(&["a", "x", "c"]), "t");
        assert!(d.contains("-b\n"));
        assert!(d.contains("+x\n"));
        assert!(d.contains(" a\n"));
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from(["kernelspace", "run", "f.oz", "--slice", "7", "--reverse-queue"]).unwrap();
        match cli.command {
            Command::Run { flags, .. } => {
                let c = flags.config();
                assert_eq!(c.slice, 7);
                assert!(c.reverse_queue);
            }
            _ => panic!(),
        }
        assert!(Cli::try_parse_from(["kernelspace", "run", "f.oz", "--slice", "0"]).is_err());
    }
}
