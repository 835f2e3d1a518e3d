//! Search engines. The engines themselves are kernel-language procedures
//! (see `search.oz`) that drive spaces from outside with ask, clone,
//! commit, merge and inject; this module loads them and gives Rust callers
//! a way to run a script through one.

use crate::ast::CompileError;
use crate::stdlib::{RunResult, Session};
use crate::term::Term;
use crate::vm::render::render;
use crate::vm::TOP;

pub const SOURCE: &str = include_str!("search.oz");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    /// First solution, depth first.
    One,
    /// All solutions, left to right.
    All,
    /// Branch and bound; needs an order procedure.
    Bab,
}

impl Engine {
    fn call(self, script: &str, order: Option<&str>) -> String {
        match (self, order) {
            (Engine::One, _) => format!("{{Search.one {script}}}"),
            (Engine::All, _) => format!("{{Search.base.all {script}}}"),
            (Engine::Bab, Some(o)) => format!("{{Search.bab {script} {o}}}"),
            (Engine::Bab, None) => format!("{{Search.bab {script} proc {{$ _ _}} skip end}}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("search did not finish: {0:?}")]
    Run(RunResult),
}

/// Runs `script` (source of a one-argument procedure) through `engine` and
/// returns the result term.
pub fn solve(
    session: &mut Session,
    engine: Engine,
    script: &str,
    order: Option<&str>,
) -> Result<Term, SearchError> {
    let src = format!("declare `SearchResult` = {}", engine.call(script, order));
    match session.eval(&src)? {
        RunResult::Halted => {}
        other => return Err(SearchError::Run(other)),
    }
    let t = session.vm.global("`SearchResult`").expect("declared above");
    Ok(session.vm.deref(&t, TOP))
}

/// Same as [`solve`], rendered as `Browse` would show it.
pub fn solve_text(
    session: &mut Session,
    engine: Engine,
    script: &str,
    order: Option<&str>,
) -> Result<String, SearchError> {
    let t = solve(session, engine, script, order)?;
    Ok(render(&session.vm, &t, TOP))
}

/// Elements of a list term, or None when it is not a complete list.
pub fn list_items(session: &Session, t: &Term) -> Option<Vec<Term>> {
    let mut out = Vec::new();
    let mut cur = session.vm.deref(t, TOP);
    loop {
        match &cur {
            Term::Atom(a) if a.as_str() == "nil" => return Some(out),
            Term::Record(r) if r.is_cons() => {
                out.push(session.vm.deref(&r.fields[0].1, TOP));
                cur = session.vm.deref(&r.fields[1].1, TOP);
            }
            _ => return None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vm::Config;

    fn session() -> Session {
        Session::new(Config::default())
    }

    #[test]
    fn trivial_one() {
        let mut s = session();
        let r = solve_text(&mut s, Engine::One, "proc {$ X} X = 42 end", None).unwrap();
        assert_eq!(r, "[42]");
        let r = solve_text(&mut s, Engine::One, "proc {$ X} 1 = 2 end", None).unwrap();
        assert_eq!(r, "nil");
    }

    #[test]
    fn all_in_alternative_order() {
        let mut s = session();
        let r = solve_text(
            &mut s,
            Engine::All,
            "proc {$ X} choice X = a [] X = b [] X = c end end",
            None,
        )
        .unwrap();
        assert_eq!(r, "[a b c]");
    }
}
