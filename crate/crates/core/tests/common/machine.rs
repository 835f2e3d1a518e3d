//! Space operations run against a reference model of the space life cycle.

use super::trees::{self, Status, Tree};
use kernelspace::stdlib::Session;
use proptest::prelude::*;

#[derive(Clone, Debug)]
pub enum Op {
    Ask(usize),
    Clone(usize),
    Commit(usize, i64),
    Merge(usize),
    InjectFail(usize),
    InjectSkip(usize),
}

pub fn arb_op() -> impl Strategy<Value = Op> {
    let h = 0usize..4;
    prop_oneof![
        3 => h.clone().prop_map(Op::Ask),
        2 => h.clone().prop_map(Op::Clone),
        4 => (h.clone(), 0i64..=4).prop_map(|(h, k)| Op::Commit(h, k)),
        2 => h.clone().prop_map(Op::Merge),
        1 => h.clone().prop_map(Op::InjectFail),
        1 => h.prop_map(Op::InjectSkip),
    ]
}

#[derive(Clone, Debug)]
pub enum State {
    Live(Tree),
    Failed,
    Merged,
}

pub fn settle(t: Tree) -> State {
    if trees::status(&t) == Status::Failed {
        State::Failed
    } else {
        State::Live(t)
    }
}

pub fn caught(stmt: &str) -> String {
    format!("declare in try {stmt} catch error(kind:K info:_) then {{Browse err(K)}} end")
}

pub struct Machine {
    pub session: Session,
    pub model: Vec<State>,
}

impl Machine {
    pub fn new(t: &Tree) -> Machine {
        let mut session = super::session();
        let src = format!(
            "declare Probe Free H0 in Probe = p(1 a) H0 = {{NewSpace {}}}",
            trees::script(t)
        );
        session.eval(&src).unwrap();
        Machine {
            session,
            model: vec![settle(t.clone())],
        }
    }

    pub fn exec(&mut self, src: &str) -> String {
        self.session.eval(src).unwrap();
        let log = std::mem::take(&mut self.session.vm.log);
        assert_eq!(log.len(), 1, "{src}: {log:?}");
        log.into_iter().next().unwrap()
    }

    /// Runs one operation on both the machine and the model.
    pub fn step(&mut self, op: &Op) -> Result<(), String> {
        let handle = |h: usize| h % self.model.len();
        let (src, want) = match *op {
            Op::Ask(h) => {
                let h = handle(h);
                let want = match &self.model[h] {
                    State::Live(t) => trees::status(t).text(),
                    State::Failed => "failed".into(),
                    State::Merged => "err(spaceMerged)".into(),
                };
                (caught(&format!("{{Browse {{Ask H{h}}}}}")), want)
            }
            Op::Clone(h) => {
                let h = handle(h);
                let n = self.model.len();
                let want = match self.model[h].clone() {
                    State::Live(t) => {
                        self.model.push(State::Live(t));
                        "ok".to_string()
                    }
                    State::Failed => "err(spaceFailed)".into(),
                    State::Merged => "err(spaceMerged)".into(),
                };
                let src = format!(
                    "declare H{n} in try H{n} = {{Clone H{h}}} {{Browse ok}} catch error(kind:K info:_) then {{Browse err(K)}} end"
                );
                (src, want)
            }
            Op::Commit(h, k) => {
                let h = handle(h);
                let want = match self.model[h].clone() {
                    State::Live(t) => match trees::status(&t) {
                        Status::Alternatives(n) if k >= 1 && k as usize <= n => {
                            self.model[h] = settle(trees::commit(&t, k as usize));
                            "ok".to_string()
                        }
                        Status::Alternatives(_) => "err(commitRange)".into(),
                        _ => "err(notDistributable)".into(),
                    },
                    State::Failed => "err(spaceFailed)".into(),
                    State::Merged => "err(spaceMerged)".into(),
                };
                (caught(&format!("{{Commit H{h} {k}}} {{Browse ok}}")), want)
            }
            Op::Merge(h) => {
                let h = handle(h);
                let want = match self.model[h].clone() {
                    State::Live(t) if trees::status(&t) == Status::Succeeded => {
                        self.model[h] = State::Merged;
                        trees::value(&t)
                    }
                    State::Live(_) => "err(notSucceeded)".into(),
                    State::Failed => "err(spaceFailed)".into(),
                    State::Merged => "err(spaceMerged)".into(),
                };
                (caught(&format!("{{Browse {{Merge H{h}}}}}")), want)
            }
            Op::InjectFail(h) | Op::InjectSkip(h) => {
                let h = handle(h);
                let fails = matches!(op, Op::InjectFail(_));
                let want = match &self.model[h] {
                    State::Live(_) => {
                        if fails {
                            self.model[h] = State::Failed;
                        }
                        "ok".to_string()
                    }
                    State::Failed => "err(spaceFailed)".into(),
                    State::Merged => "err(spaceMerged)".into(),
                };
                let body = if fails { "fail" } else { "skip" };
                (caught(&format!("{{Inject H{h} proc {{$ _}} {body} end}} {{Browse ok}}")), want)
            }
        };
        let got = self.exec(&src);
        if got == want {
            Ok(())
        } else {
            Err(format!("{op:?}: got {got}, model says {want}"))
        }
    }

    /// The top level is untouched by anything that happened inside spaces.
    pub fn top_intact(&mut self) -> bool {
        let probe = self.exec("declare in {Browse Probe}");
        let free = self.exec("declare in {Browse {IsDet Free}}");
        probe == "p(1 a)" && free == "false" && self.session.vm.uncaught.is_empty()
    }
}
