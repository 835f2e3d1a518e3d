//! Execution of kernel statements.

use std::rc::Rc;

use super::builtins;
use super::{Exec, Frame, Stop, Vm, TOP};
use crate::ast::kernel::{Construct, Ident, Kernel, Literal};
use crate::store::{Clash, Tell};
use crate::symbol::Symbol;
use crate::term::{CellId, Closure, Env, NameId, Record, SpaceId, Term, ThreadId};

/// `error(kind:K info:I)`
pub(crate) fn error(kind: &str, info: Term) -> Stop {
    let fields = vec![
        (crate::term::Feature::Atom(Symbol::intern("kind")), Term::atom(kind)),
        (crate::term::Feature::Atom(Symbol::intern("info")), info),
    ];
    Stop::Raise(Term::Record(Rc::new(
        Record::new(Symbol::intern("error"), fields).unwrap(),
    )))
}

fn lookup(env: &Env, x: Ident) -> Result<Term, Stop> {
    env.lookup(x)
        .cloned()
        .ok_or_else(|| error("unbound", Term::Atom(x)))
}

fn literal(l: &Literal) -> Term {
    match l {
        Literal::Int(i) => Term::Int(*i),
        Literal::Atom(a) => Term::Atom(*a),
    }
}

impl Vm {
    /// Maps the result of a tell onto thread control.
    pub(crate) fn told(&mut self, r: Tell, s: SpaceId) -> Exec {
        match r {
            Ok(()) => Ok(()),
            Err(Clash::Need(v)) => Err(Stop::Suspend(v)),
            Err(Clash::Fail) => {
                if s == TOP {
                    Err(Stop::Raise(builtins::failure_term()))
                } else {
                    self.fail_space(s);
                    Ok(())
                }
            }
        }
    }

    pub(crate) fn tell_eq(&mut self, a: &Term, b: &Term, s: SpaceId) -> Exec {
        let r = self.unify(a, b, s);
        self.told(r, s)
    }

    fn build(&mut self, c: &Construct, env: &Env) -> Result<Term, Stop> {
        if c.fields.is_empty() {
            return Ok(literal(&c.label));
        }
        let label = match c.label {
            Literal::Atom(a) => a,
            Literal::Int(i) => return Err(error("label", Term::Int(i))),
        };
        let mut fields = Vec::with_capacity(c.fields.len());
        for (f, x) in &c.fields {
            fields.push((*f, lookup(env, *x)?));
        }
        match Record::new(label, fields) {
            Some(r) => Ok(Term::Record(Rc::new(r))),
            None => Err(error("duplicateFeature", Term::Atom(label))),
        }
    }

    fn push(&mut self, t: ThreadId, k: &Rc<Kernel>, env: Env) {
        self.threads[t.index()].stack.push(Frame::Stmt(k.clone(), env));
    }

    /// Runs the body of a procedure value applied to `args`.
    pub(crate) fn apply(&mut self, t: ThreadId, f: &Term, args: Vec<Term>) -> Exec {
        let s = self.threads[t.index()].space;
        match self.deref(f, s) {
            Term::Var(v) => Err(Stop::Suspend(v)),
            Term::Proc(c) => {
                if c.params.len() != args.len() {
                    return Err(error("arity", Term::Int(args.len() as i64)));
                }
                let mut env = c.env.clone();
                for (p, a) in c.params.iter().zip(args) {
                    env = env.bind(*p, a);
                }
                self.push(t, &c.body, env);
                Ok(())
            }
            Term::Builtin(b) => builtins::call(self, t, b, &args),
            other => Err(error("notProcedure", other)),
        }
    }

    pub(super) fn exec(&mut self, t: ThreadId, k: &Rc<Kernel>, env: &Env) -> Exec {
        let s = self.threads[t.index()].space;
        match &**k {
            Kernel::Skip => Ok(()),
            Kernel::Eq(x, y) => {
                let a = lookup(env, *x)?;
                let b = lookup(env, *y)?;
                self.tell_eq(&a, &b, s)
            }
            Kernel::Bind(x, c) => {
                let a = lookup(env, *x)?;
                let b = self.build(c, env)?;
                self.tell_eq(&a, &b, s)
            }
            Kernel::Seq(items) => {
                for item in items.iter().rev() {
                    self.push(t, item, env.clone());
                }
                Ok(())
            }
            Kernel::Local(xs, body) => {
                let mut env = env.clone();
                for x in xs {
                    let v = self.fresh(s);
                    env = env.bind(*x, v);
                }
                self.push(t, body, env);
                Ok(())
            }
            Kernel::If(x, a, b) => match self.deref(&lookup(env, *x)?, s) {
                Term::Var(v) => Err(Stop::Suspend(v)),
                Term::Atom(l) if l.as_str() == "true" => {
                    self.push(t, a, env.clone());
                    Ok(())
                }
                Term::Atom(l) if l.as_str() == "false" => {
                    self.push(t, b, env.clone());
                    Ok(())
                }
                other => Err(error("notBoolean", other)),
            },
            Kernel::Case(x, pat, a, b) => {
                let val = self.deref(&lookup(env, *x)?, s);
                let hit = match (&val, &pat.label) {
                    (Term::Var(v), _) => return Err(Stop::Suspend(*v)),
                    (Term::Record(r), Literal::Atom(l)) => {
                        if r.label == *l && r.fields.len() == pat.fields.len() {
                            let vals: Option<Vec<Term>> =
                                pat.fields.iter().map(|(f, _)| r.get(*f).cloned()).collect();
                            if let Some(vals) = vals {
                                let mut env = env.clone();
                                for (v, (_, id)) in vals.into_iter().zip(&pat.fields) {
                                    env = env.bind(*id, v);
                                }
                                self.push(t, a, env);
                                return Ok(());
                            }
                        }
                        false
                    }
                    (Term::Int(i), Literal::Int(j)) => pat.fields.is_empty() && i == j,
                    (Term::Atom(i), Literal::Atom(j)) => pat.fields.is_empty() && i == j,
                    _ => false,
                };
                self.push(t, if hit { a } else { b }, env.clone());
                Ok(())
            }
            Kernel::Proc(p, params, body) => {
                let dest = lookup(env, *p)?;
                let closure = Closure {
                    name: Some(*p),
                    params: params.clone(),
                    body: body.clone(),
                    env: env.clone(),
                };
                self.tell_eq(&dest, &Term::Proc(Rc::new(closure)), s)
            }
            Kernel::Apply(f, xs) => {
                let fv = lookup(env, *f)?;
                let mut args = Vec::with_capacity(xs.len());
                for x in xs {
                    args.push(lookup(env, *x)?);
                }
                self.apply(t, &fv, args)
            }
            Kernel::Thread(body) => {
                self.spawn(body.clone(), env.clone(), s);
                Ok(())
            }
            Kernel::ByNeed(p, x) => {
                let pv = lookup(env, *p)?;
                match self.deref(&lookup(env, *x)?, s) {
                    Term::Var(v) if self.vars[v.index()].trigger.is_none() => {
                        self.install_trigger(v, pv);
                        Ok(())
                    }
                    other => Err(error("byNeed", other)),
                }
            }
            Kernel::Try(body, x, handler) => {
                self.threads[t.index()]
                    .stack
                    .push(Frame::Catch(*x, handler.clone(), env.clone()));
                self.push(t, body, env.clone());
                Ok(())
            }
            Kernel::Raise(x) => {
                let e = lookup(env, *x)?;
                Err(Stop::Raise(self.deref(&e, s)))
            }
            Kernel::NewName(x) => {
                let n = Term::Name(NameId(self.names));
                self.names += 1;
                let dest = lookup(env, *x)?;
                self.tell_eq(&dest, &n, s)
            }
            Kernel::IsDet(x, b) => {
                let v = lookup(env, *x)?;
                let det = self.is_det(&v, s);
                let dest = lookup(env, *b)?;
                self.tell_eq(&dest, &Term::bool(det), s)
            }
            Kernel::NewCell(x, c) => {
                if s != TOP {
                    return Err(error("cellInSpace", Term::Int(s.0 as i64)));
                }
                let init = lookup(env, *x)?;
                let id = CellId(self.cells.len() as u32);
                self.cells.push(init);
                let dest = lookup(env, *c)?;
                self.tell_eq(&dest, &Term::Cell(id), s)
            }
            Kernel::Exchange(c, old, new) => match self.deref(&lookup(env, *c)?, s) {
                Term::Var(v) => Err(Stop::Suspend(v)),
                Term::Cell(id) => {
                    if s != TOP {
                        return Err(error("cellInSpace", Term::Int(s.0 as i64)));
                    }
                    let next = lookup(env, *new)?;
                    let prev = std::mem::replace(&mut self.cells[id.index()], next);
                    let dest = lookup(env, *old)?;
                    self.tell_eq(&dest, &prev, s)
                }
                other => Err(error("notCell", other)),
            },
            Kernel::Space(op, a, b) => {
                let a = lookup(env, *a)?;
                let b = lookup(env, *b)?;
                self.space_op(t, *op, &a, &b)
            }
        }
    }
}
