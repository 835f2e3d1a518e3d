//! Translation of surface phrases into kernel statements.

use std::collections::HashMap;
use std::rc::Rc;

use super::kernel::{primitive_arity, Construct, Ident, Kernel, Literal, SpaceOp};
use super::surface::{BinOp, FdRel, FieldName, Phrase, Program, TopLevel};
use super::{CompileError, Pos};
use crate::symbol::Symbol;
use crate::term::Feature;

/// Global names the desugarer emits calls to. The backquotes keep them out
/// of reach of ordinary identifiers, so user code cannot shadow them.
pub mod names {
    pub const ADD: &str = "`IntPlus`";
    pub const SUB: &str = "`IntMinus`";
    pub const MUL: &str = "`IntTimes`";
    pub const LT: &str = "`Less`";
    pub const LE: &str = "`Leq`";
    pub const GT: &str = "`Greater`";
    pub const GE: &str = "`Geq`";
    pub const EQ: &str = "`Equal`";
    pub const NE: &str = "`NotEqual`";
    pub const DOT: &str = "`Dot`";
    pub const FD_DOM: &str = "`FDTellDom`";
    pub const FD_LINEAR: &str = "`FDLinear`";
    pub const FD_TIMES: &str = "`FDTimes`";
    pub const FD_NEQ: &str = "`FDNeq`";
    pub const DIS: &str = "`Dis`";

    pub const ALL: &[&str] = &[
        ADD, SUB, MUL, LT, LE, GT, GE, EQ, NE, DOT, FD_DOM, FD_LINEAR, FD_TIMES, FD_NEQ, DIS,
    ];
}

type R<T> = Result<T, CompileError>;

/// Desugars a whole file: each `declare` scopes over the rest of the file.
pub fn desugar_program(prog: &Program, globals: &[Symbol]) -> R<Kernel> {
    Desugarer::new(globals.iter().copied()).program(prog)
}

pub struct Desugarer {
    scope: Vec<Symbol>,
    temps: Vec<Ident>,
    counter: u32,
    dollar: Option<Ident>,
}

struct Mono {
    coef: i64,
    factors: Vec<Ident>,
}

impl Desugarer {
    pub fn new(globals: impl IntoIterator<Item = Symbol>) -> Desugarer {
        Desugarer {
            scope: globals.into_iter().collect(),
            temps: Vec::new(),
            counter: 0,
            dollar: None,
        }
    }

    pub fn declare_global(&mut self, name: Symbol) {
        self.scope.push(name);
    }

    pub fn program(&mut self, prog: &Program) -> R<Kernel> {
        let mark = self.scope.len();
        let k = self.units(&prog.units);
        self.scope.truncate(mark);
        k
    }

    fn units(&mut self, units: &[TopLevel]) -> R<Kernel> {
        let mut out = Vec::new();
        for (i, unit) in units.iter().enumerate() {
            match unit {
                TopLevel::Stmts(stmts) => out.push(self.body(stmts, None)?),
                TopLevel::Declare { decls, body } => {
                    let (names, mut inner) = self.decls(decls)?;
                    inner.push(self.body(body, None)?);
                    inner.push(self.units(&units[i + 1..])?);
                    out.push(local(names, inner));
                    return Ok(Kernel::seq(out));
                }
            }
        }
        Ok(Kernel::seq(out))
    }

    /// Desugars one interactive input. Names introduced by `declare` stay
    /// visible to later inputs; they are returned so the caller can create
    /// their variables before running the statement.
    pub fn unit(&mut self, unit: &TopLevel) -> R<(Vec<Ident>, Kernel)> {
        match unit {
            TopLevel::Stmts(stmts) => Ok((Vec::new(), self.body(stmts, None)?)),
            TopLevel::Declare { decls, body } => {
                let mark = self.scope.len();
                let (names, mut inner) = match self.decls(decls) {
                    Ok(x) => x,
                    Err(e) => {
                        self.scope.truncate(mark);
                        return Err(e);
                    }
                };
                match self.body(body, None) {
                    Ok(k) => inner.push(k),
                    Err(e) => {
                        self.scope.truncate(mark);
                        return Err(e);
                    }
                }
                Ok((names, Kernel::seq(inner)))
            }
        }
    }

    fn fresh(&mut self) -> Ident {
        self.counter += 1;
        Symbol::intern(&format!("`_t{}`", self.counter))
    }

    /// A fresh variable declared by the enclosing statement.
    fn temp(&mut self) -> Ident {
        let t = self.fresh();
        self.temps.push(t);
        t
    }

    fn in_scope(&self, s: Symbol) -> bool {
        self.scope.iter().rev().any(|x| *x == s)
    }

    fn is_primitive(&self, name: &str) -> bool {
        primitive_arity(name).is_some() && !self.in_scope(Symbol::intern(name))
    }

    fn resolve(&self, name: &str, pos: Pos) -> R<Ident> {
        let s = Symbol::intern(name);
        if self.in_scope(s) {
            Ok(s)
        } else {
            Err(CompileError::desugar(
                pos,
                format!("unresolved identifier {name}"),
            ))
        }
    }

    fn global(&self, name: &str) -> R<Ident> {
        self.resolve(name, Pos::default())
    }

    /// Statement sequence; the last phrase delivers the value when `tgt` is set.
    fn body(&mut self, phrases: &[Phrase], tgt: Option<Ident>) -> R<Kernel> {
        if phrases.is_empty() {
            return match tgt {
                None => Ok(Kernel::Skip),
                Some(_) => Err(CompileError::desugar(
                    Pos::default(),
                    "expected an expression",
                )),
            };
        }
        let mut out = Vec::new();
        let last = phrases.len() - 1;
        for (i, p) in phrases.iter().enumerate() {
            let t = if i == last { tgt } else { None };
            out.push(self.wrapped(p, t)?);
        }
        Ok(Kernel::seq(out))
    }

    /// One phrase, with the temporaries it needs declared around it.
    fn wrapped(&mut self, p: &Phrase, tgt: Option<Ident>) -> R<Kernel> {
        let mark = self.temps.len();
        let mut out = Vec::new();
        let r = match tgt {
            None => self.stmt(p, &mut out),
            Some(t) => self.expr(p, t, &mut out),
        };
        let temps = self.temps.split_off(mark);
        r?;
        Ok(local(temps, out))
    }

    fn decls(&mut self, decls: &[Phrase]) -> R<(Vec<Ident>, Vec<Kernel>)> {
        let mut names: Vec<Ident> = Vec::new();
        for d in decls {
            match d {
                Phrase::Var(n, _) => names.push(Symbol::intern(n)),
                Phrase::Eq(lhs, _) => pattern_vars(lhs, &mut names),
                Phrase::Proc { name, .. } | Phrase::Fun { name, .. } => match &**name {
                    Phrase::Var(n, _) => names.push(Symbol::intern(n)),
                    other => {
                        return Err(CompileError::desugar(
                            other.pos(),
                            "anonymous procedure in declaration",
                        ))
                    }
                },
                // statements declare nothing
                _ => {}
            }
        }
        dedup(&mut names);
        self.scope.extend(names.iter().copied());
        let mut pre = Vec::new();
        for d in decls {
            if !matches!(d, Phrase::Var(..)) {
                pre.push(self.wrapped(d, None)?);
            }
        }
        Ok((names, pre))
    }

    fn local(&mut self, decls: &[Phrase], body: &[Phrase], tgt: Option<Ident>) -> R<Kernel> {
        let mark = self.scope.len();
        let r: R<Kernel> = (|| {
            let (names, mut inner) = self.decls(decls)?;
            inner.push(self.body(body, tgt)?);
            Ok(local(names, inner))
        })();
        self.scope.truncate(mark);
        r
    }

    fn stmt(&mut self, p: &Phrase, out: &mut Vec<Kernel>) -> R<()> {
        match p {
            Phrase::Skip(_) => {}
            Phrase::Eq(a, b) => match (&**a, &**b) {
                (Phrase::Var(n, pos), _) if !self.is_primitive(n) => {
                    let t = self.resolve(n, *pos)?;
                    self.expr(b, t, out)?;
                }
                (_, Phrase::Var(n, pos)) if !self.is_primitive(n) => {
                    let t = self.resolve(n, *pos)?;
                    self.expr(a, t, out)?;
                }
                _ => {
                    let t = self.temp();
                    self.expr(a, t, out)?;
                    self.expr(b, t, out)?;
                }
            },
            Phrase::Apply(head, args, pos) => self.apply(head, args, None, *pos, out)?,
            Phrase::Local(decls, body, _) => out.push(self.local(decls, body, None)?),
            Phrase::If {
                branches,
                otherwise,
                pos,
            } => self.if_chain(branches, otherwise.as_deref(), None, *pos, out)?,
            Phrase::Case {
                subject,
                clauses,
                otherwise,
                ..
            } => self.case(subject, clauses, otherwise.as_deref(), None, out)?,
            Phrase::Proc {
                name,
                params,
                body,
                pos,
            } => {
                let n = self.named(name, *pos)?;
                out.push(self.proc_(n, params, body, None)?);
            }
            Phrase::Fun {
                lazy,
                name,
                params,
                body,
                pos,
            } => {
                let n = self.named(name, *pos)?;
                out.push(self.fun(n, *lazy, params, body)?);
            }
            Phrase::Thread(body, _) => out.push(Kernel::Thread(Rc::new(self.body(body, None)?))),
            Phrase::Try(body, var, handler, _) => {
                out.push(self.try_(body, var, handler, None)?);
            }
            Phrase::Raise(e, _) => {
                let x = self.value_ident(e, out)?;
                out.push(Kernel::Raise(x));
            }
            Phrase::Choice(alts, pos) => self.choice(alts, None, *pos, out)?,
            Phrase::Dis(alts, pos) => self.dis(alts, *pos, out)?,
            Phrase::Fd(rel, a, b) => self.fd(*rel, a, b, out)?,
            Phrase::Dollar(pos) => {
                return Err(CompileError::desugar(*pos, "'$' outside of an expression"))
            }
            other => {
                return Err(CompileError::desugar(
                    other.pos(),
                    "expression used as a statement",
                ))
            }
        }
        Ok(())
    }

    fn named(&self, name: &Phrase, pos: Pos) -> R<Ident> {
        match name {
            Phrase::Var(n, p) => self.resolve(n, *p),
            _ => Err(CompileError::desugar(
                pos,
                "anonymous procedure used as a statement",
            )),
        }
    }

    fn expr(&mut self, p: &Phrase, t: Ident, out: &mut Vec<Kernel>) -> R<()> {
        match p {
            Phrase::Var(n, pos) => {
                if self.is_primitive(n) {
                    out.push(self.eta(n, t));
                } else {
                    let x = self.resolve(n, *pos)?;
                    out.push(Kernel::Eq(t, x));
                }
            }
            Phrase::Int(i, _) => out.push(constant(t, Literal::Int(*i))),
            Phrase::Atom(a, _) => out.push(constant(t, Literal::Atom(Symbol::intern(a)))),
            Phrase::Wildcard(_) => {}
            Phrase::Dollar(pos) => match self.dollar {
                Some(d) => out.push(Kernel::Eq(t, d)),
                None => {
                    return Err(CompileError::desugar(*pos, "'$' outside of a call"));
                }
            },
            Phrase::Record { .. } | Phrase::Cons(..) | Phrase::Pair(_) | Phrase::List(..) => {
                self.construct(p, t, out)?
            }
            Phrase::Eq(a, b) => {
                self.expr(a, t, out)?;
                self.expr(b, t, out)?;
            }
            Phrase::BinOp(op, a, b) => {
                let x = self.value_ident(a, out)?;
                let y = self.value_ident(b, out)?;
                let f = self.global(binop_name(*op))?;
                out.push(Kernel::Apply(f, vec![x, y, t]));
            }
            Phrase::Neg(e, _) => {
                let z = self.temp();
                out.push(constant(z, Literal::Int(0)));
                let x = self.value_ident(e, out)?;
                let f = self.global(names::SUB)?;
                out.push(Kernel::Apply(f, vec![z, x, t]));
            }
            Phrase::Dot(e, field) => {
                let x = self.value_ident(e, out)?;
                let fv = self.temp();
                let lit = match field {
                    FieldName::Int(i) => Literal::Int(*i),
                    FieldName::Atom(a) => Literal::Atom(Symbol::intern(a)),
                };
                out.push(constant(fv, lit));
                let f = self.global(names::DOT)?;
                out.push(Kernel::Apply(f, vec![x, fv, t]));
            }
            Phrase::Apply(head, args, pos) => self.apply(head, args, Some(t), *pos, out)?,
            Phrase::Local(decls, body, _) => out.push(self.local(decls, body, Some(t))?),
            Phrase::If {
                branches,
                otherwise,
                pos,
            } => self.if_chain(branches, otherwise.as_deref(), Some(t), *pos, out)?,
            Phrase::Case {
                subject,
                clauses,
                otherwise,
                ..
            } => self.case(subject, clauses, otherwise.as_deref(), Some(t), out)?,
            Phrase::Proc {
                name, params, body, ..
            } => match &**name {
                Phrase::Dollar(_) => out.push(self.proc_(t, params, body, None)?),
                other => {
                    return Err(CompileError::desugar(
                        other.pos(),
                        "named procedure used as an expression",
                    ))
                }
            },
            Phrase::Fun {
                lazy,
                name,
                params,
                body,
                ..
            } => match &**name {
                Phrase::Dollar(_) => out.push(self.fun(t, *lazy, params, body)?),
                other => {
                    return Err(CompileError::desugar(
                        other.pos(),
                        "named function used as an expression",
                    ))
                }
            },
            Phrase::Thread(body, _) => {
                out.push(Kernel::Thread(Rc::new(self.body(body, Some(t))?)));
            }
            Phrase::Try(body, var, handler, _) => {
                out.push(self.try_(body, var, handler, Some(t))?);
            }
            Phrase::Raise(..) => self.stmt(p, out)?,
            Phrase::Choice(alts, pos) => self.choice(alts, Some(t), *pos, out)?,
            Phrase::Skip(pos) | Phrase::Dis(_, pos) => {
                return Err(CompileError::desugar(*pos, "statement used as an expression"))
            }
            Phrase::Fd(..) => {
                return Err(CompileError::desugar(
                    p.pos(),
                    "constraint used as an expression",
                ))
            }
        }
        Ok(())
    }

    /// The identifier holding the value of `p`, emitting whatever is needed
    /// to compute it.
    fn value_ident(&mut self, p: &Phrase, out: &mut Vec<Kernel>) -> R<Ident> {
        match p {
            Phrase::Var(n, pos) => {
                if self.is_primitive(n) {
                    let t = self.temp();
                    out.push(self.eta(n, t));
                    Ok(t)
                } else {
                    self.resolve(n, *pos)
                }
            }
            Phrase::Dollar(pos) => self
                .dollar
                .ok_or_else(|| CompileError::desugar(*pos, "'$' outside of a call")),
            Phrase::Wildcard(_) => Ok(self.temp()),
            _ => {
                let t = self.temp();
                self.expr(p, t, out)?;
                Ok(t)
            }
        }
    }

    /// Record construction. Fields built from calls are computed after the
    /// record is bound, so recursive list builders run in constant stack.
    fn construct(&mut self, p: &Phrase, t: Ident, out: &mut Vec<Kernel>) -> R<()> {
        let (label, fields) = record_fields(p)?;
        let mut bound = Vec::with_capacity(fields.len());
        let mut deferred = Vec::new();
        for (f, sub) in fields {
            let id = if is_static(&sub) {
                self.value_ident(&sub, out)?
            } else {
                let x = self.temp();
                deferred.push((x, sub));
                x
            };
            bound.push((f, id));
        }
        out.push(Kernel::Bind(
            t,
            Construct {
                label: Literal::Atom(label),
                fields: bound,
            },
        ));
        for (x, sub) in deferred {
            self.expr(&sub, x, out)?;
        }
        Ok(())
    }

    fn apply(
        &mut self,
        head: &Phrase,
        args: &[Phrase],
        tgt: Option<Ident>,
        pos: Pos,
        out: &mut Vec<Kernel>,
    ) -> R<()> {
        let has_dollar = args.iter().any(contains_dollar);
        if has_dollar && tgt.is_none() {
            return Err(CompileError::desugar(pos, "'$' in a call used as a statement"));
        }
        let append_out = tgt.is_some() && !has_dollar;
        let prim = match head {
            Phrase::Var(n, _) if self.is_primitive(n) => Some(n.as_str()),
            _ => None,
        };
        let f = match prim {
            Some(_) => None,
            None => Some(self.value_ident(head, out)?),
        };
        let saved = self.dollar;
        self.dollar = if has_dollar { tgt } else { None };
        let mut ids = Vec::with_capacity(args.len() + 1);
        let mut err = None;
        for a in args {
            match self.value_ident(a, out) {
                Ok(x) => ids.push(x),
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        self.dollar = saved;
        if let Some(e) = err {
            return Err(e);
        }
        if append_out {
            ids.push(tgt.unwrap());
        }
        match (prim, f) {
            (Some(name), _) => {
                let arity = primitive_arity(name).unwrap();
                if ids.len() != arity {
                    return Err(CompileError::desugar(
                        pos,
                        format!("{name} expects {arity} arguments, got {}", ids.len()),
                    ));
                }
                out.push(primitive(name, &ids));
            }
            (None, Some(f)) => out.push(Kernel::Apply(f, ids)),
            (None, None) => unreachable!(),
        }
        Ok(())
    }

    /// A procedure value standing for a primitive statement.
    fn eta(&mut self, name: &str, t: Ident) -> Kernel {
        let n = primitive_arity(name).unwrap();
        let params: Vec<Ident> = (0..n).map(|_| self.fresh()).collect();
        let body = primitive(name, &params);
        Kernel::Proc(t, params, Rc::new(body))
    }

    fn if_chain(
        &mut self,
        branches: &[(Phrase, Vec<Phrase>)],
        otherwise: Option<&[Phrase]>,
        tgt: Option<Ident>,
        pos: Pos,
        out: &mut Vec<Kernel>,
    ) -> R<()> {
        let (cond, body) = &branches[0];
        let x = self.value_ident(cond, out)?;
        let then = self.body(body, tgt)?;
        let els = if branches.len() > 1 {
            let mut inner = Vec::new();
            self.if_chain(&branches[1..], otherwise, tgt, pos, &mut inner)?;
            Kernel::seq(inner)
        } else {
            match otherwise {
                Some(o) => self.body(o, tgt)?,
                None if tgt.is_some() => {
                    return Err(CompileError::desugar(pos, "if expression without else"))
                }
                None => Kernel::Skip,
            }
        };
        out.push(Kernel::If(x, Rc::new(then), Rc::new(els)));
        Ok(())
    }

    fn case(
        &mut self,
        subject: &Phrase,
        clauses: &[(Phrase, Vec<Phrase>)],
        otherwise: Option<&[Phrase]>,
        tgt: Option<Ident>,
        out: &mut Vec<Kernel>,
    ) -> R<()> {
        let x = self.value_ident(subject, out)?;
        let mut fallback = match otherwise {
            Some(o) => self.body(o, tgt)?,
            None => self.nomatch(x),
        };
        for (pat, body) in clauses.iter().rev() {
            fallback = self.clause(x, pat, body, tgt, fallback)?;
        }
        out.push(fallback);
        Ok(())
    }

    fn nomatch(&mut self, x: Ident) -> Kernel {
        let k = self.fresh();
        let e = self.fresh();
        Kernel::Local(
            vec![k, e],
            Rc::new(Kernel::seq(vec![
                constant(k, Literal::Atom(Symbol::intern("nomatch"))),
                Kernel::Bind(
                    e,
                    Construct {
                        label: Literal::Atom(Symbol::intern("error")),
                        fields: vec![
                            (Feature::Atom(Symbol::intern("kind")), k),
                            (Feature::Atom(Symbol::intern("value")), x),
                        ],
                    },
                ),
                Kernel::Raise(e),
            ])),
        )
    }

    fn clause(
        &mut self,
        x: Ident,
        pat: &Phrase,
        body: &[Phrase],
        tgt: Option<Ident>,
        fail: Kernel,
    ) -> R<Kernel> {
        let mut vars = Vec::new();
        pattern_vars(pat, &mut vars);
        let mut seen = vars.clone();
        dedup(&mut seen);
        if seen.len() != vars.len() {
            return Err(CompileError::desugar(
                pat.pos(),
                "variable occurs twice in a pattern",
            ));
        }
        let mark = self.scope.len();
        self.scope.extend(vars.iter().copied());
        let k = self.body(body, tgt);
        self.scope.truncate(mark);
        let k = k?;
        if count_tests(pat) > 1 && size(&fail) > 4 {
            let f = self.fresh();
            let m = self.build_match(x, pat, k, &Kernel::Apply(f, vec![]))?;
            return Ok(Kernel::Local(
                vec![f],
                Rc::new(Kernel::seq(vec![
                    Kernel::Proc(f, vec![], Rc::new(fail)),
                    m,
                ])),
            ));
        }
        self.build_match(x, pat, k, &fail)
    }

    fn build_match(&mut self, x: Ident, pat: &Phrase, k: Kernel, fail: &Kernel) -> R<Kernel> {
        Ok(match pat {
            Phrase::Var(n, _) => {
                let v = Symbol::intern(n);
                Kernel::Local(vec![v], Rc::new(Kernel::seq(vec![Kernel::Eq(v, x), k])))
            }
            Phrase::Wildcard(_) => k,
            Phrase::Int(i, _) => Kernel::Case(
                x,
                Construct {
                    label: Literal::Int(*i),
                    fields: vec![],
                },
                Rc::new(k),
                Rc::new(fail.clone()),
            ),
            Phrase::Atom(a, _) => Kernel::Case(
                x,
                Construct {
                    label: Literal::Atom(Symbol::intern(a)),
                    fields: vec![],
                },
                Rc::new(k),
                Rc::new(fail.clone()),
            ),
            Phrase::Record { .. } | Phrase::Cons(..) | Phrase::Pair(_) | Phrase::List(..) => {
                let (label, fields) = record_fields(pat)?;
                let mut ids = Vec::with_capacity(fields.len());
                let mut nested = Vec::new();
                for (f, sub) in fields {
                    let id = match &sub {
                        Phrase::Var(n, _) => Symbol::intern(n),
                        _ => {
                            let id = self.fresh();
                            if !matches!(sub, Phrase::Wildcard(_)) {
                                nested.push((id, sub));
                            }
                            id
                        }
                    };
                    ids.push((f, id));
                }
                let mut inner = k;
                for (id, sub) in nested.into_iter().rev() {
                    inner = self.build_match(id, &sub, inner, fail)?;
                }
                Kernel::Case(
                    x,
                    Construct {
                        label: Literal::Atom(label),
                        fields: ids,
                    },
                    Rc::new(inner),
                    Rc::new(fail.clone()),
                )
            }
            other => return Err(CompileError::desugar(other.pos(), "invalid pattern")),
        })
    }

    fn params(&mut self, params: &[Phrase]) -> R<Vec<Ident>> {
        let mut ids = Vec::with_capacity(params.len());
        for p in params {
            match p {
                Phrase::Var(n, pos) => {
                    let s = Symbol::intern(n);
                    if ids.contains(&s) {
                        return Err(CompileError::desugar(*pos, format!("duplicate parameter {n}")));
                    }
                    ids.push(s);
                }
                _ => ids.push(self.fresh()),
            }
        }
        Ok(ids)
    }

    fn proc_(
        &mut self,
        name: Ident,
        params: &[Phrase],
        body: &[Phrase],
        tgt: Option<Ident>,
    ) -> R<Kernel> {
        let ids = self.params(params)?;
        let mark = self.scope.len();
        self.scope.extend(ids.iter().copied());
        let saved = self.dollar.take();
        let k = self.body(body, tgt);
        self.dollar = saved;
        self.scope.truncate(mark);
        Ok(Kernel::Proc(name, ids, Rc::new(k?)))
    }

    fn fun(&mut self, name: Ident, lazy: bool, params: &[Phrase], body: &[Phrase]) -> R<Kernel> {
        let mut ids = self.params(params)?;
        let r = self.fresh();
        let mark = self.scope.len();
        self.scope.extend(ids.iter().copied());
        let saved = self.dollar.take();
        let k = if lazy {
            let p = self.fresh();
            let x = self.fresh();
            let y = self.fresh();
            self.body(body, Some(y)).map(|inner| {
                Kernel::Local(
                    vec![p, x],
                    Rc::new(Kernel::seq(vec![
                        Kernel::Proc(p, vec![y], Rc::new(inner)),
                        Kernel::ByNeed(p, x),
                        Kernel::Eq(r, x),
                    ])),
                )
            })
        } else {
            self.body(body, Some(r))
        };
        self.dollar = saved;
        self.scope.truncate(mark);
        ids.push(r);
        Ok(Kernel::Proc(name, ids, Rc::new(k?)))
    }

    fn try_(
        &mut self,
        body: &[Phrase],
        var: &str,
        handler: &[Phrase],
        tgt: Option<Ident>,
    ) -> R<Kernel> {
        let b = self.body(body, tgt)?;
        let x = Symbol::intern(var);
        self.scope.push(x);
        let h = self.body(handler, tgt);
        self.scope.pop();
        Ok(Kernel::Try(Rc::new(b), x, Rc::new(h?)))
    }

    fn choice(
        &mut self,
        alts: &[Vec<Phrase>],
        tgt: Option<Ident>,
        pos: Pos,
        out: &mut Vec<Kernel>,
    ) -> R<()> {
        if alts.is_empty() {
            return Err(CompileError::desugar(pos, "choice without alternatives"));
        }
        let n = self.fresh();
        let c = self.fresh();
        let mut ks = Vec::with_capacity(alts.len());
        for a in alts {
            ks.push(self.body(a, tgt)?);
        }
        let mut acc = ks.pop().unwrap();
        for (i, k) in ks.into_iter().enumerate().rev() {
            acc = Kernel::Case(
                c,
                Construct {
                    label: Literal::Int(i as i64 + 1),
                    fields: vec![],
                },
                Rc::new(k),
                Rc::new(acc),
            );
        }
        out.push(Kernel::Local(
            vec![n, c],
            Rc::new(Kernel::seq(vec![
                constant(n, Literal::Int(alts.len() as i64)),
                Kernel::Space(SpaceOp::Choose, n, c),
                acc,
            ])),
        ));
        Ok(())
    }

    fn dis(
        &mut self,
        alts: &[(Vec<Phrase>, Vec<Phrase>)],
        pos: Pos,
        out: &mut Vec<Kernel>,
    ) -> R<()> {
        if alts.is_empty() {
            return Err(CompileError::desugar(pos, "dis without alternatives"));
        }
        let dis = self.global(names::DIS)?;
        let mut declared = Vec::new();
        let mut stmts = Vec::new();
        let mut guards = Vec::new();
        let mut bodies = Vec::new();
        for (guard, body) in alts {
            let g = self.fresh();
            let b = self.fresh();
            declared.push(g);
            declared.push(b);
            guards.push(g);
            bodies.push(b);
            // Variables declared by a guard are shared with its body.
            let (decls, rest): (&[Phrase], &[Phrase]) = match guard.as_slice() {
                [Phrase::Local(d, r, _)] => (d, r),
                _ => (&[], guard),
            };
            let mark = self.scope.len();
            let r: R<Kernel> = (|| {
                let (names, mut pre) = self.decls(decls)?;
                pre.push(self.body(rest, None)?);
                let gk = Kernel::Proc(g, vec![], Rc::new(Kernel::seq(pre)));
                let bk = Kernel::Proc(b, vec![], Rc::new(self.body(body, None)?));
                Ok(local(names, vec![gk, bk]))
            })();
            self.scope.truncate(mark);
            stmts.push(r?);
        }
        let gl = self.list_of(&guards, &mut declared, &mut stmts);
        let bl = self.list_of(&bodies, &mut declared, &mut stmts);
        stmts.push(Kernel::Apply(dis, vec![gl, bl]));
        out.push(local(declared, stmts));
        Ok(())
    }

    fn list_of(&mut self, items: &[Ident], declared: &mut Vec<Ident>, out: &mut Vec<Kernel>) -> Ident {
        let mut tail = self.fresh();
        declared.push(tail);
        out.push(constant(tail, Literal::Atom(Symbol::intern("nil"))));
        for x in items.iter().rev() {
            let cell = self.fresh();
            declared.push(cell);
            out.push(Kernel::Bind(
                cell,
                Construct {
                    label: Literal::Atom(Symbol::intern("|")),
                    fields: vec![(Feature::Int(1), *x), (Feature::Int(2), tail)],
                },
            ));
            tail = cell;
        }
        tail
    }

    fn fd(&mut self, rel: FdRel, a: &Phrase, b: &Phrase, out: &mut Vec<Kernel>) -> R<()> {
        match rel {
            FdRel::Dom => {
                let x = self.value_ident(a, out)?;
                let (lo, hi) = match b {
                    Phrase::Pair(items) if items.len() == 2 => (
                        self.value_ident(&items[0], out)?,
                        self.value_ident(&items[1], out)?,
                    ),
                    Phrase::Pair(_) => {
                        return Err(CompileError::desugar(b.pos(), "domain must be Lo#Hi"))
                    }
                    other => {
                        let v = self.value_ident(other, out)?;
                        (v, v)
                    }
                };
                let f = self.global(names::FD_DOM)?;
                out.push(Kernel::Apply(f, vec![x, lo, hi]));
            }
            FdRel::Ne => {
                let x = self.fd_operand(a, out)?;
                let y = self.fd_operand(b, out)?;
                let f = self.global(names::FD_NEQ)?;
                out.push(Kernel::Apply(f, vec![x, y]));
            }
            _ => {
                let (lhs, rhs, offset, le) = match rel {
                    FdRel::Eq => (a, b, 0, false),
                    FdRel::Le => (a, b, 0, true),
                    FdRel::Lt => (a, b, 1, true),
                    FdRel::Ge => (b, a, 0, true),
                    FdRel::Gt => (b, a, 1, true),
                    FdRel::Dom | FdRel::Ne => unreachable!(),
                };
                let mut monos = self.poly(lhs, out)?;
                for m in self.poly(rhs, out)? {
                    monos.push(Mono {
                        coef: -m.coef,
                        factors: m.factors,
                    });
                }
                if offset != 0 {
                    monos.push(Mono {
                        coef: offset,
                        factors: vec![],
                    });
                }
                self.post_linear(monos, le, out)?;
            }
        }
        Ok(())
    }

    /// An FD variable equal to `p`; arithmetic is posted as a constraint.
    fn fd_operand(&mut self, p: &Phrase, out: &mut Vec<Kernel>) -> R<Ident> {
        if !matches!(p, Phrase::BinOp(BinOp::Add | BinOp::Sub | BinOp::Mul, ..)) {
            return self.value_ident(p, out);
        }
        let z = self.temp();
        let mut monos = self.poly(p, out)?;
        monos.push(Mono {
            coef: -1,
            factors: vec![z],
        });
        self.post_linear(monos, false, out)?;
        Ok(z)
    }

    fn poly(&mut self, p: &Phrase, out: &mut Vec<Kernel>) -> R<Vec<Mono>> {
        Ok(match p {
            Phrase::Int(n, _) => vec![Mono {
                coef: *n,
                factors: vec![],
            }],
            Phrase::Neg(e, _) => negate(self.poly(e, out)?),
            Phrase::BinOp(BinOp::Add, a, b) => {
                let mut l = self.poly(a, out)?;
                l.extend(self.poly(b, out)?);
                l
            }
            Phrase::BinOp(BinOp::Sub, a, b) => {
                let mut l = self.poly(a, out)?;
                l.extend(negate(self.poly(b, out)?));
                l
            }
            Phrase::BinOp(BinOp::Mul, a, b) => {
                let l = self.poly(a, out)?;
                let r = self.poly(b, out)?;
                let mut prod = Vec::with_capacity(l.len() * r.len());
                for x in &l {
                    for y in &r {
                        let coef = x.coef.checked_mul(y.coef).ok_or_else(|| {
                            CompileError::desugar(p.pos(), "coefficient overflow")
                        })?;
                        let mut factors = x.factors.clone();
                        factors.extend(y.factors.iter().copied());
                        prod.push(Mono { coef, factors });
                    }
                }
                prod
            }
            other => vec![Mono {
                coef: 1,
                factors: vec![self.value_ident(other, out)?],
            }],
        })
    }

    /// Posts `sum(monos) = 0` (or `=< 0`). Nonlinear monomials become
    /// auxiliary variables defined by binary products, folded from the
    /// right and shared within the constraint.
    fn post_linear(&mut self, monos: Vec<Mono>, le: bool, out: &mut Vec<Kernel>) -> R<()> {
        let mut cache: HashMap<(Ident, Ident), Ident> = HashMap::new();
        let mut terms: Vec<(i64, Ident)> = Vec::new();
        let mut constant_part: i64 = 0;
        for m in monos {
            if m.coef == 0 {
                continue;
            }
            if m.factors.is_empty() {
                constant_part = constant_part
                    .checked_add(m.coef)
                    .ok_or_else(|| CompileError::desugar(Pos::default(), "constant overflow"))?;
                continue;
            }
            let v = self.product(&m.factors, &mut cache, out)?;
            match terms.iter_mut().find(|(_, x)| *x == v) {
                Some(t) => t.0 += m.coef,
                None => terms.push((m.coef, v)),
            }
        }
        terms.retain(|(c, _)| *c != 0);
        let mut declared = Vec::new();
        let mut stmts = Vec::new();
        let mut coefs = Vec::new();
        for (c, _) in &terms {
            let t = self.fresh();
            declared.push(t);
            stmts.push(constant(t, Literal::Int(*c)));
            coefs.push(t);
        }
        let vars: Vec<Ident> = terms.iter().map(|(_, v)| *v).collect();
        let cl = self.list_of(&coefs, &mut declared, &mut stmts);
        let vl = self.list_of(&vars, &mut declared, &mut stmts);
        let rel = self.fresh();
        declared.push(rel);
        stmts.push(constant(
            rel,
            Literal::Atom(Symbol::intern(if le { "=<:" } else { "=:" })),
        ));
        let c = self.fresh();
        declared.push(c);
        stmts.push(constant(c, Literal::Int(-constant_part)));
        let f = self.global(names::FD_LINEAR)?;
        stmts.push(Kernel::Apply(f, vec![cl, vl, rel, c]));
        out.push(local(declared, stmts));
        Ok(())
    }

    fn product(
        &mut self,
        factors: &[Ident],
        cache: &mut HashMap<(Ident, Ident), Ident>,
        out: &mut Vec<Kernel>,
    ) -> R<Ident> {
        if factors.len() == 1 {
            return Ok(factors[0]);
        }
        let rest = self.product(&factors[1..], cache, out)?;
        let key = (factors[0], rest);
        if let Some(v) = cache.get(&key) {
            return Ok(*v);
        }
        let p = self.temp();
        let f = self.global(names::FD_TIMES)?;
        out.push(Kernel::Apply(f, vec![factors[0], rest, p]));
        cache.insert(key, p);
        Ok(p)
    }
}

fn negate(monos: Vec<Mono>) -> Vec<Mono> {
    monos
        .into_iter()
        .map(|m| Mono {
            coef: -m.coef,
            factors: m.factors,
        })
        .collect()
}

fn binop_name(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => names::ADD,
        BinOp::Sub => names::SUB,
        BinOp::Mul => names::MUL,
        BinOp::Lt => names::LT,
        BinOp::Le => names::LE,
        BinOp::Gt => names::GT,
        BinOp::Ge => names::GE,
        BinOp::Equal => names::EQ,
        BinOp::NotEqual => names::NE,
    }
}

fn primitive(name: &str, a: &[Ident]) -> Kernel {
    match name {
        "ByNeed" => Kernel::ByNeed(a[0], a[1]),
        "IsDet" => Kernel::IsDet(a[0], a[1]),
        "NewCell" => Kernel::NewCell(a[0], a[1]),
        "NewName" => Kernel::NewName(a[0]),
        "Exchange" => Kernel::Exchange(a[0], a[1], a[2]),
        _ => {
            let op = SpaceOp::ALL
                .into_iter()
                .find(|op| op.name() == name)
                .expect("primitive name");
            Kernel::Space(op, a[0], a[1])
        }
    }
}

fn constant(t: Ident, lit: Literal) -> Kernel {
    Kernel::Bind(
        t,
        Construct {
            label: lit,
            fields: vec![],
        },
    )
}

fn local(mut names: Vec<Ident>, body: Vec<Kernel>) -> Kernel {
    let body = Kernel::seq(body);
    dedup(&mut names);
    if names.is_empty() {
        body
    } else {
        Kernel::Local(names, Rc::new(body))
    }
}

fn dedup(names: &mut Vec<Ident>) {
    let mut seen = Vec::with_capacity(names.len());
    names.retain(|n| {
        if seen.contains(n) {
            false
        } else {
            seen.push(*n);
            true
        }
    });
}

fn pattern_vars(p: &Phrase, out: &mut Vec<Ident>) {
    match p {
        Phrase::Var(n, _) => out.push(Symbol::intern(n)),
        Phrase::Record { fields, .. } => fields.iter().for_each(|(_, f)| pattern_vars(f, out)),
        Phrase::Cons(a, b) => {
            pattern_vars(a, out);
            pattern_vars(b, out);
        }
        Phrase::Pair(items) | Phrase::List(items, _) => {
            items.iter().for_each(|f| pattern_vars(f, out))
        }
        _ => {}
    }
}

fn count_tests(p: &Phrase) -> usize {
    match p {
        Phrase::Int(..) | Phrase::Atom(..) => 1,
        Phrase::Record { fields, .. } => 1 + fields.iter().map(|(_, f)| count_tests(f)).sum::<usize>(),
        Phrase::Cons(a, b) => 1 + count_tests(a) + count_tests(b),
        Phrase::Pair(items) => 1 + items.iter().map(count_tests).sum::<usize>(),
        Phrase::List(items, _) => 2 * items.len() + items.iter().map(count_tests).sum::<usize>(),
        _ => 0,
    }
}

fn size(k: &Kernel) -> usize {
    match k {
        Kernel::Seq(items) => items.iter().map(|k| size(k)).sum(),
        Kernel::Local(_, b) | Kernel::Thread(b) => 1 + size(b),
        Kernel::If(_, a, b) | Kernel::Case(_, _, a, b) | Kernel::Try(a, _, b) => {
            1 + size(a) + size(b)
        }
        Kernel::Proc(_, _, b) => 1 + size(b),
        _ => 1,
    }
}

fn contains_dollar(p: &Phrase) -> bool {
    match p {
        Phrase::Dollar(_) => true,
        Phrase::Record { fields, .. } => fields.iter().any(|(_, f)| contains_dollar(f)),
        Phrase::Cons(a, b) => contains_dollar(a) || contains_dollar(b),
        Phrase::Pair(items) | Phrase::List(items, _) => items.iter().any(contains_dollar),
        _ => false,
    }
}

/// Phrases whose value needs no procedure call to compute.
fn is_static(p: &Phrase) -> bool {
    match p {
        Phrase::Var(..)
        | Phrase::Int(..)
        | Phrase::Atom(..)
        | Phrase::Wildcard(_)
        | Phrase::Dollar(_) => true,
        Phrase::Record { fields, .. } => fields.iter().all(|(_, f)| is_static(f)),
        Phrase::Cons(a, b) => is_static(a) && is_static(b),
        Phrase::Pair(items) | Phrase::List(items, _) => items.iter().all(is_static),
        _ => false,
    }
}

fn record_fields(p: &Phrase) -> R<(Symbol, Vec<(Feature, Phrase)>)> {
    match p {
        Phrase::Record { label, fields, pos } => {
            let mut next = 1;
            let mut out: Vec<(Feature, Phrase)> = Vec::with_capacity(fields.len());
            for (name, value) in fields {
                let f = match name {
                    None => {
                        let f = Feature::Int(next);
                        next += 1;
                        f
                    }
                    Some(FieldName::Int(i)) => Feature::Int(*i),
                    Some(FieldName::Atom(a)) => Feature::Atom(Symbol::intern(a)),
                };
                if out.iter().any(|(g, _)| *g == f) {
                    return Err(CompileError::desugar(*pos, format!("duplicate feature {f}")));
                }
                out.push((f, value.clone()));
            }
            Ok((Symbol::intern(label), out))
        }
        Phrase::Cons(a, b) => Ok((
            Symbol::intern("|"),
            vec![
                (Feature::Int(1), (**a).clone()),
                (Feature::Int(2), (**b).clone()),
            ],
        )),
        Phrase::Pair(items) => Ok((
            Symbol::intern("#"),
            items
                .iter()
                .enumerate()
                .map(|(i, x)| (Feature::Int(i as i64 + 1), x.clone()))
                .collect(),
        )),
        Phrase::List(items, pos) => {
            let rest = if items.len() == 1 {
                Phrase::Atom("nil".into(), *pos)
            } else {
                Phrase::List(items[1..].to_vec(), *pos)
            };
            Ok((
                Symbol::intern("|"),
                vec![(Feature::Int(1), items[0].clone()), (Feature::Int(2), rest)],
            ))
        }
        other => Err(CompileError::desugar(other.pos(), "expected a record")),
    }
}
