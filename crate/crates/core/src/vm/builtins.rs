//! Procedures implemented by the machine.

use std::rc::Rc;

use super::{error, render, Exec, Stop, Vm, TOP};
use crate::ast::desugar::names;
use crate::fd::{Constraint, FDomain, Relation, SUP};
use crate::symbol::Symbol;
use crate::term::{BuiltinId, Feature, PortId, Record, SpaceId, Term, ThreadId};

type Native = fn(&mut Vm, ThreadId, SpaceId, &[Term]) -> Exec;

struct Entry {
    name: &'static str,
    arity: usize,
    run: Native,
}

const TABLE: &[Entry] = &[
    Entry { name: "Browse", arity: 1, run: browse },
    Entry { name: "Wait", arity: 1, run: wait },
    Entry { name: "IntPlus", arity: 3, run: |vm, t, s, a| arith(vm, t, s, a, i64::checked_add) },
    Entry { name: "IntMinus", arity: 3, run: |vm, t, s, a| arith(vm, t, s, a, i64::checked_sub) },
    Entry { name: "IntTimes", arity: 3, run: |vm, t, s, a| arith(vm, t, s, a, i64::checked_mul) },
    Entry { name: "Less", arity: 3, run: |vm, t, s, a| compare(vm, t, s, a, |o| o.is_lt()) },
    Entry { name: "Leq", arity: 3, run: |vm, t, s, a| compare(vm, t, s, a, |o| o.is_le()) },
    Entry { name: "Greater", arity: 3, run: |vm, t, s, a| compare(vm, t, s, a, |o| o.is_gt()) },
    Entry { name: "Geq", arity: 3, run: |vm, t, s, a| compare(vm, t, s, a, |o| o.is_ge()) },
    Entry { name: "Equal", arity: 3, run: |vm, t, s, a| equality(vm, t, s, a, true) },
    Entry { name: "NotEqual", arity: 3, run: |vm, t, s, a| equality(vm, t, s, a, false) },
    Entry { name: "Dot", arity: 3, run: dot },
    Entry { name: "NewPort", arity: 2, run: new_port },
    Entry { name: "Send", arity: 2, run: send },
    Entry { name: "RecordValues", arity: 2, run: record_values },
    Entry { name: "FDTellDom", arity: 3, run: fd_tell_dom },
    Entry { name: "FDLinear", arity: 4, run: fd_linear },
    Entry { name: "FDTimes", arity: 3, run: fd_times },
    Entry { name: "FDNeq", arity: 2, run: fd_neq },
    Entry { name: "FDDecl", arity: 1, run: fd_decl },
    Entry { name: "FDDistinct", arity: 1, run: fd_distinct },
    Entry { name: "FDSelectFF", arity: 2, run: fd_select_ff },
    Entry { name: "FDMin", arity: 2, run: fd_min },
];

/// Names under which the machine's procedures are visible to programs.
pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    TABLE.iter().map(|e| e.name)
}

pub(super) fn install(vm: &mut Vm) {
    for (i, e) in TABLE.iter().enumerate() {
        let b = Term::Builtin(BuiltinId(i as u16));
        vm.define_global(e.name, b.clone());
        let quoted = format!("`{}`", e.name);
        if names::ALL.contains(&quoted.as_str()) {
            vm.define_global(&quoted, b);
        }
    }
}

pub fn builtin_name(b: BuiltinId) -> &'static str {
    TABLE[b.0 as usize].name
}

pub fn builtin_arity(b: BuiltinId) -> usize {
    TABLE[b.0 as usize].arity
}

pub(super) fn call(vm: &mut Vm, t: ThreadId, b: BuiltinId, args: &[Term]) -> Exec {
    let e = &TABLE[b.0 as usize];
    if e.arity != args.len() {
        return Err(error("arity", Term::atom(e.name)));
    }
    let s = vm.threads[t.index()].space;
    (e.run)(vm, t, s, args)
}

/// `failure(debug:unit)`
pub fn failure_term() -> Term {
    let r = Record::new(
        Symbol::intern("failure"),
        vec![(Feature::Atom(Symbol::intern("debug")), Term::atom("unit"))],
    )
    .unwrap();
    Term::Record(Rc::new(r))
}

fn int(vm: &Vm, t: &Term, s: SpaceId) -> Result<i64, Stop> {
    match vm.deref(t, s) {
        Term::Int(i) => Ok(i),
        Term::Var(v) => Err(Stop::Suspend(v)),
        other => Err(error("notInt", other)),
    }
}

fn det(vm: &Vm, t: &Term, s: SpaceId) -> Result<Term, Stop> {
    match vm.deref(t, s) {
        Term::Var(v) => Err(Stop::Suspend(v)),
        other => Ok(other),
    }
}

/// Elements of a list, or the field values of any other record.
pub(crate) fn items(vm: &Vm, t: &Term, s: SpaceId) -> Result<Vec<Term>, Stop> {
    let mut out = Vec::new();
    let mut cur = det(vm, t, s)?;
    loop {
        match &cur {
            Term::Atom(a) if a.as_str() == "nil" => return Ok(out),
            Term::Record(r) if r.is_cons() => {
                out.push(r.fields[0].1.clone());
                cur = det(vm, &r.fields[1].1, s)?;
            }
            Term::Record(r) if out.is_empty() => {
                return Ok(r.fields.iter().map(|f| f.1.clone()).collect());
            }
            Term::Atom(_) if out.is_empty() => return Ok(out),
            other => return Err(error("notList", other.clone())),
        }
    }
}

fn browse(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    det(vm, &a[0], s)?;
    let line = render::render(vm, &a[0], s);
    vm.log.push(line);
    Ok(())
}

fn wait(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    det(vm, &a[0], s).map(|_| ())
}

fn arith(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term], op: fn(i64, i64) -> Option<i64>) -> Exec {
    let x = int(vm, &a[0], s)?;
    let y = int(vm, &a[1], s)?;
    let z = op(x, y).ok_or_else(|| error("overflow", Term::tuple("#", vec![Term::Int(x), Term::Int(y)])))?;
    vm.tell_eq(&a[2], &Term::Int(z), s)
}

fn compare(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term], test: fn(std::cmp::Ordering) -> bool) -> Exec {
    let x = det(vm, &a[0], s)?;
    let y = det(vm, &a[1], s)?;
    let ord = match (&x, &y) {
        (Term::Int(i), Term::Int(j)) => i.cmp(j),
        (Term::Atom(i), Term::Atom(j)) => i.as_str().cmp(j.as_str()),
        _ => return Err(error("notComparable", Term::tuple("#", vec![x, y]))),
    };
    vm.tell_eq(&a[2], &Term::bool(test(ord)), s)
}

fn equality(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term], want: bool) -> Exec {
    match vm.equal(&a[0], &a[1], s) {
        Ok(eq) => vm.tell_eq(&a[2], &Term::bool(eq == want), s),
        Err(v) => Err(Stop::Suspend(v)),
    }
}

fn dot(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    let r = det(vm, &a[0], s)?;
    let f = match det(vm, &a[1], s)? {
        Term::Int(i) => Feature::Int(i),
        Term::Atom(x) => Feature::Atom(x),
        other => return Err(error("notFeature", other)),
    };
    let field = match &r {
        Term::Record(rec) => rec.get(f).cloned(),
        _ => None,
    };
    match field {
        Some(x) => vm.tell_eq(&a[2], &x, s),
        None => Err(error("dot", Term::tuple("#", vec![r, feature_term(f)]))),
    }
}

fn feature_term(f: Feature) -> Term {
    match f {
        Feature::Int(i) => Term::Int(i),
        Feature::Atom(a) => Term::Atom(a),
    }
}

fn new_port(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    if s != TOP {
        return Err(error("portInSpace", Term::nil()));
    }
    let id = PortId(vm.ports.len() as u32);
    vm.ports.push(a[0].clone());
    vm.tell_eq(&a[1], &Term::Port(id), s)
}

fn send(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    let id = match det(vm, &a[0], s)? {
        Term::Port(id) => id,
        other => return Err(error("notPort", other)),
    };
    if s != TOP {
        return Err(error("portInSpace", Term::Port(id)));
    }
    let tail = vm.fresh(TOP);
    let old = std::mem::replace(&mut vm.ports[id.index()], tail.clone());
    vm.stats.port_sends += 1;
    vm.tell_eq(&old, &Term::cons(a[1].clone(), tail), s)
}

fn record_values(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    let xs = items(vm, &a[0], s)?;
    vm.tell_eq(&a[1], &Term::list(xs), s)
}

fn fd_tell_dom(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    let lo = int(vm, &a[1], s)?;
    let hi = int(vm, &a[2], s)?;
    if lo > hi || lo < 0 || hi > SUP {
        return Err(error("fdDomain", Term::tuple("#", vec![Term::Int(lo), Term::Int(hi)])));
    }
    let d = FDomain::range(lo, hi);
    let targets = match vm.deref(&a[0], s) {
        Term::Record(_) => items(vm, &a[0], s)?,
        other => vec![other],
    };
    for x in targets {
        let r = vm.tell_dom(&x, &d, s);
        vm.told(r, s)?;
    }
    Ok(())
}

fn fd_linear(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    let coefs = items(vm, &a[0], s)?
        .iter()
        .map(|c| int(vm, c, s))
        .collect::<Result<Vec<i64>, Stop>>()?;
    let terms = items(vm, &a[1], s)?;
    let rel = match det(vm, &a[2], s)? {
        Term::Atom(r) if r.as_str() == "=:" => Relation::Eq,
        Term::Atom(r) if r.as_str() == "=<:" => Relation::Le,
        other => return Err(error("fdRelation", other)),
    };
    let c = int(vm, &a[3], s)?;
    if coefs.len() != terms.len() {
        return Err(error("fdLinear", Term::Int(coefs.len() as i64)));
    }
    let mut vars = Vec::with_capacity(terms.len());
    for x in &terms {
        vars.push(vm.fd_arg(x, s)?);
    }
    vm.post(Constraint::Linear { coefs, vars, rel, c }, s);
    Ok(())
}

fn fd_times(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    let x = vm.fd_arg(&a[0], s)?;
    let y = vm.fd_arg(&a[1], s)?;
    let z = vm.fd_arg(&a[2], s)?;
    for v in [x, y, z] {
        if let super::FdVar::Const(i) = v {
            if i < 0 {
                return Err(error("fdNegative", Term::Int(i)));
            }
        }
    }
    vm.post(Constraint::Times { x, y, z }, s);
    Ok(())
}

fn fd_neq(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    let x = vm.fd_arg(&a[0], s)?;
    let y = vm.fd_arg(&a[1], s)?;
    vm.post(Constraint::Neq(x, y), s);
    Ok(())
}

fn fd_decl(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    match vm.deref(&a[0], s) {
        Term::Var(v) => {
            if vm.has_domain(v, s) {
                return Err(error("fdDecl", Term::Var(v)));
            }
            let r = vm.set_domain(v, FDomain::full(), s);
            vm.told(r, s)
        }
        Term::Int(i) if (0..=SUP).contains(&i) => Ok(()),
        Term::Int(_) => vm.told(Err(crate::store::Clash::Fail), s),
        other => Err(error("fdDecl", other)),
    }
}

fn fd_distinct(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    let xs = items(vm, &a[0], s)?;
    let mut vars = Vec::with_capacity(xs.len());
    for x in &xs {
        vars.push(vm.fd_arg(x, s)?);
    }
    vm.post(Constraint::Distinct(vars), s);
    Ok(())
}

fn fd_select_ff(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    let xs = items(vm, &a[0], s)?;
    let doms: Vec<FDomain> = xs
        .iter()
        .map(|x| match vm.deref(x, s) {
            Term::Int(i) => FDomain::singleton(i),
            Term::Var(v) => vm.domain(v, s),
            _ => FDomain::singleton(0),
        })
        .collect();
    let i = crate::fd::select_first_fail(&doms).map_or(0, |i| i as i64 + 1);
    vm.tell_eq(&a[1], &Term::Int(i), s)
}

fn fd_min(vm: &mut Vm, _t: ThreadId, s: SpaceId, a: &[Term]) -> Exec {
    let m = match vm.deref(&a[0], s) {
        Term::Int(i) => i,
        Term::Var(v) => vm.domain(v, s).min(),
        other => return Err(error("notFdVar", other)),
    };
    vm.tell_eq(&a[1], &Term::Int(m), s)
}
