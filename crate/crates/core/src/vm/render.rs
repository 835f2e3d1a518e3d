//! Text form of terms, as shown by `Browse`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;
use std::rc::Rc;

use super::Vm;
use crate::ast::pretty::atom_text;
use crate::term::{Feature, Record, SpaceId, Term};

pub fn render(vm: &Vm, t: &Term, s: SpaceId) -> String {
    let mut r = Renderer {
        vm,
        space: s,
        path: Vec::new(),
        cyclic: HashSet::new(),
        labels: HashMap::new(),
        emit: false,
    };
    let mut sink = String::new();
    r.term(t, Ctx::Top, &mut sink);
    r.emit = true;
    r.path.clear();
    let mut out = String::new();
    r.term(t, Ctx::Top, &mut out);
    out
}

pub fn int_text(i: i64) -> String {
    if i < 0 {
        format!("~{}", i.unsigned_abs())
    } else {
        i.to_string()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Top,
    /// Operand of `|` or `#`: infix terms need parentheses.
    Operand,
}

struct Renderer<'a> {
    vm: &'a Vm,
    space: SpaceId,
    path: Vec<usize>,
    /// Records reached again below themselves.
    cyclic: HashSet<usize>,
    labels: HashMap<usize, usize>,
    emit: bool,
}

fn key(r: &Rc<Record>) -> usize {
    Rc::as_ptr(r) as usize
}

impl Renderer<'_> {
    fn term(&mut self, t: &Term, ctx: Ctx, out: &mut String) {
        let t = self.vm.deref(t, self.space);
        match &t {
            Term::Var(v) => {
                out.push('_');
                if self.vm.has_domain(*v, self.space) {
                    let d = self.vm.domain(*v, self.space);
                    let parts: Vec<String> = d
                        .intervals()
                        .iter()
                        .map(|(l, h)| if l == h { int_text(*l) } else { format!("{}#{}", int_text(*l), int_text(*h)) })
                        .collect();
                    let _ = write!(out, "{{{}}}", parts.join(" "));
                }
            }
            Term::Int(i) => out.push_str(&int_text(*i)),
            Term::Atom(a) => out.push_str(&atom_text(a.as_str())),
            Term::Name(n) => {
                let _ = write!(out, "<N{}>", n.0);
            }
            Term::Proc(c) => {
                let _ = write!(out, "<P/{}>", c.params.len());
            }
            Term::Builtin(b) => {
                let _ = write!(out, "<P/{}>", super::builtin_arity(*b));
            }
            Term::Cell(_) => out.push_str("<Cell>"),
            Term::Port(_) => out.push_str("<Port>"),
            Term::Space(_) => out.push_str("<Space>"),
            Term::Record(r) => self.record(r, ctx, out),
        }
    }

    /// Handles back references; returns false when `r` was printed as one.
    fn enter(&mut self, r: &Rc<Record>, out: &mut String) -> bool {
        let k = key(r);
        if self.path.contains(&k) {
            if self.emit {
                let n = self.next_label(k);
                let _ = write!(out, "R{n}");
            } else {
                self.cyclic.insert(k);
            }
            return false;
        }
        if self.emit && self.cyclic.contains(&k) {
            if let Some(n) = self.labels.get(&k) {
                // already defined further left
                let _ = write!(out, "R{n}");
                return false;
            }
            let n = self.next_label(k);
            let _ = write!(out, "R{n}=");
        }
        self.path.push(k);
        true
    }

    fn next_label(&mut self, k: usize) -> usize {
        let n = self.labels.len() + 1;
        *self.labels.entry(k).or_insert(n)
    }

    fn record(&mut self, r: &Rc<Record>, ctx: Ctx, out: &mut String) {
        if r.is_cons() {
            return self.list(r, ctx, out);
        }
        let infix = r.label.as_str() == "#" && r.fields.len() >= 2 && r.is_tuple();
        let labelled = infix && ctx == Ctx::Operand || self.emit && self.cyclic.contains(&key(r));
        let mark = self.path.len();
        if !self.enter(r, out) {
            return;
        }
        if infix {
            if labelled {
                out.push('(');
            }
            for (i, (_, x)) in r.fields.iter().enumerate() {
                if i > 0 {
                    out.push('#');
                }
                self.term(x, Ctx::Operand, out);
            }
            if labelled {
                out.push(')');
            }
        } else {
            out.push_str(&atom_text(r.label.as_str()));
            out.push('(');
            let mut positional = true;
            for (i, (f, x)) in r.fields.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                positional &= *f == Feature::Int(i as i64 + 1);
                if !positional {
                    match f {
                        Feature::Int(n) => out.push_str(&int_text(*n)),
                        Feature::Atom(a) => out.push_str(&atom_text(a.as_str())),
                    }
                    out.push(':');
                }
                self.term(x, Ctx::Top, out);
            }
            out.push(')');
        }
        self.path.truncate(mark);
    }

    fn list(&mut self, first: &Rc<Record>, ctx: Ctx, out: &mut String) {
        // collect the spine, stopping at the first cell that repeats or is
        // a cycle target
        let mut cells = vec![first.clone()];
        let mut seen: HashSet<usize> = HashSet::from([key(first)]);
        let closed = loop {
            let last = cells.last().unwrap();
            match self.vm.deref(&last.fields[1].1, self.space) {
                Term::Atom(a) if a.as_str() == "nil" => break true,
                Term::Record(next) if next.is_cons() && seen.insert(key(&next)) => cells.push(next),
                _ => break false,
            }
        };
        let marked = cells.iter().any(|c| self.cyclic.contains(&key(c)) || self.path.contains(&key(c)));
        let mark = self.path.len();
        if closed && !marked {
            if !self.enter(first, out) {
                return;
            }
            out.push('[');
            for (i, c) in cells.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                    self.path.push(key(c));
                }
                self.term(&c.fields[0].1, Ctx::Top, out);
            }
            out.push(']');
            self.path.truncate(mark);
            return;
        }
        let paren = ctx == Ctx::Operand;
        if paren {
            out.push('(');
        }
        let mut rest: Option<Term> = None;
        for c in &cells {
            if !self.enter(c, out) {
                break;
            }
            self.term(&c.fields[0].1, Ctx::Operand, out);
            out.push('|');
            rest = Some(c.fields[1].1.clone());
        }
        if let Some(tail) = rest {
            let tail = self.vm.deref(&tail, self.space);
            match &tail {
                Term::Record(r) if r.is_cons() => {
                    if self.enter(r, out) {
                        // a spine cell met again further down is a back reference
                        self.path.pop();
                        self.list(r, Ctx::Top, out);
                    }
                }
                _ => self.term(&tail, Ctx::Operand, out),
            }
        }
        if paren {
            out.push(')');
        }
        self.path.truncate(mark);
    }
}
