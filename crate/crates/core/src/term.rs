//! Values of the constraint store.

use std::cmp::Ordering;
use std::fmt;
use std::rc::Rc;

use crate::ast::kernel::{Ident, Kernel};
use crate::symbol::Symbol;

macro_rules! id_type {
    ($($name:ident),*) => {$(
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    )*};
}

id_type!(VarId, SpaceId, ThreadId, PropId, CellId, PortId, NameId);

pub type Atom = Symbol;

/// Record feature. Integer features sort before atom features.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Feature {
    Int(i64),
    Atom(Atom),
}

impl Ord for Feature {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Feature::Int(a), Feature::Int(b)) => a.cmp(b),
            (Feature::Int(_), Feature::Atom(_)) => Ordering::Less,
            (Feature::Atom(_), Feature::Int(_)) => Ordering::Greater,
            (Feature::Atom(a), Feature::Atom(b)) => a.as_str().cmp(b.as_str()),
        }
    }
}

impl PartialOrd for Feature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Int(i) => write!(f, "{i}"),
            Feature::Atom(a) => write!(f, "{a}"),
        }
    }
}

/// A record with canonically ordered features.
#[derive(Debug)]
pub struct Record {
    pub label: Atom,
    pub fields: Vec<(Feature, Term)>,
}

impl Record {
    /// Builds a record, sorting features canonically. Duplicate features are
    /// rejected by returning `None`.
    pub fn new(label: Atom, mut fields: Vec<(Feature, Term)>) -> Option<Record> {
        fields.sort_by(|a, b| a.0.cmp(&b.0));
        if fields.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        Some(Record { label, fields })
    }

    pub fn tuple(label: &str, items: Vec<Term>) -> Record {
        let fields = items
            .into_iter()
            .enumerate()
            .map(|(i, t)| (Feature::Int(i as i64 + 1), t))
            .collect();
        Record {
            label: Symbol::intern(label),
            fields,
        }
    }

    pub fn get(&self, f: Feature) -> Option<&Term> {
        self.fields
            .binary_search_by(|(k, _)| k.cmp(&f))
            .ok()
            .map(|i| &self.fields[i].1)
    }

    pub fn same_arity(&self, other: &Record) -> bool {
        self.label == other.label
            && self.fields.len() == other.fields.len()
            && self.fields.iter().zip(&other.fields).all(|(a, b)| a.0 == b.0)
    }

    /// True when the features are exactly `1..=n`.
    pub fn is_tuple(&self) -> bool {
        self.fields
            .iter()
            .enumerate()
            .all(|(i, (f, _))| *f == Feature::Int(i as i64 + 1))
    }

    pub fn is_cons(&self) -> bool {
        self.label.as_str() == "|" && self.fields.len() == 2 && self.is_tuple()
    }
}

/// A procedure value: parameters, body and the defining environment.
pub struct Closure {
    pub name: Option<Ident>,
    pub params: Vec<Ident>,
    pub body: Rc<Kernel>,
    pub env: Env,
}

impl fmt::Debug for Closure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<P/{}>", self.params.len())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct BuiltinId(pub u16);

#[derive(Clone, Debug)]
pub enum Term {
    Var(VarId),
    Int(i64),
    Atom(Atom),
    Record(Rc<Record>),
    Name(NameId),
    Proc(Rc<Closure>),
    Builtin(BuiltinId),
    Cell(CellId),
    Port(PortId),
    Space(SpaceId),
}

impl Term {
    pub fn atom(s: &str) -> Term {
        Term::Atom(Symbol::intern(s))
    }

    pub fn bool(b: bool) -> Term {
        Term::atom(if b { "true" } else { "false" })
    }

    pub fn nil() -> Term {
        Term::atom("nil")
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::Record(Rc::new(Record::tuple("|", vec![head, tail])))
    }

    pub fn tuple(label: &str, items: Vec<Term>) -> Term {
        Term::Record(Rc::new(Record::tuple(label, items)))
    }

    pub fn list(items: Vec<Term>) -> Term {
        items
            .into_iter()
            .rev()
            .fold(Term::nil(), |acc, t| Term::cons(t, acc))
    }

    pub fn as_var(&self) -> Option<VarId> {
        match self {
            Term::Var(v) => Some(*v),
            _ => None,
        }
    }

    /// Identity comparison for determined, non-structured values.
    pub fn same_constant(&self, other: &Term) -> Option<bool> {
        Some(match (self, other) {
            (Term::Int(a), Term::Int(b)) => a == b,
            (Term::Atom(a), Term::Atom(b)) => a == b,
            (Term::Name(a), Term::Name(b)) => a == b,
            (Term::Proc(a), Term::Proc(b)) => Rc::ptr_eq(a, b),
            (Term::Builtin(a), Term::Builtin(b)) => a == b,
            (Term::Cell(a), Term::Cell(b)) => a == b,
            (Term::Port(a), Term::Port(b)) => a == b,
            (Term::Space(a), Term::Space(b)) => a == b,
            (Term::Var(_), _) | (_, Term::Var(_)) => return None,
            (Term::Record(_), Term::Record(_)) => return None,
            _ => false,
        })
    }
}

/// Lexical environment: an immutable linked list of bindings.
#[derive(Clone, Default)]
pub struct Env(pub Option<Rc<EnvNode>>);

pub struct EnvNode {
    pub name: Ident,
    pub value: Term,
    pub next: Env,
}

impl Env {
    pub fn empty() -> Env {
        Env(None)
    }

    pub fn bind(&self, name: Ident, value: Term) -> Env {
        Env(Some(Rc::new(EnvNode {
            name,
            value,
            next: self.clone(),
        })))
    }

    pub fn lookup(&self, name: Ident) -> Option<&Term> {
        let mut cur = &self.0;
        while let Some(node) = cur {
            if node.name == name {
                return Some(&node.value);
            }
            cur = &node.next.0;
        }
        None
    }

    pub fn ptr(&self) -> Option<*const EnvNode> {
        self.0.as_ref().map(Rc::as_ptr)
    }
}

impl fmt::Debug for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<env>")
    }
}
