//! Parse tree of the surface language.
//!
//! Statements and expressions share one type: whether a phrase is used for
//! its effect or for its value is decided by the desugarer from context.

use super::Pos;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Lt,
    Le,
    Gt,
    Ge,
    Equal,
    NotEqual,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FdRel {
    /// `:::`
    Dom,
    /// `=:`
    Eq,
    /// `\=:`
    Ne,
    /// `<:`
    Lt,
    /// `=<:`
    Le,
    /// `>:`
    Gt,
    /// `>=:`
    Ge,
}

#[derive(Clone, PartialEq, Debug)]
pub enum FieldName {
    Int(i64),
    Atom(String),
}

#[derive(Clone, PartialEq, Debug)]
pub enum Phrase {
    Skip(Pos),
    Var(String, Pos),
    Atom(String, Pos),
    Int(i64, Pos),
    /// `_`
    Wildcard(Pos),
    /// `$` nesting marker
    Dollar(Pos),
    Record {
        label: String,
        fields: Vec<(Option<FieldName>, Phrase)>,
        pos: Pos,
    },
    Cons(Box<Phrase>, Box<Phrase>),
    /// `a#b#c`
    Pair(Vec<Phrase>),
    List(Vec<Phrase>, Pos),
    Eq(Box<Phrase>, Box<Phrase>),
    BinOp(BinOp, Box<Phrase>, Box<Phrase>),
    Neg(Box<Phrase>, Pos),
    Fd(FdRel, Box<Phrase>, Box<Phrase>),
    Dot(Box<Phrase>, FieldName),
    Apply(Box<Phrase>, Vec<Phrase>, Pos),
    /// `local D in S end`, or an implicit `D in S` body.
    Local(Vec<Phrase>, Vec<Phrase>, Pos),
    If {
        branches: Vec<(Phrase, Vec<Phrase>)>,
        otherwise: Option<Vec<Phrase>>,
        pos: Pos,
    },
    Case {
        subject: Box<Phrase>,
        clauses: Vec<(Phrase, Vec<Phrase>)>,
        otherwise: Option<Vec<Phrase>>,
        pos: Pos,
    },
    Proc {
        name: Box<Phrase>,
        params: Vec<Phrase>,
        body: Vec<Phrase>,
        pos: Pos,
    },
    Fun {
        lazy: bool,
        name: Box<Phrase>,
        params: Vec<Phrase>,
        body: Vec<Phrase>,
        pos: Pos,
    },
    Thread(Vec<Phrase>, Pos),
    Try(Vec<Phrase>, String, Vec<Phrase>, Pos),
    Raise(Box<Phrase>, Pos),
    Choice(Vec<Vec<Phrase>>, Pos),
    Dis(Vec<(Vec<Phrase>, Vec<Phrase>)>, Pos),
}

impl Phrase {
    pub fn pos(&self) -> Pos {
        match self {
            Phrase::Skip(p)
            | Phrase::Var(_, p)
            | Phrase::Atom(_, p)
            | Phrase::Int(_, p)
            | Phrase::Wildcard(p)
            | Phrase::Dollar(p)
            | Phrase::List(_, p)
            | Phrase::Neg(_, p)
            | Phrase::Apply(_, _, p)
            | Phrase::Local(_, _, p)
            | Phrase::Thread(_, p)
            | Phrase::Try(_, _, _, p)
            | Phrase::Raise(_, p)
            | Phrase::Choice(_, p)
            | Phrase::Dis(_, p) => *p,
            Phrase::Record { pos, .. }
            | Phrase::If { pos, .. }
            | Phrase::Case { pos, .. }
            | Phrase::Proc { pos, .. }
            | Phrase::Fun { pos, .. } => *pos,
            Phrase::Cons(a, _)
            | Phrase::Eq(a, _)
            | Phrase::BinOp(_, a, _)
            | Phrase::Fd(_, a, _)
            | Phrase::Dot(a, _) => a.pos(),
            Phrase::Pair(items) => items[0].pos(),
        }
    }
}

/// One top-level unit of a program: `declare D in S`, `declare D`, or plain statements.
#[derive(Clone, PartialEq, Debug)]
pub enum TopLevel {
    Declare {
        decls: Vec<Phrase>,
        body: Vec<Phrase>,
    },
    Stmts(Vec<Phrase>),
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct Program {
    pub units: Vec<TopLevel>,
}
