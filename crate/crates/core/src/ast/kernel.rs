//! The kernel language: the small statement set every program is reduced to.

use std::rc::Rc;

use crate::symbol::Symbol;
use crate::term::Feature;

pub type Ident = Symbol;

/// Literal that may label a record, appear as a constant, or head a pattern.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Literal {
    Int(i64),
    Atom(Symbol),
}

/// Right-hand side of a record tell: `x = l(f1:x1 ... fn:xn)`.
/// A literal with no features is a constant.
#[derive(Clone, PartialEq, Debug)]
pub struct Construct {
    pub label: Literal,
    pub fields: Vec<(Feature, Ident)>,
}

/// Pattern of a kernel `case`: a label with distinct variables for each feature.
pub type Pattern = Construct;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SpaceOp {
    NewSpace,
    Choose,
    Ask,
    Commit,
    Clone,
    Inject,
    Merge,
}

impl SpaceOp {
    pub const ALL: [SpaceOp; 7] = [
        SpaceOp::NewSpace,
        SpaceOp::Choose,
        SpaceOp::Ask,
        SpaceOp::Commit,
        SpaceOp::Clone,
        SpaceOp::Inject,
        SpaceOp::Merge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpaceOp::NewSpace => "NewSpace",
            SpaceOp::Choose => "Choose",
            SpaceOp::Ask => "Ask",
            SpaceOp::Commit => "Commit",
            SpaceOp::Clone => "Clone",
            SpaceOp::Inject => "Inject",
            SpaceOp::Merge => "Merge",
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum Kernel {
    Skip,
    Eq(Ident, Ident),
    Bind(Ident, Construct),
    Seq(Vec<Rc<Kernel>>),
    Local(Vec<Ident>, Rc<Kernel>),
    If(Ident, Rc<Kernel>, Rc<Kernel>),
    Case(Ident, Pattern, Rc<Kernel>, Rc<Kernel>),
    Proc(Ident, Vec<Ident>, Rc<Kernel>),
    Apply(Ident, Vec<Ident>),
    Thread(Rc<Kernel>),
    ByNeed(Ident, Ident),
    Try(Rc<Kernel>, Ident, Rc<Kernel>),
    Raise(Ident),
    NewName(Ident),
    IsDet(Ident, Ident),
    NewCell(Ident, Ident),
    Exchange(Ident, Ident, Ident),
    Space(SpaceOp, Ident, Ident),
}

/// Primitive operations that are kernel statements rather than procedures,
/// with their arity.
pub fn primitive_arity(name: &str) -> Option<usize> {
    Some(match name {
        "ByNeed" | "IsDet" | "NewCell" => 2,
        "NewName" => 1,
        "Exchange" => 3,
        "NewSpace" | "Choose" | "Ask" | "Commit" | "Clone" | "Inject" | "Merge" => 2,
        _ => return None,
    })
}

impl Kernel {
    /// Builds a sequence, flattening nested sequences and dropping `skip`.
    pub fn seq(items: Vec<Kernel>) -> Kernel {
        let mut out: Vec<Rc<Kernel>> = Vec::new();
        for k in items {
            match k {
                Kernel::Skip => {}
                Kernel::Seq(inner) => out.extend(inner),
                other => out.push(Rc::new(other)),
            }
        }
        match out.len() {
            0 => Kernel::Skip,
            1 => Rc::try_unwrap(out.pop().unwrap()).unwrap_or_else(|rc| (*rc).clone()),
            _ => Kernel::Seq(out),
        }
    }
}
