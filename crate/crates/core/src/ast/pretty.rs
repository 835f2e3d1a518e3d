//! Kernel statements printed back as parseable source.

use std::fmt::Write;

use super::kernel::{Construct, Ident, Kernel, Literal};
use crate::term::Feature;

pub fn pretty(k: &Kernel) -> String {
    let mut out = String::new();
    stmt(k, 0, &mut out);
    out.push('\n');
    out
}

pub fn atom_text(a: &str) -> String {
    let plain = a
        .chars()
        .next()
        .map_or(false, |c| c.is_ascii_lowercase())
        && a.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_keyword(a);
    if plain {
        a.to_string()
    } else {
        let mut s = String::from("'");
        for c in a.chars() {
            if c == '\'' || c == '\\' {
                s.push('\\');
            }
            s.push(c);
        }
        s.push('\'');
        s
    }
}

fn is_keyword(a: &str) -> bool {
    matches!(
        a,
        "local" | "in" | "end" | "declare" | "if" | "then" | "else" | "elseif" | "case" | "of"
            | "proc" | "fun" | "lazy" | "thread" | "try" | "catch" | "raise" | "choice" | "dis"
            | "skip" | "class" | "functor" | "for" | "meth" | "do" | "fail"
    )
}

fn int_text(i: i64) -> String {
    if i < 0 {
        format!("~{}", i.unsigned_abs())
    } else {
        i.to_string()
    }
}

fn literal(l: &Literal) -> String {
    match l {
        Literal::Int(i) => int_text(*i),
        Literal::Atom(a) => atom_text(a.as_str()),
    }
}

fn construct(c: &Construct) -> String {
    if c.fields.is_empty() {
        return literal(&c.label);
    }
    let mut s = literal(&c.label);
    s.push('(');
    for (i, (f, x)) in c.fields.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        match f {
            Feature::Int(n) => s.push_str(&int_text(*n)),
            Feature::Atom(a) => s.push_str(&atom_text(a.as_str())),
        }
        s.push(':');
        s.push_str(x.as_str());
    }
    s.push(')');
    s
}

fn idents(xs: &[Ident]) -> String {
    xs.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(" ")
}

fn indent(n: usize, out: &mut String) {
    for _ in 0..n {
        out.push_str("   ");
    }
}

fn block(k: &Kernel, depth: usize, out: &mut String) {
    out.push('\n');
    stmt(k, depth + 1, out);
    out.push('\n');
    indent(depth, out);
}

fn stmt(k: &Kernel, depth: usize, out: &mut String) {
    if !matches!(k, Kernel::Seq(_)) {
        indent(depth, out);
    }
    match k {
        Kernel::Skip => out.push_str("skip"),
        Kernel::Eq(x, y) => {
            let _ = write!(out, "{x}={y}");
        }
        Kernel::Bind(x, c) => {
            let _ = write!(out, "{x}={}", construct(c));
        }
        Kernel::Seq(items) => {
            for (i, s) in items.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                stmt(s, depth, out);
            }
        }
        Kernel::Local(xs, body) => {
            let _ = write!(out, "local {} in", idents(xs));
            block(body, depth, out);
            out.push_str("end");
        }
        Kernel::If(x, a, b) => {
            let _ = write!(out, "if {x} then");
            block(a, depth, out);
            out.push_str("else");
            block(b, depth, out);
            out.push_str("end");
        }
        Kernel::Case(x, pat, a, b) => {
            let _ = write!(out, "case {x} of {} then", construct(pat));
            block(a, depth, out);
            out.push_str("else");
            block(b, depth, out);
            out.push_str("end");
        }
        Kernel::Proc(p, params, body) => {
            if params.is_empty() {
                let _ = write!(out, "proc {{{p}}}");
            } else {
                let _ = write!(out, "proc {{{p} {}}}", idents(params));
            }
            block(body, depth, out);
            out.push_str("end");
        }
        Kernel::Apply(f, args) => call(out, f.as_str(), args),
        Kernel::Thread(body) => {
            out.push_str("thread");
            block(body, depth, out);
            out.push_str("end");
        }
        Kernel::ByNeed(p, x) => call(out, "ByNeed", &[*p, *x]),
        Kernel::Try(body, x, handler) => {
            out.push_str("try");
            block(body, depth, out);
            let _ = write!(out, "catch {x} then");
            block(handler, depth, out);
            out.push_str("end");
        }
        Kernel::Raise(x) => {
            let _ = write!(out, "raise {x} end");
        }
        Kernel::NewName(x) => call(out, "NewName", &[*x]),
        Kernel::IsDet(x, y) => call(out, "IsDet", &[*x, *y]),
        Kernel::NewCell(x, c) => call(out, "NewCell", &[*x, *c]),
        Kernel::Exchange(c, a, b) => call(out, "Exchange", &[*c, *a, *b]),
        Kernel::Space(op, a, b) => call(out, op.name(), &[*a, *b]),
    }
}

fn call(out: &mut String, f: &str, args: &[Ident]) {
    if args.is_empty() {
        let _ = write!(out, "{{{f}}}");
    } else {
        let _ = write!(out, "{{{f} {}}}", idents(args));
    }
}
