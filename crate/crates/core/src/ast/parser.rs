use super::lexer::{lex, Tok, Token};
use super::surface::{BinOp, FdRel, FieldName, Phrase, Program, TopLevel};
use super::{Pos, SyntaxError};

pub fn parse(src: &str) -> Result<Program, SyntaxError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, at: 0 };
    p.program()
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

type PResult<T> = Result<T, SyntaxError>;

fn describe(t: &Tok) -> String {
    match t {
        Tok::Var(v) => format!("variable {v}"),
        Tok::Atom(a) | Tok::Label(a) => format!("atom {a}"),
        Tok::Int(i) => format!("integer {i}"),
        Tok::Kw(k) => format!("keyword '{k}'"),
        Tok::Sym(s) => format!("'{s}'"),
        Tok::Eof => "end of input".to_string(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.at + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Kw(k) if *k == kw)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(k) if *k == s)
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let msg = msg.into();
        let err = SyntaxError::new(self.pos(), format!("{msg}, found {}", describe(self.peek())));
        Err(if matches!(self.peek(), Tok::Eof) {
            err.mark_eof()
        } else {
            err
        })
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected '{kw}'"))
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.is_sym(s) {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected '{s}'"))
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut units = Vec::new();
        loop {
            if matches!(self.peek(), Tok::Eof) {
                break;
            }
            if self.is_kw("declare") {
                self.next();
                let decls = self.phrases()?;
                let body = if self.is_kw("in") {
                    self.next();
                    self.body()?
                } else {
                    Vec::new()
                };
                units.push(TopLevel::Declare { decls, body });
            } else {
                let stmts = self.body()?;
                if stmts.is_empty() {
                    return self.error("expected a statement");
                }
                units.push(TopLevel::Stmts(stmts));
            }
            if !matches!(self.peek(), Tok::Eof) && !self.is_kw("declare") {
                return self.error("unexpected token at top level");
            }
        }
        Ok(Program { units })
    }

    fn starts_phrase(&self) -> bool {
        match self.peek() {
            Tok::Var(_) | Tok::Atom(_) | Tok::Label(_) | Tok::Int(_) => true,
            Tok::Kw(k) => matches!(
                *k,
                "skip"
                    | "local"
                    | "if"
                    | "case"
                    | "proc"
                    | "fun"
                    | "thread"
                    | "try"
                    | "raise"
                    | "choice"
                    | "dis"
                    | "fail"
                    | "class"
                    | "functor"
                    | "for"
            ),
            Tok::Sym(s) => matches!(*s, "{" | "[" | "(" | "_" | "$" | "~"),
            Tok::Eof => false,
        }
    }

    fn phrases(&mut self) -> PResult<Vec<Phrase>> {
        let mut out = Vec::new();
        while self.starts_phrase() {
            out.push(self.phrase()?);
        }
        Ok(out)
    }

    /// A statement sequence, possibly `D in S`.
    fn body(&mut self) -> PResult<Vec<Phrase>> {
        let pos = self.pos();
        let first = self.phrases()?;
        if self.is_kw("in") {
            self.next();
            let rest = self.body()?;
            Ok(vec![Phrase::Local(first, rest, pos)])
        } else {
            Ok(first)
        }
    }

    fn phrase(&mut self) -> PResult<Phrase> {
        let lhs = self.relation()?;
        if self.is_sym("=") {
            self.next();
            let rhs = self.phrase()?;
            return Ok(Phrase::Eq(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn relation(&mut self) -> PResult<Phrase> {
        let lhs = self.cons()?;
        let op = match self.peek() {
            Tok::Sym(s) => *s,
            _ => return Ok(lhs),
        };
        let make: Option<Box<dyn Fn(Phrase, Phrase) -> Phrase>> = match op {
            "==" => Some(bin(BinOp::Equal)),
            "\\=" => Some(bin(BinOp::NotEqual)),
            "<" => Some(bin(BinOp::Lt)),
            "=<" => Some(bin(BinOp::Le)),
            ">" => Some(bin(BinOp::Gt)),
            ">=" => Some(bin(BinOp::Ge)),
            ":::" => Some(fd(FdRel::Dom)),
            "=:" => Some(fd(FdRel::Eq)),
            "\\=:" => Some(fd(FdRel::Ne)),
            "<:" => Some(fd(FdRel::Lt)),
            "=<:" => Some(fd(FdRel::Le)),
            ">:" => Some(fd(FdRel::Gt)),
            ">=:" => Some(fd(FdRel::Ge)),
            _ => None,
        };
        match make {
            Some(f) => {
                self.next();
                let rhs = self.cons()?;
                Ok(f(lhs, rhs))
            }
            None => Ok(lhs),
        }
    }

    fn cons(&mut self) -> PResult<Phrase> {
        let head = self.pair()?;
        if self.is_sym("|") {
            self.next();
            let tail = self.cons()?;
            return Ok(Phrase::Cons(Box::new(head), Box::new(tail)));
        }
        Ok(head)
    }

    fn pair(&mut self) -> PResult<Phrase> {
        let first = self.additive()?;
        if !self.is_sym("#") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.is_sym("#") {
            self.next();
            items.push(self.additive()?);
        }
        Ok(Phrase::Pair(items))
    }

    fn additive(&mut self) -> PResult<Phrase> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = if self.is_sym("+") {
                BinOp::Add
            } else if self.is_sym("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.next();
            let rhs = self.multiplicative()?;
            lhs = Phrase::BinOp(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> PResult<Phrase> {
        let mut lhs = self.unary()?;
        while self.is_sym("*") {
            self.next();
            let rhs = self.unary()?;
            lhs = Phrase::BinOp(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Phrase> {
        if self.is_sym("~") {
            let pos = self.pos();
            self.next();
            let inner = self.unary()?;
            return Ok(match inner {
                Phrase::Int(n, _) => Phrase::Int(-n, pos),
                other => Phrase::Neg(Box::new(other), pos),
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Phrase> {
        let mut e = self.primary()?;
        while self.is_sym(".") {
            self.next();
            let field = match self.next().tok {
                Tok::Atom(a) => FieldName::Atom(a),
                Tok::Int(i) => FieldName::Int(i),
                Tok::Kw(k) => FieldName::Atom(k.to_string()),
                _ => {
                    self.at -= 1;
                    return self.error("expected a feature after '.'");
                }
            };
            e = Phrase::Dot(Box::new(e), field);
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Phrase> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Var(v) => {
                self.next();
                Ok(Phrase::Var(v, pos))
            }
            Tok::Atom(a) => {
                self.next();
                Ok(Phrase::Atom(a, pos))
            }
            Tok::Int(i) => {
                self.next();
                Ok(Phrase::Int(i, pos))
            }
            Tok::Label(label) => {
                self.next();
                self.expect_sym("(")?;
                let mut fields = Vec::new();
                while !self.is_sym(")") {
                    let named = match (self.peek().clone(), self.peek_at(1)) {
                        (Tok::Atom(a), Tok::Sym(":")) => Some(FieldName::Atom(a)),
                        (Tok::Int(i), Tok::Sym(":")) => Some(FieldName::Int(i)),
                        _ => None,
                    };
                    if named.is_some() {
                        self.next();
                        self.next();
                    }
                    if !self.starts_phrase() {
                        return self.error("expected a record field");
                    }
                    let value = self.phrase()?;
                    fields.push((named, value));
                }
                self.next();
                Ok(Phrase::Record { label, fields, pos })
            }
            Tok::Sym("_") => {
                self.next();
                Ok(Phrase::Wildcard(pos))
            }
            Tok::Sym("$") => {
                self.next();
                Ok(Phrase::Dollar(pos))
            }
            Tok::Sym("(") => {
                self.next();
                let e = self.phrase()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("[") => {
                self.next();
                let items = self.phrases()?;
                self.expect_sym("]")?;
                if items.is_empty() {
                    return Err(SyntaxError::new(pos, "empty list literal; use nil"));
                }
                Ok(Phrase::List(items, pos))
            }
            Tok::Sym("{") => {
                self.next();
                if !self.starts_phrase() {
                    return self.error("expected a procedure expression");
                }
                let head = self.postfix()?;
                let args = self.phrases()?;
                self.expect_sym("}")?;
                Ok(Phrase::Apply(Box::new(head), args, pos))
            }
            Tok::Kw("skip") => {
                self.next();
                Ok(Phrase::Skip(pos))
            }
            Tok::Kw("fail") => {
                self.next();
                Ok(Phrase::Eq(
                    Box::new(Phrase::Atom("false".into(), pos)),
                    Box::new(Phrase::Atom("true".into(), pos)),
                ))
            }
            Tok::Kw("local") => {
                self.next();
                let decls = self.phrases()?;
                self.expect_kw("in")?;
                let body = self.body()?;
                self.expect_kw("end")?;
                Ok(Phrase::Local(decls, body, pos))
            }
            Tok::Kw("if") => {
                self.next();
                let mut branches = Vec::new();
                let cond = self.phrase()?;
                self.expect_kw("then")?;
                let body = self.body()?;
                branches.push((cond, body));
                let mut otherwise = None;
                loop {
                    if self.is_kw("elseif") {
                        self.next();
                        let cond = self.phrase()?;
                        self.expect_kw("then")?;
                        branches.push((cond, self.body()?));
                    } else if self.is_kw("else") {
                        self.next();
                        otherwise = Some(self.body()?);
                        self.expect_kw("end")?;
                        break;
                    } else {
                        self.expect_kw("end")?;
                        break;
                    }
                }
                Ok(Phrase::If {
                    branches,
                    otherwise,
                    pos,
                })
            }
            Tok::Kw("case") => {
                self.next();
                let subject = self.phrase()?;
                self.expect_kw("of")?;
                let mut clauses = Vec::new();
                loop {
                    let pat = self.cons()?;
                    self.expect_kw("then")?;
                    let body = self.body()?;
                    clauses.push((pat, body));
                    if self.is_sym("[]") {
                        self.next();
                        continue;
                    }
                    break;
                }
                let otherwise = if self.is_kw("else") {
                    self.next();
                    Some(self.body()?)
                } else {
                    None
                };
                self.expect_kw("end")?;
                Ok(Phrase::Case {
                    subject: Box::new(subject),
                    clauses,
                    otherwise,
                    pos,
                })
            }
            Tok::Kw(kw @ ("proc" | "fun")) => {
                self.next();
                let lazy = self.is_kw("lazy");
                if lazy {
                    if kw == "proc" {
                        return self.error("'lazy' applies only to functions");
                    }
                    self.next();
                }
                self.expect_sym("{")?;
                let npos = self.pos();
                let name = match self.next().tok {
                    Tok::Var(v) => Phrase::Var(v, npos),
                    Tok::Sym("$") => Phrase::Dollar(npos),
                    _ => {
                        self.at -= 1;
                        return self.error("expected a procedure name or '$'");
                    }
                };
                let mut params = Vec::new();
                while !self.is_sym("}") {
                    let ppos = self.pos();
                    match self.next().tok {
                        Tok::Var(v) => params.push(Phrase::Var(v, ppos)),
                        Tok::Sym("_") => params.push(Phrase::Wildcard(ppos)),
                        _ => {
                            self.at -= 1;
                            return self.error("expected a parameter");
                        }
                    }
                }
                self.next();
                let body = self.body()?;
                self.expect_kw("end")?;
                Ok(if kw == "proc" {
                    Phrase::Proc {
                        name: Box::new(name),
                        params,
                        body,
                        pos,
                    }
                } else {
                    Phrase::Fun {
                        lazy,
                        name: Box::new(name),
                        params,
                        body,
                        pos,
                    }
                })
            }
            Tok::Kw("thread") => {
                self.next();
                let body = self.body()?;
                self.expect_kw("end")?;
                Ok(Phrase::Thread(body, pos))
            }
            Tok::Kw("try") => {
                self.next();
                let body = self.body()?;
                self.expect_kw("catch")?;
                let mut clauses = Vec::new();
                loop {
                    let pat = self.cons()?;
                    self.expect_kw("then")?;
                    clauses.push((pat, self.body()?));
                    if !self.is_sym("[]") {
                        break;
                    }
                    self.next();
                }
                self.expect_kw("end")?;
                if let [(Phrase::Var(v, _), _)] = &clauses[..] {
                    let var = v.clone();
                    let handler = clauses.pop().unwrap().1;
                    return Ok(Phrase::Try(body, var, handler, pos));
                }
                // unmatched exceptions propagate
                let var = "`exc`".to_string();
                let subject = Phrase::Var(var.clone(), pos);
                let reraise = Phrase::Raise(Box::new(subject.clone()), pos);
                let handler = vec![Phrase::Case {
                    subject: Box::new(subject),
                    clauses,
                    otherwise: Some(vec![reraise]),
                    pos,
                }];
                Ok(Phrase::Try(body, var, handler, pos))
            }
            Tok::Kw("raise") => {
                self.next();
                let e = self.phrase()?;
                self.expect_kw("end")?;
                Ok(Phrase::Raise(Box::new(e), pos))
            }
            Tok::Kw("choice") => {
                self.next();
                let mut alts = vec![self.body()?];
                while self.is_sym("[]") {
                    self.next();
                    alts.push(self.body()?);
                }
                if self.is_kw("else") {
                    return self.error("'choice' does not take an 'else' branch");
                }
                self.expect_kw("end")?;
                Ok(Phrase::Choice(alts, pos))
            }
            Tok::Kw("dis") => {
                self.next();
                let mut alts = Vec::new();
                loop {
                    let guard = self.body()?;
                    self.expect_kw("then")?;
                    let body = self.body()?;
                    alts.push((guard, body));
                    if self.is_sym("[]") {
                        self.next();
                        continue;
                    }
                    break;
                }
                self.expect_kw("end")?;
                Ok(Phrase::Dis(alts, pos))
            }
            Tok::Kw(k @ ("class" | "functor" | "for")) => Err(SyntaxError::new(
                pos,
                format!("'{k}' syntax is not supported by this interpreter"),
            )),
            _ => self.error("expected an expression or statement"),
        }
    }
}

fn bin(op: BinOp) -> Box<dyn Fn(Phrase, Phrase) -> Phrase> {
    Box::new(move |a, b| Phrase::BinOp(op, Box::new(a), Box::new(b)))
}

fn fd(rel: FdRel) -> Box<dyn Fn(Phrase, Phrase) -> Phrase> {
    Box::new(move |a, b| Phrase::Fd(rel, Box::new(a), Box::new(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stmts(src: &str) -> Vec<Phrase> {
        let prog = parse(src).unwrap();
        match prog.units.into_iter().next().unwrap() {
            TopLevel::Stmts(s) => s,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn local_binding() {
        let s = stmts("local X in X=1 end");
        match &s[0] {
            Phrase::Local(decls, body, _) => {
                assert!(matches!(&decls[0], Phrase::Var(x, _) if x == "X"));
                assert!(matches!(&body[0], Phrase::Eq(a, b)
                    if matches!(**a, Phrase::Var(ref x, _) if x == "X")
                    && matches!(**b, Phrase::Int(1, _))));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_end_is_an_error() {
        let err = parse("local X in X=1").unwrap_err();
        assert!(err.at_eof);
        assert!(err.message.contains("expected 'end'"), "{}", err.message);
    }

    #[test]
    fn clause_local_declarations() {
        let s = stmts("case Xs of nil then Zs=Ys [] X|Xr then Zr in Zs=X|Zr {Append Xr Ys Zr} end");
        let Phrase::Case { clauses, .. } = &s[0] else {
            panic!()
        };
        assert_eq!(clauses.len(), 2);
        assert!(matches!(&clauses[1].1[0], Phrase::Local(d, b, _) if d.len() == 1 && b.len() == 2));
    }

    #[test]
    fn precedence() {
        let s = stmts("X = A|B#C+D*E");
        let Phrase::Eq(_, rhs) = &s[0] else { panic!() };
        let Phrase::Cons(_, tail) = &**rhs else { panic!() };
        let Phrase::Pair(items) = &**tail else { panic!() };
        assert!(matches!(&items[1], Phrase::BinOp(BinOp::Add, _, m) if matches!(**m, Phrase::BinOp(BinOp::Mul, _, _))));
    }

    #[test]
    fn fd_constraint() {
        let s = stmts("A*EF*HI+D*BC*HI =: BC*EF*HI");
        assert!(matches!(&s[0], Phrase::Fd(FdRel::Eq, _, _)));
    }

    #[test]
    fn dotted_application() {
        let s = stmts("{Search.base.all P Kids}");
        let Phrase::Apply(head, args, _) = &s[0] else { panic!() };
        assert!(matches!(&**head, Phrase::Dot(_, FieldName::Atom(a)) if a == "all"));
        assert_eq!(args.len(), 2);
    }

    #[test]
    fn declare_units() {
        let prog = parse("declare X Y in X=1 declare proc {P} skip end {P}").unwrap();
        assert_eq!(prog.units.len(), 2);
    }

    #[test]
    fn rejects_classes() {
        let err = parse("class C end").unwrap_err();
        assert!(err.message.contains("not supported"));
    }
}
