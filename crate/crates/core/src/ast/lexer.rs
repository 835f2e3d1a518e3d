use super::{Pos, SyntaxError};

#[derive(Clone, PartialEq, Debug)]
pub enum Tok {
    Var(String),
    Atom(String),
    /// Atom immediately followed by `(`: the label of a record literal.
    Label(String),
    Int(i64),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &[
    "local", "in", "end", "declare", "if", "then", "else", "elseif", "case", "of", "proc", "fun",
    "lazy", "thread", "try", "catch", "raise", "choice", "dis", "skip", "class", "functor", "for",
    "meth", "do", "fail",
];

// Longest first so that prefixes do not win.
const SYMBOLS: &[&str] = &[
    ":::", "\\=:", "=<:", ">=:", "=:", "<:", ">:", "==", "\\=", "=<", ">=", "[]", "{", "}", "(",
    ")", "[", "]", "|", "#", "=", "<", ">", "+", "-", "*", ".", ":", "$", "_", "~",
];

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let start = Pos { line, col };
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(SyntaxError::new(start, "unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let pos = Pos { line, col };
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            let n = text
                .parse::<i64>()
                .map_err(|_| SyntaxError::new(pos, "integer literal out of range"))?;
            out.push(Token { tok: Tok::Int(n), pos });
            continue;
        }
        if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if c.is_uppercase() {
                Tok::Var(text)
            } else if let Some(kw) = KEYWORDS.iter().find(|k| **k == text) {
                Tok::Kw(kw)
            } else if chars.get(i) == Some(&'(') {
                Tok::Label(text)
            } else {
                Tok::Atom(text)
            };
            out.push(Token { tok, pos });
            continue;
        }
        if c == '\'' || c == '`' {
            let quote = c;
            bump!();
            let mut text = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(SyntaxError::new(pos, "unterminated quoted name")),
                    Some(&q) if q == quote => {
                        bump!();
                        break;
                    }
                    Some('\\') if i + 1 < chars.len() => {
                        bump!();
                        text.push(chars[i]);
                        bump!();
                    }
                    Some(&ch) => {
                        text.push(ch);
                        bump!();
                    }
                }
            }
            let tok = if quote == '`' {
                Tok::Var(format!("`{text}`"))
            } else if chars.get(i) == Some(&'(') {
                Tok::Label(text)
            } else {
                Tok::Atom(text)
            };
            out.push(Token { tok, pos });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                for _ in 0..sym.chars().count() {
                    bump!();
                }
                out.push(Token { tok: Tok::Sym(sym), pos });
            }
            None => {
                return Err(SyntaxError::new(pos, format!("unexpected character '{c}'")));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn labels_need_adjacent_paren() {
        assert_eq!(
            toks("sol(X) f (Y)"),
            vec![
                Tok::Label("sol".into()),
                Tok::Sym("("),
                Tok::Var("X".into()),
                Tok::Sym(")"),
                Tok::Atom("f".into()),
                Tok::Sym("("),
                Tok::Var("Y".into()),
                Tok::Sym(")"),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn clause_separator_and_fd_operators() {
        assert_eq!(
            toks("[] [X] A=:B Sol:::1#9 % comment"),
            vec![
                Tok::Sym("[]"),
                Tok::Sym("["),
                Tok::Var("X".into()),
                Tok::Sym("]"),
                Tok::Var("A".into()),
                Tok::Sym("=:"),
                Tok::Var("B".into()),
                Tok::Var("Sol".into()),
                Tok::Sym(":::"),
                Tok::Int(1),
                Tok::Sym("#"),
                Tok::Int(9),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_tracked() {
        let t = lex("local\n  X").unwrap();
        assert_eq!(t[1].pos, Pos { line: 2, col: 3 });
    }

    #[test]
    fn backquoted_variables() {
        assert_eq!(toks("`_t1`"), vec![Tok::Var("`_t1`".into()), Tok::Eof]);
    }
}
