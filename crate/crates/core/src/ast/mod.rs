//! Front end: lexing, parsing, and translation to the kernel language.

pub mod alpha;
pub mod desugar;
pub mod kernel;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod surface;

use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, Error)]
#[error("syntax error at {pos}: {message}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
    /// Set when the input ended before the phrase was complete. The REPL
    /// uses this to keep reading.
    pub at_eof: bool,
}

impl SyntaxError {
    pub fn new(pos: Pos, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            pos,
            message: message.into(),
            at_eof: false,
        }
    }

    pub fn mark_eof(mut self) -> SyntaxError {
        self.at_eof = true;
        self
    }
}

#[derive(Clone, Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("error at {pos}: {message}")]
    Desugar { pos: Pos, message: String },
}

impl CompileError {
    pub fn desugar(pos: Pos, message: impl Into<String>) -> CompileError {
        CompileError::Desugar {
            pos,
            message: message.into(),
        }
    }
}
