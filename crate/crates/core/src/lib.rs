pub mod ast;
pub mod cli;
pub mod fd;
pub mod search;
pub mod spaces;
pub mod store;
pub mod symbol;
pub mod term;
pub mod stdlib;
pub mod vm;
