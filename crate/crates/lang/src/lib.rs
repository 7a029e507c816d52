//! Text front end: parser, REPL sessions and JSON certificate export.
//!
//! Printing is the `Display` impl of the core types; `parse(e.to_string())`
//! gives back `e`.

pub mod json;
pub mod parser;
pub mod session;

pub use parser::{parse, ParseError, Parser};
pub use session::{Reply, Session, Severity};
