//! Source text to character code.

pub mod lexer;
pub mod parser;
pub mod precompile;

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;
pub use precompile::{precompile, PrecompileConfig, SourceUnit, ARG_MARKER};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("{unit}:{offset}: unterminated comment")]
    UnterminatedComment { unit: String, offset: usize },
    #[error("{unit}:{offset}: unterminated string literal")]
    UnterminatedString { unit: String, offset: usize },
    #[error("identifier `{identifier}` contains the reserved marker `_ARG_`")]
    ReservedMarker { identifier: String },
    #[error("duplicate declaration of `{identifier}` at offset {offset}")]
    DuplicateDeclaration { offset: usize, identifier: String },
}

/// Precompiles and parses a set of source units.
pub fn compile_sources(units: &[SourceUnit]) -> Result<Vec<crate::code::CodeLine>, FrontendError> {
    let text = precompile(units, &PrecompileConfig::default())?;
    parse(&text)
}
