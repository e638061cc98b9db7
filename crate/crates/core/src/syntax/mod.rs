pub mod ast;
pub mod format;
pub mod lexer;
pub mod parser;

pub use format::{format, format_expr};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse, parse_block, parse_condition, parse_expr};
