pub mod resolve;
pub mod symbols;
pub mod validate;

pub use resolve::{resolve, resolve_first, ResolvedContext};
pub use symbols::{build_symbols, SymbolTable};
pub use validate::{validate, validate_with, ValidateOptions};
