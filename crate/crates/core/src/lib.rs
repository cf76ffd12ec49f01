//! Model checking for the μ-calculus of non-mixing epistemic fixpoints over finite
//! multi-agent systems with synchronous perfect recall.

pub mod checker;
pub mod cli;
pub mod distinction;
pub mod error;
pub mod finitary;
pub mod fixtures;
pub mod formula;
pub mod hardness;
pub mod mas;
pub mod oracle;
pub mod random;
pub mod stateset;
pub mod syntree;

pub use error::{Error, Result};
pub use formula::{parse_formula, Formula};
pub use mas::{parse_mas, Mas};
pub use stateset::StateSet;
