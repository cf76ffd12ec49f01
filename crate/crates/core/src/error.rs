use thiserror::Error;

use crate::formula::FormulaError;
use crate::hardness::HardnessError;
use crate::mas::MasError;
use crate::syntree::{MixingViolation, NonMixingError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Mas(#[from] MasError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Agent(#[from] NonMixingError),
    #[error("non-mixing violation at node {}: agents {} and {} have incomparable observations in {}", .0.node, .0.agent_a, .0.agent_b, .0.subformula)]
    NonMixing(MixingViolation),
    #[error(transparent)]
    Hardness(#[from] HardnessError),
    #[error("state budget exceeded: more than {0} states")]
    Budget(usize),
    #[error("{0}")]
    Input(String),
}

impl Error {
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget(_) | Error::Mas(MasError::Budget(_)))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
