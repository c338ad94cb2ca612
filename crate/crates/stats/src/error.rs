use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("input lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("{0} requires at least one observation")]
    Empty(&'static str),
    #[error("{what} requires at least {needed} groups, got {got}")]
    TooFewGroups {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("anova requires more observations than groups (N = {n}, k = {k})")]
    NoResidualDf { n: usize, k: usize },
    #[error("non-finite value in input")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, StatsError>;
