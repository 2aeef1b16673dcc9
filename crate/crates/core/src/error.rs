use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("pattern enumeration exceeded {limit} patterns")]
    PatternLimit { limit: usize },

    #[error("packing search exceeded {limit} nodes without proving optimality")]
    SearchBudget { limit: u64 },

    #[error(
        "demand for type {type_id} exceeds the pre-planned maximum: need {needed} more, {available} server slots left"
    )]
    DemandExceedsPreplan {
        type_id: u32,
        needed: u32,
        available: usize,
    },

    #[error("cluster overloaded: demand {demand:?} cannot be packed into {servers} servers")]
    Overloaded { demand: Vec<u32>, servers: usize },

    #[error("input outside exhaustive-search scale: {0}")]
    ScaleGuard(String),

    #[error("chain {chain_id} has inbound traffic at type {type_id} but no deployed instances")]
    Unroutable { chain_id: u32, type_id: u32 },
}
