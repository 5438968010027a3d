use thiserror::Error;

/// Errors produced by graph construction, parsing, state enumeration and
/// the simulation engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph must have at least {min} vertices, got {got}")]
    GraphTooSmall { min: usize, got: usize },

    #[error("edge weight must be strictly positive, got {weight} on edge ({v}, {w})")]
    NonPositiveWeight { v: usize, w: usize, weight: f64 },

    #[error("self-loop on vertex {0} is not allowed")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("vertex {0} out of range 1..={1}")]
    VertexOutOfRange(usize, usize),

    #[error("graph is not connected")]
    Disconnected,

    #[error("graph parse error at line {line}: {msg}")]
    GraphParse { line: usize, msg: String },

    #[error("invalid split parameter: {0}")]
    InvalidSplitParam(String),

    #[error("state space too large: {states} states exceeds cap {cap}")]
    StateSpaceCap { states: u128, cap: u128 },

    #[error("edge ({0}, {1}) is not in the graph")]
    EdgeNotInGraph(usize, usize),

    #[error("outcome {k} out of range 0..={n}")]
    OutcomeOutOfRange { k: usize, n: usize },

    #[error("transition has zero probability; marked placement ratio undefined")]
    ZeroProbabilityTransition,

    #[error("initial states violate pointwise domination at vertex {0}")]
    DominationViolated(usize),

    #[error("colour feasibility violated at vertex {vertex}: red {red} + pink {pink} > chi(black) = {chi}")]
    InfeasibleColouring { vertex: usize, red: u32, pink: u32, chi: u32 },

    #[error("internal consistency error: {0}")]
    InternalConsistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
