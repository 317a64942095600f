use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix entry ({row},{col}) = {value} is negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("diagonal entry ({idx},{idx}) = {value}, expected 0")]
    NonzeroDiagonal { idx: usize, value: f64 },
    #[error("off-diagonal entry ({row},{col}) must be positive")]
    ZeroOffDiagonal { row: usize, col: usize },
    #[error("node {node} out of range for space with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("node {v} must not be a member of the candidate set")]
    MemberOfSet { v: usize },
    #[error("exhaustive search capped at n = {cap} (space has {n} nodes); use independence_dimension_greedy instead")]
    ExhaustiveCapExceeded { n: usize, cap: usize },
    #[error("zero quasi-distance between distinct nodes {from} and {to}")]
    ZeroCrossDistance { from: usize, to: usize },
    #[error("probability weights sum to zero over a nonempty set")]
    ZeroProbabilityMass,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("degenerate palette: first level {first} >= p_max {p_max}")]
    DegeneratePalette { first: f64, p_max: f64 },
    #[error("no ladder size satisfies C_B/(lambda*s_cap) < p_k < C_B/s_cap (n = {n}, lambda = {lambda}, s_cap = {s_cap})")]
    LadderBracketing { n: usize, lambda: f64, s_cap: f64 },
    #[error("instance is not symmetric: q[{u}][{v}] = {forward} but q[{v}][{u}] = {backward}")]
    AsymmetricInstance {
        u: usize,
        v: usize,
        forward: f64,
        backward: f64,
    },
    #[error("link {link} cannot satisfy SINR >= beta even alone; no schedule exists")]
    InfeasibleSingleton { link: usize },
    #[error("oracle cap exceeded: {what} = {got}, cap {cap}")]
    OracleCap {
        what: &'static str,
        got: usize,
        cap: usize,
    },
    #[error("transition row {row} sums to {sum}, expected 1")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("{0}")]
    Plan(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
