use thiserror::Error;

/// Errors raised by the library. The CLI maps every variant to exit code 2.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("q must be positive")]
    ZeroModulus,

    #[error("q = {q} exceeds the supported limit {limit}")]
    ModulusTooLarge { q: u64, limit: u64 },

    #[error("q is not square-free ({square} | q)")]
    NotSquareFree { q: u64, prime: u64, square: u64 },

    #[error("q = {q} exceeds the sieve limit {limit}; use a streaming computation for moduli this large")]
    SieveLimit { q: u64, limit: u64 },

    #[error("q = {0} is odd; even reduction needs q = 2q'")]
    NotEven(u64),

    #[error("q = {0} is even; reduce to the odd part first")]
    EvenModulus(u64),

    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),

    #[error("omega(q) = {omega} exceeds the limit {limit}")]
    TooManyPrimes { omega: usize, limit: usize },

    #[error("r = {r} outside the supported range {min}..={max}")]
    TupleLength { r: usize, min: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("region meets the walls: {}", format_walls(.0))]
    WallViolation(Vec<(usize, usize)>),

    #[error("enumeration budget exceeded: about {estimate} points expected, budget {budget}")]
    BudgetExceeded { estimate: String, budget: u64 },

    #[error("region is too large for the signed-distance convention (needs sC inside (-q/2, q/2)^(r-1))")]
    RegionTooLarge,

    #[error("cannot parse region `{0}`")]
    RegionSyntax(String),

    #[error("invalid argument: {0}")]
    Invalid(String),
}

fn format_walls(walls: &[(usize, usize)]) -> String {
    walls
        .iter()
        .map(|(i, j)| format!("sigma_{i}{j}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;
