use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mass is not defined at word {word:?}")]
    PartialDefinition { word: String },

    #[error("symbol {symbol} is outside an alphabet of {arity} symbols")]
    SymbolOutOfRange { symbol: u8, arity: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("cannot parse {what}: {input:?}")]
    Parse { what: &'static str, input: String },

    #[error("not a pairing codeword: {0:?}")]
    Decode(String),

    #[error("language {name}: index {index} is beyond the fixture length {len}")]
    FixtureOverrun { name: String, index: u64, len: u64 },

    #[error("string of length {0} has no 64-bit enumeration index")]
    IndexOverflow(usize),

    #[error("constructor output at step {step} is not a proper extension of its input")]
    ConstructorViolation { step: usize },

    #[error("growth rate: {0}")]
    GrowthRate(String),

    #[error("selector {name} returned {output:?}, which is neither {a:?} nor {b:?}")]
    SelectorContract { name: String, a: String, b: String, output: String },

    #[error("reduction {name} produced {len} bits on {input:?}, above its declared bound {bound}")]
    ReductionBound { name: String, input: String, len: usize, bound: usize },

    #[error("oracle policy violation: query {query:?} has length {len} > {bound} at context length {context}")]
    PolicyViolation { query: String, len: usize, bound: usize, context: usize },

    #[error("registry slice {k} is out of range ({len} entries)")]
    SliceOutOfRange { k: usize, len: usize },

    #[error("block size k={k} does not satisfy 2^(ks)/(k+1) > 1 for s={s}")]
    BlockSize { k: usize, s: String },

    #[error("threshold violated at block q={q}")]
    ThresholdViolated { q: u64 },

    #[error("disjointness violated at index {index}: {string:?} is in both components")]
    Disjointness { index: u64, string: String },

    #[error("infeasible exponents: {inequality} fails (margin {margin:e})")]
    InfeasibleExponents { inequality: String, margin: f64 },

    #[error("ambiguous exponents: {inequality} holds only within the 1e-9 margin ({margin:e})")]
    AmbiguousExponents { inequality: String, margin: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
