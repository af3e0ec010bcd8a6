use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval: ({lo}, {hi}]")]
    InvalidInterval { lo: u64, hi: u64 },
    #[error("interval endpoint {0} exceeds supported word size")]
    IntervalOverflow(u64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid linear form: a={a}, h={h} ({reason})")]
    InvalidForm { a: u64, h: i64, reason: String },
    #[error("duplicate linear form a={a}, h={h}")]
    DuplicateForm { a: u64, h: i64 },
    #[error("tuple is not admissible: residues mod {0} are fully covered")]
    NotAdmissible(u64),
    #[error("no residue v0 exists mod W: prime {0} blocks every class")]
    NoResidue(u64),
    #[error("primorial of {0} does not fit in u64; use the big-integer path")]
    PrimorialOverflow(u64),
    #[error("weight table support too large: estimated {estimate} entries (cap {cap})")]
    SupportTooLarge { estimate: u64, cap: u64 },
    #[error("missing field {0} on exponent point")]
    MissingField(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numeric check failed: {0}")]
    NumericCheck(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
