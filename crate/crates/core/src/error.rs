use thiserror::Error;

/// Errors raised by the regression, bound and experiment routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input {x} lies outside the domain [-{half}, {half}]")]
    Domain { x: f64, half: f64 },

    #[error("invalid hypothesis space: {0}")]
    InvalidSpace(String),

    #[error("function has a nonzero coefficient at q={q} ({parity}) outside the hypothesis space")]
    NotInSpace { q: u32, parity: &'static str },

    #[error(
        "negative operator power {r} is undefined for a function with nonzero tail energy {tail}"
    )]
    OutsideRange { r: f64, tail: f64 },

    #[error("domain widths differ: {0} vs {1}")]
    WidthMismatch(f64, f64),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dataset has {n} points which exceeds the kernel-route cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("design matrix is rank deficient (rank {rank} < {dim})")]
    RankDeficient { rank: usize, dim: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("sz bound requires gamma >= {min}, got {gamma}")]
    SzValidity { gamma: f64, min: f64 },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

/// Decode JSON, naming the key path of the first failure.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::Parse(inner.to_string())
        } else {
            Error::Parse(format!("key `{path}`: {inner}"))
        }
    })
}

pub type Result<T> = std::result::Result<T, Error>;
