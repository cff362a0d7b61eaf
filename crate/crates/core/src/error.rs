use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("angle index out of range: a={a}, b={b} (strict mode allows a in {{0,3}}, b in {{0,2}})")]
    IndexOutOfRange { a: i32, b: i32 },

    #[error("relative angle {0} rad outside [-pi/2, pi/2]")]
    AngleOutOfDomain(f64),

    #[error("invalid wire spacing {0}; expected 0 < s <= 1")]
    InvalidSpacing(f64),

    #[error("invalid grid spec M={big_m}, m={m}")]
    InvalidGrid { big_m: u32, m: u32 },

    #[error("no worlds: N(E) + N(U) = 0, probability undefined")]
    NoWorlds,

    #[error("r={r} outside [0, {i}]")]
    ROutOfRange { i: u32, r: u32 },

    #[error("empty typicality window")]
    EmptyWindow,

    #[error("non-positive branch width {0}")]
    NonPositiveWidth(f64),

    #[error("enumeration of {worlds} worlds exceeds the cap of {cap}; use sampling")]
    EnumerationTooLarge { worlds: u128, cap: u128 },

    #[error("pointer mode {pointer} cannot be used with a {partition} partition")]
    ModeMismatch {
        pointer: &'static str,
        partition: &'static str,
    },

    #[error("pointer at radius {0} lies outside the disk")]
    PointerOutsideDisk(f64),

    #[error("missing or empty count bin for d={0}")]
    EmptyBin(u32),

    #[error("model {0} has no partition realizing it under external randomness")]
    NoExternalRealization(String),

    #[error("pairs must be at least 1")]
    NoPairs,

    #[error("unknown format: {0}")]
    UnknownFormat(String),

    #[error("log counts do not match its records")]
    CountMismatch,

    #[error("malformed log: {0}")]
    Malformed(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Malformed(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Malformed(e.to_string())
    }
}
