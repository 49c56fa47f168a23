use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scenario: {0}")]
    Schema(String),

    #[error("link `{link}` references unknown node `{node}`")]
    DanglingEndpoint { link: String, node: String },

    #[error("{element}: `{field}` must be positive, got {value}")]
    NonPositive {
        element: String,
        field: &'static str,
        value: f64,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("no route from `{origin}` to `{destination}`")]
    EmptyChoiceSet { origin: String, destination: String },

    #[error("origin and destination are both `{0}`")]
    DegenerateOd(String),

    #[error("lane {lane} on approach {side:?} cannot turn {turn:?}")]
    IllegalTurn {
        side: crate::isect::Side,
        lane: u8,
        turn: crate::isect::Turn,
    },

    #[error("malformed request from vehicle {vehicle}: {reason}")]
    MalformedRequest { vehicle: u64, reason: String },

    #[error("vehicle {0} holds no reservation")]
    UnknownVehicle(u64),

    #[error("bid of {new} is below the withdrawn bid of {prior}")]
    BidDecrease { prior: f64, new: f64 },

    #[error("exact winner determination capped at {cap} bids, got {n}")]
    OracleCapExceeded { n: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
