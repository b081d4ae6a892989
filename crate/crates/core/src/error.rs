use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("collision state: vehicle {vehicle} has gap {gap} m to its leader")]
    Collision { vehicle: u64, gap: f64 },

    #[error("simulator invariant violated: {0}")]
    Invariant(String),

    #[error("unknown vehicle id {0}")]
    UnknownVehicle(u64),

    #[error("vehicle {0} is not a CAV")]
    NotCav(u64),

    #[error("observation requires at least one CAV")]
    NoCavs,

    #[error("commanded acceleration {value} for vehicle {vehicle} is outside [-3, 3] m/s^2")]
    ActionRange { vehicle: u64, value: f64 },

    #[error("expected {expected} actions, got {got}")]
    ActionLength { expected: usize, got: usize },

    #[error("episode is finished; reset before stepping again")]
    EpisodeDone,

    #[error("replay buffer holds {size} transitions, batch needs {needed}")]
    BufferUnderfull { size: usize, needed: usize },

    #[error("trajectory sample at position {position} m is outside the corridor [0, {length})")]
    OutOfCorridor { position: f64, length: f64 },

    #[error("no episodes to summarise")]
    NoEpisodes,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
