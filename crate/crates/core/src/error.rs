use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a profile needs at least one hop")]
    EmptyProfile,

    #[error("erasure probability {value} at hop {hop} is outside [0, 1)")]
    InvalidErasure { hop: usize, value: f64 },

    #[error("horizon must be at least one slot")]
    ZeroHorizon,

    #[error("horizon of {horizon} slots is shorter than the required slot {required}")]
    HorizonTooShort { horizon: u64, required: u64 },

    #[error("success probability {0} is outside (0, 1]")]
    InvalidProbability(f64),

    #[error("slot {slot} precedes the start slot {start} of bit {bit}")]
    BeforeStart { bit: usize, slot: u64, start: u64 },

    #[error("profile has {hops} hops but {requested} were requested")]
    TooManyHops { hops: usize, requested: usize },

    #[error("schedule was built for {schedule} hops, profile has {profile}")]
    ScheduleMismatch { schedule: usize, profile: usize },

    #[error("expected {expected} message bits, got {actual}")]
    MessageLength { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }
}
