use crate::fock::SpatialMode;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("state has no term with non-negligible amplitude")]
    EmptyState,

    #[error("basis state holds {photons} photons, cap is {cap}")]
    PhotonCapExceeded { photons: usize, cap: usize },

    #[error("registry would hold {rails} rails, cap is {cap}")]
    RailCapExceeded { rails: usize, cap: usize },

    #[error("spatial mode {mode} is at or above the mode index cap {cap}")]
    ModeIndexOutOfRange { mode: SpatialMode, cap: u16 },

    #[error("registries overlap on spatial mode {0}")]
    RegistryOverlap(SpatialMode),

    #[error("operands live on different mode registries")]
    RegistryMismatch,

    #[error("map is not unitary (max deviation of U^dagger U from identity: {deviation:e})")]
    NonUnitaryMap { deviation: f64 },

    #[error("map is malformed: {0}")]
    MalformedMap(String),

    #[error("spatial mode {0} is not registered")]
    UnknownMode(SpatialMode),

    #[error("spatial mode {0} appears more than once")]
    DuplicateMode(SpatialMode),

    #[error("survival probability {0} is outside [0, 1]")]
    SurvivalOutOfRange(f64),

    #[error("Bell label {0} cannot be prepared directly")]
    UnsupportedLabel(String),

    #[error("input qubit is not normalized: |alpha|^2 + |beta|^2 = {0}")]
    InvalidQubit(f64),

    #[error("no correction in {{I, X, Z, XZ}} recovers the input for outcome {0}")]
    NoCorrectionFound(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
