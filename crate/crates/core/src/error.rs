use thiserror::Error;

/// Errors raised by the library. Search failures and validation verdicts are
/// values, not errors; see [`crate::inversion::SearchOutcome`] and
/// [`crate::covering::ValidationReport`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("site index {site} out of range for a lattice of {n} sites")]
    InvalidSite { site: usize, n: usize },

    #[error("invalid lattice geometry: {0}")]
    InvalidGeometry(String),

    #[error("region must be non-empty")]
    EmptyRegion,

    #[error("wire {wire} out of range for a circuit of {n_wires} wires")]
    InvalidWire { wire: usize, n_wires: usize },

    #[error("layer {layer} uses wire {wire} more than once")]
    LayerOverlap { layer: usize, wire: usize },

    #[error("two-qubit gate acts twice on wire {0}")]
    RepeatedWire(usize),

    #[error("gate matrix is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),

    #[error("operation requires a reset-free circuit, found a reset on wire {wire} in layer {layer}")]
    ResetInUnitaryCircuit { layer: usize, wire: usize },

    #[error("{what}: {got} wires exceeds the configured cap of {cap}")]
    WireCapExceeded { what: &'static str, got: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("backward lightcone touches unknown input on wire(s) {0:?}")]
    ReachesInput(Vec<usize>),

    #[error("covering scheme failed to shield input: backward lightcone reaches wire(s) {0:?}")]
    ShieldingFailed(Vec<usize>),

    #[error("circuit support leaves the allowed region: site {0} is outside it")]
    SupportViolation(usize),

    #[error("missing inversion for subset(s) {0:?} (layer, index)")]
    MissingInversion(Vec<(usize, usize)>),

    #[error("replacement processes {a:?} and {b:?} have overlapping supports")]
    OverlappingSupports { a: (usize, usize), b: (usize, usize) },

    #[error(
        "ball of {got} sites exceeds the architecture cap of {cap}; \
         use continuous_opt, which searches a fixed brickwork superset architecture"
    )]
    ArchitectureCapExceeded { got: usize, cap: usize },

    #[error("region of {got} wires exceeds the shadow-estimation cap of {cap}")]
    RegionTooLarge { got: usize, cap: usize },

    #[error("no inversion reached the threshold for subset(s) {subsets:?} (best fidelity {best_fidelity})")]
    InversionFailed { subsets: Vec<(usize, usize)>, best_fidelity: f64 },

    #[error("covering scheme is invalid: {0}")]
    InvalidScheme(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("refusing to read secret file {0} outside of verify")]
    SecretAccess(String),

    #[error("failed to read shadow dataset: {0}")]
    BadShadowData(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
