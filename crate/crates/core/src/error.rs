//! Error type shared by all modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the toolkit, grouped by the operation family that
/// raises them.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    // geometry / discretization
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),
    #[error("point ({0}, {1}) is not on a physical boundary component")]
    NotOnBoundary(f64, f64),
    #[error("unsupported domain kind for this operation: {0}")]
    UnsupportedKind(String),

    // linear algebra
    #[error("linear solver diverged: residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    // radial profile
    #[error("exponent p must satisfy p > 1, got {0}")]
    UnsupportedExponent(f64),
    #[error("iteration failed to converge: {0}")]
    NoConvergence(String),
    #[error("circulation must be positive, got {0}")]
    NonPositiveKappa(f64),

    // Green functions
    #[error("coincident evaluation points")]
    CoincidentPoints,
    #[error("point ({0}, {1}) is outside the domain")]
    OutsideDomain(f64, f64),
    #[error("omega matrix numerically singular (condition estimate {0:.3e})")]
    SingularOmegaMatrix(f64),

    // background stream data
    #[error("boundary flux not compatible on component {component}: integral {integral:.3e}")]
    FluxImbalance { component: usize, integral: f64 },
    #[error("circulation matching system singular")]
    SingularCirculationSystem,

    // Kirchhoff-Routh
    #[error("no interior maximum found (best candidate hugs the boundary)")]
    NoInteriorMaximum,
    #[error("vortices {0} and {1} collided (distance {2:.3e})")]
    VortexCollision(usize, usize, f64),
    #[error("vortex {0} escaped the domain at t = {1}")]
    BoundaryEscape(usize, f64),
    #[error("Robin function is undefined on the whole plane")]
    WholePlaneSelfInteraction,

    // semilinear
    #[error("no positive part reachable: {0}")]
    NoPositivePart(String),
    #[error("field must be nonnegative")]
    NotNonnegative,
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),
    #[error("vorticity collapsed to zero during iteration")]
    TrivialCollapse,
    #[error("nodal projection found no sign change on the search rectangle")]
    NoSignChange,
    #[error("vorticity set is empty; centroid undefined")]
    EmptyVorticity,
    #[error("epsilon sweep needs at least {need} points, got {got}")]
    InsufficientPoints { need: usize, got: usize },
    #[error("grid too coarse for the vortex core: eps*rho_kappa = {core:.4e} < 6h = {min:.4e}")]
    GridTooCoarseForCore { core: f64, min: f64 },

    // capacity
    #[error("condenser gap under-resolved: {0}")]
    GapUnderResolved(String),
    #[error("gap parameter s must be positive, got {0}")]
    NonPositiveS(f64),
    #[error("elliptic modulus must lie in [0, 1), got {0}")]
    ModulusOutOfRange(f64),

    // cli / config
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}
