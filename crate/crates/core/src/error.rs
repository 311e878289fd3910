use thiserror::Error;

/// Every failure the library can report.
///
/// Variants carry the numbers that tripped the check so callers can print
/// a useful diagnostic without re-running anything.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid curvature parameter: sigma={sigma}, epsilon={epsilon}")]
    InvalidParam { sigma: i32, epsilon: f64 },

    #[error("chart point outside the injectivity ball: eps*rho={eps_rho} (limit {limit})")]
    ChartDomain { eps_rho: f64, limit: f64 },

    #[error("operation `{op}` is undefined at epsilon=0; use the flat formulas")]
    FlatLimit { op: &'static str },

    #[error("point on or near the cut locus: psi={psi}")]
    CutLocus { psi: f64 },

    #[error("ambient point off the surface: relative constraint residual {residual}")]
    InvalidAmbient { residual: f64 },

    #[error("bodies {i} and {j} are (nearly) antipodal: psi={psi}")]
    Antipodal { i: usize, j: usize, psi: f64 },

    #[error("points coincide: psi={psi}")]
    Coincident { psi: f64 },

    #[error("collision between bodies {i} and {j}: separation {separation}")]
    Collision { i: usize, j: usize, separation: f64 },

    #[error("momentum value is zero (norm {norm}); isotropy is the whole algebra")]
    ZeroMomentum { norm: f64 },

    #[error("isotropy rank is ambiguous: singular value {singular_value} vs threshold {threshold}")]
    RankAmbiguity { singular_value: f64, threshold: f64 },

    #[error("momentum map is not submersive at base: smallest singular value {smallest}")]
    Regularity { smallest: f64 },

    #[error("isotropy generator fields are dependent at base: smallest singular value {smallest}")]
    LocalFreeness { smallest: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("singular Newton Jacobian: smallest singular value {smallest} (largest {largest})")]
    SingularJacobian { smallest: f64, largest: f64 },

    #[error("degenerate periodic orbit: {detail}")]
    DegenerateOrbit { detail: String, distance: f64 },

    #[error("drift leaves the isotropy algebra by {distance}")]
    DriftOutsideIsotropy { distance: f64 },

    #[error("no return to the section before t_max={t_max}")]
    NoReturn { t_max: f64 },

    #[error("state is not on the section: plane residual {plane}, energy residual {energy}")]
    OffSection { plane: f64, energy: f64 },

    #[error("flow is tangent to the section at the crossing: <n, X_H> = {normal_speed}")]
    Tangency { normal_speed: f64 },

    #[error("initial data fails closure validation: |flow(z0,T) - z0| = {closure} > {tolerance}")]
    ClosureValidation { closure: f64, tolerance: f64 },

    #[error("bisection failed: {detail}")]
    BisectionFailure { detail: String },

    #[error("flat relative equilibrium with nonzero linear momentum ({mu1}, {mu2}); drifting configurations are relative periodic orbits, not relative equilibria")]
    NonvanishingLinearMomentum { mu1: f64, mu2: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParam { .. } | Error::Parse { .. } | Error::Schema { .. } | Error::Io(_)
        )
    }
}
