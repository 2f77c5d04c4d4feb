use thiserror::Error;

/// Which side of the radial search window a failed minimization ran into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// The atom is pulled onto the fiber surface (red + van der Waals win).
    Surface,
    /// The atom is pushed out of the evanescent field.
    Outer,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Surface => write!(f, "fiber surface (atom crashes into the fiber)"),
            Boundary::Outer => write!(f, "outer edge of the search window (atom is expelled)"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("propagation constant {beta:e} rad/m outside guided-mode bracket ({lo:e}, {hi:e})")]
    OutOfBracket { beta: f64, lo: f64, hi: f64 },

    #[error("HE11 root not bracketed at wavelength {wavelength:e} m")]
    NoRoot { wavelength: f64 },

    #[error("wavelength {wavelength:e} m lies within a natural linewidth of the {line} resonance")]
    Resonance { wavelength: f64, line: String },

    #[error("distance to surface must be positive, got {0:e} m")]
    NonPositiveDistance(f64),

    #[error("position r = {r:e} m is not outside the fiber (radius {radius:e} m)")]
    InsideFiber { r: f64, radius: f64 },

    #[error("local intensity vanishes at r = {r:e} m, phi = {phi}: effective area is infinite")]
    ZeroIntensity { r: f64, phi: f64 },

    #[error("no interior trap minimum: minimizer ran into the {0}")]
    NoMinimum(Boundary),

    #[error("Hessian at the candidate minimum is not positive definite (saddle), diagonal = {0:?}")]
    Saddle([f64; 3]),

    #[error("line components invalid: {0}")]
    Components(String),

    #[error("degenerate reference signal: P0 = {p0} must exceed background {p_bg}")]
    DegenerateReference { p0: f64, p_bg: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
