use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("root bracketing failed on {piece}: {detail}")]
    RootBracket { piece: String, detail: String },

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("ODE integration failed at r = {r:.6e}: {detail}")]
    Integration { r: f64, detail: String },

    #[error("ill-conditioned matching at r = {r:.6e} (condition {condition:.3e})")]
    IllConditionedMatch { r: f64, condition: f64 },

    #[error("energy {energy:.12e} is within {distance:.3e} of a pole of the resolvent")]
    NearResonance { energy: f64, distance: f64 },

    #[error("long-range tail: {0}")]
    Tail(String),

    #[error("eigensolver did not converge (residual {residual:.3e})")]
    EigenSolver { residual: f64 },

    #[error("box size too small: eigenfunction mass {mass:.3e} at r_box = {r_box:.4}")]
    BoxSize { mass: f64, r_box: f64 },

    #[error("structural mismatch: {0}")]
    Structural(String),

    #[error("no spectral gap on [{t0:.6e}, {t1:.6e}]: densest arc spacing {spacing:.3e}")]
    NoGap { t0: f64, t1: f64, spacing: f64 },

    #[error("phase resolution not reached: {0}; try a larger hbar or a wider window")]
    Resolution(String),

    #[error("channel truncation: {0}")]
    Truncation(String),

    #[error("model construction: {0}")]
    Model(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
