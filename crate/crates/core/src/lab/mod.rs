//! Resonance experiments: configuration, resonance location, energy and
//! hbar sweeps, fits and the verification suite behind the command line tool.

pub mod breit_wigner;
pub mod config;
pub mod fit;
pub mod record;
pub mod resonances;
pub mod robustness;
pub mod verify;

pub use breit_wigner::{
    breit_wigner_sweep, endpoint_identity, BreitWignerOptions, BreitWignerReport, EndpointIdentity,
};
pub use config::{ExperimentConfig, DEFAULT_HBAR};
pub use fit::{exponential_fit, power_fit, FitModel, FitResult};
pub use record::{Provenance, Row, SweepRecord};
pub use resonances::{
    admissible_angles, admissible_arcs, locate_resonances, AngleArc, AngleReport, ResonantEnergy,
};
pub use robustness::{robustness_experiment, RobustnessReport, RobustnessRow};
pub use verify::{Lab, Verdict};
