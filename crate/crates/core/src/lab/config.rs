use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flow::FlowOptions;
use crate::potential::{Catalogue, PotentialTriple};
use crate::radial::{BoundStateOptions, KernelOptions, SolverOptions};
use crate::scattering::{AssemblyOptions, FamilyOptions};

pub const DEFAULT_HBAR: [f64; 6] = [0.2, 0.17, 0.15, 0.13, 0.12, 0.1];

/// Energies [center - delta, center + delta].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub center: f64,
    pub delta: f64,
}

impl EnergyWindow {
    pub fn lo(&self) -> f64 {
        self.center - self.delta
    }

    pub fn hi(&self) -> f64 {
        self.center + self.delta
    }

    pub fn contains(&self, e: f64) -> bool {
        e >= self.lo() && e <= self.hi()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub ode_rtol: f64,
    /// eigenvalue stabilisation of the Birman-Schwinger matrices
    pub kernel_tol: f64,
    pub gap_margin: f64,
    pub coincidence: f64,
    pub energy_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ode_rtol: 1e-10,
            kernel_tol: 1e-8,
            gap_margin: 1e-3,
            coincidence: 1e-8,
            energy_tol: 1e-13,
        }
    }
}

/// Probe angles; each probe is used where admissible, otherwise the middle
/// of the widest admissible arc is taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnglePolicy {
    pub probes: Vec<f64>,
    /// required distance of e^{i theta} from sigma(S(E; Hext, H0)) and from 1
    pub margin: f64,
}

impl Default for AnglePolicy {
    fn default() -> Self {
        AnglePolicy {
            probes: vec![PI, 0.5 * PI, 1.5 * PI],
            margin: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSettings {
    pub initial_points: usize,
    /// cap on bisection levels; reaching it is an error
    pub max_depth: u32,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            initial_points: 16,
            max_depth: 48,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckSettings {
    /// Hoelder exponent
    pub gamma: f64,
    /// energies tried by the off-resonant checks are drawn around this value
    pub reference_energy: f64,
    pub reference_spread: f64,
    /// arc (theta1, theta2) for the eigenvalue-count growth check
    pub arc: (f64, f64),
    pub synthetic_pairs: usize,
    pub synthetic_steps: usize,
    pub counting_energies: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            gamma: 0.5,
            reference_energy: 1.0,
            reference_spread: 0.05,
            arc: (0.5 * PI, 1.5 * PI),
            synthetic_pairs: 200,
            synthetic_steps: 10_000,
            counting_energies: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSettings {
    /// triple built with a different cut of the same V
    pub alternative: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// name of the triple in the catalogue
    pub triple: String,
    #[serde(default = "default_hbar")]
    pub hbar: Vec<f64>,
    pub window: EnergyWindow,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub angles: AnglePolicy,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub checks: CheckSettings,
    #[serde(default)]
    pub robustness: Option<RobustnessSettings>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub catalogue: Catalogue,
}

fn default_hbar() -> Vec<f64> {
    DEFAULT_HBAR.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    /// The configuration shipped in `configs/default.toml`.
    pub fn default_model() -> Self {
        Self::from_toml_str(include_str!("../../../../configs/default.toml"))
            .expect("bundled config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        check_hbar_list(&self.hbar)?;
        if !(self.window.delta > 0.0) {
            return Err(Error::Config(format!(
                "window half-width {} must be positive",
                self.window.delta
            )));
        }
        let t = self.build_triple()?;
        let e_plus = t.options.e_plus;
        if !(self.window.lo() > 0.0 && self.window.hi() < e_plus) {
            return Err(Error::Config(format!(
                "window [{}, {}] must lie inside (0, E+ = {e_plus})",
                self.window.lo(),
                self.window.hi()
            )));
        }
        if let Some(r) = &self.robustness {
            self.catalogue.triple(&r.alternative)?;
        }
        Ok(())
    }

    pub fn build_triple(&self) -> Result<PotentialTriple> {
        self.catalogue.triple(&self.triple)
    }

    /// The same experiment on another hbar list.
    pub fn with_hbar(&self, hbar: Vec<f64>) -> Result<Self> {
        check_hbar_list(&hbar)?;
        Ok(ExperimentConfig {
            hbar,
            ..self.clone()
        })
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            rtol: self.tolerances.ode_rtol,
            ..SolverOptions::default()
        }
    }

    pub fn assembly(&self, execution: Execution) -> AssemblyOptions {
        AssemblyOptions {
            solver: self.solver(),
            execution,
            ..AssemblyOptions::default()
        }
    }

    pub fn kernels(&self) -> KernelOptions {
        KernelOptions {
            tol: self.tolerances.kernel_tol,
            solver: self.solver(),
            ..KernelOptions::default()
        }
    }

    pub fn bound_states(&self, execution: Execution) -> BoundStateOptions {
        BoundStateOptions {
            coincidence_tol: self.tolerances.coincidence,
            energy_tol: self.tolerances.energy_tol,
            solver: self.solver(),
            execution,
            ..BoundStateOptions::default()
        }
    }

    pub fn family(&self, execution: Execution) -> FamilyOptions {
        FamilyOptions {
            initial_points: self.sweep.initial_points,
            max_depth: self.sweep.max_depth,
            execution,
            ..FamilyOptions::default()
        }
    }

    pub fn flow(&self, execution: Execution) -> FlowOptions {
        FlowOptions {
            gap_margin: self.tolerances.gap_margin,
            execution,
            ..FlowOptions::default()
        }
    }
}

pub fn check_hbar_list(hbar: &[f64]) -> Result<()> {
    if hbar.is_empty() {
        return Err(Error::Config("hbar list is empty".into()));
    }
    if hbar.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
        return Err(Error::Config(format!(
            "hbar values must lie in (0, 1], got {hbar:?}"
        )));
    }
    if hbar.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config(format!(
            "hbar values must be strictly decreasing, got {hbar:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_is_valid_and_hash_is_stable() {
        let c = ExperimentConfig::default_model();
        assert_eq!(c.hbar, DEFAULT_HBAR.to_vec());
        assert_eq!(c.hash(), ExperimentConfig::default_model().hash());
        assert_eq!(c.hash().len(), 64);
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&j).unwrap(), c);
    }

    #[test]
    fn invalid_lists_and_windows_are_rejected() {
        let c = ExperimentConfig::default_model();
        assert!(c.with_hbar(vec![0.1, 0.2]).is_err());
        assert!(c.with_hbar(vec![0.2, 0.2]).is_err());
        let mut bad = c.clone();
        bad.window.delta = 5.0;
        assert!(bad.validate().is_err());
        bad.window.delta = 0.0;
        assert!(bad.validate().is_err());
    }
}
