use serde::{Deserialize, Serialize};

use super::fit::{exponential_fit_points, FitResult};
use super::resonances::interior_spectrum;
use crate::error::{Error, Result};
use crate::potential::PotentialTriple;
use crate::radial::BoundStateOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub hbar: f64,
    /// |E_n^(1) - E_n^(2)| over the paired prefix of the sorted lists
    pub gaps: Vec<f64>,
    /// levels of the longer list without a partner
    pub unpaired: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub rows: Vec<RobustnessRow>,
    /// exponential fit of the ground-state gap; None when too few gaps are positive
    pub fit: Option<FitResult>,
}

/// Interior eigenvalues of two constructions from the same V, paired in order.
pub fn robustness_experiment(
    first: &PotentialTriple,
    second: &PotentialTriple,
    hbars: &[f64],
    e_cut: f64,
    opts: &BoundStateOptions,
) -> Result<RobustnessReport> {
    if first.dimension != second.dimension {
        return Err(Error::Structural(
            "constructions in different dimensions".into(),
        ));
    }
    let mut rows = Vec::with_capacity(hbars.len());
    for &h in hbars {
        let a = interior_spectrum(first, h, e_cut, opts)?;
        let b = interior_spectrum(second, h, e_cut, opts)?;
        let n = a.states.len().min(b.states.len());
        let gaps = a
            .states
            .iter()
            .zip(&b.states)
            .map(|(x, y)| (x.energy - y.energy).abs())
            .collect();
        let longer = if a.states.len() > n {
            &a.states
        } else {
            &b.states
        };
        let unpaired: Vec<f64> = longer[n..].iter().map(|s| s.energy).collect();
        if !unpaired.is_empty() {
            log::warn!(
                "hbar = {h}: {} unpaired interior levels near the cut",
                unpaired.len()
            );
        }
        rows.push(RobustnessRow {
            hbar: h,
            gaps,
            unpaired,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.gaps.first().map(|&g| (r.hbar, g)))
        .collect();
    let fit = match exponential_fit_points("ground-state gap", &pts) {
        Ok(f) => Some(f),
        Err(Error::Precondition(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(RobustnessReport { rows, fit })
}
