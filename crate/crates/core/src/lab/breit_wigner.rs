use serde::{Deserialize, Serialize};

use super::resonances::{admissible_angles, AngleReport, ResonantEnergy};
use crate::error::{Error, Result};
use crate::flow::{
    mu_anchored, spectral_flow, ssf_birman_krein, unwrap_ssf, FlowOptions, FlowResult,
};
use crate::potential::PotentialTriple;
use crate::radial::BoundStateList;
use crate::scattering::{
    assemble, AssemblyOptions, EigenphaseTable, FamilyOptions, Pair, SMatrixFamily,
};

#[derive(Clone, Copy, Debug)]
pub struct BreitWignerOptions {
    pub assembly: AssemblyOptions,
    pub family: FamilyOptions,
    pub flow: FlowOptions,
    /// admissibility margin, also used as the offset theta +- margin
    pub angle_margin: f64,
    /// widths below this fraction of E_res are not resolvable
    pub min_relative_width: f64,
}

impl Default for BreitWignerOptions {
    fn default() -> Self {
        BreitWignerOptions {
            assembly: AssemblyOptions::default(),
            family: FamilyOptions {
                max_depth: 48,
                ..FamilyOptions::default()
            },
            flow: FlowOptions::default(),
            angle_margin: 1e-3,
            min_relative_width: 1e-13,
        }
    }
}

/// Counting identities at one energy, with theta_pm = theta +- margin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointIdentity {
    pub energy: f64,
    /// mu(e^{i theta}, E; H, H0)
    pub mu_h: i64,
    /// mu(e^{i theta}, E; Hext, H0)
    pub mu_ext: i64,
    pub mu_ext_plus: i64,
    pub mu_ext_minus: i64,
    /// N((-oo, E); H^int)
    pub interior_count: i64,
    pub sandwich_holds: bool,
    pub equality_holds: bool,
}

pub fn endpoint_identity(
    hh0: &EigenphaseTable,
    hext: &EigenphaseTable,
    interior: &BoundStateList,
    theta: f64,
    offset: f64,
) -> EndpointIdentity {
    let e = hh0.energy;
    let mu_h = mu_anchored(hh0, theta);
    let mu_ext = mu_anchored(hext, theta);
    let mu_ext_plus = mu_anchored(hext, theta + offset);
    let mu_ext_minus = mu_anchored(hext, theta - offset);
    let n = interior.count_below(e) as i64;
    EndpointIdentity {
        energy: e,
        mu_h,
        mu_ext,
        mu_ext_plus,
        mu_ext_minus,
        interior_count: n,
        sandwich_holds: mu_ext_plus + n <= mu_h && mu_h <= mu_ext_minus + n,
        equality_holds: mu_h == mu_ext + n,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BreitWignerReport {
    pub resonance: ResonantEnergy,
    pub theta: f64,
    pub e_lo: f64,
    pub e_hi: f64,
    /// half-width of the sweep window
    pub epsilon: f64,
    /// 4 m / (d theta_total / dE) at E_res, theta_total the summed phase of S(E; H, Hext)
    pub width: f64,
    pub flow: FlowResult,
    pub grid_points: usize,
    pub depth: u32,
    pub endpoints: [EndpointIdentity; 2],
    /// unwrapped xi(e_hi) - xi(e_lo)
    pub ssf_jump: f64,
    /// largest |e^{-2 pi i xi} - det S| on the sweep grid
    pub determinant_defect: f64,
    pub passed: bool,
}

/// d/dE of the weighted phase sum of S(E; H, Hext) at E, by central differences
/// on shrinking steps until two estimates agree to 5 %.
fn phase_slope(
    triple: &PotentialTriple,
    e: f64,
    hbar: f64,
    h0: f64,
    opts: &AssemblyOptions,
) -> Result<f64> {
    let sum = |x: f64| -> Result<f64> {
        Ok(assemble(triple, Pair::HHext, x, hbar, opts)?.weighted_phase_sum())
    };
    let mut h = h0;
    let mut prev: Option<f64> = None;
    let floor = 1e-15 * e.abs().max(1.0);
    while h > floor {
        let d = (sum(e + h)? - sum(e - h)?) / (2.0 * h);
        if let Some(p) = prev {
            if (d - p).abs() <= 0.05 * d.abs().max(p.abs()) {
                return Ok(d.max(p));
            }
        }
        prev = Some(d);
        h *= 0.1;
    }
    Ok(prev.unwrap_or(0.0))
}

/// Spectral flow of S(E; H, H0) through e^{i theta} across [E_res - eps, E_res + eps].
pub fn breit_wigner_sweep(
    triple: &PotentialTriple,
    res: &ResonantEnergy,
    interior: &BoundStateList,
    theta: f64,
    opts: &BreitWignerOptions,
) -> Result<(BreitWignerReport, AngleReport)> {
    let hbar = res.hbar;
    let angles = admissible_angles(triple, res.energy, hbar, opts.angle_margin, &opts.assembly)?;
    if !angles.contains(theta) {
        return Err(Error::Precondition(format!(
            "theta = {theta} is not admissible at E_res = {} (margin {:e})",
            res.energy, opts.angle_margin
        )));
    }
    let slope = phase_slope(
        triple,
        res.energy,
        hbar,
        0.01 * res.isolation,
        &opts.assembly,
    )?;
    let m = res.multiplicity as f64;
    let width = if slope > 0.0 {
        4.0 * m / slope
    } else {
        res.isolation
    };
    if width < opts.min_relative_width * res.energy {
        return Err(Error::Resolution(format!(
            "resonance width {width:.3e} at E_res = {} is below the integrator resolution; use a larger hbar than {hbar}",
            res.energy
        )));
    }
    let epsilon = (0.25 * res.isolation).min(1e3 * width);
    let (e_lo, e_hi) = (res.energy - epsilon, res.energy + epsilon);
    let eval = |e: f64| assemble(triple, Pair::HH0, e, hbar, &opts.assembly);
    let fam = SMatrixFamily::build(Pair::HH0, e_lo, e_hi, eval, &opts.family)?;
    let flow = spectral_flow(&fam.unitary_family(), theta, &opts.flow)?;

    let first = fam.tables.first().expect("family is non-empty");
    let last = fam.tables.last().expect("family is non-empty");
    let ext_lo = assemble(triple, Pair::HextH0, e_lo, hbar, &opts.assembly)?;
    let ext_hi = assemble(triple, Pair::HextH0, e_hi, hbar, &opts.assembly)?;
    let endpoints = [
        endpoint_identity(first, &ext_lo, interior, theta, opts.angle_margin),
        endpoint_identity(last, &ext_hi, interior, theta, opts.angle_margin),
    ];
    let mut defect: f64 = 0.0;
    for t in &fam.tables {
        defect = defect.max(ssf_birman_krein(t, f64::INFINITY)?.determinant_defect);
    }
    let xi_lo = ssf_birman_krein(first, f64::INFINITY)?;
    let xi_hi = ssf_birman_krein(last, f64::INFINITY)?;
    let xi = unwrap_ssf(&[xi_lo, xi_hi]);
    let ssf_jump = xi[1] - xi[0];
    let passed = flow.flow == res.multiplicity as i64;
    let report = BreitWignerReport {
        resonance: res.clone(),
        theta,
        e_lo,
        e_hi,
        epsilon,
        width,
        grid_points: fam.grid.len(),
        depth: fam.depth,
        flow,
        endpoints,
        ssf_jump,
        determinant_defect: defect,
        passed,
    };
    Ok((report, angles))
}
