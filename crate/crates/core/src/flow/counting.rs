use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_theta, spectral_flow, FlowOptions, FlowResult};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numerics::linalg::{principal_angle, TWO_PI};
use crate::potential::PotentialTriple;
use crate::radial::{bs_kernels_converged, Channel, KernelOptions};
use crate::scattering::{
    assemble, AssemblyOptions, EigenphaseTable, FamilyOptions, LmaxPolicy, Pair, SMatrixFamily,
};

/// mu from absolute eigenphase branches, which vanish as E -> oo:
/// sum over channels of w (floor((theta_l - theta)/2 pi) + 1).
pub fn mu_anchored(table: &EigenphaseTable, theta: f64) -> i64 {
    table
        .entries
        .iter()
        .map(|e| e.weight as i64 * (((e.theta - theta) / TWO_PI).floor() as i64 + 1))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMethod {
    /// read off the absolute branches at E
    Anchored,
    /// spectral flow of S(E') for E' from E_max down to E, plus the anchored value at E_max
    Sweep,
}

#[derive(Clone, Copy, Debug)]
pub struct MuOptions {
    pub method: MuMethod,
    pub assembly: AssemblyOptions,
    pub family: FamilyOptions,
    pub flow: FlowOptions,
    /// overrides the starting value 50 E0 / min(1, hbar)^2
    pub e_max: Option<f64>,
    pub max_doublings: u32,
}

impl Default for MuOptions {
    fn default() -> Self {
        MuOptions {
            method: MuMethod::Anchored,
            assembly: AssemblyOptions::default(),
            family: FamilyOptions::default(),
            flow: FlowOptions::default(),
            e_max: None,
            max_doublings: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingValue {
    pub mu: i64,
    pub energy: f64,
    pub theta: f64,
    pub pair: Pair,
    pub method: MuMethod,
    pub e_max: Option<f64>,
    /// largest weighted phase at E_max
    pub tail_at_e_max: Option<f64>,
    /// grid points of the sweep
    pub sweep_points: usize,
}

/// Distance from theta to 0 on the circle.
fn distance_from_one(theta: f64) -> f64 {
    let p = principal_angle(theta);
    p.min(TWO_PI - p)
}

/// mu(e^{i theta}, E) for one pair of the triple.
pub fn mu(
    triple: &PotentialTriple,
    pair: Pair,
    energy: f64,
    theta: f64,
    hbar: f64,
    opts: &MuOptions,
) -> Result<CountingValue> {
    check_theta(theta)?;
    if !(energy > 0.0) {
        return Err(Error::Domain(format!("mu needs E > 0, got {energy}")));
    }
    match opts.method {
        MuMethod::Anchored => {
            let t = assemble(triple, pair, energy, hbar, &opts.assembly)?;
            Ok(CountingValue {
                mu: mu_anchored(&t, theta),
                energy,
                theta,
                pair,
                method: MuMethod::Anchored,
                e_max: None,
                tail_at_e_max: None,
                sweep_points: 1,
            })
        }
        MuMethod::Sweep => {
            let (value, e_max, tail, _) = mu_sweep(triple, pair, energy, theta, hbar, opts)?;
            Ok(CountingValue {
                mu: value.0,
                energy,
                theta,
                pair,
                method: MuMethod::Sweep,
                e_max: Some(e_max),
                tail_at_e_max: Some(tail),
                sweep_points: value.1,
            })
        }
    }
}

fn mu_sweep(
    triple: &PotentialTriple,
    pair: Pair,
    energy: f64,
    theta: f64,
    hbar: f64,
    opts: &MuOptions,
) -> Result<((i64, usize), f64, f64, FlowResult)> {
    let target = 0.25 * distance_from_one(theta);
    let mut e_max = opts
        .e_max
        .unwrap_or(50.0 * triple.options.e0.abs().max(1e-3) / hbar.min(1.0).powi(2));
    e_max = e_max.max(2.0 * energy);
    let mut top = assemble(triple, pair, e_max, hbar, &opts.assembly)?;
    let mut doublings = 0;
    while top.max_weighted_phase() >= target {
        doublings += 1;
        if doublings > opts.max_doublings {
            return Err(Error::Model(format!(
                "{pair}: weighted phase {:.3e} at E_max = {e_max:.4e} still above {target:.3e}",
                top.max_weighted_phase()
            )));
        }
        e_max *= 2.0;
        top = assemble(triple, pair, e_max, hbar, &opts.assembly)?;
    }
    let fam = build_geometric(
        pair,
        energy,
        e_max,
        |e| assemble(triple, pair, e, hbar, &opts.assembly),
        &opts.family,
    )?;
    let forward = spectral_flow(&fam.unitary_family(), theta, &opts.flow)?;
    let last = fam.tables.last().expect("family is non-empty");
    Ok((
        (mu_anchored(last, theta) - forward.flow, fam.grid.len()),
        e_max,
        top.max_weighted_phase(),
        forward,
    ))
}

/// Family on a geometric initial grid over [e_lo, e_hi].
pub(crate) fn build_geometric<F>(
    pair: Pair,
    e_lo: f64,
    e_hi: f64,
    eval: F,
    opts: &FamilyOptions,
) -> Result<SMatrixFamily>
where
    F: Fn(f64) -> Result<EigenphaseTable> + Sync + Send,
{
    let n = opts.initial_points.max(2);
    let r = (e_hi / e_lo).ln();
    let grid: Vec<f64> = (0..n)
        .map(|i| e_lo * (r * i as f64 / (n - 1) as f64).exp())
        .collect();
    SMatrixFamily::build_on_grid(pair, grid, eval, opts)
}

#[derive(Clone, Copy, Debug)]
pub struct BsCountOptions {
    pub l_max: LmaxPolicy,
    pub kernels: KernelOptions,
    pub execution: Execution,
    /// eigenvalues this close to 1 trigger a warning
    pub boundary_tol: f64,
}

impl Default for BsCountOptions {
    fn default() -> Self {
        BsCountOptions {
            l_max: LmaxPolicy::default(),
            kernels: KernelOptions::default(),
            execution: Execution::Parallel,
            boundary_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsCount {
    pub count: i64,
    pub energy: f64,
    pub theta: f64,
    pub l_max: u32,
    /// (l, unweighted count) for channels with a nonzero count
    pub per_channel: Vec<(u32, usize)>,
    /// smallest distance of any channel spectrum to 1
    pub min_distance: f64,
}

/// Weighted N((1, oo); A^ext + cot(theta/2) B^ext) over channels up to L_max.
pub fn mu_via_birman_schwinger(
    triple: &PotentialTriple,
    energy: f64,
    theta: f64,
    hbar: f64,
    opts: &BsCountOptions,
) -> Result<BsCount> {
    check_theta(theta)?;
    let dim = triple.dimension;
    let radius = triple.v().support_radius().max(triple.options.omega2);
    let l_max = opts.l_max.l_max(dim, energy, hbar, radius)?;
    let rows = exec::try_map_range(
        opts.execution,
        l_max as usize + 1,
        |l| -> Result<(u32, u32, usize, f64)> {
            let ch = Channel::new(dim, l as u32);
            let k = bs_kernels_converged(triple, ch, energy, hbar, &opts.kernels)?;
            let (n, d) = k.count_with_angle(theta);
            Ok((ch.ell, ch.weight(), n, d))
        },
    )?;
    let mut count = 0i64;
    let mut per_channel = Vec::new();
    let mut min_distance = f64::INFINITY;
    for (l, w, n, d) in rows {
        count += w as i64 * n as i64;
        if n > 0 {
            per_channel.push((l, n));
        }
        min_distance = min_distance.min(d);
        if d < opts.boundary_tol {
            log::warn!("E = {energy}, theta = {theta}, l = {l}: eigenvalue within {d:.2e} of 1; count {n} is fragile");
        }
    }
    Ok(BsCount {
        count,
        energy,
        theta,
        l_max,
        per_channel,
        min_distance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsfValue {
    pub energy: f64,
    /// xi mod 1 in [0, 1)
    pub xi_mod1: f64,
    /// -(1/2 pi) sum w theta_l on the absolute branches
    pub xi_branch: f64,
    pub weighted_phase_sum: f64,
    pub tail: f64,
    /// |e^{-2 pi i xi} - prod_l e^{i w theta_l}|
    pub determinant_defect: f64,
}

/// xi(E) from det S(E) = e^{-2 pi i xi(E)}.
pub fn ssf_birman_krein(table: &EigenphaseTable, tail_tol: f64) -> Result<SsfValue> {
    if table.tail_bound > tail_tol {
        return Err(Error::Truncation(format!(
            "tail bound {:.3e} above {tail_tol:.3e} at E = {}",
            table.tail_bound, table.energy
        )));
    }
    let sum = table.weighted_phase_sum();
    let xi_branch = -sum / TWO_PI;
    let xi_mod1 = {
        let r = xi_branch.rem_euclid(1.0);
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    };
    let mut det = Complex64::new(1.0, 0.0);
    for e in &table.entries {
        det *= Complex64::from_polar(1.0, e.theta_mod).powu(e.weight);
    }
    let lhs = Complex64::from_polar(1.0, -TWO_PI * xi_mod1);
    Ok(SsfValue {
        energy: table.energy,
        xi_mod1,
        xi_branch,
        weighted_phase_sum: sum,
        tail: table.tail_bound / TWO_PI,
        determinant_defect: (lhs - det).norm(),
    })
}

/// Continuous xi along a grid: each mod-1 value shifted by the integer that
/// brings it closest to the branch value.
pub fn unwrap_ssf(values: &[SsfValue]) -> Vec<f64> {
    values
        .iter()
        .map(|v| v.xi_mod1 + (v.xi_branch - v.xi_mod1).round())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Dimension;
    use crate::scattering::PhaseEntry;
    use std::f64::consts::PI;

    fn table(entries: &[(u32, u32, f64)]) -> EigenphaseTable {
        EigenphaseTable {
            energy: 1.0,
            hbar: 0.2,
            dimension: Dimension::Three,
            pair: Pair::HH0,
            l_max: entries.len() as u32 - 1,
            entries: entries
                .iter()
                .map(|&(l, w, t)| PhaseEntry::new(l, w, t))
                .collect(),
            tail_bound: 0.0,
            chain_defect: 0.0,
        }
    }

    #[test]
    fn anchored_mu_counts_windings_past_theta() {
        let t = table(&[(0, 1, 2.0 * PI + 0.5), (1, 3, 0.2), (2, 5, -0.1)]);
        assert_eq!(mu_anchored(&t, 0.3), 2);
        assert_eq!(mu_anchored(&t, 0.1), 1 + 1 + 3);
        let free = table(&[(0, 1, 0.0), (1, 3, 0.0)]);
        assert_eq!(mu_anchored(&free, 1.0), 0);
        let neg = table(&[(0, 1, -2.0 * PI - 0.5)]);
        assert_eq!(mu_anchored(&neg, 5.9), -2);
    }

    #[test]
    fn ssf_matches_determinant_and_unwraps() {
        let t = table(&[(0, 1, 2.0 * PI + 0.5), (1, 3, 0.2)]);
        let s = ssf_birman_krein(&t, 1e-6).unwrap();
        assert!(s.determinant_defect < 1e-12);
        assert!((unwrap_ssf(&[s])[0] - s.xi_branch).abs() < 1e-12);
        let free = ssf_birman_krein(&table(&[(0, 1, 0.0)]), 1e-6).unwrap();
        assert_eq!(free.xi_mod1, 0.0);
    }
}
