//! Stationary representation of a channel S-matrix value,
//! s = 1 - (2i / (hbar^2 k)) x^T (J + A + iB)^{-1} x,
//! with A + iB = sqrt|W| R_base(E + i0) sqrt|W| and x the projection of
//! sqrt|W| u_base onto the basis, W the perturbation of the pair.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::green::normalized_solutions;
use super::kernels::{galerkin, project, sign_matrix, support_grid, KernelOptions};
use super::Channel;
use crate::error::{Error, Result};
use crate::numerics::magnus::Scaled;
use crate::numerics::quadrature::PanelGrid;
use crate::potential::RadialPotential;

/// Unperturbed operator of the representation.
#[derive(Clone, Copy, Debug)]
pub enum StationaryBase<'a> {
    Free,
    Potential(&'a RadialPotential),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryResult {
    pub channel: Channel,
    pub energy: f64,
    pub hbar: f64,
    pub value: Complex64,
    /// ||s| - 1|
    pub unitarity_defect: f64,
    /// the same value through the rank-one update of (J + A)^{-1}
    pub rank_one_value: Complex64,
    /// |s| difference between the final grid and its predecessor
    pub self_convergence: f64,
    pub nodes: usize,
}

/// Perturbation W given pointwise on [0, support].
pub struct Perturbation<'a> {
    pub value: &'a (dyn Fn(f64) -> f64 + Sync),
    pub support: f64,
    pub breakpoints: Vec<f64>,
}

fn on_grid(
    channel: Channel,
    base: StationaryBase,
    w: &Perturbation,
    energy: f64,
    hbar: f64,
    grid: &PanelGrid,
    opts: &KernelOptions,
) -> Result<(Complex64, Complex64)> {
    let fine = grid.fine_nodes();
    let k = energy.sqrt() / hbar;
    let h2k = hbar * hbar * k;
    let (p, q): (Vec<Scaled>, Vec<Scaled>) = match base {
        StationaryBase::Free => fine
            .iter()
            .map(|&r| {
                let fw = channel.free_wave(k * r);
                (Scaled::new(fw.f, 0.0), Scaled::new(-fw.g / h2k, 0.0))
            })
            .unzip(),
        StationaryBase::Potential(v) => {
            let sol = normalized_solutions(v, channel, energy, hbar, &fine, &opts.solver)?;
            let q = sol
                .irr
                .iter()
                .map(|x| Scaled {
                    u: -x.u / h2k,
                    ..*x
                })
                .collect();
            (sol.reg, q)
        }
    };
    let vals: Vec<f64> = fine.iter().map(|&r| (w.value)(r)).collect();
    let s: Vec<f64> = vals.iter().map(|v| v.abs().sqrt()).collect();
    let sign: Vec<f64> = vals
        .iter()
        .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let a = galerkin(grid, &s, &p, &q, channel.regular_exponent());
    let j = sign_matrix(grid, &sign);
    let x = project(grid, &s, &p);
    let n = x.len();
    let c = 1.0 / h2k;

    let ja = &j + &a;
    let m = DMatrix::from_fn(n, n, |r, col| {
        Complex64::new(ja[(r, col)], c * x[r] * x[col])
    });
    let xc: DVector<Complex64> = x.map(|v| Complex64::new(v, 0.0));
    let z = m.lu().solve(&xc).ok_or(Error::NearResonance {
        energy,
        distance: 0.0,
    })?;
    let xz: Complex64 = xc.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
    let value = Complex64::new(1.0, 0.0) - Complex64::new(0.0, 2.0 * c) * xz;

    let zr = ja.lu().solve(&x).ok_or(Error::NearResonance {
        energy,
        distance: 0.0,
    })?;
    let t = c * x.dot(&zr);
    let rank_one = Complex64::new(1.0, -t) / Complex64::new(1.0, t);
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::NearResonance {
            energy,
            distance: 0.0,
        });
    }
    Ok((value, rank_one))
}

/// Channel S-matrix value of the pair (base + W, base) at energy E.
pub fn stationary_smatrix(
    channel: Channel,
    base: StationaryBase,
    w: &Perturbation,
    energy: f64,
    hbar: f64,
    opts: &KernelOptions,
) -> Result<StationaryResult> {
    if !(energy > 0.0) {
        return Err(Error::Domain(format!(
            "scattering energy must be positive, got {energy}"
        )));
    }
    if !(w.support > 0.0) {
        let one = Complex64::new(1.0, 0.0);
        return Ok(StationaryResult {
            channel,
            energy,
            hbar,
            value: one,
            unitarity_defect: 0.0,
            rank_one_value: one,
            self_convergence: 0.0,
            nodes: 0,
        });
    }
    let mut v_scale: f64 = 0.0;
    for i in 0..=2000 {
        let r = w.support * i as f64 / 2000.0;
        let base_v = match base {
            StationaryBase::Free => 0.0,
            StationaryBase::Potential(v) => v.value(r),
        };
        v_scale = v_scale
            .max(((w.value)(r) + base_v - energy).abs())
            .max((base_v - energy).abs());
    }
    let mut grid = support_grid(
        channel.dimension,
        w.support,
        &w.breakpoints,
        v_scale,
        energy,
        hbar,
        opts,
    )?;
    let (mut prev, _) = on_grid(channel, base, w, energy, hbar, &grid, opts)?;
    let mut diff = f64::INFINITY;
    for _ in 0..opts.max_doublings {
        grid = grid.refined();
        let (value, rank_one) = on_grid(channel, base, w, energy, hbar, &grid, opts)?;
        diff = (value - prev).norm();
        if diff < 1e-11 {
            return Ok(StationaryResult {
                channel,
                energy,
                hbar,
                value,
                unitarity_defect: (value.norm() - 1.0).abs(),
                rank_one_value: rank_one,
                self_convergence: diff,
                nodes: grid.len(),
            });
        }
        prev = value;
    }
    Err(Error::Quadrature {
        achieved: diff,
        requested: 1e-11,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Dimension;
    use crate::radial::{phase_shift, smatrix_eigenvalue, SolverOptions};

    #[test]
    fn zero_perturbation_is_identity() {
        let f = |_r: f64| 0.0;
        let w = Perturbation {
            value: &f,
            support: 0.0,
            breakpoints: vec![],
        };
        let s = stationary_smatrix(
            Channel::new(Dimension::Three, 0),
            StationaryBase::Free,
            &w,
            1.0,
            1.0,
            &KernelOptions::default(),
        )
        .unwrap();
        assert_eq!(s.value, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn square_well_agrees_with_phase_shift() {
        let v = RadialPotential::square_well(5.0, 1.0).unwrap();
        let f = |r: f64| v.value(r);
        let w = Perturbation {
            value: &f,
            support: 1.0,
            breakpoints: vec![1.0],
        };
        for ell in [0u32, 2] {
            let ch = Channel::new(Dimension::Three, ell);
            for &e in &[0.4, 2.0] {
                let s = stationary_smatrix(
                    ch,
                    StationaryBase::Free,
                    &w,
                    e,
                    1.0,
                    &KernelOptions::default(),
                )
                .unwrap();
                let p = phase_shift(&v, ch, e, 1.0, &SolverOptions::default()).unwrap();
                let exact = smatrix_eigenvalue(&p);
                assert!(
                    (s.value - exact).norm() < 1e-8,
                    "l={ell} E={e}: {} vs {exact}",
                    s.value
                );
                assert!(s.unitarity_defect < 1e-8);
                assert!((s.rank_one_value - s.value).norm() < 1e-8);
            }
        }
    }
}
