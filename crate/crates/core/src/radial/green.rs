use nalgebra::DMatrix;
use num_complex::Complex64;

use super::phase::Matching;
use super::solver::{RadialProblem, SolverOptions};
use super::Channel;
use crate::error::{Error, Result};
use crate::numerics::magnus::{wronskian, Scaled};
use crate::potential::RadialPotential;

/// Regular and irregular solutions sampled at a node set, normalised to unit
/// asymptotic amplitude so that u ~ sin(kr - l pi/2 + delta), v ~ -cos(...),
/// and W[u, v] = k.
#[derive(Clone, Debug)]
pub(crate) struct NormalizedSolutions {
    pub reg: Vec<Scaled>,
    pub irr: Vec<Scaled>,
    pub k: f64,
    /// max_i |W[u, v](r_i) / k - 1|
    pub drift: f64,
}

impl NormalizedSolutions {
    pub fn u(&self, i: usize) -> f64 {
        self.reg[i].value()
    }

    pub fn v(&self, i: usize) -> f64 {
        self.irr[i].value()
    }
}

pub(crate) fn normalized_solutions(
    potential: &RadialPotential,
    channel: Channel,
    energy: f64,
    hbar: f64,
    points: &[f64],
    opts: &SolverOptions,
) -> Result<NormalizedSolutions> {
    if !(energy > 0.0) {
        return Err(Error::Domain(format!(
            "outgoing solutions need E > 0, got {energy}"
        )));
    }
    let problem = RadialProblem::new(potential, channel, energy, hbar)?;
    let k = energy.sqrt() / hbar;
    let r_max = points.iter().copied().fold(0.0, f64::max);
    let r_end = problem.matching_radius(opts)?.max(r_max);
    let reg = problem.regular(r_end, points, opts)?;
    let m = Matching::new(channel, k, r_end, &reg.end)?;
    let ln_a = m.ln_amplitude();
    let irr_end = m.irregular_at(channel, r_end).shifted(ln_a);
    let r_min = points.iter().copied().fold(r_end, f64::min);
    if r_min <= 0.0 {
        return Err(Error::Domain("Green kernel nodes must be positive".into()));
    }
    let irr = problem.propagate(r_end, irr_end, r_min, points, opts)?;
    let reg: Vec<Scaled> = reg.samples.iter().map(|s| s.shifted(ln_a)).collect();
    let mut drift: f64 = 0.0;
    for (a, b) in reg.iter().zip(&irr.samples) {
        let (w, s) = wronskian(a, b);
        drift = drift.max((w * s.exp() / k - 1.0).abs());
    }
    Ok(NormalizedSolutions {
        reg,
        irr: irr.samples,
        k,
        drift,
    })
}

/// Sampled kernel of (H - E - i0)^{-1} for one channel.
#[derive(Clone, Debug)]
pub struct GreenKernel {
    pub channel: Channel,
    pub energy: f64,
    pub hbar: f64,
    pub nodes: Vec<f64>,
    pub values: DMatrix<Complex64>,
    /// relative drift of the Wronskian across the nodes
    pub wronskian_drift: f64,
}

impl GreenKernel {
    /// W^{1/2} G W^{1/2} for quadrature weights w.
    pub fn weighted(&self, weights: &[f64]) -> Result<DMatrix<Complex64>> {
        let n = self.nodes.len();
        if weights.len() != n {
            return Err(Error::Structural(format!(
                "{} weights for {n} nodes",
                weights.len()
            )));
        }
        let s: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            self.values[(i, j)] * (s[i] * s[j])
        }))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.nodes.len();
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (self.values[(i, j)], self.values[(j, i)]);
                d = d.max((a - b).norm() / a.norm().max(b.norm()).max(1e-300));
            }
        }
        d
    }
}

/// G(r, r') = -u(r<) (v(r>) - i u(r>)) / (hbar^2 k) with u, v as in
/// [`normalized_solutions`].
pub fn outgoing_green(
    channel: Channel,
    potential: &RadialPotential,
    energy: f64,
    hbar: f64,
    nodes: &[f64],
    opts: &SolverOptions,
) -> Result<GreenKernel> {
    let sol = normalized_solutions(potential, channel, energy, hbar, nodes, opts)?;
    if sol.drift > 1e-6 {
        return Err(Error::NearResonance {
            energy,
            distance: sol.drift,
        });
    }
    let n = nodes.len();
    let c = -1.0 / (hbar * hbar * sol.k);
    let values = DMatrix::from_fn(n, n, |i, j| {
        let (lo, hi) = if nodes[i] <= nodes[j] { (i, j) } else { (j, i) };
        let u_lo = sol.reg[lo];
        let (u_hi, v_hi) = (sol.reg[hi], sol.irr[hi]);
        let re = u_lo.u * v_hi.u * (u_lo.ln_scale + v_hi.ln_scale).exp();
        let im = u_lo.u * u_hi.u * (u_lo.ln_scale + u_hi.ln_scale).exp();
        Complex64::new(c * re, -c * im)
    });
    Ok(GreenKernel {
        channel,
        energy,
        hbar,
        nodes: nodes.to_vec(),
        values,
        wronskian_drift: sol.drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Dimension;

    #[test]
    fn free_s_wave_kernel_closed_form() {
        let zero = RadialPotential::zero();
        let nodes = [0.05, 0.3, 0.71, 1.2, 2.9, 4.4];
        let e: f64 = 2.3;
        let g = outgoing_green(
            Channel::new(Dimension::Three, 0),
            &zero,
            e,
            1.0,
            &nodes,
            &SolverOptions::default(),
        )
        .unwrap();
        let k = e.sqrt();
        for (i, &r) in nodes.iter().enumerate() {
            for (j, &s) in nodes.iter().enumerate() {
                let (lo, hi) = (r.min(s), r.max(s));
                let exact = Complex64::new(0.0, k * hi).exp() * ((k * lo).sin() / k);
                assert!((g.values[(i, j)] - exact).norm() < 1e-9, "{r} {s}");
            }
        }
        assert!(g.wronskian_drift < 1e-8);
    }

    #[test]
    fn imaginary_part_is_positive_semidefinite() {
        let v = RadialPotential::ring(1.0, 2.0, 2.0, 0.05).unwrap();
        let nodes: Vec<f64> = (1..30).map(|i| 0.1 * i as f64).collect();
        let g = outgoing_green(
            Channel::new(Dimension::Three, 1),
            &v,
            1.3,
            0.3,
            &nodes,
            &SolverOptions::default(),
        )
        .unwrap();
        let im = g.values.map(|z| z.im);
        let ev = crate::numerics::linalg::symmetric_eigenvalues(&im);
        let top = ev.last().copied().unwrap();
        assert!(ev[0] > -1e-10 * top.abs().max(1.0));
        assert!(g.max_asymmetry() < 1e-12);
    }
}
