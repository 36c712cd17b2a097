use super::green::normalized_solutions;
use super::solver::SolverOptions;
use super::Channel;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numerics::quadrature::PanelGrid;
use crate::potential::RadialPotential;

/// max over channels of || <r>^{-s} (H0 + V - E - i0)^{-1} <r>^{-s} ||, the
/// kernel restricted to [0, r_trunc] and discretised by Nystrom on
/// Gauss-Legendre panels.
pub fn weighted_resolvent_norm(
    v: &RadialPotential,
    energy: f64,
    hbar: f64,
    s: f64,
    channels: &[Channel],
    r_trunc: f64,
    opts: &SolverOptions,
    execution: Execution,
) -> Result<f64> {
    if !(s > 0.5) {
        return Err(Error::Domain(format!(
            "weight exponent must exceed 1/2, got {s}"
        )));
    }
    if !(energy > 0.0 && r_trunc > 0.0) {
        return Err(Error::Domain(
            "need E > 0 and a positive truncation radius".into(),
        ));
    }
    let k = energy.sqrt() / hbar;
    let width = (1.5 / k).min(0.5);
    let grid = PanelGrid::new(0.0, r_trunc, v.breakpoints(), width, 12)?;
    let nodes = grid.coarse_nodes();
    let weights = grid.coarse_weights();
    let scale: Vec<f64> = nodes
        .iter()
        .zip(&weights)
        .map(|(&r, &w)| w.sqrt() * (1.0 + r * r).powf(-0.5 * s))
        .collect();
    let norms = exec::try_map(execution, channels, |&ch| -> Result<f64> {
        let sol = normalized_solutions(v, ch, energy, hbar, &nodes, opts)?;
        let n = nodes.len();
        let c = -1.0 / (hbar * hbar * sol.k);
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            let u = sol.u(lo);
            let z = num_complex::Complex64::new(c * u * sol.v(hi), -c * u * sol.u(hi));
            z * (scale[i] * scale[j])
        });
        Ok(crate::numerics::linalg::op_norm(&m))
    })?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Dimension;

    #[test]
    fn free_norm_scales_like_inverse_hbar() {
        let zero = RadialPotential::zero();
        let ch = [Channel::new(Dimension::Three, 0)];
        let opts = SolverOptions::default();
        let a =
            weighted_resolvent_norm(&zero, 1.0, 0.2, 1.0, &ch, 12.0, &opts, Execution::Parallel)
                .unwrap();
        let b =
            weighted_resolvent_norm(&zero, 1.0, 0.1, 1.0, &ch, 12.0, &opts, Execution::Parallel)
                .unwrap();
        let slope = (b / a).ln() / (0.5f64).ln();
        assert!(slope < -0.7 && slope > -1.3, "{slope}");
    }
}
