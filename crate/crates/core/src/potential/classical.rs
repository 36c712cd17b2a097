//! Classical Hamiltonian flow of |xi|^2 + V(x) reduced to the radial
//! coordinate: r' = 2 p, p' = 2 L^2 / r^3 - V'(r), with conserved angular
//! momentum L and energy p^2 + L^2 / r^2 + V(r).

use serde::{Deserialize, Serialize};

use super::{classically_accessible, RadialPotential};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub r0: f64,
    /// angle between the initial momentum and the outward radial direction
    pub alpha: f64,
    pub escaped: bool,
    pub final_radius: f64,
    pub energy_drift: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonTrappingReport {
    pub energy: f64,
    pub radius: f64,
    pub escape_time: f64,
    pub trajectories: Vec<TrajectoryRecord>,
    pub all_escape: bool,
    pub max_energy_drift: f64,
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrate the radial flow to time `t_end`; returns (r, p) and the largest
/// relative energy drift seen.
fn radial_flow(
    v: &RadialPotential,
    l2: f64,
    r0: f64,
    p0: f64,
    t_end: f64,
    energy: f64,
) -> Result<((f64, f64), f64)> {
    let rhs = |y: [f64; 2]| -> [f64; 2] {
        let r = y[0].max(1e-12);
        let (_, dv) = v.value_and_derivative(r);
        [2.0 * y[1], 2.0 * l2 / (r * r * r) - dv]
    };
    let energy_of = |y: [f64; 2]| y[1] * y[1] + l2 / (y[0] * y[0]) + v.value(y[0]);
    let scale = energy.abs().max(1e-12);
    let mut y = [r0, p0];
    let mut t = 0.0;
    let mut h: f64 = 1e-3;
    let tol = 1e-12;
    // the integrator must not step over mollified edges, where the force lives
    let speed = 2.0 * (energy.abs() + v.sup_abs(r0.max(v.support_radius()) + 1.0)).sqrt();
    let h_max = 0.005 / speed.max(1e-6);
    let mut drift: f64 = 0.0;
    let mut steps = 0usize;
    while t < t_end {
        h = h.min(h_max);
        if t + h > t_end {
            h = t_end - t;
        }
        let mut k = [[0.0; 2]; 7];
        k[0] = rhs(y);
        for s in 1..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                yi[0] += h * DP_A[s][j] * kj[0];
                yi[1] += h * DP_A[s][j] * kj[1];
            }
            k[s] = rhs(yi);
        }
        let mut yn = y;
        let mut err = [0.0; 2];
        for s in 0..6 {
            yn[0] += h * DP_A[6][s] * k[s][0];
            yn[1] += h * DP_A[6][s] * k[s][1];
        }
        for (s, ks) in k.iter().enumerate() {
            err[0] += h * DP_E[s] * ks[0];
            err[1] += h * DP_E[s] * ks[1];
        }
        let sc0 = tol * (1.0 + y[0].abs().max(yn[0].abs()));
        let sc1 = tol * (1.0 + y[1].abs().max(yn[1].abs()));
        let e = ((err[0] / sc0).powi(2) + (err[1] / sc1).powi(2)).sqrt() / std::f64::consts::SQRT_2;
        steps += 1;
        if steps > 5_000_000 {
            return Err(Error::Integration {
                r: y[0],
                detail: "classical flow step limit".into(),
            });
        }
        if e <= 1.0 || h < 1e-12 {
            t += h;
            y = yn;
            drift = drift.max((energy_of(y) - energy).abs() / scale);
            if y[0] <= 0.0 {
                // passage through the origin: reflect (only possible for L = 0)
                y = [-y[0], -y[1]];
            }
        }
        let fac = if e > 0.0 { 0.9 * e.powf(-0.2) } else { 5.0 };
        h *= fac.clamp(0.2, 5.0);
    }
    Ok(((y[0], y[1]), drift))
}

/// Sample initial conditions in the exterior accessible region inside radius
/// `radius` and check that every trajectory leaves B(radius) for good by the
/// escape time (both time directions are covered by the angle grid).
pub fn non_trapping_check(
    v: &RadialPotential,
    energy: f64,
    radius: f64,
    escape_time: Option<f64>,
    samples: usize,
) -> Result<NonTrappingReport> {
    if !(energy > 0.0) {
        return Err(Error::Domain("non-trapping check needs E > 0".into()));
    }
    if samples < 2 {
        return Err(Error::Domain(
            "need at least two samples per direction".into(),
        ));
    }
    let regions = classically_accessible(v, energy)?;
    let ext = regions
        .exterior
        .ok_or_else(|| Error::Precondition(format!("no exterior region at E = {energy}")))?;
    let r_out = radius.max(v.support_radius());
    let t_esc = escape_time.unwrap_or(10.0 * (radius + v.support_radius()) / (2.0 * energy.sqrt()));
    let mut ics = Vec::new();
    if ext.lo < radius {
        let lo = ext.lo + 1e-6 * (radius - ext.lo);
        for i in 0..samples {
            let r0 = lo + (radius - lo) * i as f64 / (samples - 1) as f64;
            for j in 0..samples {
                let alpha = std::f64::consts::PI * j as f64 / (samples - 1) as f64;
                ics.push((r0, alpha));
            }
        }
    }
    let records: Vec<Result<TrajectoryRecord>> =
        crate::exec::map(crate::Execution::Parallel, &ics, |&(r0, alpha)| {
            let p = (energy - v.value(r0)).max(0.0).sqrt();
            let pr = p * alpha.cos();
            let l = r0 * p * alpha.sin();
            let ((r, prf), drift) = radial_flow(v, l * l, r0, pr, t_esc, energy)?;
            Ok(TrajectoryRecord {
                r0,
                alpha,
                escaped: r >= r_out && prf > 0.0,
                final_radius: r,
                energy_drift: drift,
            })
        });
    let trajectories: Vec<TrajectoryRecord> = records.into_iter().collect::<Result<_>>()?;
    let all_escape = trajectories.iter().all(|t| t.escaped);
    let max_energy_drift = trajectories
        .iter()
        .map(|t| t.energy_drift)
        .fold(0.0, f64::max);
    Ok(NonTrappingReport {
        energy,
        radius,
        escape_time: t_esc,
        trajectories,
        all_escape,
        max_energy_drift,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub rho: f64,
    pub passes: bool,
    /// max over sampled r beyond the support of |V(r)| (1 + r)^rho / C
    pub worst_ratio: f64,
    pub worst_radius: f64,
}

/// Check |V(r)| <= C (1 + r)^(-rho) beyond the support, with C the declared
/// tail constant (log-spaced samples out to 10^6 support radii).
pub fn decay_check(v: &RadialPotential, rho: f64, n_samples: usize) -> Result<DecayReport> {
    if !(rho > 0.0) || n_samples < 2 {
        return Err(Error::Domain(
            "decay check needs rho > 0 and at least two samples".into(),
        ));
    }
    let r0 = v.support_radius();
    let c = v.tail_constant();
    let lo = (1.0 + r0).ln();
    let hi = (1.0 + r0.max(1.0) * 1e6).ln();
    let mut worst = (0.0f64, r0);
    for i in 0..n_samples {
        let r = (lo + (hi - lo) * i as f64 / (n_samples - 1) as f64).exp() - 1.0;
        let a = v.value(r).abs() * (1.0 + r).powf(rho);
        let ratio = if c > 0.0 {
            a / c
        } else if a > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > worst.0 {
            worst = (ratio, r);
        }
    }
    Ok(DecayReport {
        rho,
        passes: worst.0 <= 1.0 + 1e-12,
        worst_ratio: worst.0,
        worst_radius: worst.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PieceSpec;

    #[test]
    fn free_flow_is_straight_line() {
        // |xi|^2 with x(0) at r0 moving tangentially: r(t)^2 = r0^2 + 4 p^2 t^2
        let v = RadialPotential::zero();
        let (r0, p) = (1.0, 0.5);
        let ((r, _), drift) = radial_flow(&v, (r0 * p) * (r0 * p), r0, 0.0, 3.0, p * p).unwrap();
        assert!((r - (r0 * r0 + 4.0 * p * p * 9.0f64).sqrt()).abs() < 1e-9);
        assert!(drift < 1e-10);
    }

    #[test]
    fn ring_exterior_is_non_trapping() {
        let v = RadialPotential::ring(1.0, 2.0, 2.0, 0.05).unwrap();
        let rep = non_trapping_check(&v, 1.0, 4.0, None, 9).unwrap();
        assert!(rep.all_escape);
        assert!(rep.max_energy_drift < 1e-8, "{}", rep.max_energy_drift);
    }

    #[test]
    fn decay_examples() {
        let v = RadialPotential::from_pieces(
            "t",
            vec![PieceSpec::PowerTail {
                coefficient: 1.0,
                exponent: 2.0,
            }],
        )
        .unwrap();
        let r = decay_check(&v, 2.0, 200).unwrap();
        assert!(r.passes && (r.worst_ratio - 1.0).abs() < 1e-12);
        assert!(!decay_check(&v, 2.5, 200).unwrap().passes);
        let ring = RadialPotential::ring(1.0, 2.0, 2.0, 0.05).unwrap();
        for rho in [0.5, 3.0, 40.0] {
            let r = decay_check(&ring, rho, 100).unwrap();
            assert!(r.passes && r.worst_ratio == 0.0);
        }
    }
}
