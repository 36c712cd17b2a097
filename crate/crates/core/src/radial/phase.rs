//! Phase shifts on the absolute branch: delta -> 0 as E -> infinity, fixed by
//! comparing Prufer angles of the scattered and free regular solutions.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::solver::{RadialProblem, SolverOptions};
use super::Channel;
use crate::error::{Error, Result};
use crate::numerics::magnus::{wronskian, Propagation, Scaled};
use crate::potential::{PotentialTriple, RadialPotential};

pub(crate) fn zero_potential() -> &'static RadialPotential {
    static ZERO: OnceLock<RadialPotential> = OnceLock::new();
    ZERO.get_or_init(RadialPotential::zero)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseShift {
    pub channel: Channel,
    pub energy: f64,
    pub hbar: f64,
    /// continuous (absolute) branch
    pub delta: f64,
    /// representative in [0, pi)
    pub delta_mod: f64,
    pub r_match: f64,
    /// ln of the asymptotic amplitude of the regular solution r^s (1 + ...)
    pub ln_amplitude: f64,
}

/// Matching data of a solution against the free waves at r.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Matching {
    /// u = a f(kr) + b g(kr), with a and b carrying e^{ln_scale}
    pub a: f64,
    pub b: f64,
    pub ln_scale: f64,
    pub k: f64,
}

impl Matching {
    pub fn new(ch: Channel, k: f64, r: f64, y: &Scaled) -> Result<Self> {
        let w = ch.free_wave(k * r);
        let a = y.u * w.dg - y.du / k * w.g;
        let b = y.du / k * w.f - y.u * w.df;
        if !(a.is_finite() && b.is_finite()) || (a == 0.0 && b == 0.0) {
            return Err(Error::IllConditionedMatch {
                r,
                condition: f64::INFINITY,
            });
        }
        Ok(Matching {
            a,
            b,
            ln_scale: y.ln_scale,
            k,
        })
    }

    pub fn delta_mod(&self) -> f64 {
        (-self.b).atan2(self.a).rem_euclid(PI) % PI
    }

    pub fn ln_amplitude(&self) -> f64 {
        self.a.hypot(self.b).ln() + self.ln_scale
    }

    /// Irregular companion a g - b f at radius r (W[u, u_irr] = A^2 k).
    pub fn irregular_at(&self, ch: Channel, r: f64) -> Scaled {
        let w = ch.free_wave(self.k * r);
        Scaled {
            u: self.a * w.g - self.b * w.f,
            du: self.k * (self.a * w.dg - self.b * w.df),
            ln_scale: self.ln_scale,
        }
    }
}

/// Absolute Prufer angle pi Z + arg(u' + i kappa u) mod pi.
pub(crate) fn prufer_angle(p: &Propagation, kappa: f64) -> f64 {
    let base = (kappa * p.end.u).atan2(p.end.du).rem_euclid(PI);
    PI * p.zeros as f64 + base
}

/// Representative of `delta_mod` + n pi sharing the pi-cell of `dphi`.
pub(crate) fn absolute_branch(delta_mod: f64, dphi: f64) -> f64 {
    let mut n = (dphi / PI).floor();
    let frac = dphi / PI - n;
    if frac < 1e-7 && delta_mod > 0.5 * PI {
        n -= 1.0;
    } else if frac > 1.0 - 1e-7 && delta_mod < 0.5 * PI {
        n += 1.0;
    }
    n * PI + delta_mod
}

/// Representative of `x_mod` + n pi closest to `target`.
pub(crate) fn nearest_branch(x_mod: f64, target: f64) -> f64 {
    x_mod + PI * ((target - x_mod) / PI).round()
}

struct Regular {
    prop: Propagation,
    matching: Matching,
    prufer: f64,
}

fn regular_matched(
    problem: &RadialProblem,
    r_match: f64,
    outputs: &[f64],
    opts: &SolverOptions,
) -> Result<Regular> {
    let k = problem.energy.sqrt() / problem.hbar;
    let prop = problem.regular(r_match, outputs, opts)?;
    let matching = Matching::new(problem.channel, k, r_match, &prop.end)?;
    let prufer = prufer_angle(&prop, k);
    Ok(Regular {
        prop,
        matching,
        prufer,
    })
}

fn free_prufer(
    ch: Channel,
    energy: f64,
    hbar: f64,
    r_match: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let k = energy.sqrt() / hbar;
    let p = RadialProblem::new(zero_potential(), ch, energy, hbar)?;
    let prop = p.regular(r_match, &[], opts)?;
    Ok(prufer_angle(&prop, k))
}

fn check_energy(energy: f64) -> Result<()> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::Domain(format!(
            "scattering energy must be positive, got {energy}"
        )));
    }
    Ok(())
}

/// Phase shift of V in one channel on the absolute branch.
pub fn phase_shift(
    v: &RadialPotential,
    channel: Channel,
    energy: f64,
    hbar: f64,
    opts: &SolverOptions,
) -> Result<PhaseShift> {
    check_energy(energy)?;
    let problem = RadialProblem::new(v, channel, energy, hbar)?;
    let r_match = problem.matching_radius(opts)?;
    let reg = regular_matched(&problem, r_match, &[], opts)?;
    let free = free_prufer(channel, energy, hbar, r_match, opts)?;
    let delta_mod = reg.matching.delta_mod();
    let delta = absolute_branch(delta_mod, reg.prufer - free);
    Ok(PhaseShift {
        channel,
        energy,
        hbar,
        delta,
        delta_mod,
        r_match,
        ln_amplitude: reg.matching.ln_amplitude(),
    })
}

/// Channel eigenvalue e^{2 i delta} of the scattering matrix.
pub fn smatrix_eigenvalue(p: &PhaseShift) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * p.delta)
}

/// Phase shifts of V and V^ext and their difference for one channel. The
/// difference is computed from Wronskians at omega1, where V = V^ext, so it
/// keeps full relative precision when it is exponentially small.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelPhases {
    pub channel: Channel,
    pub energy: f64,
    pub hbar: f64,
    pub delta_v: f64,
    pub delta_ext: f64,
    pub delta_diff: f64,
    /// |delta_v - delta_ext - delta_diff|
    pub consistency: f64,
}

pub fn channel_phases(
    triple: &PotentialTriple,
    channel: Channel,
    energy: f64,
    hbar: f64,
    opts: &SolverOptions,
) -> Result<ChannelPhases> {
    check_energy(energy)?;
    let pv = RadialProblem::new(triple.v(), channel, energy, hbar)?;
    let pe = RadialProblem::new(triple.v_ext(), channel, energy, hbar)?;
    let r_match = pv.matching_radius(opts)?.max(pe.matching_radius(opts)?);
    let r_c = triple.options.omega1;
    let free = free_prufer(channel, energy, hbar, r_match, opts)?;
    let rv = regular_matched(&pv, r_match, &[r_c], opts)?;
    let re = regular_matched(&pe, r_match, &[r_c], opts)?;
    let delta_v = absolute_branch(rv.matching.delta_mod(), rv.prufer - free);
    let delta_ext = absolute_branch(re.matching.delta_mod(), re.prufer - free);

    let irr_start = re.matching.irregular_at(channel, r_match);
    let irr = pe.propagate(r_match, irr_start, r_c, &[], opts)?.end;
    let u_v = rv.prop.samples[0];
    let u_e = re.prop.samples[0];
    let (m1, s1) = wronskian(&u_e, &u_v);
    let (m2, s2) = wronskian(&u_v, &irr);
    let num = if m1 == 0.0 {
        0.0
    } else {
        -m1 * (s1 - s2).exp()
    };
    let diff_mod = num.atan2(m2).rem_euclid(PI) % PI;
    let delta_diff = nearest_branch(diff_mod, delta_v - delta_ext);
    let consistency = (delta_v - delta_ext - delta_diff).abs();
    Ok(ChannelPhases {
        channel,
        energy,
        hbar,
        delta_v,
        delta_ext,
        delta_diff,
        consistency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Dimension;

    fn square_well_delta0(depth: f64, a: f64, e: f64) -> f64 {
        let k = e.sqrt();
        let kk = (e + depth).sqrt();
        -k * a + ((k / kk) * (kk * a).tan()).atan()
    }

    #[test]
    fn square_well_s_wave_matches_closed_form() {
        let v = RadialPotential::square_well(5.0, 1.0).unwrap();
        for &e in &[0.05, 0.3, 1.0, 2.7, 9.0] {
            let p = phase_shift(
                &v,
                Channel::new(Dimension::Three, 0),
                e,
                1.0,
                &SolverOptions::default(),
            )
            .unwrap();
            let exact = square_well_delta0(5.0, 1.0, e);
            let d = (p.delta - exact).rem_euclid(PI);
            assert!(d.min(PI - d) < 1e-8, "E={e}: {} vs {exact}", p.delta);
        }
    }

    #[test]
    fn attractive_well_has_positive_phase_and_levinson_limit() {
        // depth 5 on the unit ball: K a = sqrt(5) in (pi/2, 3 pi/2) so one bound state
        let v = RadialPotential::square_well(5.0, 1.0).unwrap();
        let ch = Channel::new(Dimension::Three, 0);
        let lo = phase_shift(&v, ch, 1e-5, 1.0, &SolverOptions::default()).unwrap();
        assert!((lo.delta - PI).abs() < 0.02, "{}", lo.delta);
        let hi = phase_shift(&v, ch, 400.0, 1.0, &SolverOptions::default()).unwrap();
        assert!(hi.delta > 0.0 && hi.delta < 0.2);
    }

    #[test]
    fn repulsive_barrier_has_negative_phase() {
        let v = RadialPotential::ring(0.0, 1.0, 3.0, 0.0).unwrap();
        let p = phase_shift(
            &v,
            Channel::new(Dimension::Three, 0),
            1.0,
            1.0,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(p.delta < 0.0 && p.delta > -PI / 2.0);
    }

    #[test]
    fn nonpositive_energy_is_rejected() {
        let v = RadialPotential::square_well(1.0, 1.0).unwrap();
        assert!(phase_shift(
            &v,
            Channel::new(Dimension::Three, 0),
            0.0,
            1.0,
            &SolverOptions::default()
        )
        .is_err());
    }
}
