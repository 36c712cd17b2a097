use serde::{Deserialize, Serialize};

use super::Channel;
use crate::error::{Error, Result};
use crate::numerics::magnus::{propagate, MagnusOptions, Propagation, Scaled};
use crate::potential::RadialPotential;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// relative local error per Magnus step
    pub rtol: f64,
    /// bound on the phase advance per step
    pub max_phase: f64,
    /// long-range tails are cut where |V| drops below this fraction of E
    pub tail_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-10,
            max_phase: 1.0,
            tail_tolerance: 1e-10,
        }
    }
}

impl SolverOptions {
    pub fn magnus(&self) -> MagnusOptions {
        MagnusOptions {
            rtol: self.rtol,
            max_phase: self.max_phase,
            ..MagnusOptions::default()
        }
    }
}

/// One radial equation u'' = -Q u, Q = (E - V) / hbar^2 - c_l / r^2.
#[derive(Clone, Copy, Debug)]
pub struct RadialProblem<'a> {
    pub potential: &'a RadialPotential,
    pub channel: Channel,
    pub energy: f64,
    pub hbar: f64,
}

impl<'a> RadialProblem<'a> {
    pub fn new(
        potential: &'a RadialPotential,
        channel: Channel,
        energy: f64,
        hbar: f64,
    ) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::Domain(format!("hbar must be positive, got {hbar}")));
        }
        if !energy.is_finite() {
            return Err(Error::Domain("energy must be finite".into()));
        }
        Ok(RadialProblem {
            potential,
            channel,
            energy,
            hbar,
        })
    }

    #[inline]
    pub fn q(&self, r: f64) -> f64 {
        (self.energy - self.potential.value(r)) / (self.hbar * self.hbar)
            - self.channel.centrifugal() / (r * r)
    }

    /// Frobenius data r^s (1 + c r^2) at a starting radius small enough for
    /// the truncated series to be exact to working precision.
    pub fn regular_start(&self) -> (f64, Scaled) {
        let s = self.channel.regular_exponent();
        let q0 = (self.potential.value(0.0) - self.energy) / (self.hbar * self.hbar);
        let mut r0 = if q0 != 0.0 {
            (1e-6 * (4.0 * s + 2.0) / q0.abs()).sqrt()
        } else {
            1e-3
        };
        if let Some(&b) = self.potential.breakpoints().iter().find(|&&b| b > 0.0) {
            r0 = r0.min(0.25 * b);
        }
        r0 = r0.min(1e-2);
        let c = q0 / (4.0 * s + 2.0);
        let u = 1.0 + c * r0 * r0;
        let du = (s + c * (s + 2.0) * r0 * r0) / r0;
        (
            r0,
            Scaled {
                u,
                du,
                ln_scale: s * r0.ln(),
            },
        )
    }

    /// Integrate between r0 and r1 with outputs in any order.
    pub fn propagate(
        &self,
        r0: f64,
        y0: Scaled,
        r1: f64,
        outputs: &[f64],
        opts: &SolverOptions,
    ) -> Result<Propagation> {
        let dir = if r1 >= r0 { 1.0 } else { -1.0 };
        let mut order: Vec<usize> = (0..outputs.len()).collect();
        order.sort_by(|&a, &b| (dir * outputs[a]).total_cmp(&(dir * outputs[b])));
        let sorted: Vec<f64> = order.iter().map(|&i| outputs[i]).collect();
        let q = |r: f64| self.q(r);
        let p = propagate(
            &q,
            r0,
            y0,
            r1,
            self.potential.breakpoints(),
            &sorted,
            &opts.magnus(),
        )?;
        let mut samples = vec![p.end; outputs.len()];
        for (k, &i) in order.iter().enumerate() {
            samples[i] = p.samples[k];
        }
        Ok(Propagation { samples, ..p })
    }

    /// Regular solution from the origin to `r_end`.
    pub fn regular(
        &self,
        r_end: f64,
        outputs: &[f64],
        opts: &SolverOptions,
    ) -> Result<Propagation> {
        let (r0, y0) = self.regular_start();
        if r_end < r0 {
            return Err(Error::Domain(format!(
                "integration end {r_end} below start {r0}"
            )));
        }
        let clipped: Vec<f64> = outputs.iter().map(|&o| o.max(r0)).collect();
        let mut p = self.propagate(r0, y0, r_end, &clipped, opts)?;
        for (i, &o) in outputs.iter().enumerate() {
            if o < r0 {
                p.samples[i] = self.series_value(o);
            }
        }
        Ok(p)
    }

    /// Frobenius series at r below the integration start.
    fn series_value(&self, r: f64) -> Scaled {
        let s = self.channel.regular_exponent();
        let q0 = (self.potential.value(0.0) - self.energy) / (self.hbar * self.hbar);
        let c = q0 / (4.0 * s + 2.0);
        Scaled {
            u: 1.0 + c * r * r,
            du: (s + c * (s + 2.0) * r * r) / r,
            ln_scale: s * r.ln(),
        }
    }

    /// WKB data of the solution decaying beyond `r_far` (requires Q < 0 there).
    pub fn decaying_start(&self, r_far: f64) -> Result<Scaled> {
        let q = self.q(r_far);
        if q >= 0.0 {
            return Err(Error::Precondition(format!(
                "decaying solution requested at r = {r_far} where the problem is oscillatory"
            )));
        }
        let kappa = (-q).sqrt();
        let h = 1e-5 * r_far.max(1.0);
        let dk = ((-self.q(r_far + h)).max(0.0).sqrt() - (-self.q(r_far - h)).max(0.0).sqrt())
            / (2.0 * h);
        Ok(Scaled::new(1.0, -kappa - dk / (2.0 * kappa)))
    }

    /// Radius beyond which V is treated as zero.
    pub fn matching_radius(&self, opts: &SolverOptions) -> Result<f64> {
        let v = self.potential;
        if v.asymptote() != 0.0 {
            return Err(Error::Precondition(format!(
                "{} does not vanish at infinity",
                v.name()
            )));
        }
        let base = v
            .support_radius()
            .max(v.breakpoints().last().copied().unwrap_or(0.0));
        let mut r = if base > 0.0 {
            base * (1.0 + 1e-9) + 1e-9
        } else {
            1.0
        };
        if let Some(p) = v.decay_exponent() {
            if p <= 1.0 {
                return Err(Error::Tail(format!(
                    "{}: decay exponent {p} <= 1 is long-range; no short-range scattering phase",
                    v.name()
                )));
            }
            let c = v.tail_constant();
            let target = opts.tail_tolerance * self.energy.abs().max(1e-12);
            r = r.max((c / target).powf(1.0 / p));
            if r > 1e6 {
                return Err(Error::Tail(format!(
                    "{}: tail cut radius {r:.3e} too large",
                    v.name()
                )));
            }
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Dimension;

    #[test]
    fn free_regular_solution_is_riccati_bessel() {
        let zero = RadialPotential::zero();
        for ell in [0u32, 1, 3] {
            let ch = Channel::new(Dimension::Three, ell);
            let p = RadialProblem::new(&zero, ch, 4.0, 1.0).unwrap();
            let out = p.regular(3.0, &[], &SolverOptions::default()).unwrap();
            let k: f64 = 2.0;
            // u ~ r^{l+1} near 0 while f(kr) ~ (kr)^{l+1}/(2l+1)!!, so compare shapes
            let w = ch.free_wave(k * 3.0);
            let ratio_u = out.end.du / out.end.u;
            let ratio_f = k * w.df / w.f;
            assert!(
                (ratio_u - ratio_f).abs() < 1e-8 * ratio_f.abs().max(1.0),
                "l={ell}"
            );
        }
    }

    #[test]
    fn two_dimensional_s_wave_start() {
        let zero = RadialPotential::zero();
        let ch = Channel::new(Dimension::Two, 0);
        let p = RadialProblem::new(&zero, ch, 1.0, 1.0).unwrap();
        let out = p.regular(2.5, &[], &SolverOptions::default()).unwrap();
        let w = ch.free_wave(2.5);
        // compare Pruefer angles; 2.5 sits near a node where log derivatives are ill conditioned
        let gap = (out.end.u.atan2(out.end.du) - w.f.atan2(w.df)).abs();
        assert!(gap < 1e-8, "{gap:e}");
    }

    #[test]
    fn coulomb_like_tail_is_rejected() {
        let v = RadialPotential::from_pieces(
            "coulomb",
            vec![crate::potential::PieceSpec::PowerTail {
                coefficient: 1.0,
                exponent: 1.0,
            }],
        )
        .unwrap();
        let p = RadialProblem::new(&v, Channel::new(Dimension::Three, 0), 1.0, 1.0).unwrap();
        assert!(matches!(
            p.matching_radius(&SolverOptions::default()),
            Err(Error::Tail(_))
        ));
    }
}
