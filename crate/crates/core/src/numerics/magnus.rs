//! Fourth-order Magnus propagation for u'' = -Q(r) u with step-doubling error
//! control, log-scale renormalisation and zero counting.

use crate::error::{Error, Result};

/// A solution value u, u' carried as mantissas times e^{ln_scale}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaled {
    pub u: f64,
    pub du: f64,
    pub ln_scale: f64,
}

impl Scaled {
    pub fn new(u: f64, du: f64) -> Self {
        Scaled {
            u,
            du,
            ln_scale: 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.u * self.ln_scale.exp()
    }

    pub fn derivative(&self) -> f64 {
        self.du * self.ln_scale.exp()
    }

    /// Same function times e^{-shift}.
    pub fn shifted(&self, shift: f64) -> Self {
        Scaled {
            ln_scale: self.ln_scale - shift,
            ..*self
        }
    }

    fn renormalise(&mut self) {
        let m = self.u.abs().max(self.du.abs());
        if !(1e-100..=1e100).contains(&m) && m > 0.0 {
            let s = m.ln();
            self.u /= m;
            self.du /= m;
            self.ln_scale += s;
        }
    }
}

/// W[a, b] = a b' - a' b as (mantissa, ln scale).
pub fn wronskian(a: &Scaled, b: &Scaled) -> (f64, f64) {
    (a.u * b.du - a.du * b.u, a.ln_scale + b.ln_scale)
}

pub fn wronskian_value(a: &Scaled, b: &Scaled) -> f64 {
    let (m, s) = wronskian(a, b);
    m * s.exp()
}

#[derive(Clone, Copy, Debug)]
pub struct MagnusOptions {
    pub rtol: f64,
    /// bound on h sqrt(Q) in oscillatory regions
    pub max_phase: f64,
    pub max_steps: usize,
}

impl Default for MagnusOptions {
    fn default() -> Self {
        MagnusOptions {
            rtol: 1e-10,
            max_phase: 1.0,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Propagation {
    pub end: Scaled,
    pub samples: Vec<Scaled>,
    pub zeros: u32,
    pub steps: usize,
}

const G1: f64 = 0.5 - 0.288_675_134_594_812_9;
const G2: f64 = 0.5 + 0.288_675_134_594_812_9;
const C3: f64 = 0.144_337_567_297_406_4; // sqrt(3)/12

#[inline]
fn magnus_step<Q: Fn(f64) -> f64>(q: &Q, r: f64, h: f64, y: (f64, f64)) -> (f64, f64) {
    let q1 = q(r + G1 * h);
    let q2 = q(r + G2 * h);
    let qm = 0.5 * (q1 + q2);
    let c = C3 * h * h * (q2 - q1);
    let d = h * h * qm - c * c;
    let (cs, sn) = if d > 1e-6 {
        let w = d.sqrt();
        (w.cos(), w.sin() / w)
    } else if d < -1e-6 {
        let w = (-d).sqrt();
        (w.cosh(), w.sinh() / w)
    } else {
        (1.0 - d / 2.0 + d * d / 24.0, 1.0 - d / 6.0 + d * d / 120.0)
    };
    let (u, du) = y;
    (
        cs * u + sn * (c * u + h * du),
        cs * du + sn * (-h * qm * u - c * du),
    )
}

struct ZeroCounter {
    last_sign: f64,
    zeros: u32,
}

impl ZeroCounter {
    fn observe(&mut self, u: f64) {
        if u == 0.0 {
            return;
        }
        let s = u.signum();
        if self.last_sign != 0.0 && s != self.last_sign {
            self.zeros += 1;
        }
        self.last_sign = s;
    }
}

/// Propagate from `r0` to `r1` (either direction). Steps never straddle a
/// point of `stops`; `outputs` must be ordered along the direction of travel
/// and lie between r0 and r1.
pub fn propagate<Q: Fn(f64) -> f64>(
    q: &Q,
    r0: f64,
    y0: Scaled,
    r1: f64,
    stops: &[f64],
    outputs: &[f64],
    opts: &MagnusOptions,
) -> Result<Propagation> {
    let dir = if r1 >= r0 { 1.0 } else { -1.0 };
    let mut marks: Vec<(f64, Option<usize>)> = stops
        .iter()
        .filter(|&&s| (s - r0) * dir > 0.0 && (r1 - s) * dir > 0.0)
        .map(|&s| (s, None))
        .collect();
    for (i, &o) in outputs.iter().enumerate() {
        if (o - r0) * dir < -1e-14 * r0.abs().max(1.0)
            || (r1 - o) * dir < -1e-14 * r1.abs().max(1.0)
        {
            return Err(Error::Domain(format!(
                "output point {o} outside [{r0}, {r1}]"
            )));
        }
        marks.push((o, Some(i)));
    }
    marks.push((r1, None));
    marks.sort_by(|a, b| (dir * a.0).total_cmp(&(dir * b.0)));

    let mut samples = vec![y0; outputs.len()];
    let mut y = y0;
    y.renormalise();
    let mut r = r0;
    let mut zc = ZeroCounter {
        last_sign: 0.0,
        zeros: 0,
    };
    zc.observe(y.u);
    let mut steps = 0usize;
    let mut h_prev: f64 = 0.0;

    for &(target, out_idx) in &marks {
        while (target - r) * dir > 1e-15 * target.abs().max(1e-300) {
            let remaining = (target - r).abs();
            let mut h = if h_prev > 0.0 {
                h_prev
            } else {
                let q0 = q(r + 0.5 * remaining.min(1e-3) * dir);
                0.1 / q0.abs().sqrt().max(1e-8)
            };
            loop {
                let clipped = h >= remaining;
                if clipped {
                    h = remaining;
                }
                let hs = h * dir;
                let qmid = q(r + 0.5 * hs);
                let kappa = qmid.abs().sqrt();
                if qmid > 0.0 && h * kappa > opts.max_phase {
                    h = 0.99 * opts.max_phase / kappa;
                    continue;
                }
                let full = magnus_step(q, r, hs, (y.u, y.du));
                let half1 = magnus_step(q, r, 0.5 * hs, (y.u, y.du));
                let half2 = magnus_step(q, r + 0.5 * hs, 0.5 * hs, half1);
                let k = kappa.max(1.0 / h.max(1e-300));
                let norm = half2.0.abs() + half2.1.abs() / k;
                let err = ((full.0 - half2.0).abs() + (full.1 - half2.1).abs() / k) / 15.0;
                let scale = opts.rtol * norm.max(1e-300);
                steps += 1;
                if steps > opts.max_steps {
                    return Err(Error::Integration {
                        r,
                        detail: "step limit exceeded".into(),
                    });
                }
                if !(full.0.is_finite() && half2.0.is_finite() && half2.1.is_finite()) {
                    return Err(Error::Integration {
                        r,
                        detail: "non-finite solution".into(),
                    });
                }
                if err <= scale || h < 1e-14 * r.abs().max(1e-10) {
                    zc.observe(half1.0);
                    zc.observe(half2.0);
                    y.u = half2.0;
                    y.du = half2.1;
                    y.renormalise();
                    r = if clipped { target } else { r + hs };
                    let fac = if err > 0.0 {
                        0.9 * (scale / err).powf(0.2)
                    } else {
                        4.0
                    };
                    let grown = h * fac.clamp(0.2, 4.0);
                    if !clipped || h_prev == 0.0 {
                        h_prev = grown;
                    }
                    break;
                }
                let fac = 0.9 * (scale / err).powf(0.2);
                h *= fac.clamp(0.1, 0.9);
            }
        }
        r = target;
        if let Some(i) = out_idx {
            samples[i] = y;
        }
    }
    Ok(Propagation {
        end: y,
        samples,
        zeros: zc.zeros,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillation_and_zero_count() {
        // u'' = -u with u(0) = 0, u'(0) = 1 is sin r: zeros at pi, 2 pi, 3 pi
        let q = |_r: f64| 1.0;
        let p = propagate(
            &q,
            0.0,
            Scaled::new(0.0, 1.0),
            10.0,
            &[],
            &[2.0, 5.0],
            &MagnusOptions::default(),
        )
        .unwrap();
        assert!((p.end.value() - 10f64.sin()).abs() < 1e-9);
        assert!((p.samples[0].value() - 2f64.sin()).abs() < 1e-9);
        assert_eq!(p.zeros, 3);
    }

    #[test]
    fn exponential_growth_is_renormalised() {
        let q = |_r: f64| -400.0;
        let p = propagate(
            &q,
            0.0,
            Scaled::new(1.0, 20.0),
            50.0,
            &[],
            &[],
            &MagnusOptions::default(),
        )
        .unwrap();
        let ln = p.end.u.ln() + p.end.ln_scale;
        assert!((ln - 1000.0).abs() < 1e-8);
    }

    #[test]
    fn airy_like_variable_coefficient() {
        // u'' = r u : Wronskian of two solutions is conserved
        let q = |r: f64| -r;
        let o = MagnusOptions::default();
        let a = propagate(&q, 0.0, Scaled::new(1.0, 0.0), 3.0, &[], &[], &o).unwrap();
        let b = propagate(&q, 0.0, Scaled::new(0.0, 1.0), 3.0, &[], &[], &o).unwrap();
        let w = wronskian_value(&a.end, &b.end);
        // both solutions grow like Bi(3) ~ 14, so W carries the squared growth
        let growth = a.end.value().abs().max(a.end.derivative().abs())
            * b.end.value().abs().max(b.end.derivative().abs());
        assert!((w - 1.0).abs() < 1e-10 * growth.max(1.0) * 100.0, "{w}");
        let back = propagate(&q, 3.0, a.end, 0.0, &[], &[], &o).unwrap();
        assert!(
            (back.end.value() - 1.0).abs() < 1e-7,
            "{}",
            back.end.value()
        );
    }
}
