use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{classically_accessible, smooth_step, Dimension, RadialPotential};
use crate::error::{Error, Result};
use crate::numerics::roots::golden_min;

/// Constant that V^int takes beyond the cut.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapLevel {
    /// infimum of V over [omega1, omega2]
    BarrierFloor,
    Value(f64),
}

pub(crate) fn default_cap() -> CapLevel {
    CapLevel::BarrierFloor
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleOptions {
    pub omega1: f64,
    pub omega2: f64,
    pub e0: f64,
    pub e_plus: f64,
    pub e_plus_prime: f64,
    pub blend_width: f64,
    pub cap: CapLevel,
}

impl TripleOptions {
    /// Cuts at the thirds of the barrier [a, b].
    pub fn thirds(a: f64, b: f64, e0: f64, e_plus: f64, e_plus_prime: f64) -> Self {
        TripleOptions {
            omega1: a + (b - a) / 3.0,
            omega2: a + 2.0 * (b - a) / 3.0,
            e0,
            e_plus,
            e_plus_prime,
            blend_width: 0.05,
            cap: CapLevel::BarrierFloor,
        }
    }
}

/// The potential V together with its interior truncation V^int (equal to V
/// inside omega2, constant far out) and exterior completion V^ext = V + V0,
/// where V0 >= 0 fills the well inside omega1.
#[derive(Clone, Debug)]
pub struct PotentialTriple {
    pub dimension: Dimension,
    pub options: TripleOptions,
    v: Arc<RadialPotential>,
    v_int: Arc<RadialPotential>,
    v_ext: Arc<RadialPotential>,
    v_int_v0: Arc<RadialPotential>,
    fill_level: f64,
    cap_level: f64,
    barrier_floor: f64,
    v0_support: f64,
}

fn infimum(v: &RadialPotential, a: f64, b: f64) -> (f64, f64) {
    let n = 10_000;
    let mut best = (a, v.value(a));
    for i in 0..=n {
        let r = a + (b - a) * i as f64 / n as f64;
        let x = v.value(r);
        if x < best.1 {
            best = (r, x);
        }
    }
    let h = (b - a) / n as f64;
    let (r, x) = golden_min(
        |r| v.value(r),
        (best.0 - h).max(a),
        (best.0 + h).min(b),
        1e-12,
    );
    if x < best.1 {
        (r, x)
    } else {
        best
    }
}

pub fn build_triple(
    v: Arc<RadialPotential>,
    dimension: Dimension,
    opts: TripleOptions,
) -> Result<PotentialTriple> {
    let TripleOptions {
        omega1,
        omega2,
        e0,
        e_plus,
        e_plus_prime,
        blend_width: bw,
        cap,
    } = opts;
    if !(omega1 > 0.0 && omega1 < omega2 && omega2.is_finite()) {
        return Err(Error::Precondition(format!(
            "need 0 < omega1 < omega2, got {omega1}, {omega2}"
        )));
    }
    if !(e0 < e_plus && e_plus < e_plus_prime) {
        return Err(Error::Precondition(format!(
            "need E0 < E+ < E+' , got {e0}, {e_plus}, {e_plus_prime}"
        )));
    }
    if !(bw > 0.0 && bw < omega1) {
        return Err(Error::Precondition(format!(
            "blend width {bw} must lie in (0, omega1)"
        )));
    }
    if !v.is_compactly_supported() {
        log::warn!(
            "{}: long-range tail; triple constructed on the truncated profile",
            v.name()
        );
    }
    let (r_inf, barrier_floor) = infimum(&v, omega1, omega2);
    if barrier_floor <= e_plus {
        return Err(Error::Precondition(format!(
            "[omega1, omega2] = [{omega1}, {omega2}] is not classically forbidden at E+ = {e_plus}: \
             inf V = {barrier_floor:.6} at r = {r_inf:.6}"
        )));
    }
    for (lo, hi) in [(omega1 - bw, omega1), (omega2, omega2 + bw)] {
        let (r, m) = infimum(&v, lo, hi);
        if m < e_plus_prime {
            return Err(Error::Precondition(format!(
                "blend region [{lo}, {hi}] dips below E+' = {e_plus_prime}: V = {m:.6} at r = {r:.6}"
            )));
        }
    }
    let regions = classically_accessible(&v, e0)?;
    if regions.interior_sup() >= omega1 - bw {
        return Err(Error::Precondition(format!(
            "interior accessible region reaches {:.6}, not inside omega1 - blend = {:.6}",
            regions.interior_sup(),
            omega1 - bw
        )));
    }
    if let Some(ext) = regions.exterior_start() {
        if ext <= omega2 + bw {
            return Err(Error::Precondition(format!(
                "exterior accessible region starts at {ext:.6}, inside omega2 + blend = {:.6}",
                omega2 + bw
            )));
        }
    }
    let fill_level = e_plus_prime.max(barrier_floor);
    let cap_level = match cap {
        CapLevel::BarrierFloor => barrier_floor,
        CapLevel::Value(x) => {
            if x < e_plus_prime {
                return Err(Error::Precondition(format!(
                    "cap level {x} below E+' = {e_plus_prime}"
                )));
            }
            x
        }
    };
    let v_ext = Arc::new(RadialPotential::exterior_fill(
        v.clone(),
        fill_level,
        omega1 - bw,
        omega1,
    ));
    let v_int = Arc::new(RadialPotential::interior_cap(
        v.clone(),
        omega2,
        bw,
        cap_level,
    ));
    // V0 vanishes beyond omega1 < omega2, so V^int + V0 is the cap of V^ext
    let v_int_v0 = Arc::new(RadialPotential::interior_cap(
        v_ext.clone(),
        omega2,
        bw,
        cap_level,
    ));

    // support of V0 ends at the first breakpoint past the last positive sample
    let n = 20_000;
    let mut last = 0.0;
    for i in 0..=n {
        let r = omega1 * i as f64 / n as f64;
        if v_ext.value(r) - v.value(r) > 0.0 {
            last = r;
        }
    }
    let v0_support = v_ext
        .breakpoints()
        .iter()
        .copied()
        .find(|&b| b >= last - 1e-12)
        .unwrap_or(omega1)
        .min(omega1);

    let t = PotentialTriple {
        dimension,
        options: opts,
        v,
        v_int,
        v_ext,
        v_int_v0,
        fill_level,
        cap_level,
        barrier_floor,
        v0_support,
    };
    t.verify_invariants()?;
    Ok(t)
}

impl PotentialTriple {
    pub fn v(&self) -> &Arc<RadialPotential> {
        &self.v
    }

    pub fn v_int(&self) -> &Arc<RadialPotential> {
        &self.v_int
    }

    pub fn v_ext(&self) -> &Arc<RadialPotential> {
        &self.v_ext
    }

    /// V^int + V0.
    pub fn v_int_plus_v0(&self) -> &Arc<RadialPotential> {
        &self.v_int_v0
    }

    /// V0 = V^ext - V, computed without cancellation.
    pub fn v0(&self, r: f64) -> f64 {
        let o = &self.options;
        if r >= o.omega1 {
            return 0.0;
        }
        let chi = 1.0 - smooth_step((r - (o.omega1 - o.blend_width)) / o.blend_width);
        chi * (self.fill_level - self.v.value(r)).max(0.0)
    }

    /// Right end of supp V0.
    pub fn v0_support(&self) -> f64 {
        self.v0_support
    }

    pub fn fill_level(&self) -> f64 {
        self.fill_level
    }

    pub fn cap_level(&self) -> f64 {
        self.cap_level
    }

    pub fn barrier_floor(&self) -> f64 {
        self.barrier_floor
    }

    /// Breakpoints of V^ext inside supp V0.
    pub fn v0_breakpoints(&self) -> Vec<f64> {
        self.v_ext
            .breakpoints()
            .iter()
            .copied()
            .filter(|&b| b < self.v0_support)
            .collect()
    }

    fn verify_invariants(&self) -> Result<()> {
        let o = &self.options;
        let r_max = (self.v.support_radius().max(o.omega2 + o.blend_width)) * 1.2;
        let n = 10_000;
        let fail = |what: &str, r: f64| {
            Err(Error::Model(format!(
                "triple invariant violated: {what} at r = {r:.6}"
            )))
        };
        for i in 0..=n {
            let r = r_max * i as f64 / n as f64;
            let (v, vi, ve, v0) = (
                self.v.value(r),
                self.v_int.value(r),
                self.v_ext.value(r),
                self.v0(r),
            );
            if v0 < 0.0 {
                return fail("V0 < 0", r);
            }
            if (ve - v - v0).abs() > 1e-12 * (1.0 + v.abs()) {
                return fail("V^ext != V + V0", r);
            }
            if r >= o.omega1 && ve != v {
                return fail("V^ext != V outside omega1", r);
            }
            if r < o.omega1 && ve < o.e_plus_prime - 1e-12 {
                return fail("V^ext < E+' inside omega1", r);
            }
            if r < o.omega2 && vi != v {
                return fail("V^int != V inside omega2", r);
            }
            if r >= o.omega2 && vi < o.e_plus_prime - 1e-12 {
                return fail("V^int < E+' outside omega2", r);
            }
            if vi + v0 < o.e_plus - 1e-12 && r >= o.omega1 {
                return fail("V^int + V0 < E+ outside omega1", r);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring() -> Arc<RadialPotential> {
        Arc::new(RadialPotential::ring(1.0, 2.0, 2.0, 0.05).unwrap())
    }

    #[test]
    fn default_ring_triple() {
        let t = build_triple(
            ring(),
            Dimension::Three,
            TripleOptions::thirds(1.0, 2.0, 1.0, 1.5, 1.8),
        )
        .unwrap();
        assert!((t.options.omega1 - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.fill_level(), 2.0);
        assert_eq!(t.cap_level(), 2.0);
        assert!((t.v0_support() - 1.025).abs() < 1e-12);
        assert_eq!(t.v_ext().value(0.5), 2.0);
        assert_eq!(t.v0(0.5), 2.0);
        assert_eq!(t.v0(1.2), 0.0);
        assert_eq!(t.v_int().value(1.3), 2.0);
        assert_eq!(t.v_int().value(5.0), 2.0);
        assert_eq!(t.v_int().asymptote(), 2.0);
    }

    #[test]
    fn omega2_outside_barrier_is_rejected() {
        let mut o = TripleOptions::thirds(1.0, 2.0, 1.0, 1.5, 1.8);
        o.omega2 = 2.5;
        match build_triple(ring(), Dimension::Three, o) {
            Err(Error::Precondition(m)) => assert!(m.contains("inf V = 0.0")),
            other => panic!("expected precondition error, got {other:?}"),
        }
    }

    #[test]
    fn swapped_cuts_are_rejected() {
        let mut o = TripleOptions::thirds(1.0, 2.0, 1.0, 1.5, 1.8);
        std::mem::swap(&mut o.omega1, &mut o.omega2);
        assert!(matches!(
            build_triple(ring(), Dimension::Three, o),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn explicit_cap_level_differs_beyond_omega2() {
        let mut o = TripleOptions::thirds(1.0, 2.0, 1.0, 1.5, 1.8);
        o.cap = CapLevel::Value(1.8);
        let t = build_triple(ring(), Dimension::Three, o).unwrap();
        assert_eq!(t.v_int().value(1.9), 1.8);
        assert_eq!(t.v_int().value(1.5), 2.0);
    }
}
