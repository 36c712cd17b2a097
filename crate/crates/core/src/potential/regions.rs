use serde::{Deserialize, Serialize};

use super::RadialPotential;
use crate::error::{Error, Result};
use crate::numerics::roots::brent;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    /// `f64::INFINITY` for the unbounded component
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, r: f64) -> bool {
        r >= self.lo && r <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_finite()
    }
}

/// Classically accessible set {V <= E} split into its bounded interior
/// components and the unbounded exterior component.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionDecomposition {
    pub energy: f64,
    pub accessible: Vec<Interval>,
    pub interior: Vec<Interval>,
    pub exterior: Option<Interval>,
    pub turning_points: Vec<f64>,
}

impl RegionDecomposition {
    /// Supremum of the interior components, 0 when there are none.
    pub fn interior_sup(&self) -> f64 {
        self.interior.iter().map(|i| i.hi).fold(0.0, f64::max)
    }

    /// Start of the exterior component.
    pub fn exterior_start(&self) -> Option<f64> {
        self.exterior.map(|i| i.lo)
    }

    /// The classically forbidden gap separating the last interior component
    /// from the exterior, when both exist.
    pub fn barrier(&self) -> Option<(f64, f64)> {
        let ext = self.exterior?;
        let inner = self
            .interior
            .iter()
            .filter(|i| i.hi <= ext.lo)
            .map(|i| i.hi)
            .fold(f64::NAN, f64::max);
        if inner.is_nan() {
            None
        } else {
            Some((inner, ext.lo))
        }
    }
}

pub(crate) fn scan_radius(v: &RadialPotential, energy: f64) -> f64 {
    let mut r = v.support_radius() * 1.25 + 1.0;
    if let Some(p) = v.decay_exponent() {
        if energy > 0.0 {
            r = r.max((10.0 * v.tail_constant() / energy).powf(1.0 / p));
        }
    }
    r
}

pub(crate) fn sample_grid(v: &RadialPotential, r_max: f64, spacing: f64) -> Vec<f64> {
    let mut cuts = vec![0.0];
    cuts.extend(
        v.breakpoints()
            .iter()
            .copied()
            .filter(|&b| b > 0.0 && b < r_max),
    );
    cuts.push(r_max);
    let mut pts = Vec::new();
    for w in cuts.windows(2) {
        let n = ((w[1] - w[0]) / spacing).ceil().max(8.0) as usize;
        let eps = 1e-13 * w[1].max(1.0);
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let mut r = w[0] + t * (w[1] - w[0]);
            if i == 0 && w[0] > 0.0 {
                r += eps;
            }
            if i == n && w[1] < r_max {
                r -= eps;
            }
            pts.push(r);
        }
    }
    pts
}

/// Decompose {r : V(r) <= E} into interior and exterior components.
pub fn classically_accessible(v: &RadialPotential, energy: f64) -> Result<RegionDecomposition> {
    if !energy.is_finite() {
        return Err(Error::Domain("energy must be finite".into()));
    }
    let r_max = scan_radius(v, energy);
    let pts = sample_grid(v, r_max, 2e-3);
    let g = |r: f64| v.value(r) - energy;
    let vals: Vec<f64> = pts.iter().map(|&r| g(r)).collect();

    let mut turning = Vec::new();
    let mut accessible = Vec::new();
    let mut inside = vals[0] <= 0.0;
    let mut start = 0.0;
    for i in 1..pts.len() {
        let now = vals[i] <= 0.0;
        if now == inside {
            continue;
        }
        let (a, b) = (pts[i - 1], pts[i]);
        let jump = v.breakpoints().iter().any(|&bp| bp > a && bp < b);
        let root = if jump && (b - a) < 1e-11 {
            v.breakpoints()
                .iter()
                .copied()
                .find(|&bp| bp > a && bp < b)
                .unwrap_or(0.5 * (a + b))
        } else {
            brent(|r| Ok(g(r)), a, b, 1e-13).map_err(|e| Error::RootBracket {
                piece: format!("{} on [{a:.6}, {b:.6}]", v.name()),
                detail: e.to_string(),
            })?
        };
        turning.push(root);
        if inside {
            accessible.push(Interval {
                lo: start,
                hi: root,
            });
        } else {
            start = root;
        }
        inside = now;
    }
    let tail_accessible = energy > v.asymptote();
    if inside {
        let hi = if tail_accessible {
            f64::INFINITY
        } else {
            r_max
        };
        accessible.push(Interval { lo: start, hi });
    }
    // tangential contacts: local minima of V - E that graze zero without a sign change
    for i in 1..vals.len().saturating_sub(1) {
        if vals[i] > 0.0 && vals[i] < 1e-9 && vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
            log::warn!(
                "{}: V - E grazes zero near r = {:.6} at E = {energy}",
                v.name(),
                pts[i]
            );
        }
    }
    let exterior = accessible.iter().copied().find(|i| !i.is_bounded());
    let interior = accessible
        .iter()
        .copied()
        .filter(|i| i.is_bounded())
        .collect();
    Ok(RegionDecomposition {
        energy,
        accessible,
        interior,
        exterior,
        turning_points: turning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PieceSpec;

    #[test]
    fn sharp_ring_regions() {
        let v = RadialPotential::ring(1.0, 2.0, 2.0, 0.0).unwrap();
        let d = classically_accessible(&v, 1.0).unwrap();
        assert_eq!(d.interior.len(), 1);
        assert!(d.interior[0].lo == 0.0 && (d.interior[0].hi - 1.0).abs() < 1e-10);
        let ext = d.exterior.unwrap();
        assert!((ext.lo - 2.0).abs() < 1e-10 && ext.hi.is_infinite());
    }

    #[test]
    fn mollified_ring_turning_points_at_half_height() {
        let v = RadialPotential::ring(1.0, 2.0, 2.0, 0.05).unwrap();
        let d = classically_accessible(&v, 1.0).unwrap();
        assert!((d.interior[0].hi - 1.0).abs() < 1e-10);
        assert!((d.exterior.unwrap().lo - 2.0).abs() < 1e-10);
        assert_eq!(
            d.barrier().map(|b| (b.0 * 1e6).round() as i64),
            Some(1_000_000)
        );
    }

    #[test]
    fn above_barrier_is_all_exterior() {
        let v = RadialPotential::ring(1.0, 2.0, 2.0, 0.05).unwrap();
        let d = classically_accessible(&v, 2.5).unwrap();
        assert!(d.interior.is_empty());
        assert_eq!(d.exterior.unwrap().lo, 0.0);
    }

    #[test]
    fn attractive_gaussian_has_no_interior() {
        let v = RadialPotential::from_pieces(
            "g",
            vec![PieceSpec::Gaussian {
                amplitude: -1.0,
                center: 0.0,
                width: 1.0,
            }],
        )
        .unwrap();
        let d = classically_accessible(&v, 0.3).unwrap();
        assert!(d.interior.is_empty() && d.exterior.is_some());
    }
}
