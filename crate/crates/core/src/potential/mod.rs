//! Radial potentials: analytic pieces, derived interior and exterior variants,
//! region decomposition, Agmon distances and the classical non-trapping test.

mod agmon;
mod catalogue;
mod classical;
mod regions;
mod triple;

pub use agmon::agmon_distance;
pub use catalogue::{Catalogue, ProfileSpec, TripleSpec};
pub use classical::{
    decay_check, non_trapping_check, DecayReport, NonTrappingReport, TrajectoryRecord,
};
pub use regions::{classically_accessible, Interval, RegionDecomposition};
pub use triple::{build_triple, CapLevel, PotentialTriple, TripleOptions};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension of the underlying Schrodinger operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dimension {
    Two,
    Three,
}

impl TryFrom<u8> for Dimension {
    type Error = String;
    fn try_from(d: u8) -> std::result::Result<Self, String> {
        match d {
            2 => Ok(Dimension::Two),
            3 => Ok(Dimension::Three),
            _ => Err(format!("dimension must be 2 or 3, got {d}")),
        }
    }
}

impl From<Dimension> for u8 {
    fn from(d: Dimension) -> u8 {
        match d {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }
}

impl Dimension {
    pub fn as_f64(self) -> f64 {
        u8::from(self) as f64
    }
}

/// C-infinity transition from 0 (x <= 0) to 1 (x >= 1).
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

pub fn smooth_step_derivative(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        let da = a / (x * x);
        let db = -b / ((1.0 - x) * (1.0 - x));
        (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
    }
}

/// Default mollifier width for step pieces.
pub const DEFAULT_BLEND: f64 = 0.05;

fn default_blend() -> f64 {
    DEFAULT_BLEND
}

/// One analytic piece of a profile. Pieces add.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum PieceSpec {
    /// `height` on [left, right], mollified over `blend` centred on each edge
    /// (sharp when `blend` is zero).
    Step {
        left: f64,
        right: f64,
        height: f64,
        #[serde(default = "default_blend")]
        blend: f64,
    },
    /// amplitude * exp(-(r - center)^2 / width)
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// sum c_k r^k on [left, right], zero elsewhere
    Polynomial {
        coefficients: Vec<f64>,
        left: f64,
        right: f64,
    },
    /// coefficient * (1 + r)^(-exponent)
    #[serde(rename = "powertail")]
    PowerTail { coefficient: f64, exponent: f64 },
}

const GAUSS_CUT: f64 = 41.45;

impl PieceSpec {
    pub fn label(&self) -> String {
        match self {
            PieceSpec::Step { left, right, .. } => format!("step[{left}, {right}]"),
            PieceSpec::Gaussian { center, .. } => format!("gaussian@{center}"),
            PieceSpec::Polynomial { left, right, .. } => format!("polynomial[{left}, {right}]"),
            PieceSpec::PowerTail { exponent, .. } => format!("powertail^{exponent}"),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Model(format!("{}: {m}", self.label())));
        match *self {
            PieceSpec::Step {
                left,
                right,
                height,
                blend,
            } => {
                if !(left.is_finite() && right.is_finite() && height.is_finite()) {
                    return bad("non-finite parameter");
                }
                if left < 0.0 || right <= left {
                    return bad("need 0 <= left < right");
                }
                if !(blend >= 0.0) || (blend > 0.0 && blend > right - left) {
                    return bad("blend must lie in [0, right - left]");
                }
            }
            PieceSpec::Gaussian {
                width,
                amplitude,
                center,
            } => {
                if !(width > 0.0) || !amplitude.is_finite() || !center.is_finite() {
                    return bad("width must be positive");
                }
            }
            PieceSpec::Polynomial {
                ref coefficients,
                left,
                right,
            } => {
                if left < 0.0 || right <= left || coefficients.iter().any(|c| !c.is_finite()) {
                    return bad("need 0 <= left < right and finite coefficients");
                }
            }
            PieceSpec::PowerTail {
                exponent,
                coefficient,
            } => {
                if !(exponent > 0.0) || !coefficient.is_finite() {
                    return bad("exponent must be positive");
                }
            }
        }
        Ok(())
    }

    fn eval(&self, r: f64) -> (f64, f64) {
        match *self {
            PieceSpec::Step {
                left,
                right,
                height,
                blend,
            } => {
                if blend == 0.0 {
                    let v = if r >= left && r < right { height } else { 0.0 };
                    return (v, 0.0);
                }
                let x1 = (r - left + 0.5 * blend) / blend;
                let x2 = (r - right + 0.5 * blend) / blend;
                let (s1, ds1) = if left == 0.0 {
                    (1.0, 0.0)
                } else {
                    (smooth_step(x1), smooth_step_derivative(x1))
                };
                let s2 = smooth_step(x2);
                let v = height * s1 * (1.0 - s2);
                let dv = height * (ds1 * (1.0 - s2) - s1 * smooth_step_derivative(x2)) / blend;
                (v, dv)
            }
            PieceSpec::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let d = r - center;
                let v = amplitude * (-d * d / width).exp();
                (v, -2.0 * d / width * v)
            }
            PieceSpec::Polynomial {
                ref coefficients,
                left,
                right,
            } => {
                if r < left || r >= right {
                    return (0.0, 0.0);
                }
                let mut v = 0.0;
                let mut dv = 0.0;
                for &c in coefficients.iter().rev() {
                    dv = dv * r + v;
                    v = v * r + c;
                }
                (v, dv)
            }
            PieceSpec::PowerTail {
                coefficient,
                exponent,
            } => {
                let v = coefficient * (1.0 + r).powf(-exponent);
                (v, -exponent * v / (1.0 + r))
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            PieceSpec::Step {
                left, right, blend, ..
            } => {
                if blend == 0.0 {
                    vec![left, right]
                } else {
                    vec![
                        left - 0.5 * blend,
                        left + 0.5 * blend,
                        right - 0.5 * blend,
                        right + 0.5 * blend,
                    ]
                }
            }
            PieceSpec::Polynomial { left, right, .. } => vec![left, right],
            _ => Vec::new(),
        }
    }

    fn support(&self) -> Option<f64> {
        match *self {
            PieceSpec::Step { right, blend, .. } => Some(right + 0.5 * blend),
            PieceSpec::Gaussian { center, width, .. } => {
                Some((center + (GAUSS_CUT * width).sqrt()).max(0.0))
            }
            PieceSpec::Polynomial { right, .. } => Some(right),
            PieceSpec::PowerTail { .. } => None,
        }
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Pieces(Vec<PieceSpec>),
    /// base + chi(r) (level - base)_+, chi = 1 below cut_lo, 0 above cut_hi
    ExteriorFill {
        base: Arc<RadialPotential>,
        level: f64,
        cut_lo: f64,
        cut_hi: f64,
    },
    /// base below start, blended to the constant level over [start, start + width]
    InteriorCap {
        base: Arc<RadialPotential>,
        start: f64,
        width: f64,
        level: f64,
    },
}

/// Radial potential V(|x|) assembled from analytic pieces or derived from
/// another potential.
#[derive(Clone, Debug)]
pub struct RadialPotential {
    name: String,
    shape: Shape,
    breakpoints: Vec<f64>,
    support: f64,
    tail_constant: f64,
    decay_exponent: Option<f64>,
    asymptote: f64,
}

impl RadialPotential {
    pub fn from_pieces(name: impl Into<String>, pieces: Vec<PieceSpec>) -> Result<Self> {
        for p in &pieces {
            p.validate()?;
        }
        let mut breakpoints: Vec<f64> = pieces
            .iter()
            .flat_map(|p| p.breakpoints())
            .filter(|&b| b > 0.0)
            .collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let support = pieces
            .iter()
            .filter_map(|p| p.support())
            .fold(0.0, f64::max);
        let mut tail_constant = 0.0;
        let mut decay: Option<f64> = None;
        for p in &pieces {
            if let PieceSpec::PowerTail {
                coefficient,
                exponent,
            } = *p
            {
                tail_constant += coefficient.abs();
                decay = Some(decay.map_or(exponent, |d: f64| d.min(exponent)));
            }
        }
        Ok(RadialPotential {
            name: name.into(),
            shape: Shape::Pieces(pieces),
            breakpoints,
            support,
            tail_constant,
            decay_exponent: decay,
            asymptote: 0.0,
        })
    }

    /// The ring barrier B on [a, b] with mollified edges.
    pub fn ring(a: f64, b: f64, height: f64, blend: f64) -> Result<Self> {
        Self::from_pieces(
            "ring",
            vec![PieceSpec::Step {
                left: a,
                right: b,
                height,
                blend,
            }],
        )
    }

    /// Attractive square well -depth on [0, a] with sharp edge.
    pub fn square_well(depth: f64, a: f64) -> Result<Self> {
        Self::from_pieces(
            "square-well",
            vec![PieceSpec::Step {
                left: 0.0,
                right: a,
                height: -depth,
                blend: 0.0,
            }],
        )
    }

    pub fn zero() -> Self {
        Self::from_pieces("zero", Vec::new()).expect("empty profile is valid")
    }

    pub(crate) fn exterior_fill(
        base: Arc<RadialPotential>,
        level: f64,
        cut_lo: f64,
        cut_hi: f64,
    ) -> Self {
        let mut breakpoints = base.breakpoints.clone();
        breakpoints.extend([cut_lo, cut_hi]);
        breakpoints.retain(|&b| b > 0.0);
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        RadialPotential {
            name: format!("{}-ext", base.name),
            support: base.support.max(cut_hi),
            tail_constant: base.tail_constant,
            decay_exponent: base.decay_exponent,
            asymptote: base.asymptote,
            breakpoints,
            shape: Shape::ExteriorFill {
                base,
                level,
                cut_lo,
                cut_hi,
            },
        }
    }

    pub(crate) fn interior_cap(
        base: Arc<RadialPotential>,
        start: f64,
        width: f64,
        level: f64,
    ) -> Self {
        let mut breakpoints: Vec<f64> = base
            .breakpoints
            .iter()
            .copied()
            .filter(|&b| b < start)
            .collect();
        breakpoints.extend([start, start + width]);
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        RadialPotential {
            name: format!("{}-int", base.name),
            support: start + width,
            tail_constant: 0.0,
            decay_exponent: None,
            asymptote: level,
            breakpoints,
            shape: Shape::InteriorCap {
                base,
                start,
                width,
                level,
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, r: f64) -> f64 {
        self.value_and_derivative(r).0
    }

    pub fn value_and_derivative(&self, r: f64) -> (f64, f64) {
        match &self.shape {
            Shape::Pieces(ps) => ps.iter().fold((0.0, 0.0), |acc, p| {
                let (v, d) = p.eval(r);
                (acc.0 + v, acc.1 + d)
            }),
            Shape::ExteriorFill {
                base,
                level,
                cut_lo,
                cut_hi,
            } => {
                let (v, dv) = base.value_and_derivative(r);
                if r >= *cut_hi {
                    return (v, dv);
                }
                let w = cut_hi - cut_lo;
                let x = (r - cut_lo) / w;
                let chi = 1.0 - smooth_step(x);
                let dchi = -smooth_step_derivative(x) / w;
                let gap = level - v;
                if gap > 0.0 {
                    (v + chi * gap, dv + dchi * gap - chi * dv)
                } else {
                    (v, dv)
                }
            }
            Shape::InteriorCap {
                base,
                start,
                width,
                level,
            } => {
                if r < *start {
                    return base.value_and_derivative(r);
                }
                if r >= start + width {
                    return (*level, 0.0);
                }
                let (v, dv) = base.value_and_derivative(r);
                let x = (r - start) / width;
                let s = smooth_step(x);
                let ds = smooth_step_derivative(x) / width;
                ((1.0 - s) * v + s * level, (1.0 - s) * dv + ds * (level - v))
            }
        }
    }

    /// Points where some piece is not smooth (or changes formula), ascending.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Radius beyond which V equals its asymptotic value up to the declared tail.
    pub fn support_radius(&self) -> f64 {
        self.support
    }

    /// Constant C in |V(r)| <= C (1 + r)^(-rho) beyond the support.
    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    /// Slowest power-law decay exponent of the tail, `None` when compactly supported.
    pub fn decay_exponent(&self) -> Option<f64> {
        self.decay_exponent
    }

    /// Value of V at infinity.
    pub fn asymptote(&self) -> f64 {
        self.asymptote
    }

    pub fn is_compactly_supported(&self) -> bool {
        self.decay_exponent.is_none() && self.asymptote == 0.0
    }

    /// Largest |V| on a sampling of [0, r_max].
    pub fn sup_abs(&self, r_max: f64) -> f64 {
        let n = 4000;
        let mut m: f64 = 0.0;
        for i in 0..=n {
            m = m.max(self.value(r_max * i as f64 / n as f64).abs());
        }
        for &b in &self.breakpoints {
            if b <= r_max {
                m = m.max(self.value(b).abs());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_step_is_symmetric() {
        for &x in &[0.1, 0.3, 0.5, 0.77] {
            assert!((smooth_step(x) + smooth_step(1.0 - x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(smooth_step(0.5), 0.5);
        let h = 1e-6;
        let fd = (smooth_step(0.3 + h) - smooth_step(0.3 - h)) / (2.0 * h);
        assert!((fd - smooth_step_derivative(0.3)).abs() < 1e-8);
    }

    #[test]
    fn ring_values_and_edges() {
        let v = RadialPotential::ring(1.0, 2.0, 2.0, 0.05).unwrap();
        assert_eq!(v.value(0.5), 0.0);
        assert_eq!(v.value(1.5), 2.0);
        assert!((v.value(1.0) - 1.0).abs() < 1e-15);
        assert!((v.value(2.0) - 1.0).abs() < 1e-15);
        assert_eq!(v.value(2.1), 0.0);
        assert!((v.support_radius() - 2.025).abs() < 1e-15);
        assert!(v.is_compactly_supported());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let v = RadialPotential::from_pieces(
            "mix",
            vec![
                PieceSpec::Step {
                    left: 1.0,
                    right: 2.0,
                    height: 2.0,
                    blend: 0.2,
                },
                PieceSpec::Gaussian {
                    amplitude: -1.0,
                    center: 3.0,
                    width: 0.4,
                },
                PieceSpec::PowerTail {
                    coefficient: 0.5,
                    exponent: 3.0,
                },
                PieceSpec::Polynomial {
                    coefficients: vec![1.0, -0.5, 0.25],
                    left: 0.0,
                    right: 0.8,
                },
            ],
        )
        .unwrap();
        for &r in &[0.3, 0.95, 1.05, 1.93, 2.9, 3.4, 5.0] {
            let h = 1e-6;
            let fd = (v.value(r + h) - v.value(r - h)) / (2.0 * h);
            let (_, d) = v.value_and_derivative(r);
            assert!(
                (fd - d).abs() < 1e-6 * (1.0 + d.abs()),
                "r={r}: {fd} vs {d}"
            );
        }
        assert_eq!(v.decay_exponent(), Some(3.0));
        assert_eq!(v.tail_constant(), 0.5);
    }

    #[test]
    fn invalid_pieces_are_rejected() {
        assert!(RadialPotential::ring(2.0, 1.0, 1.0, 0.0).is_err());
        assert!(RadialPotential::from_pieces(
            "g",
            vec![PieceSpec::Gaussian {
                amplitude: 1.0,
                center: 0.0,
                width: 0.0
            }]
        )
        .is_err());
    }

    #[test]
    fn catalogue_piece_roundtrip() {
        let p = PieceSpec::Step {
            left: 1.0,
            right: 2.0,
            height: 2.0,
            blend: 0.05,
        };
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"kind\":\"step\""));
        let back: PieceSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let t: PieceSpec = serde_json::from_str(
            r#"{"kind":"powertail","params":{"coefficient":1.0,"exponent":2.0}}"#,
        )
        .unwrap();
        assert!(matches!(t, PieceSpec::PowerTail { .. }));
    }
}
