//! Spectral flow of unitary families through a point e^{i theta} of the unit
//! circle, the normalised counting function mu, the spectral shift function
//! and the perturbation bounds for products of unitary families.

mod counting;
mod perturbation;
pub mod synthetic;

pub use counting::{
    mu, mu_anchored, mu_via_birman_schwinger, ssf_birman_krein, unwrap_ssf, BsCount,
    BsCountOptions, CountingValue, MuMethod, MuOptions, SsfValue,
};
pub use perturbation::{
    equality_check, product_perturbation_check, rotation_bound_check, EqualityCheck, ProductCheck,
    RotationCheck,
};

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numerics::linalg::{
    op_norm, principal_angle, unitarity_defect, unitary_eigenphases, TWO_PI,
};

/// Angles closer than this to 0 or 2 pi are not accepted as probe points.
pub const THETA_EPS: f64 = 1e-6;

/// N(e^{i theta1}, e^{i theta2}; U) for a spectrum given as (phase, weight)
/// pairs: the weighted number of phases in [theta1, theta2), negated when
/// theta1 > theta2.
pub fn count_phases_on_arc(phases: &[(f64, u32)], theta1: f64, theta2: f64) -> i64 {
    let (lo, hi, sign) = if theta1 <= theta2 {
        (theta1, theta2, 1)
    } else {
        (theta2, theta1, -1)
    };
    let n: i64 = phases
        .iter()
        .filter(|(p, _)| {
            let p = principal_angle(*p);
            p >= lo && p < hi
        })
        .map(|&(_, w)| w as i64)
        .sum();
    sign * n
}

/// The same count for a unitary matrix, eigenvalues taken with multiplicity.
pub fn count_on_arc(u: &DMatrix<Complex64>, theta1: f64, theta2: f64) -> Result<i64> {
    let phases: Vec<(f64, u32)> = unitary_eigenphases(u)?
        .into_iter()
        .map(|p| (p, 1))
        .collect();
    Ok(count_phases_on_arc(&phases, theta1, theta2))
}

/// One continuous eigenphase branch with its multiplicity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub label: u32,
    pub weight: u32,
    pub values: Vec<f64>,
}

pub type MatrixCallback = Arc<dyn Fn(f64) -> Result<DMatrix<Complex64>> + Send + Sync>;

#[derive(Clone)]
pub enum UnitaryFamily {
    DiagonalBranches {
        grid: Vec<f64>,
        branches: Vec<Branch>,
    },
    SampledMatrices {
        grid: Vec<f64>,
        matrices: Vec<DMatrix<Complex64>>,
        callback: Option<MatrixCallback>,
    },
}

impl fmt::Debug for UnitaryFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitaryFamily::DiagonalBranches { grid, branches } => f
                .debug_struct("DiagonalBranches")
                .field("points", &grid.len())
                .field("branches", &branches.len())
                .finish(),
            UnitaryFamily::SampledMatrices {
                grid,
                matrices,
                callback,
            } => f
                .debug_struct("SampledMatrices")
                .field("points", &grid.len())
                .field("dimension", &matrices.first().map_or(0, |m| m.nrows()))
                .field("refinable", &callback.is_some())
                .finish(),
        }
    }
}

impl UnitaryFamily {
    /// Samples `f` on `grid` and keeps it for later refinement.
    pub fn from_fn<F>(grid: Vec<f64>, f: F, execution: Execution) -> Result<Self>
    where
        F: Fn(f64) -> Result<DMatrix<Complex64>> + Send + Sync + 'static,
    {
        let matrices = exec::try_map(execution, &grid, |&t| f(t))?;
        Ok(UnitaryFamily::SampledMatrices {
            grid,
            matrices,
            callback: Some(Arc::new(f)),
        })
    }

    pub fn grid(&self) -> &[f64] {
        match self {
            UnitaryFamily::DiagonalBranches { grid, .. }
            | UnitaryFamily::SampledMatrices { grid, .. } => grid,
        }
    }

    /// Weighted spectrum at grid index i.
    pub fn spectrum_at(&self, i: usize) -> Result<Vec<(f64, u32)>> {
        match self {
            UnitaryFamily::DiagonalBranches { branches, .. } => Ok(branches
                .iter()
                .map(|b| (principal_angle(b.values[i]), b.weight))
                .collect()),
            UnitaryFamily::SampledMatrices { matrices, .. } => {
                Ok(unitary_eigenphases(&matrices[i])?
                    .into_iter()
                    .map(|p| (p, 1))
                    .collect())
            }
        }
    }

    /// Spectra at the first and last parameter value.
    pub fn endpoint_spectra(&self) -> Result<(Vec<(f64, u32)>, Vec<(f64, u32)>)> {
        let n = self.grid().len();
        if n == 0 {
            return Err(Error::Structural("empty family".into()));
        }
        Ok((self.spectrum_at(0)?, self.spectrum_at(n - 1)?))
    }

    /// The family restricted to grid indices [i0, i1].
    pub fn slice(&self, i0: usize, i1: usize) -> Result<Self> {
        let n = self.grid().len();
        if !(i0 < i1 && i1 < n) {
            return Err(Error::Domain(format!(
                "bad slice [{i0}, {i1}] of {n} points"
            )));
        }
        Ok(match self {
            UnitaryFamily::DiagonalBranches { grid, branches } => UnitaryFamily::DiagonalBranches {
                grid: grid[i0..=i1].to_vec(),
                branches: branches
                    .iter()
                    .map(|b| Branch {
                        label: b.label,
                        weight: b.weight,
                        values: b.values[i0..=i1].to_vec(),
                    })
                    .collect(),
            },
            UnitaryFamily::SampledMatrices {
                grid,
                matrices,
                callback,
            } => UnitaryFamily::SampledMatrices {
                grid: grid[i0..=i1].to_vec(),
                matrices: matrices[i0..=i1].to_vec(),
                callback: callback.clone(),
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid();
        if grid.len() < 2 {
            return Err(Error::Structural(
                "a family needs at least two parameter values".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Structural(
                "parameter grid is not strictly increasing".into(),
            ));
        }
        match self {
            UnitaryFamily::DiagonalBranches { branches, .. } => {
                for b in branches {
                    if b.values.len() != grid.len() {
                        return Err(Error::Structural(format!(
                            "branch {} has {} values",
                            b.label,
                            b.values.len()
                        )));
                    }
                    if b.weight == 0 {
                        return Err(Error::Structural(format!(
                            "branch {} has zero weight",
                            b.label
                        )));
                    }
                    if let Some(i) = b
                        .values
                        .windows(2)
                        .position(|w| (w[1] - w[0]).abs() >= 0.5 * std::f64::consts::PI)
                    {
                        return Err(Error::Structural(format!(
                            "branch {} moves by {:.3} between t = {} and {}",
                            b.label,
                            (b.values[i + 1] - b.values[i]).abs(),
                            grid[i],
                            grid[i + 1]
                        )));
                    }
                }
            }
            UnitaryFamily::SampledMatrices { matrices, .. } => {
                if matrices.len() != grid.len() {
                    return Err(Error::Structural(format!(
                        "{} matrices for {} points",
                        matrices.len(),
                        grid.len()
                    )));
                }
                for (m, t) in matrices.iter().zip(grid) {
                    let d = unitarity_defect(m);
                    if d > 1e-10 {
                        return Err(Error::Structural(format!(
                            "U({t}) is not unitary (defect {d:.3e})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// smallest admissible clearance between a gap angle and the spectrum
    pub gap_margin: f64,
    /// callback evaluations allowed when refining sampled families
    pub max_refinements: usize,
    /// largest ||U(b) - U(a)|| accepted across one sampled interval
    pub max_motion: f64,
    pub execution: Execution,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            gap_margin: 1e-3,
            max_refinements: 4096,
            max_motion: 0.5,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub gap_angle: f64,
    /// N(theta, gap_angle; U(t0))
    pub count_start: i64,
    /// N(theta, gap_angle; U(t1))
    pub count_end: i64,
    /// clearance of the gap angle from the spectrum on the segment
    pub min_gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub t: f64,
    /// +1 anticlockwise, -1 clockwise
    pub direction: i8,
    pub weight: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub flow: i64,
    pub theta: f64,
    pub segments: Vec<Segment>,
    pub crossings: Vec<Crossing>,
    pub refinements: usize,
}

impl FlowResult {
    pub fn telescoped(&self) -> i64 {
        self.segments
            .iter()
            .map(|s| s.count_end - s.count_start)
            .sum()
    }

    pub fn min_gap(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.min_gap)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn check_theta(theta: f64) -> Result<()> {
    if theta > THETA_EPS && theta < TWO_PI - THETA_EPS {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "probe angle {theta} must lie in ({THETA_EPS}, 2 pi - {THETA_EPS})"
        )))
    }
}

/// Occupied closed arcs [start, start + len] on the circle, start in [0, 2 pi).
/// Returns the midpoint and angular width of the widest free arc, or None if
/// the arcs cover the circle.
fn widest_free_arc(arcs: &mut Vec<(f64, f64)>) -> Option<(f64, f64)> {
    if arcs.is_empty() {
        return Some((std::f64::consts::PI, TWO_PI));
    }
    let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(arcs.len() + 4);
    for &(s, len) in arcs.iter() {
        if len >= TWO_PI {
            return None;
        }
        let s = principal_angle(s);
        let e = s + len;
        if e > TWO_PI {
            pieces.push((s, TWO_PI));
            pieces.push((0.0, e - TWO_PI));
        } else {
            pieces.push((s, e));
        }
    }
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
    for p in pieces {
        match merged.last_mut() {
            Some(last) if p.0 <= last.1 => last.1 = last.1.max(p.1),
            _ => merged.push(p),
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for i in 0..merged.len() {
        let from = merged[i].1;
        let to = if i + 1 < merged.len() {
            merged[i + 1].0
        } else {
            merged[0].0 + TWO_PI
        };
        let w = to - from;
        if w > 0.0 && best.is_none_or(|(_, bw)| w > bw) {
            best = Some((from + 0.5 * w, w));
        }
    }
    let (mid, w) = best?;
    let mut mid = principal_angle(mid);
    // a gap angle must differ from 0 and be usable as an arc end point
    if mid < 1e-9 || TWO_PI - mid < 1e-9 {
        mid = principal_angle(mid + 0.25 * w);
    }
    Some((mid, w))
}

/// sf(e^{i theta}; {U(t)}) over the whole parameter grid.
pub fn spectral_flow(family: &UnitaryFamily, theta: f64, opts: &FlowOptions) -> Result<FlowResult> {
    check_theta(theta)?;
    family.validate()?;
    match family {
        UnitaryFamily::DiagonalBranches { grid, branches } => {
            branch_flow(grid, branches, theta, opts)
        }
        UnitaryFamily::SampledMatrices {
            grid,
            matrices,
            callback,
        } => sampled_flow(grid, matrices, callback.as_ref(), theta, opts),
    }
}

fn weighted_spectrum(branches: &[Branch], i: usize) -> Vec<(f64, u32)> {
    branches
        .iter()
        .map(|b| (principal_angle(b.values[i]), b.weight))
        .collect()
}

fn branch_flow(
    grid: &[f64],
    branches: &[Branch],
    theta: f64,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    let n = grid.len();
    let margin = opts.gap_margin;
    let step_arcs = |i: usize, out: &mut Vec<(f64, f64)>| {
        for b in branches {
            let (a, c) = (b.values[i], b.values[i + 1]);
            let lo = a.min(c) - margin;
            out.push((lo, (a - c).abs() + 2.0 * margin));
        }
    };
    let mut segments = Vec::new();
    let mut start = 0usize;
    let mut arcs: Vec<(f64, f64)> = Vec::new();
    let mut current: Option<(f64, f64)> = None;
    let mut i = 0usize;
    while i + 1 < n {
        let mut trial = arcs.clone();
        step_arcs(i, &mut trial);
        match widest_free_arc(&mut trial) {
            Some(gap) => {
                arcs = trial;
                current = Some(gap);
                i += 1;
            }
            None if i == start => {
                let spacing = branches
                    .iter()
                    .map(|b| (b.values[i + 1] - b.values[i]).abs())
                    .fold(0.0, f64::max);
                return Err(Error::NoGap {
                    t0: grid[i],
                    t1: grid[i + 1],
                    spacing,
                });
            }
            None => {
                let (g, w) = current.expect("segment has at least one step");
                segments.push(close_segment(grid, branches, theta, start, i, g, w));
                start = i;
                arcs.clear();
                current = None;
            }
        }
    }
    if let Some((g, w)) = current {
        segments.push(close_segment(grid, branches, theta, start, n - 1, g, w));
    }
    let flow = segments.iter().map(|s| s.count_end - s.count_start).sum();
    let mut crossings = Vec::new();
    for b in branches {
        for i in 0..n - 1 {
            let (a, c) = (b.values[i], b.values[i + 1]);
            let fa = ((a - theta) / TWO_PI).floor();
            let fc = ((c - theta) / TWO_PI).floor();
            if fa != fc {
                let up = fc > fa;
                let level = theta + TWO_PI * if up { fc } else { fa };
                let s = if c != a {
                    ((level - a) / (c - a)).clamp(0.0, 1.0)
                } else {
                    0.5
                };
                crossings.push(Crossing {
                    t: grid[i] + s * (grid[i + 1] - grid[i]),
                    direction: if up { 1 } else { -1 },
                    weight: b.weight * (fc - fa).abs() as u32,
                });
            }
        }
    }
    crossings.sort_by(|x, y| x.t.total_cmp(&y.t));
    Ok(FlowResult {
        flow,
        theta,
        segments,
        crossings,
        refinements: 0,
    })
}

fn close_segment(
    grid: &[f64],
    branches: &[Branch],
    theta: f64,
    i0: usize,
    i1: usize,
    gap: f64,
    width: f64,
) -> Segment {
    let count_start = count_phases_on_arc(&weighted_spectrum(branches, i0), theta, gap);
    let count_end = count_phases_on_arc(&weighted_spectrum(branches, i1), theta, gap);
    Segment {
        t0: grid[i0],
        t1: grid[i1],
        gap_angle: gap,
        count_start,
        count_end,
        min_gap: 0.5 * width,
    }
}

struct Sample {
    t: f64,
    u: DMatrix<Complex64>,
    phases: Vec<(f64, u32)>,
}

fn sample(t: f64, u: DMatrix<Complex64>) -> Result<Sample> {
    let phases = unitary_eigenphases(&u)?
        .into_iter()
        .map(|p| (p, 1))
        .collect();
    Ok(Sample { t, u, phases })
}

/// Gap angle valid on [a, b]. Every sample in `probe` lies in the interval;
/// the arc must clear each of their spectra by margin + the largest motion
/// between consecutive samples, and the total motion must stay below
/// `max_motion` so that endpoints which happen to agree are not trusted.
fn sampled_gap(probe: &[&Sample], margin: f64, max_motion: f64) -> (Option<(f64, f64)>, f64) {
    let steps: Vec<f64> = probe
        .windows(2)
        .map(|w| op_norm(&(&w[1].u - &w[0].u)))
        .collect();
    let d = steps.iter().copied().fold(0.0, f64::max);
    let total: f64 = steps.iter().sum();
    let mut points: Vec<(f64, f64)> = probe
        .iter()
        .flat_map(|s| s.phases.iter())
        .map(|&(p, _)| (p, 0.0))
        .collect();
    let Some((g, w)) = widest_free_arc(&mut points) else {
        return (None, 0.0);
    };
    let clearance = 2.0 * (0.25 * w).sin();
    if clearance > margin + d && total <= max_motion {
        (Some((g, clearance - d)), w)
    } else {
        (None, w)
    }
}

fn sampled_flow(
    grid: &[f64],
    matrices: &[DMatrix<Complex64>],
    callback: Option<&MatrixCallback>,
    theta: f64,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    let pairs: Vec<(f64, &DMatrix<Complex64>)> = grid.iter().copied().zip(matrices).collect();
    let mut pts: Vec<Sample> =
        exec::try_map(opts.execution, &pairs, |&(t, u)| sample(t, u.clone()))?;
    let mut segments = Vec::new();
    let mut crossings = Vec::new();
    let mut refinements = 0usize;
    let mut i = 0usize;
    while i + 1 < pts.len() {
        let (t0, t1) = (pts[i].t, pts[i + 1].t);
        let tm = 0.5 * (t0 + t1);
        let splittable = tm > t0 && tm < t1;
        let mid = match callback {
            Some(cb) if splittable && refinements < opts.max_refinements => {
                refinements += 1;
                Some(sample(tm, cb(tm)?)?)
            }
            _ => None,
        };
        let (gap, width) = match &mid {
            Some(m) => sampled_gap(&[&pts[i], m, &pts[i + 1]], opts.gap_margin, opts.max_motion),
            None => sampled_gap(&[&pts[i], &pts[i + 1]], opts.gap_margin, opts.max_motion),
        };
        match (gap, mid) {
            (Some((g, clearance)), _) => {
                let count_start = count_phases_on_arc(&pts[i].phases, theta, g);
                let count_end = count_phases_on_arc(&pts[i + 1].phases, theta, g);
                let delta = count_end - count_start;
                if delta != 0 {
                    crossings.push(Crossing {
                        t: tm,
                        direction: delta.signum() as i8,
                        weight: delta.unsigned_abs() as u32,
                    });
                }
                segments.push(Segment {
                    t0,
                    t1,
                    gap_angle: g,
                    count_start,
                    count_end,
                    min_gap: clearance,
                });
                i += 1;
            }
            (None, Some(m)) => pts.insert(i + 1, m),
            (None, None) => {
                return Err(Error::NoGap {
                    t0,
                    t1,
                    spacing: width,
                })
            }
        }
    }
    let flow = segments.iter().map(|s| s.count_end - s.count_start).sum();
    Ok(FlowResult {
        flow,
        theta,
        segments,
        crossings,
        refinements,
    })
}

/// Closed form for diagonal families: sum of w (floor((end - theta)/2 pi) -
/// floor((start - theta)/2 pi)) over branches.
pub fn branch_winding(branches: &[Branch], theta: f64) -> i64 {
    branches
        .iter()
        .map(|b| {
            let (Some(&s), Some(&e)) = (b.values.first(), b.values.last()) else {
                return 0;
            };
            let k = ((e - theta) / TWO_PI).floor() - ((s - theta) / TWO_PI).floor();
            b.weight as i64 * k as i64
        })
        .sum()
}

/// Both sides of sf(theta1) - sf(theta2) = N(theta1, theta2; U(1)) - N(theta1, theta2; U(0)).
pub fn flow_difference_identity(
    family: &UnitaryFamily,
    theta1: f64,
    theta2: f64,
    opts: &FlowOptions,
) -> Result<(i64, i64)> {
    let f1 = spectral_flow(family, theta1, opts)?;
    let f2 = spectral_flow(family, theta2, opts)?;
    let (s0, s1) = family.endpoint_spectra()?;
    let rhs = count_phases_on_arc(&s1, theta1, theta2) - count_phases_on_arc(&s0, theta1, theta2);
    Ok((f1.flow - f2.flow, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn diag(phases: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(phases.len(), phases.len(), |i, j| {
            if i == j {
                Complex64::from_polar(1.0, phases[i])
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn arc_counts_of_small_matrices() {
        let id = DMatrix::<Complex64>::identity(3, 3);
        assert_eq!(count_on_arc(&id, 0.3, 6.0).unwrap(), 0);
        let u = diag(&[PI / 2.0, PI, 1.5 * PI]);
        assert_eq!(count_on_arc(&u, PI / 2.0, 1.5 * PI).unwrap(), 2);
        assert_eq!(count_on_arc(&u, 1.5 * PI, PI / 2.0).unwrap(), -2);
        assert_eq!(count_on_arc(&u, 1.0, 1.0).unwrap(), 0);
    }

    #[test]
    fn one_full_winding_has_flow_one() {
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
        let b = Branch {
            label: 0,
            weight: 1,
            values: grid.iter().map(|t| TWO_PI * t).collect(),
        };
        let fam = UnitaryFamily::DiagonalBranches {
            grid: grid.clone(),
            branches: vec![b],
        };
        for &th in &[0.1, 1.0, PI, 5.9] {
            let r = spectral_flow(&fam, th, &FlowOptions::default()).unwrap();
            assert_eq!(r.flow, 1, "theta {th}");
            assert_eq!(r.telescoped(), 1);
            assert_eq!(r.crossings.len(), 1);
        }
        let m = UnitaryFamily::from_fn(grid, |t| Ok(diag(&[TWO_PI * t])), Execution::Sequential)
            .unwrap();
        assert_eq!(
            spectral_flow(&m, 2.0, &FlowOptions::default())
                .unwrap()
                .flow,
            1
        );
    }

    #[test]
    fn constant_family_has_no_flow() {
        let grid = vec![0.0, 0.5, 1.0];
        let u = diag(&[0.7, 2.0, 4.0]);
        let fam = UnitaryFamily::SampledMatrices {
            grid,
            matrices: vec![u.clone(), u.clone(), u],
            callback: None,
        };
        for &th in &[0.7, 2.0, 3.0, 6.0] {
            assert_eq!(
                spectral_flow(&fam, th, &FlowOptions::default())
                    .unwrap()
                    .flow,
                0
            );
        }
    }

    #[test]
    fn coarse_sampled_family_is_refined_through_the_callback() {
        let grid = vec![0.0, 1.0];
        let fam = UnitaryFamily::from_fn(
            grid,
            |t| Ok(diag(&[3.0 * TWO_PI * t, -TWO_PI * t])),
            Execution::Sequential,
        )
        .unwrap();
        let r = spectral_flow(&fam, 1.0, &FlowOptions::default()).unwrap();
        assert_eq!(r.flow, 2);
        assert!(r.refinements > 0);
        assert!(r.min_gap() > 1e-3);
    }

    #[test]
    fn unrefinable_family_without_gap_is_an_error() {
        let fam = UnitaryFamily::SampledMatrices {
            grid: vec![0.0, 1.0],
            matrices: vec![diag(&[0.0, 2.0, 4.0]), diag(&[2.0, 4.0, 0.0])],
            callback: None,
        };
        assert!(matches!(
            spectral_flow(&fam, 1.0, &FlowOptions::default()),
            Err(Error::NoGap { .. })
        ));
    }

    #[test]
    fn branch_segmentation_matches_closed_form() {
        let grid: Vec<f64> = (0..=300).map(|i| i as f64 / 300.0).collect();
        let branches = vec![
            Branch {
                label: 0,
                weight: 1,
                values: grid.iter().map(|t| 9.0 * t).collect(),
            },
            Branch {
                label: 1,
                weight: 3,
                values: grid.iter().map(|t| -14.0 * t + (7.0 * t).sin()).collect(),
            },
            Branch {
                label: 2,
                weight: 5,
                values: grid.iter().map(|t| 0.3 * (20.0 * t).sin()).collect(),
            },
        ];
        let fam = UnitaryFamily::DiagonalBranches {
            grid,
            branches: branches.clone(),
        };
        for k in 1..40 {
            let th = k as f64 * TWO_PI / 40.0;
            let r = spectral_flow(&fam, th, &FlowOptions::default()).unwrap();
            assert_eq!(r.flow, branch_winding(&branches, th), "theta {th}");
            let signed: i64 = r
                .crossings
                .iter()
                .map(|c| c.direction as i64 * c.weight as i64)
                .sum();
            assert_eq!(signed, r.flow);
        }
    }

    #[test]
    fn widest_arc_avoids_the_origin() {
        let mut arcs = vec![(3.0, 0.5)];
        let (g, w) = widest_free_arc(&mut arcs).unwrap();
        assert!(g > 1e-9 && g < TWO_PI);
        assert!((w - (TWO_PI - 0.5)).abs() < 1e-12);
    }
}
