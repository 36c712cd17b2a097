//! Discrete spectrum of H^int below a cut, channel by channel.

use serde::{Deserialize, Serialize};

use super::solver::{RadialProblem, SolverOptions};
use super::Channel;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numerics::magnus::{wronskian, Scaled};
use crate::numerics::quadrature::PanelGrid;
use crate::numerics::roots::brent;
use crate::potential::PotentialTriple;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundStateOptions {
    /// energies within tol * max(1, |E|) count as one level
    pub coincidence_tol: f64,
    pub energy_tol: f64,
    /// decay lengths of the cap region kept inside the box
    pub decay_lengths: f64,
    pub boundary_mass_limit: f64,
    pub solver: SolverOptions,
    pub execution: Execution,
}

impl Default for BoundStateOptions {
    fn default() -> Self {
        BoundStateOptions {
            coincidence_tol: 1e-8,
            energy_tol: 1e-13,
            decay_lengths: 40.0,
            boundary_mass_limit: 1e-6,
            solver: SolverOptions::default(),
            execution: Execution::Parallel,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub channel: Channel,
    /// number of interior nodes of the eigenfunction
    pub radial_index: u32,
    pub energy: f64,
    /// ln of the L2 norm of the eigenfunction normalised as r^s (1 + ...) at 0
    pub ln_norm: f64,
    /// mass of the normalised eigenfunction in the outer tenth of the box
    pub boundary_mass: f64,
}

/// Radial eigenvalues merged across channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub multiplicity: u32,
    pub channels: Vec<Channel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundStateList {
    pub e_cut: f64,
    pub hbar: f64,
    pub r_box: f64,
    /// sorted by energy
    pub states: Vec<BoundState>,
    pub levels: Vec<Level>,
    /// max |<u_i, u_j> - delta_ij| within a channel
    pub orthonormality_residual: f64,
}

impl BoundStateList {
    /// N((-oo, E); H^int) with channel weights.
    pub fn count_below(&self, energy: f64) -> u32 {
        self.states
            .iter()
            .filter(|s| s.energy < energy)
            .map(|s| s.channel.weight())
            .sum()
    }

    /// Radial count in one channel.
    pub fn channel_count_below(&self, channel: Channel, energy: f64) -> u32 {
        self.states
            .iter()
            .filter(|s| s.channel == channel && s.energy < energy)
            .count() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

struct ChannelSolver<'a> {
    triple: &'a PotentialTriple,
    channel: Channel,
    hbar: f64,
    r_box: f64,
    opts: &'a BoundStateOptions,
}

impl ChannelSolver<'_> {
    fn problem(&self, e: f64) -> Result<RadialProblem<'_>> {
        RadialProblem::new(self.triple.v_int(), self.channel, e, self.hbar)
    }

    /// Dirichlet count on (0, r_box).
    fn count(&self, e: f64) -> Result<u32> {
        let p = self.problem(e)?;
        let prop = p.regular(self.r_box, &[], &self.opts.solver)?;
        Ok(prop.zeros)
    }

    fn decaying(&self, e: f64, outputs: &[f64]) -> Result<Vec<Scaled>> {
        let p = self.problem(e)?;
        let y0 = p.decaying_start(self.r_box)?;
        let lo = outputs.iter().copied().fold(self.r_box, f64::min);
        Ok(p.propagate(self.r_box, y0, lo, outputs, &self.opts.solver)?
            .samples)
    }

    /// Wronskian of the regular and decaying solutions at omega1, each
    /// normalised in the (u, u'/kappa) norm.
    fn mismatch(&self, e: f64) -> Result<f64> {
        let r_m = self.triple.options.omega1;
        let p = self.problem(e)?;
        let reg = p.regular(r_m, &[], &self.opts.solver)?.end;
        let dec = self.decaying(e, &[r_m])?[0];
        let kappa = p.q(r_m).abs().sqrt().max(1.0);
        let (w, _) = wronskian(&reg, &dec);
        let n1 = reg.u.hypot(reg.du / kappa);
        let n2 = dec.u.hypot(dec.du / kappa);
        Ok(w / (kappa * n1 * n2))
    }

    fn brackets(&self, e_lo: f64, e_hi: f64) -> Result<Vec<(f64, f64)>> {
        let (c_lo, c_hi) = (self.count(e_lo)?, self.count(e_hi)?);
        let mut out = Vec::new();
        let mut stack = vec![(e_lo, e_hi, c_lo, c_hi)];
        while let Some((a, b, ca, cb)) = stack.pop() {
            if cb <= ca {
                continue;
            }
            if cb == ca + 1 {
                out.push((a, b));
                continue;
            }
            if b - a < 1e-14 * b.abs().max(1.0) {
                return Err(Error::EigenSolver { residual: b - a });
            }
            let m = 0.5 * (a + b);
            let cm = self.count(m)?;
            stack.push((m, b, cm, cb));
            stack.push((a, m, ca, cm));
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(out)
    }

    fn refine(&self, a: f64, b: f64) -> Result<f64> {
        let (fa, fb) = (self.mismatch(a)?, self.mismatch(b)?);
        if fa * fb < 0.0 {
            return brent(|e| self.mismatch(e), a, b, self.opts.energy_tol);
        }
        // fall back to bisection on the Dirichlet count
        let (mut lo, mut hi) = (a, b);
        let c = self.count(a)?;
        while hi - lo > self.opts.energy_tol {
            let m = 0.5 * (lo + hi);
            if self.count(m)? > c {
                hi = m;
            } else {
                lo = m;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Normalised eigenfunction at the nodes of `grid`.
    fn eigenfunction(&self, e: f64, nodes: &[f64]) -> Result<(Vec<f64>, f64)> {
        let p = self.problem(e)?;
        // splice at the outermost allowed node below omega1: deeper inside a
        // barrier the regular solution is swamped by its growing part
        let omega1 = self.triple.options.omega1;
        let r_m = nodes
            .iter()
            .copied()
            .filter(|&r| r > 0.0 && r < omega1 && p.q(r) >= 0.0)
            .fold(None, |_, r| Some(r))
            .unwrap_or(omega1);
        let inner: Vec<f64> = nodes.iter().copied().filter(|&r| r < r_m).collect();
        let outer: Vec<f64> = nodes.iter().copied().filter(|&r| r >= r_m).collect();
        let reg = p.regular(r_m, &inner, &self.opts.solver)?;
        let mut outer_pts = outer.clone();
        outer_pts.push(r_m);
        let dec = self.decaying(e, &outer_pts)?;
        let y1 = reg.end;
        let d1 = dec[outer.len()];
        let ratio = (y1.u * d1.u + y1.du * d1.du) / (d1.u * d1.u + d1.du * d1.du);
        let mut u = Vec::with_capacity(nodes.len());
        for s in &reg.samples {
            u.push(s.u * (s.ln_scale - y1.ln_scale).exp());
        }
        for s in &dec[..outer.len()] {
            u.push(ratio * s.u * (s.ln_scale - d1.ln_scale).exp());
        }
        Ok((u, y1.ln_scale))
    }

    fn grid(&self, e_cut: f64) -> Result<PanelGrid> {
        let v = self.triple.v_int();
        let mut breaks: Vec<f64> = v.breakpoints().to_vec();
        breaks.push(self.triple.options.omega1);
        let scale = v.sup_abs(self.r_box) + e_cut.abs();
        let width = (3.0 * self.hbar / scale.sqrt()).min(0.25);
        let mut g = PanelGrid::new(0.0, self.r_box, &breaks, width, 16)?;
        if self.channel.dimension == crate::potential::Dimension::Two {
            g = g.graded_toward_lo(8, 0.3);
        }
        Ok(g)
    }

    fn solve(&self, e_min: f64, e_cut: f64) -> Result<(Vec<BoundState>, f64)> {
        let brackets = self.brackets(e_min, e_cut)?;
        if brackets.is_empty() {
            return Ok((Vec::new(), 0.0));
        }
        let grid = self.grid(e_cut)?;
        let nodes = grid.coarse_nodes();
        let weights = grid.coarse_weights();
        let tail_start = 0.9 * self.r_box;
        let mut states = Vec::new();
        let mut funcs: Vec<Vec<f64>> = Vec::new();
        for (idx, &(a, b)) in brackets.iter().enumerate() {
            let e = self.refine(a, b)?;
            let (mut u, ln_ref) = self.eigenfunction(e, &nodes)?;
            let norm2: f64 = u.iter().zip(&weights).map(|(x, w)| w * x * x).sum();
            let norm = norm2.sqrt();
            u.iter_mut().for_each(|x| *x /= norm);
            let boundary_mass: f64 = nodes
                .iter()
                .zip(&u)
                .zip(&weights)
                .filter(|((r, _), _)| **r >= tail_start)
                .map(|((_, x), w)| w * x * x)
                .sum();
            if boundary_mass > self.opts.boundary_mass_limit {
                return Err(Error::BoxSize {
                    mass: boundary_mass,
                    r_box: self.r_box,
                });
            }
            states.push(BoundState {
                channel: self.channel,
                radial_index: idx as u32,
                energy: e,
                ln_norm: norm.ln() + ln_ref,
                boundary_mass,
            });
            funcs.push(u);
        }
        let mut resid: f64 = 0.0;
        for i in 0..funcs.len() {
            for j in 0..=i {
                let g: f64 = funcs[i]
                    .iter()
                    .zip(&funcs[j])
                    .zip(&weights)
                    .map(|((a, b), w)| w * a * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                resid = resid.max((g - target).abs());
            }
        }
        Ok((states, resid))
    }
}

/// Box radius: omega2 plus blend plus `decay_lengths` cap decay lengths at e_cut.
pub fn box_radius(
    triple: &PotentialTriple,
    hbar: f64,
    e_cut: f64,
    decay_lengths: f64,
) -> Result<f64> {
    let o = &triple.options;
    let cap = triple.cap_level();
    if e_cut >= cap {
        return Err(Error::Precondition(format!(
            "cut {e_cut} not below the cap level {cap}"
        )));
    }
    Ok(o.omega2 + o.blend_width + decay_lengths * hbar / (cap - e_cut).sqrt())
}

pub fn bound_states(
    triple: &PotentialTriple,
    hbar: f64,
    channels: &[Channel],
    e_cut: f64,
    opts: &BoundStateOptions,
) -> Result<BoundStateList> {
    if e_cut > triple.options.e_plus {
        return Err(Error::Precondition(format!(
            "cut {e_cut} above E+ = {}",
            triple.options.e_plus
        )));
    }
    if channels.iter().any(|c| c.dimension != triple.dimension) {
        return Err(Error::Structural(
            "channel dimension differs from the triple".into(),
        ));
    }
    let r_box = box_radius(triple, hbar, e_cut, opts.decay_lengths)?;
    let v = triple.v_int();
    let mut e_min = f64::INFINITY;
    for i in 0..=20_000 {
        e_min = e_min.min(v.value(r_box * i as f64 / 20_000.0));
    }
    let e_min = e_min - 1e-6 * e_min.abs().max(1.0);

    let per_channel = exec::try_map(opts.execution, channels, |&channel| {
        let solver = ChannelSolver {
            triple,
            channel,
            hbar,
            r_box,
            opts,
        };
        solver.solve(e_min, e_cut)
    })?;
    let mut states = Vec::new();
    let mut resid: f64 = 0.0;
    for (s, r) in per_channel {
        states.extend(s);
        resid = resid.max(r);
    }
    states.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.channel.ell.cmp(&b.channel.ell))
    });

    let mut levels: Vec<Level> = Vec::new();
    for s in &states {
        if let Some(last) = levels.last_mut() {
            if (s.energy - last.energy).abs() <= opts.coincidence_tol * s.energy.abs().max(1.0) {
                if last.channels.iter().any(|c| c.ell != s.channel.ell) {
                    log::warn!(
                        "accidental degeneracy at E = {:.12e} between channels {:?} and l = {}",
                        s.energy,
                        last.channels.iter().map(|c| c.ell).collect::<Vec<_>>(),
                        s.channel.ell
                    );
                }
                last.multiplicity += s.channel.weight();
                last.channels.push(s.channel);
                continue;
            }
        }
        levels.push(Level {
            energy: s.energy,
            multiplicity: s.channel.weight(),
            channels: vec![s.channel],
        });
    }
    Ok(BoundStateList {
        e_cut,
        hbar,
        r_box,
        states,
        levels,
        orthonormality_residual: resid,
    })
}

fn sturm_count(diag: &[f64], off: f64, lambda: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (i, &d) in diag.iter().enumerate() {
        q = d - lambda - if i == 0 { 0.0 } else { off * off / q };
        if q == 0.0 {
            q = 1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn fd_eigenvalues(
    triple: &PotentialTriple,
    hbar: f64,
    channel: Channel,
    r_box: f64,
    e_cut: f64,
    n: usize,
) -> Vec<f64> {
    let h = r_box / (n + 1) as f64;
    let c = channel.centrifugal();
    let diag: Vec<f64> = (1..=n)
        .map(|i| {
            let r = i as f64 * h;
            2.0 * hbar * hbar / (h * h) + triple.v_int().value(r) + hbar * hbar * c / (r * r)
        })
        .collect();
    let off = -hbar * hbar / (h * h);
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * off.abs();
    let total = sturm_count(&diag, off, e_cut);
    (0..total)
        .map(|k| {
            let (mut a, mut b) = (lo, e_cut);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if sturm_count(&diag, off, m) > k {
                    b = m;
                } else {
                    a = m;
                }
                if b - a < 1e-15 * b.abs().max(1.0) {
                    break;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Second-order finite-difference eigenvalues of the Dirichlet problem on
/// the bound-state box, Richardson-extrapolated from n and 2n points.
pub fn finite_difference_levels(
    triple: &PotentialTriple,
    hbar: f64,
    channel: Channel,
    e_cut: f64,
    n: usize,
) -> Result<Vec<f64>> {
    let r_box = box_radius(
        triple,
        hbar,
        e_cut,
        BoundStateOptions::default().decay_lengths,
    )?;
    let coarse = fd_eigenvalues(triple, hbar, channel, r_box, e_cut, n);
    let fine = fd_eigenvalues(
        triple,
        hbar,
        channel,
        r_box,
        e_cut + 1e-3 * e_cut.abs().max(1.0),
        2 * n + 1,
    );
    Ok(coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| (4.0 * f - c) / 3.0)
        .filter(|&e| e < e_cut)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{build_triple, Dimension, RadialPotential, TripleOptions};
    use std::sync::Arc;

    fn triple(height: f64) -> PotentialTriple {
        let v = Arc::new(RadialPotential::ring(1.0, 2.0, height, 0.05).unwrap());
        let e_plus = 0.75 * height;
        build_triple(
            v,
            Dimension::Three,
            TripleOptions::thirds(1.0, 2.0, 0.5 * height, e_plus, 0.9 * height),
        )
        .unwrap()
    }

    #[test]
    fn tall_barrier_approaches_dirichlet_ball() {
        let t = triple(400.0);
        let hbar: f64 = 0.1;
        let ch = Channel::new(Dimension::Three, 0);
        let list = bound_states(&t, hbar, &[ch], 1.0, &BoundStateOptions::default()).unwrap();
        assert!(list.states.len() >= 3);
        // the blended wall sits at a - blend/2 .. a; effective radius inside [0.975, 1.0]
        for (n, s) in list.states.iter().take(3).enumerate() {
            let m = (n + 1) as f64 * std::f64::consts::PI * hbar;
            let (lo, hi) = ((m / 1.05).powi(2), (m / 0.97).powi(2));
            assert!(s.energy > lo && s.energy < hi, "n={n}: {}", s.energy);
        }
        assert!(
            list.orthonormality_residual < 1e-8,
            "{:e}",
            list.orthonormality_residual
        );
    }

    #[test]
    fn channel_weight_enters_multiplicity() {
        let t = triple(2.0);
        let ch1 = Channel::new(Dimension::Three, 1);
        let list = bound_states(&t, 0.12, &[ch1], 1.5, &BoundStateOptions::default()).unwrap();
        assert!(!list.is_empty());
        assert!(list.levels.iter().all(|l| l.multiplicity == 3));
        assert_eq!(list.count_below(1.5), 3 * list.states.len() as u32);
    }

    #[test]
    fn finite_differences_agree() {
        let t = triple(2.0);
        let ch = Channel::new(Dimension::Three, 0);
        let list = bound_states(&t, 0.15, &[ch], 1.4, &BoundStateOptions::default()).unwrap();
        let fd = finite_difference_levels(&t, 0.15, ch, 1.4, 4000).unwrap();
        assert_eq!(fd.len(), list.states.len());
        for (a, b) in fd.iter().zip(&list.states) {
            assert!((a - b.energy).abs() < 1e-5, "{a} vs {}", b.energy);
        }
    }

    #[test]
    fn cut_above_e_plus_is_rejected() {
        let t = triple(2.0);
        let r = bound_states(
            &t,
            0.1,
            &[Channel::new(Dimension::Three, 0)],
            1.6,
            &BoundStateOptions::default(),
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
