//! Birman-Schwinger matrices sqrt(V0) R(E) sqrt(V0) in an orthonormal
//! piecewise-Lagrange basis on supp V0.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::green::normalized_solutions;
use super::solver::{RadialProblem, SolverOptions};
use super::Channel;
use crate::error::{Error, Result};
use crate::numerics::linalg::symmetric_eigenvalues;
use crate::numerics::magnus::{wronskian, Scaled};
use crate::numerics::quadrature::{gauss_legendre, lagrange_row, PanelGrid};
use crate::potential::{Dimension, PotentialTriple};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Gauss-Legendre nodes per panel
    pub order: usize,
    pub min_nodes: usize,
    /// stabilisation target for eigenvalues above 0.1
    pub tol: f64,
    pub max_doublings: usize,
    pub solver: SolverOptions,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            order: 16,
            min_nodes: 32,
            tol: 1e-8,
            max_doublings: 4,
            solver: SolverOptions::default(),
        }
    }
}

/// Galerkin matrix of the kernel s(r) s(r') P(r<) Q(r>), normalised by the
/// coarse weights so that it represents the operator in an orthonormal basis.
/// `power` is the leading exponent of P at the origin; Q behaves like r^(1 - power).
pub(crate) fn galerkin(
    grid: &PanelGrid,
    s: &[f64],
    p: &[Scaled],
    q: &[Scaled],
    power: f64,
) -> DMatrix<f64> {
    let (nq, nf, np) = (grid.order, grid.fine, grid.panels.len());
    let n = nq * np;
    let fw = grid.fine_weights();
    let cw = grid.coarse_weights();
    let basis = &grid.basis_at_fine;

    let scale_of = |vals: &[Scaled]| -> (Vec<f64>, f64) {
        let lead = vals
            .iter()
            .filter(|x| x.u != 0.0)
            .map(|x| x.u.abs().ln() + x.ln_scale)
            .fold(f64::NEG_INFINITY, f64::max);
        let lead = if lead.is_finite() { lead } else { 0.0 };
        (
            vals.iter()
                .map(|x| x.u * (x.ln_scale - lead).exp())
                .collect(),
            lead,
        )
    };

    let mut pm = vec![0.0; np * nf];
    let mut qm = vec![0.0; np * nf];
    let mut alpha = vec![0.0; np];
    let mut beta = vec![0.0; np];
    for pan in 0..np {
        let r = pan * nf..(pan + 1) * nf;
        let (pv, a) = scale_of(&p[r.clone()]);
        let (qv, b) = scale_of(&q[r.clone()]);
        pm[r.clone()].copy_from_slice(&pv);
        qm[r].copy_from_slice(&qv);
        alpha[pan] = a;
        beta[pan] = b;
    }

    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for pan in 0..np {
        for m in 0..nf {
            let f = pan * nf + m;
            for i in 0..nq {
                let l = fw[f] * basis[m][i] * s[f];
                a[pan * nq + i] += l * pm[f];
                b[pan * nq + i] += l * qm[f];
            }
        }
    }

    let mut k = DMatrix::<f64>::zeros(n, n);
    for pi in 0..np {
        for pj in pi + 1..np {
            let e = (alpha[pi] + beta[pj]).exp();
            for i in 0..nq {
                for j in 0..nq {
                    let v = a[pi * nq + i] * b[pj * nq + j] * e;
                    k[(pi * nq + i, pj * nq + j)] = v;
                    k[(pj * nq + j, pi * nq + i)] = v;
                }
            }
        }
    }

    let c = &grid.cumulative;
    let mut g = vec![0.0; nf];
    let mut hq = vec![0.0; nf];
    let mut lower = vec![0.0; nf];
    let mut upper = vec![0.0; nf];
    for (pan, panel) in grid.panels.iter().enumerate() {
        let h = 0.5 * (panel.hi - panel.lo);
        let off = pan * nf;
        let r = off..off + nf;
        let wide = match (log_range(&p[r.clone()]), log_range(&q[r.clone()])) {
            (Some(a), Some(b)) => a.max(b) > WIDE_LOG_RANGE,
            _ => false,
        };
        if wide {
            let block =
                log_interpolated_block(grid, pan, &s[r.clone()], &p[r.clone()], &q[r], power);
            for i in 0..nq {
                for j in 0..nq {
                    k[(pan * nq + i, pan * nq + j)] = 0.5 * (block[(i, j)] + block[(j, i)]);
                }
            }
            continue;
        }
        let e = (alpha[pan] + beta[pan]).exp();
        let mut block = DMatrix::<f64>::zeros(nq, nq);
        for j in 0..nq {
            for m in 0..nf {
                g[m] = basis[m][j] * s[off + m] * pm[off + m];
                hq[m] = basis[m][j] * s[off + m] * qm[off + m];
            }
            for m in 0..nf {
                let mut lo = 0.0;
                let mut up = 0.0;
                for nn in 0..nf {
                    let cm = h * c[m][nn];
                    lo += cm * g[nn];
                    up += (fw[off + nn] - cm) * hq[nn];
                }
                lower[m] = lo;
                upper[m] = up;
            }
            for i in 0..nq {
                let mut sum = 0.0;
                for m in 0..nf {
                    let f = off + m;
                    sum += fw[f] * basis[m][i] * s[f] * (qm[f] * lower[m] + pm[f] * upper[m]);
                }
                block[(i, j)] = sum * e;
            }
        }
        for i in 0..nq {
            for j in 0..nq {
                k[(pan * nq + i, pan * nq + j)] = 0.5 * (block[(i, j)] + block[(j, i)]);
            }
        }
    }

    for i in 0..n {
        for j in 0..n {
            k[(i, j)] /= (cw[i] * cw[j]).sqrt();
        }
    }
    k
}

/// Above this spread of ln|f| inside one panel, polynomial interpolation of
/// P and Q themselves loses all accuracy.
const WIDE_LOG_RANGE: f64 = 3.0;

/// Spread of ln|f| over the samples, None if f vanishes or changes sign.
fn log_range(f: &[Scaled]) -> Option<f64> {
    let first = f.first()?.u.signum();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in f {
        if x.u == 0.0 || x.u.signum() != first {
            return None;
        }
        let l = x.u.abs().ln() + x.ln_scale;
        lo = lo.min(l);
        hi = hi.max(l);
    }
    Some(hi - lo)
}

/// In-panel block for sign-definite P, Q of wide dynamic range: the inner
/// integrals are split at each outer node and evaluated by Gauss rules on
/// the two pieces, with ln|P| - power ln r and ln|Q| - (1 - power) ln r
/// interpolated from the fine nodes.
fn log_interpolated_block(
    grid: &PanelGrid,
    pan: usize,
    s: &[f64],
    p: &[Scaled],
    q: &[Scaled],
    power: f64,
) -> DMatrix<f64> {
    let (nq, nf) = (grid.order, grid.fine);
    let panel = grid.panels[pan];
    let (c, h) = (0.5 * (panel.lo + panel.hi), 0.5 * (panel.hi - panel.lo));
    let xf = grid.fine_unit_nodes();
    let xc = grid.coarse_unit_nodes();
    let rule = gauss_legendre(nf);
    let ln_r = |r: f64| r.ln();
    let rf: Vec<f64> = xf.iter().map(|&x| c + h * x).collect();
    let lnp: Vec<f64> = p.iter().map(|x| x.u.abs().ln() + x.ln_scale).collect();
    let lnq: Vec<f64> = q.iter().map(|x| x.u.abs().ln() + x.ln_scale).collect();
    let lp: Vec<f64> = lnp
        .iter()
        .zip(&rf)
        .map(|(l, &r)| l - power * ln_r(r))
        .collect();
    let lq: Vec<f64> = lnq
        .iter()
        .zip(&rf)
        .map(|(l, &r)| l - (1.0 - power) * ln_r(r))
        .collect();
    let sign = p[0].u.signum() * q[0].u.signum();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    // inner[m][j] = Q(r_m) int_lo^r_m l_j s P + P(r_m) int_r_m^hi l_j s Q
    let mut inner = vec![vec![0.0; nq]; nf];
    for m in 0..nf {
        let rm = rf[m];
        for (a, b, from_p) in [(panel.lo, rm, true), (rm, panel.hi, false)] {
            let half = 0.5 * (b - a);
            if half <= 0.0 {
                continue;
            }
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let x = a + half * (1.0 + t);
                let u = (x - c) / h;
                let li = lagrange_row(xf, u);
                let sv = dot(&li, s);
                let ln_val = if from_p {
                    dot(&li, &lp) + power * ln_r(x) + lnq[m]
                } else {
                    dot(&li, &lq) + (1.0 - power) * ln_r(x) + lnp[m]
                };
                let v = half * w * sv * sign * ln_val.exp();
                let basis = lagrange_row(xc, u);
                for j in 0..nq {
                    inner[m][j] += v * basis[j];
                }
            }
        }
    }
    let wf = grid.fine_unit_weights();
    let mut block = DMatrix::<f64>::zeros(nq, nq);
    for i in 0..nq {
        for j in 0..nq {
            let mut sum = 0.0;
            for m in 0..nf {
                sum += h * wf[m] * grid.basis_at_fine[m][i] * s[m] * inner[m][j];
            }
            block[(i, j)] = sum;
        }
    }
    block
}

/// Coefficients (1/sqrt(w_i)) int l_i s f of s f in the orthonormal basis.
pub(crate) fn project(grid: &PanelGrid, s: &[f64], f: &[Scaled]) -> DVector<f64> {
    let (nq, nf) = (grid.order, grid.fine);
    let fw = grid.fine_weights();
    let cw = grid.coarse_weights();
    let mut y = DVector::zeros(grid.len());
    for pan in 0..grid.panels.len() {
        for m in 0..nf {
            let idx = pan * nf + m;
            let v = fw[idx] * s[idx] * f[idx].value();
            for i in 0..nq {
                y[pan * nq + i] += grid.basis_at_fine[m][i] * v;
            }
        }
    }
    for i in 0..y.len() {
        y[i] /= cw[i].sqrt();
    }
    y
}

/// Galerkin matrix of multiplication by sign(V) in the orthonormal basis.
pub(crate) fn sign_matrix(grid: &PanelGrid, sign: &[f64]) -> DMatrix<f64> {
    let (nq, nf) = (grid.order, grid.fine);
    let fw = grid.fine_weights();
    let cw = grid.coarse_weights();
    let mut j = DMatrix::zeros(grid.len(), grid.len());
    for pan in 0..grid.panels.len() {
        for m in 0..nf {
            let idx = pan * nf + m;
            for a in 0..nq {
                for b in 0..nq {
                    j[(pan * nq + a, pan * nq + b)] +=
                        fw[idx] * grid.basis_at_fine[m][a] * grid.basis_at_fine[m][b] * sign[idx];
                }
            }
        }
    }
    for a in 0..grid.len() {
        for b in 0..grid.len() {
            j[(a, b)] /= (cw[a] * cw[b]).sqrt();
        }
    }
    j
}

/// Panel grid on [0, r_hi] resolving the local wavelength of E against V.
pub(crate) fn support_grid(
    dimension: Dimension,
    r_hi: f64,
    breaks: &[f64],
    v_scale: f64,
    energy: f64,
    hbar: f64,
    opts: &KernelOptions,
) -> Result<PanelGrid> {
    let width = (3.0 * hbar / (v_scale + energy.abs()).sqrt()).min(0.25);
    let mut grid = PanelGrid::new(0.0, r_hi, breaks, width, opts.order)?;
    if dimension == Dimension::Two {
        grid = grid.graded_toward_lo(8, 0.3);
    }
    while grid.len() < opts.min_nodes {
        grid = grid.refined();
    }
    Ok(grid)
}

/// Discretised A^ext(E) = Re, B^ext(E) = Im of sqrt(V0) R^ext(E + i0) sqrt(V0)
/// and, for E < E+, K_int = sqrt(V0) (H^int + V0 - E)^{-1} sqrt(V0).
#[derive(Clone, Debug)]
pub struct BsKernels {
    pub channel: Channel,
    pub energy: f64,
    pub hbar: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// B = y y^T / (hbar^2 k)
    pub y: DVector<f64>,
    pub k_int: Option<DMatrix<f64>>,
    /// ||B||
    pub b_norm: f64,
    /// ||A - K_int||, from the rank-one form of the difference
    pub a_minus_k_int_norm: Option<f64>,
    pub wronskian_drift: f64,
    pub refinements: usize,
}

/// Count of eigenvalues above 1 and the smallest distance of the spectrum to 1.
pub(crate) fn count_above_one(m: &DMatrix<f64>) -> (usize, f64) {
    let ev = symmetric_eigenvalues(m);
    let n = ev.iter().filter(|&&l| l > 1.0).count();
    let d = ev
        .iter()
        .map(|l| (l - 1.0).abs())
        .fold(f64::INFINITY, f64::min);
    (n, d)
}

impl BsKernels {
    /// N((1, oo); A + cot(theta/2) B) with the distance of the spectrum to 1.
    pub fn count_with_angle(&self, theta: f64) -> (usize, f64) {
        let c = 1.0 / (0.5 * theta).tan();
        count_above_one(&(&self.a + &self.b * c))
    }

    /// N((1, oo); K_int).
    pub fn interior_count(&self) -> Option<(usize, f64)> {
        self.k_int.as_ref().map(count_above_one)
    }

    /// dist(1, sigma(A)).
    pub fn a_gap(&self) -> f64 {
        count_above_one(&self.a).1
    }
}

pub fn birman_schwinger_kernels(
    triple: &PotentialTriple,
    channel: Channel,
    energy: f64,
    hbar: f64,
    opts: &KernelOptions,
) -> Result<BsKernels> {
    let v_scale = (triple.fill_level() - energy)
        .abs()
        .max(triple.v_ext().sup_abs(triple.v0_support()));
    let grid = support_grid(
        channel.dimension,
        triple.v0_support(),
        &triple.v0_breakpoints(),
        v_scale,
        energy,
        hbar,
        opts,
    )?;
    kernels_on_grid(triple, channel, energy, hbar, &grid, opts)
}

fn kernels_on_grid(
    triple: &PotentialTriple,
    channel: Channel,
    energy: f64,
    hbar: f64,
    grid: &PanelGrid,
    opts: &KernelOptions,
) -> Result<BsKernels> {
    if channel.dimension != triple.dimension {
        return Err(Error::Structural(
            "channel dimension differs from the triple".into(),
        ));
    }
    let fine = grid.fine_nodes();
    let s: Vec<f64> = fine.iter().map(|&r| triple.v0(r).sqrt()).collect();
    let omega2 = triple.options.omega2;
    let mut points = fine.clone();
    points.push(omega2);
    let sol = normalized_solutions(triple.v_ext(), channel, energy, hbar, &points, &opts.solver)?;
    let nf = fine.len();
    let k = sol.k;
    let h2k = hbar * hbar * k;
    let p = &sol.reg[..nf];
    let q_re: Vec<Scaled> = sol.irr[..nf]
        .iter()
        .map(|x| Scaled {
            u: -x.u / h2k,
            ..*x
        })
        .collect();
    let a = galerkin(grid, &s, p, &q_re, channel.regular_exponent());
    let y = project(grid, &s, p);
    let b = &y * y.transpose() / h2k;
    let b_norm = y.norm_squared() / h2k;

    let (k_int, a_minus) = if energy < triple.options.e_plus {
        let (ki, lam) = interior_part(
            triple, channel, energy, hbar, grid, &s, &sol.reg, &sol.irr, opts,
        )?;
        (Some(ki), Some(lam.abs() * k * b_norm))
    } else {
        (None, None)
    };

    Ok(BsKernels {
        channel,
        energy,
        hbar,
        nodes: grid.coarse_nodes(),
        weights: grid.coarse_weights(),
        a,
        b,
        y,
        k_int,
        b_norm,
        a_minus_k_int_norm: a_minus,
        wronskian_drift: sol.drift,
        refinements: 0,
    })
}

/// K_int and the coefficient lambda' in v/k - u_dec/W = lambda' u on [0, omega2].
#[allow(clippy::too_many_arguments)]
fn interior_part(
    triple: &PotentialTriple,
    channel: Channel,
    energy: f64,
    hbar: f64,
    grid: &PanelGrid,
    s: &[f64],
    reg: &[Scaled],
    irr: &[Scaled],
    opts: &KernelOptions,
) -> Result<(DMatrix<f64>, f64)> {
    let cap = triple.cap_level();
    if energy >= cap {
        return Err(Error::Precondition(format!(
            "E = {energy} is not below the cap level {cap}"
        )));
    }
    let o = &triple.options;
    let pot = triple.v_int_plus_v0();
    let problem = RadialProblem::new(pot, channel, energy, hbar)?;
    let kappa = (cap - energy).sqrt() / hbar;
    let r_far = o.omega2 + o.blend_width + 20.0 / kappa;
    let y0 = problem.decaying_start(r_far)?;
    let fine = grid.fine_nodes();
    let nf = fine.len();
    let mut points = fine;
    points.push(o.omega2);
    let dec = problem.propagate(r_far, y0, points[0].min(o.omega2), &points, &opts.solver)?;
    let (u2, v2, d2) = (reg[nf], irr[nf], dec.samples[nf]);
    let (wm, wl) = wronskian(&u2, &d2);
    if wm == 0.0 {
        return Err(Error::NearResonance {
            energy,
            distance: 0.0,
        });
    }
    let (wv, wvl) = wronskian(&v2, &d2);
    let k = energy.sqrt() / hbar;
    let lambda = wv / (k * wm) * (wvl - wl).exp();
    let c = -1.0 / (hbar * hbar * wm);
    let q: Vec<Scaled> = dec.samples[..nf]
        .iter()
        .map(|x| Scaled {
            u: c * x.u,
            du: 0.0,
            ln_scale: x.ln_scale - wl,
        })
        .collect();
    Ok((
        galerkin(grid, s, &reg[..nf], &q, channel.regular_exponent()),
        lambda,
    ))
}

/// Eigenvalues at or above this modulus decide convergence; counting only
/// looks at the spectrum near 1.
const STABLE_FLOOR: f64 = 0.5;

fn stable_spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    symmetric_eigenvalues(m)
}

/// Largest relative distance from an eigenvalue of one list above the floor
/// to the nearest eigenvalue of the other, both ways.
fn spectra_agree(a: &[f64], b: &[f64], tol: f64) -> (bool, f64) {
    let one_way = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .filter(|l| l.abs() >= STABLE_FLOOR)
            .map(|l| {
                y.iter()
                    .map(|m| (l - m).abs())
                    .fold(f64::INFINITY, f64::min)
                    / l.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    };
    let d = one_way(a, b).max(one_way(b, a));
    (d <= tol, d)
}

/// Kernels on successively halved panels until every eigenvalue of A and
/// K_int above 0.5 in modulus is stable to `opts.tol`.
pub fn bs_kernels_converged(
    triple: &PotentialTriple,
    channel: Channel,
    energy: f64,
    hbar: f64,
    opts: &KernelOptions,
) -> Result<BsKernels> {
    let v_scale = (triple.fill_level() - energy)
        .abs()
        .max(triple.v_ext().sup_abs(triple.v0_support()));
    let mut grid = support_grid(
        channel.dimension,
        triple.v0_support(),
        &triple.v0_breakpoints(),
        v_scale,
        energy,
        hbar,
        opts,
    )?;
    let mut prev = kernels_on_grid(triple, channel, energy, hbar, &grid, opts)?;
    let mut last_diff = f64::INFINITY;
    for level in 1..=opts.max_doublings {
        grid = grid.refined();
        let mut next = kernels_on_grid(triple, channel, energy, hbar, &grid, opts)?;
        next.refinements = level;
        let (ok_a, da) = spectra_agree(
            &stable_spectrum(&prev.a),
            &stable_spectrum(&next.a),
            opts.tol,
        );
        let (ok_k, dk) = match (&prev.k_int, &next.k_int) {
            (Some(x), Some(y)) => spectra_agree(&stable_spectrum(x), &stable_spectrum(y), opts.tol),
            _ => (true, 0.0),
        };
        last_diff = da.max(dk);
        if ok_a && ok_k {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature {
        achieved: last_diff,
        requested: opts.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::Panel;
    use crate::potential::{build_triple, RadialPotential, TripleOptions};
    use std::sync::Arc;

    fn ring_triple() -> PotentialTriple {
        let v = Arc::new(RadialPotential::ring(1.0, 2.0, 2.0, 0.05).unwrap());
        build_triple(
            v,
            Dimension::Three,
            TripleOptions::thirds(1.0, 2.0, 1.0, 1.5, 1.8),
        )
        .unwrap()
    }

    #[test]
    fn galerkin_of_separable_kernel_matches_direct_double_integral() {
        // kernel min(r, r') = P(r<) Q(r>) with P = r, Q = 1 on [0, 1]
        let grid = PanelGrid::from_panels(
            vec![Panel { lo: 0.0, hi: 0.4 }, Panel { lo: 0.4, hi: 1.0 }],
            8,
        );
        let fine = grid.fine_nodes();
        let s = vec![1.0; fine.len()];
        let p: Vec<Scaled> = fine.iter().map(|&r| Scaled::new(r, 0.0)).collect();
        let q: Vec<Scaled> = fine.iter().map(|_| Scaled::new(1.0, 0.0)).collect();
        let k = galerkin(&grid, &s, &p, &q, 1.0);
        // eigenvalues of the integral operator min(r, r') on [0,1]: 1/((n - 1/2) pi)^2
        let ev = symmetric_eigenvalues(&k);
        let top = ev.last().unwrap();
        let exact = 1.0 / (0.5 * std::f64::consts::PI).powi(2);
        assert!((top - exact).abs() < 1e-10, "{top} vs {exact}");
        let second = ev[ev.len() - 2];
        assert!((second - 1.0 / (1.5 * std::f64::consts::PI).powi(2)).abs() < 1e-10);
    }

    #[test]
    fn ring_kernels_are_symmetric_and_b_is_psd() {
        let t = ring_triple();
        let ch = Channel::new(Dimension::Three, 0);
        let k = birman_schwinger_kernels(&t, ch, 1.0, 0.2, &KernelOptions::default()).unwrap();
        let asym = (&k.a - k.a.transpose()).abs().max();
        assert!(asym <= 1e-10 * k.a.abs().max());
        let ki = k.k_int.as_ref().unwrap();
        assert!((ki - ki.transpose()).abs().max() <= 1e-10 * ki.abs().max());
        let ev = symmetric_eigenvalues(&k.b);
        assert!(ev[0] >= -1e-14 * k.b_norm.max(1e-300));
        assert!((ev.last().unwrap() - k.b_norm).abs() <= 1e-10 * k.b_norm);
    }

    #[test]
    fn interior_count_is_zero_below_ground_state_and_positive_above_threshold_energy() {
        let t = ring_triple();
        let ch = Channel::new(Dimension::Three, 0);
        let low = birman_schwinger_kernels(&t, ch, 0.01, 0.2, &KernelOptions::default()).unwrap();
        assert_eq!(low.interior_count().unwrap().0, 0);
        let high = birman_schwinger_kernels(&t, ch, 1.45, 0.2, &KernelOptions::default()).unwrap();
        assert!(high.interior_count().unwrap().0 >= 1);
    }

    #[test]
    fn above_e_plus_has_no_interior_kernel() {
        let t = ring_triple();
        let k = birman_schwinger_kernels(
            &t,
            Channel::new(Dimension::Three, 0),
            1.6,
            0.2,
            &KernelOptions::default(),
        )
        .unwrap();
        assert!(k.k_int.is_none());
    }
}
