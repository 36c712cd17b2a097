//! Gauss-Legendre rules, composite panels with spectral indefinite
//! integration, and tanh-sinh quadrature for endpoint singularities.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre polynomial P_n and its derivative at x.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

fn compute_rule(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// Cached n-point rule on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(compute_rule(n)))
        .clone()
}

/// Lagrange basis through `nodes`, evaluated at x.
pub fn lagrange_row(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    let mut out = vec![1.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        for k in 0..n {
            if k != j {
                *o *= (x - nodes[k]) / (nodes[j] - nodes[k]);
            }
        }
    }
    out
}

/// C[m][n] = integral from -1 to x_m of the n-th Lagrange polynomial on the
/// Gauss nodes x (exact for the interpolant).
pub fn cumulative_matrix(rule: &GaussRule) -> Vec<Vec<f64>> {
    let n = rule.nodes.len();
    let pk: Vec<Vec<f64>> = rule
        .nodes
        .iter()
        .map(|&x| (0..=n).map(|k| legendre(k, x).0).collect())
        .collect();
    let mut c = vec![vec![0.0; n]; n];
    for m in 0..n {
        let xm = rule.nodes[m];
        for j in 0..n {
            let mut s = xm + 1.0;
            for k in 1..n {
                s += pk[j][k] * (pk[m][k + 1] - pk[m][k - 1]);
            }
            c[m][j] = 0.5 * rule.weights[j] * s;
        }
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Panel {
    pub lo: f64,
    pub hi: f64,
}

/// Composite Gauss-Legendre grid. Each panel carries `order` coarse nodes
/// (the Galerkin basis) and `fine` nodes used for the kernel integrals.
#[derive(Clone, Debug)]
pub struct PanelGrid {
    pub panels: Vec<Panel>,
    pub order: usize,
    pub fine: usize,
    coarse_rule: Arc<GaussRule>,
    fine_rule: Arc<GaussRule>,
    /// coarse Lagrange basis at the fine nodes, [fine][coarse]
    pub basis_at_fine: Vec<Vec<f64>>,
    /// cumulative integration on the fine nodes of [-1, 1]
    pub cumulative: Vec<Vec<f64>>,
}

impl PanelGrid {
    /// Panels covering [lo, hi], split at every breakpoint inside and then
    /// subdivided so that no panel is wider than `max_width`.
    pub fn new(lo: f64, hi: f64, breaks: &[f64], max_width: f64, order: usize) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!(
                "panel interval [{lo}, {hi}] is empty"
            )));
        }
        if !(max_width > 0.0) {
            return Err(Error::Domain("panel width must be positive".into()));
        }
        let mut cuts = vec![lo];
        let mut inner: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|&b| b > lo + 1e-12 && b < hi - 1e-12)
            .collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        cuts.extend(inner);
        cuts.push(hi);
        let mut panels = Vec::new();
        for w in cuts.windows(2) {
            let n = ((w[1] - w[0]) / max_width).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / n as f64;
            for i in 0..n {
                let a = w[0] + h * i as f64;
                let b = if i + 1 == n { w[1] } else { a + h };
                panels.push(Panel { lo: a, hi: b });
            }
        }
        Ok(Self::from_panels(panels, order))
    }

    pub fn from_panels(panels: Vec<Panel>, order: usize) -> Self {
        let fine = 2 * order;
        let coarse_rule = gauss_legendre(order);
        let fine_rule = gauss_legendre(fine);
        let basis_at_fine = fine_rule
            .nodes
            .iter()
            .map(|&x| lagrange_row(&coarse_rule.nodes, x))
            .collect();
        let cumulative = cumulative_matrix(&fine_rule);
        PanelGrid {
            panels,
            order,
            fine,
            coarse_rule,
            fine_rule,
            basis_at_fine,
            cumulative,
        }
    }

    /// Geometric grading toward `lo` (used where solutions behave like r^(1/2)).
    pub fn graded_toward_lo(mut self, levels: usize, ratio: f64) -> Self {
        if self.panels.is_empty() || levels == 0 {
            return self;
        }
        let first = self.panels.remove(0);
        let mut cuts = vec![first.hi];
        let mut w = first.hi - first.lo;
        for _ in 0..levels {
            w *= ratio;
            cuts.push(first.lo + w);
        }
        cuts.push(first.lo);
        cuts.reverse();
        let mut graded: Vec<Panel> = cuts
            .windows(2)
            .map(|c| Panel { lo: c[0], hi: c[1] })
            .collect();
        graded.extend(self.panels);
        Self::from_panels(graded, self.order)
    }

    pub fn len(&self) -> usize {
        self.panels.len() * self.order
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    /// Refined copy with every panel halved.
    pub fn refined(&self) -> Self {
        let panels = self
            .panels
            .iter()
            .flat_map(|p| {
                let m = 0.5 * (p.lo + p.hi);
                [Panel { lo: p.lo, hi: m }, Panel { lo: m, hi: p.hi }]
            })
            .collect();
        Self::from_panels(panels, self.order)
    }

    /// Fine Gauss nodes on [-1, 1].
    pub fn fine_unit_nodes(&self) -> &[f64] {
        &self.fine_rule.nodes
    }

    /// Fine Gauss weights on [-1, 1].
    pub fn fine_unit_weights(&self) -> &[f64] {
        &self.fine_rule.weights
    }

    /// Coarse Gauss nodes on [-1, 1].
    pub fn coarse_unit_nodes(&self) -> &[f64] {
        &self.coarse_rule.nodes
    }

    pub fn coarse_nodes(&self) -> Vec<f64> {
        self.map_nodes(&self.coarse_rule.nodes)
    }

    pub fn coarse_weights(&self) -> Vec<f64> {
        self.map_weights(&self.coarse_rule.weights)
    }

    pub fn fine_nodes(&self) -> Vec<f64> {
        self.map_nodes(&self.fine_rule.nodes)
    }

    pub fn fine_weights(&self) -> Vec<f64> {
        self.map_weights(&self.fine_rule.weights)
    }

    fn map_nodes(&self, nodes: &[f64]) -> Vec<f64> {
        self.panels
            .iter()
            .flat_map(|p| {
                let (c, h) = (0.5 * (p.lo + p.hi), 0.5 * (p.hi - p.lo));
                nodes.iter().map(move |&x| c + h * x)
            })
            .collect()
    }

    fn map_weights(&self, weights: &[f64]) -> Vec<f64> {
        self.panels
            .iter()
            .flat_map(|p| {
                let h = 0.5 * (p.hi - p.lo);
                weights.iter().map(move |&w| h * w)
            })
            .collect()
    }

    /// Integral of a function sampled at the fine nodes.
    pub fn integrate_fine(&self, values: &[f64]) -> f64 {
        self.fine_weights()
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }
}

/// Tanh-sinh quadrature on [a, b] for integrands with endpoint singularities.
/// Halves the step until successive estimates agree to `tol` (absolute).
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let c = 0.5 * (a + b);
    let h2 = 0.5 * (b - a);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let term = |t: f64| -> f64 {
        let s = half_pi * t.sinh();
        let ch = s.cosh();
        let x = s.tanh();
        let w = half_pi * t.cosh() / (ch * ch);
        // distance to the nearer endpoint computed without cancellation
        let e = 1.0 / (s.abs().exp() * ch);
        let r = if x >= 0.0 { b - h2 * e } else { a + h2 * e };
        if !(r > a && r < b) || w < 1e-300 {
            return 0.0;
        }
        let v = f(r);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let _ = c;
    let tmax = 4.5;
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1;
    while (k as f64) * h <= tmax {
        let t = k as f64 * h;
        sum += term(t) + term(-t);
        k += 1;
    }
    let mut prev = h * sum * h2;
    let mut err = f64::INFINITY;
    for _ in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= tmax {
            let t = k as f64 * h;
            sum += term(t) + term(-t);
            k += 2;
        }
        let cur = h * sum * h2;
        err = (cur - prev).abs();
        prev = cur;
        if err <= tol.max(1e-15 * cur.abs()) {
            return Ok((cur, err));
        }
    }
    if err <= 1e3 * tol {
        Ok((prev, err))
    } else {
        Err(Error::Quadrature {
            achieved: err,
            requested: tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let r = gauss_legendre(7);
        let s: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w * x.powi(12))
            .sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-15);
        let total: f64 = r.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cumulative_matrix_integrates_interpolant() {
        let r = gauss_legendre(12);
        let c = cumulative_matrix(&r);
        let g: Vec<f64> = r.nodes.iter().map(|x| x.cos()).collect();
        for (m, &x) in r.nodes.iter().enumerate() {
            let s: f64 = c[m].iter().zip(&g).map(|(a, b)| a * b).sum();
            let exact = x.sin() + 1f64.sin();
            assert!((s - exact).abs() < 1e-13, "{s} vs {exact}");
        }
    }

    #[test]
    fn panels_respect_breakpoints() {
        let g = PanelGrid::new(0.0, 2.0, &[0.7, 1.3], 0.25, 4).unwrap();
        assert!(g.panels.iter().any(|p| (p.hi - 0.7).abs() < 1e-15));
        assert!(g.panels.iter().all(|p| p.hi - p.lo <= 0.25 + 1e-12));
        let w: f64 = g.coarse_weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_handles_sqrt_endpoints() {
        let (v, _) = tanh_sinh(|x| (1.0 - x * x).sqrt(), -1.0, 1.0, 1e-13).unwrap();
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let (v, _) = tanh_sinh(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
    }
}
