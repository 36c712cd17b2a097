//! Random unitary families with known structure, and an independent flow
//! oracle that tracks eigenvalues along a fine grid.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MatrixCallback, UnitaryFamily};
use crate::error::Result;
use crate::exec::Execution;
use crate::numerics::linalg::{hermitian_exp_i, op_norm, unitary_eigenphases, TWO_PI};

/// Hermitian matrix with Gaussian entries rescaled to operator norm `norm`.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize, norm: f64) -> DMatrix<Complex64> {
    let mut g = || -> f64 {
        // Box-Muller
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (TWO_PI * u2).cos()
    };
    let raw = DMatrix::from_fn(n, n, |_, _| Complex64::new(g(), g()));
    let h = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
    let s = op_norm(&h);
    if s == 0.0 {
        h
    } else {
        h * Complex64::new(norm / s, 0.0)
    }
}

pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> DMatrix<Complex64> {
    hermitian_exp_i(&random_hermitian(rng, n, 3.0), 1.0)
}

fn diag(phases: &[f64]) -> DMatrix<Complex64> {
    let n = phases.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, phases[i])
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// U(t) = exp(i t A) exp(i t^2 B) and
/// U~(t) = W(t) V D(t) V* W(t)*, W(t) = exp(i t C),
/// D(t) = diag(exp(i t (2 pi n_k + chi_k))), |chi_k| <= phi.
/// Both start at I, sigma(U~(1)) = {e^{i chi_k}} and sf(-1; U~) = sum n_k.
#[derive(Clone, Debug)]
pub struct ProductFamilies {
    pub dimension: usize,
    pub phi: f64,
    pub a: DMatrix<Complex64>,
    pub b: DMatrix<Complex64>,
    pub c: DMatrix<Complex64>,
    pub v: DMatrix<Complex64>,
    pub windings: Vec<i32>,
    pub chi: Vec<f64>,
}

impl ProductFamilies {
    /// Random instance; `closed` forces chi = 0 so that U~(1) = I.
    pub fn random(seed: u64, dimension: usize, phi: f64, closed: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let na = rng.random_range(1.0..9.0);
        let a = random_hermitian(&mut rng, dimension, na);
        let nb = rng.random_range(0.5..6.0);
        let b = random_hermitian(&mut rng, dimension, nb);
        let nc = rng.random_range(0.5..4.0);
        let c = random_hermitian(&mut rng, dimension, nc);
        let v = random_unitary(&mut rng, dimension);
        let windings = (0..dimension).map(|_| rng.random_range(-2..=2)).collect();
        let chi = (0..dimension)
            .map(|_| {
                if closed {
                    0.0
                } else {
                    rng.random_range(-phi..=phi)
                }
            })
            .collect();
        ProductFamilies {
            dimension,
            phi,
            a,
            b,
            c,
            v,
            windings,
            chi,
        }
    }

    pub fn expected_m(&self) -> i64 {
        self.windings.iter().map(|&n| n as i64).sum()
    }

    pub fn u(&self, t: f64) -> DMatrix<Complex64> {
        hermitian_exp_i(&self.a, t) * hermitian_exp_i(&self.b, t * t)
    }

    pub fn u_tilde(&self, t: f64) -> DMatrix<Complex64> {
        let phases: Vec<f64> = self
            .windings
            .iter()
            .zip(&self.chi)
            .map(|(&n, &x)| t * (TWO_PI * n as f64 + x))
            .collect();
        let w = hermitian_exp_i(&self.c, t) * &self.v;
        &w * diag(&phases) * w.adjoint()
    }

    pub fn u_family(&self, points: usize) -> Result<UnitaryFamily> {
        let me = self.clone();
        UnitaryFamily::from_fn(uniform(points), move |t| Ok(me.u(t)), Execution::Sequential)
    }

    pub fn u_tilde_family(&self, points: usize) -> Result<UnitaryFamily> {
        let me = self.clone();
        UnitaryFamily::from_fn(
            uniform(points),
            move |t| Ok(me.u_tilde(t)),
            Execution::Sequential,
        )
    }

    pub fn product_family(&self, points: usize) -> Result<UnitaryFamily> {
        let me = self.clone();
        UnitaryFamily::from_fn(
            uniform(points),
            move |t| Ok(me.u_tilde(t) * me.u(t)),
            Execution::Sequential,
        )
    }
}

pub fn uniform(points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// exp(i t A) U on [0, 1].
pub fn rotation_family(
    a: &DMatrix<Complex64>,
    u: &DMatrix<Complex64>,
    points: usize,
) -> Result<UnitaryFamily> {
    let (a, u) = (a.clone(), u.clone());
    let cb: MatrixCallback = Arc::new(move |t| Ok(hermitian_exp_i(&a, t) * &u));
    let grid = uniform(points);
    let matrices = grid.iter().map(|&t| cb(t)).collect::<Result<Vec<_>>>()?;
    Ok(UnitaryFamily::SampledMatrices {
        grid,
        matrices,
        callback: Some(cb),
    })
}

fn wrap(d: f64) -> f64 {
    let r = (d + PI).rem_euclid(TWO_PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Flow through e^{i theta} by following every eigenvalue across `steps`
/// uniform steps on [t0, t1]. Neighbouring spectra are matched by the cyclic
/// shift of the sorted phases with the least total motion.
pub fn tracked_flow<F>(f: F, t0: f64, t1: f64, steps: usize, theta: f64) -> Result<i64>
where
    F: Fn(f64) -> DMatrix<Complex64>,
{
    let sorted = |t: f64| -> Result<Vec<f64>> {
        let mut p = unitary_eigenphases(&f(t))?;
        p.sort_by(f64::total_cmp);
        Ok(p)
    };
    let mut prev = sorted(t0)?;
    let n = prev.len();
    let mut flow = 0i64;
    for s in 1..=steps {
        let t = t0 + (t1 - t0) * s as f64 / steps as f64;
        let next = sorted(t)?;
        let mut best = (f64::INFINITY, 0usize);
        for shift in 0..n {
            let cost: f64 = (0..n)
                .map(|i| wrap(next[(i + shift) % n] - prev[i]).abs())
                .sum();
            if cost < best.0 {
                best = (cost, shift);
            }
        }
        for (i, &a) in prev.iter().enumerate() {
            let d = wrap(next[(i + best.1) % n] - a);
            flow += (((a + d - theta) / TWO_PI).floor() - ((a - theta) / TWO_PI).floor()) as i64;
        }
        prev = next;
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{spectral_flow, FlowOptions};
    use crate::numerics::linalg::unitarity_defect;

    #[test]
    fn families_start_at_identity_and_have_the_prescribed_end_spectrum() {
        let p = ProductFamilies::random(7, 5, 0.6, false);
        let id = DMatrix::<Complex64>::identity(5, 5);
        assert!(op_norm(&(p.u(0.0) - &id)) < 1e-12);
        assert!(op_norm(&(p.u_tilde(0.0) - &id)) < 1e-12);
        assert!(unitarity_defect(&p.u_tilde(0.7)) < 1e-12);
        let mut end: Vec<f64> = unitary_eigenphases(&p.u_tilde(1.0))
            .unwrap()
            .into_iter()
            .map(|x| wrap(x))
            .collect();
        end.sort_by(f64::total_cmp);
        let mut chi = p.chi.clone();
        chi.sort_by(f64::total_cmp);
        for (a, b) in end.iter().zip(&chi) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn tracker_agrees_with_gap_segmentation_on_a_random_family() {
        let p = ProductFamilies::random(11, 4, 0.5, false);
        let fam = p.u_family(64).unwrap();
        for &th in &[0.4, 2.0, 4.4] {
            let a = spectral_flow(&fam, th, &FlowOptions::default())
                .unwrap()
                .flow;
            let b = tracked_flow(|t| p.u(t), 0.0, 1.0, 10_000, th).unwrap();
            assert_eq!(a, b, "theta {th}");
        }
        let m = tracked_flow(|t| p.u_tilde(t), 0.0, 1.0, 10_000, PI).unwrap();
        assert_eq!(m, p.expected_m());
    }
}
