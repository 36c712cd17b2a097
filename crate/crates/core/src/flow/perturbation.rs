use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{count_phases_on_arc, spectral_flow, FlowOptions, MatrixCallback, UnitaryFamily};
use crate::error::{Error, Result};
use crate::numerics::linalg::{op_norm, unitary_eigenphases, TWO_PI};

const ID_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductCheck {
    pub theta: f64,
    pub phi: f64,
    /// sf(-1; U~)
    pub m: i64,
    /// sf(e^{i theta}; M), M = U~ U
    pub sf_product: i64,
    /// sf(e^{i(theta + phi)}; U)
    pub sf_u_plus: i64,
    /// sf(e^{i(theta - phi)}; U)
    pub sf_u_minus: i64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

impl ProductCheck {
    pub fn holds(&self) -> bool {
        self.lower_holds && self.upper_holds
    }
}

fn matrices(f: &UnitaryFamily) -> Result<(&[f64], &[DMatrix<Complex64>], Option<&MatrixCallback>)> {
    match f {
        UnitaryFamily::SampledMatrices {
            grid,
            matrices,
            callback,
        } => Ok((grid, matrices, callback.as_ref())),
        UnitaryFamily::DiagonalBranches { .. } => Err(Error::Structural(
            "product families need sampled matrices".into(),
        )),
    }
}

fn is_identity(u: &DMatrix<Complex64>) -> bool {
    op_norm(&(u - DMatrix::<Complex64>::identity(u.nrows(), u.ncols()))) <= ID_TOL
}

/// M(t) = U~(t) U(t) on the common grid; refinable when both factors are.
pub fn product_family(u: &UnitaryFamily, ut: &UnitaryFamily) -> Result<UnitaryFamily> {
    let (g1, m1, c1) = matrices(u)?;
    let (g2, m2, c2) = matrices(ut)?;
    if g1 != g2 {
        return Err(Error::Structural(
            "U and U~ are sampled on different grids".into(),
        ));
    }
    if m1.first().map(|m| m.nrows()) != m2.first().map(|m| m.nrows()) {
        return Err(Error::Structural(
            "U and U~ act on spaces of different dimension".into(),
        ));
    }
    let prod: Vec<DMatrix<Complex64>> = m1.iter().zip(m2).map(|(a, b)| b * a).collect();
    let callback: Option<MatrixCallback> = match (c1, c2) {
        (Some(a), Some(b)) => {
            let (a, b) = (a.clone(), b.clone());
            Some(Arc::new(move |t| Ok(b(t)? * a(t)?)))
        }
        _ => None,
    };
    Ok(UnitaryFamily::SampledMatrices {
        grid: g1.to_vec(),
        matrices: prod,
        callback,
    })
}

fn signed_phase(p: f64) -> f64 {
    if p > PI {
        p - TWO_PI
    } else {
        p
    }
}

/// Two-sided bound sf(theta + phi; U) + m <= sf(theta; U~ U) <= sf(theta - phi; U) + m
/// for U(0) = U~(0) = I and sigma(U~(1)) within angle phi of 1.
pub fn product_perturbation_check(
    u: &UnitaryFamily,
    ut: &UnitaryFamily,
    theta: f64,
    phi: f64,
    opts: &FlowOptions,
) -> Result<ProductCheck> {
    if !(phi > 0.0 && phi < PI) {
        return Err(Error::Precondition(format!(
            "phi = {phi} must lie in (0, pi)"
        )));
    }
    if !(theta > phi && theta < TWO_PI - phi) {
        return Err(Error::Precondition(format!(
            "theta = {theta} must lie in (phi, 2 pi - phi)"
        )));
    }
    let (_, mu, _) = matrices(u)?;
    let (_, mt, _) = matrices(ut)?;
    if !is_identity(&mu[0]) || !is_identity(&mt[0]) {
        return Err(Error::Precondition(
            "both families must start at the identity".into(),
        ));
    }
    let end = mt.last().expect("validated family");
    let worst = unitary_eigenphases(end)?
        .into_iter()
        .map(|p| signed_phase(p).abs())
        .fold(0.0, f64::max);
    if worst > phi + 1e-12 {
        return Err(Error::Precondition(format!(
            "sigma(U~(1)) reaches angle {worst:.6} > phi = {phi}"
        )));
    }
    let m = spectral_flow(ut, PI, opts)?.flow;
    let sf_product = spectral_flow(&product_family(u, ut)?, theta, opts)?.flow;
    let sf_u_plus = spectral_flow(u, theta + phi, opts)?.flow;
    let sf_u_minus = spectral_flow(u, theta - phi, opts)?.flow;
    Ok(ProductCheck {
        theta,
        phi,
        m,
        sf_product,
        sf_u_plus,
        sf_u_minus,
        lower_holds: sf_u_plus + m <= sf_product,
        upper_holds: sf_product <= sf_u_minus + m,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualityCheck {
    pub m: i64,
    /// (theta, sf(theta; M), sf(theta; U))
    pub rows: Vec<(f64, i64, i64)>,
}

impl EqualityCheck {
    pub fn holds(&self) -> bool {
        self.rows.iter().all(|&(_, a, b)| a == b + self.m)
    }
}

/// sf(theta; U~ U) = sf(theta; U) + m at every probe angle when U~(1) = I.
pub fn equality_check(
    u: &UnitaryFamily,
    ut: &UnitaryFamily,
    thetas: &[f64],
    opts: &FlowOptions,
) -> Result<EqualityCheck> {
    let (_, mu, _) = matrices(u)?;
    let (_, mt, _) = matrices(ut)?;
    if !is_identity(&mu[0])
        || !is_identity(&mt[0])
        || !is_identity(mt.last().expect("validated family"))
    {
        return Err(Error::Precondition("need U(0) = U~(0) = U~(1) = I".into()));
    }
    let m = spectral_flow(ut, PI, opts)?.flow;
    let prod = product_family(u, ut)?;
    let mut rows = Vec::with_capacity(thetas.len());
    for &th in thetas {
        rows.push((
            th,
            spectral_flow(&prod, th, opts)?.flow,
            spectral_flow(u, th, opts)?.flow,
        ));
    }
    Ok(EqualityCheck { m, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationCheck {
    pub theta: f64,
    pub phi: f64,
    /// sf(e^{i theta}; {e^{itA} U})
    pub flow: i64,
    /// N(theta - phi, theta; U), when phi < theta
    pub upper: Option<i64>,
    /// -N(theta, theta + phi; U), when theta < 2 pi - phi
    pub lower: Option<i64>,
}

impl RotationCheck {
    pub fn holds(&self) -> bool {
        self.upper.is_none_or(|b| self.flow <= b) && self.lower.is_none_or(|b| self.flow >= b)
    }
}

/// Rotation-speed bounds for {e^{itA} U}, ||A|| <= phi < pi.
pub fn rotation_bound_check(
    a: &DMatrix<Complex64>,
    u: &DMatrix<Complex64>,
    phi: f64,
    theta: f64,
    points: usize,
    opts: &FlowOptions,
) -> Result<RotationCheck> {
    let na = op_norm(a);
    if !(phi < PI && na <= phi * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!(
            "need ||A|| = {na:.6} <= phi = {phi} < pi"
        )));
    }
    let fam = super::synthetic::rotation_family(a, u, points)?;
    let flow = spectral_flow(&fam, theta, opts)?.flow;
    let spec: Vec<(f64, u32)> = unitary_eigenphases(u)?
        .into_iter()
        .map(|p| (p, 1))
        .collect();
    let upper = (theta > phi).then(|| count_phases_on_arc(&spec, theta - phi, theta));
    let lower = (theta < TWO_PI - phi).then(|| -count_phases_on_arc(&spec, theta, theta + phi));
    Ok(RotationCheck {
        theta,
        phi,
        flow,
        upper,
        lower,
    })
}

#[cfg(test)]
mod tests {
    use super::super::synthetic::{random_hermitian, random_unitary, ProductFamilies};
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn trivial_u_tilde_gives_equality_with_m_zero() {
        let p = ProductFamilies::random(3, 3, 0.5, true);
        let u = p.u_family(32).unwrap();
        let id = UnitaryFamily::from_fn(
            super::super::synthetic::uniform(32),
            |_| Ok(DMatrix::<Complex64>::identity(3, 3)),
            crate::exec::Execution::Sequential,
        )
        .unwrap();
        let c = equality_check(&u, &id, &[0.5, 2.0, 5.0], &FlowOptions::default()).unwrap();
        assert_eq!(c.m, 0);
        assert!(c.holds());
    }

    #[test]
    fn commuting_diagonal_pair_is_tight_on_one_side() {
        // U(t) = diag(e^{3 i t}, e^{-i t}), U~(t) = diag(e^{0.5 i t}, 1), phi = 0.5
        let grid = super::super::synthetic::uniform(64);
        let d = |a: f64, b: f64| {
            DMatrix::from_fn(2, 2, |i, j| match (i, j) {
                (0, 0) => Complex64::from_polar(1.0, a),
                (1, 1) => Complex64::from_polar(1.0, b),
                _ => Complex64::new(0.0, 0.0),
            })
        };
        let u = UnitaryFamily::from_fn(
            grid.clone(),
            move |t| Ok(d(3.0 * t, -t)),
            crate::exec::Execution::Sequential,
        )
        .unwrap();
        let ut = UnitaryFamily::from_fn(
            grid,
            move |t| Ok(d(0.5 * t, 0.0)),
            crate::exec::Execution::Sequential,
        )
        .unwrap();
        // M = diag(e^{3.5 i t}, e^{-i t}); at theta = 3.2 the first phase reaches 3.5
        let c = product_perturbation_check(&u, &ut, 3.2, 0.5, &FlowOptions::default()).unwrap();
        assert_eq!((c.m, c.sf_product, c.sf_u_plus, c.sf_u_minus), (0, 1, 0, 1));
        assert!(c.holds());
        assert!(c.sf_product == c.sf_u_minus + c.m);
    }

    #[test]
    fn rotation_bounds_hold_for_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = random_hermitian(&mut rng, 4, 1.2);
            let u = random_unitary(&mut rng, 4);
            for &th in &[0.5, 1.7, 3.3, 5.9] {
                let c = rotation_bound_check(&a, &u, 1.2, th, 32, &FlowOptions::default()).unwrap();
                assert!(c.holds(), "{c:?}");
            }
        }
    }

    #[test]
    fn hypothesis_violations_are_reported() {
        let mut p = ProductFamilies::random(1, 3, 0.5, false);
        p.chi = vec![0.3, 0.0, -0.2];
        let u = p.u_family(16).unwrap();
        let ut = p.u_tilde_family(16).unwrap();
        assert!(matches!(
            product_perturbation_check(&u, &ut, 0.3, 0.5, &FlowOptions::default()),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            product_perturbation_check(&u, &ut, 2.0, 0.1, &FlowOptions::default()),
            Err(Error::Precondition(_))
        ));
    }
}
