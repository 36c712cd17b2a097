use super::regions::sample_grid;
use super::RadialPotential;
use crate::error::{Error, Result};
use crate::numerics::quadrature::tanh_sinh;
use crate::numerics::roots::brent;

/// Agmon distance: the integral of sqrt((V - E)_+) between two radii.
pub fn agmon_distance(v: &RadialPotential, energy: f64, r_from: f64, r_to: f64) -> Result<f64> {
    if !(r_from.is_finite() && r_to.is_finite()) || r_from < 0.0 || r_to < 0.0 {
        return Err(Error::Domain(format!(
            "agmon distance needs finite radii, got [{r_from}, {r_to}]"
        )));
    }
    let (a, b, sign) = if r_from <= r_to {
        (r_from, r_to, 1.0)
    } else {
        (r_to, r_from, -1.0)
    };
    if a == b {
        return Ok(0.0);
    }
    let g = |r: f64| v.value(r) - energy;
    // split at breakpoints and at turning points so each integrand is smooth
    // up to square-root endpoint behaviour
    let pts: Vec<f64> = sample_grid(v, b, 1e-3)
        .into_iter()
        .filter(|&r| r > a && r < b)
        .collect();
    let mut cuts = vec![a];
    let mut prev = a;
    let mut prev_g = g(a);
    for &r in &pts {
        let gr = g(r);
        if (gr > 0.0) != (prev_g > 0.0) && r - prev > 1e-11 {
            if let Ok(root) = brent(|x| Ok(g(x)), prev, r, 1e-14) {
                cuts.push(root);
            }
        }
        prev = r;
        prev_g = gr;
    }
    cuts.extend(
        v.breakpoints()
            .iter()
            .copied()
            .filter(|&bp| bp > a && bp < b),
    );
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-13);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if g(mid) <= 0.0 && g(w[0] + 0.25 * (w[1] - w[0])) <= 0.0 {
            continue;
        }
        let (val, _) = tanh_sinh(|r| g(r).max(0.0).sqrt(), w[0], w[1], 1e-11)?;
        total += val;
    }
    Ok(sign * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PieceSpec;

    #[test]
    fn inverted_parabola_is_half_disc() {
        let v = RadialPotential::from_pieces(
            "bump",
            vec![PieceSpec::Polynomial {
                coefficients: vec![-0.25, 3.0, -1.0],
                left: 0.0,
                right: 10.0,
            }],
        )
        .unwrap();
        let d = agmon_distance(&v, 1.0, 0.5, 2.5).unwrap();
        assert!((d - std::f64::consts::FRAC_PI_2).abs() < 1e-10, "{d}");
    }

    #[test]
    fn constant_barrier() {
        let v = RadialPotential::ring(1.0, 2.0, 2.0, 0.0).unwrap();
        let d = agmon_distance(&v, 1.0, 1.0, 2.0).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!((agmon_distance(&v, 1.0, 2.0, 1.0).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(agmon_distance(&v, 3.0, 0.0, 5.0).unwrap(), 0.0);
    }
}
