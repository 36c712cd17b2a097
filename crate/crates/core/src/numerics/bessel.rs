//! Free radial waves. For each dimension the pair (f, g) solves
//! u'' + (1 - c/x^2) u = 0 with f regular at the origin,
//! f ~ sin(x - l pi/2 + shift), g ~ -cos(x - l pi/2 + shift) and W[f, g] = 1.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeWave {
    pub f: f64,
    pub df: f64,
    pub g: f64,
    pub dg: f64,
}

/// Spherical Bessel j_0..j_n at x > 0.
pub fn spherical_j(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x < 1e-8 {
        let mut dfac = 1.0;
        for (l, o) in out.iter_mut().enumerate() {
            dfac *= (2 * l + 1) as f64;
            *o = x.powi(l as i32) / dfac * (1.0 - x * x / (2.0 * (2 * l + 3) as f64));
        }
        return out;
    }
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    if (n as f64) < x {
        out[0] = j0;
        if n >= 1 {
            out[1] = j1;
        }
        for l in 1..n {
            out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        }
        return out;
    }
    let start = n + 20 + (40.0 * (n as f64 + 1.0)).sqrt() as usize + x as usize;
    let mut jp1 = 0.0;
    let mut jc = 1e-300;
    for l in (1..=start).rev() {
        let jm1 = (2 * l + 1) as f64 / x * jc - jp1;
        jp1 = jc;
        jc = jm1;
        if l - 1 <= n {
            out[l - 1] = jc;
        }
        if jc.abs() > 1e250 {
            jc *= 1e-250;
            jp1 *= 1e-250;
            for o in out.iter_mut() {
                *o *= 1e-250;
            }
        }
    }
    let scale = if j0.abs() >= j1.abs() || n == 0 {
        j0 / out[0]
    } else {
        j1 / out[1]
    };
    for o in out.iter_mut() {
        *o *= scale;
    }
    out
}

/// Spherical Bessel y_0..y_n at x > 0 (upward recurrence is stable).
pub fn spherical_y(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    out[0] = -x.cos() / x;
    if n >= 1 {
        out[1] = -x.cos() / (x * x) - x.sin() / x;
    }
    for l in 1..n {
        out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
    }
    out
}

/// Bessel J_0..J_n at x > 0 by Miller's downward recurrence normalised with
/// J_0 + 2 sum J_2k = 1. Returns at least `min_len` orders.
fn bessel_j_all(n: usize, x: f64, min_len: usize) -> Vec<f64> {
    let top = n.max(min_len);
    let m = (x.max(top as f64) + 30.0 + (50.0 * x.max(top as f64)).sqrt()) as usize;
    let m = m + (m % 2);
    let mut out = vec![0.0; m + 1];
    let mut jp1 = 0.0;
    let mut jc = 1e-300;
    out[m] = jc;
    for k in (1..=m).rev() {
        let jm1 = 2.0 * k as f64 / x * jc - jp1;
        jp1 = jc;
        jc = jm1;
        out[k - 1] = jc;
        if jc.abs() > 1e250 {
            for o in out.iter_mut().skip(k - 1) {
                *o *= 1e-250;
            }
            jc *= 1e-250;
            jp1 *= 1e-250;
        }
    }
    let mut norm = out[0];
    for k in (2..=m).step_by(2) {
        norm += 2.0 * out[k];
    }
    for o in out.iter_mut() {
        *o /= norm;
    }
    out
}

/// Bessel J_0..J_n and Y_0..Y_n at x > 0.
pub fn cylindrical_jy(n: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let jall = bessel_j_all(n, x, 2);
    let m = jall.len() - 1;
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let mut sum = 0.0;
    let mut dsum = 0.0;
    let mut k = 1;
    while 2 * k + 1 <= m {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * jall[2 * k] / k as f64;
        dsum += sign * 0.5 * (jall[2 * k - 1] - jall[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = 2.0 / PI * lg * jall[0] - 4.0 / PI * sum;
    let dj0 = -jall[1];
    let dy0 = 2.0 / PI * (jall[0] / x + lg * dj0) - 4.0 / PI * dsum;
    let mut y = vec![0.0; n.max(1) + 1];
    y[0] = y0;
    y[1] = -dy0;
    for l in 1..n {
        y[l + 1] = 2.0 * l as f64 / x * y[l] - y[l - 1];
    }
    y.truncate(n + 1);
    let mut j = jall;
    j.truncate(n + 1);
    (j, y)
}

/// Riccati-type free waves of angular order `ell` in dimension 3.
pub fn riccati_3d(ell: usize, x: f64) -> FreeWave {
    let j = spherical_j(ell + 1, x);
    let y = spherical_y(ell + 1, x);
    let l = ell as f64;
    // (x z_l)' = x z_{l-1} - l z_l, written via z_{l+1} to cover l = 0
    let f = x * j[ell];
    let g = x * y[ell];
    let df = (l + 1.0) * j[ell] - x * j[ell + 1];
    let dg = (l + 1.0) * y[ell] - x * y[ell + 1];
    FreeWave { f, df, g, dg }
}

/// sqrt(pi x / 2) J_l and sqrt(pi x / 2) Y_l with derivatives.
pub fn riccati_2d(ell: usize, x: f64) -> FreeWave {
    let (j, y) = cylindrical_jy(ell + 1, x);
    let l = ell as f64;
    let s = (0.5 * PI * x).sqrt();
    let dj = l / x * j[ell] - j[ell + 1];
    let dy = l / x * y[ell] - y[ell + 1];
    let ds = 0.5 * s / x;
    FreeWave {
        f: s * j[ell],
        df: ds * j[ell] + s * dj,
        g: s * y[ell],
        dg: ds * y[ell] + s * dy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spherical_closed_forms() {
        let x = 2.7;
        let j = spherical_j(3, x);
        let j2 = (3.0 / (x * x) - 1.0) * x.sin() / x - 3.0 * x.cos() / (x * x);
        assert!((j[2] - j2).abs() < 1e-15);
        let j = spherical_j(30, 0.5);
        // ascending series leading term for j_30(0.5) is tiny but must be positive and monotone
        assert!(j[30] > 0.0 && j[30] < j[29]);
    }

    #[test]
    fn cylindrical_reference_values() {
        let (j, y) = cylindrical_jy(1, 1.0);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((y[0] - 0.088_256_964_215_676_96).abs() < 1e-13);
        assert!((y[1] + 0.781_212_821_300_288_7).abs() < 1e-13);
    }

    #[test]
    fn wronskians_are_unity() {
        for &x in &[0.3, 1.0, 7.5, 42.0, 310.0] {
            for ell in [0usize, 1, 4, 17] {
                for w in [riccati_3d(ell, x), riccati_2d(ell, x)] {
                    let wr = w.f * w.dg - w.df * w.g;
                    assert!((wr - 1.0).abs() < 1e-9, "x={x} l={ell} W={wr}");
                }
            }
        }
    }

    #[test]
    fn asymptotic_phase_convention() {
        let x = 2000.0;
        let w = riccati_3d(2, x);
        assert!((w.f - (x - PI).sin()).abs() < 2e-3);
        assert!((w.g + (x - PI).cos()).abs() < 2e-3);
        let w = riccati_2d(1, x);
        let ph = x - 0.5 * PI + 0.25 * PI;
        assert!((w.f - ph.sin()).abs() < 2e-3);
        assert!((w.g + ph.cos()).abs() < 2e-3);
    }
}
