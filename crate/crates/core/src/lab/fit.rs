use serde::{Deserialize, Serialize};

use super::record::SweepRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// ln(value) = intercept + slope / hbar
    ExponentialInverseHbar,
    /// ln(value) = intercept + slope ln(hbar)
    PowerHbar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub quantity: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl FitResult {
    /// Negative slope with R^2 at least `r2_min`.
    pub fn decays(&self, r2_min: f64) -> bool {
        self.slope < 0.0 && self.r_squared >= r2_min
    }

    pub fn verdict(&self) -> &'static str {
        match self.model {
            FitModel::ExponentialInverseHbar if self.decays(0.9) => "exponentially small",
            FitModel::ExponentialInverseHbar => "not exponentially small",
            FitModel::PowerHbar if self.r_squared >= 0.85 => "power law",
            FitModel::PowerHbar => "no clean power law",
        }
    }
}

/// Ordinary least squares y = a + b x with the coefficient of determination.
/// A perfect fit of constant data reports R^2 = 1.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Structural(format!(
            "{n} abscissae for {} ordinates",
            y.len()
        )));
    }
    if n < 3 {
        return Err(Error::Precondition(format!(
            "a fit needs at least 3 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok((intercept, slope, r2))
}

fn positive_points(quantity: &str, pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let kept: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|&(h, v)| h > 0.0 && v > 0.0 && v.is_finite())
        .collect();
    if kept.len() < pts.len() {
        log::warn!(
            "{quantity}: dropped {} non-positive values before the fit",
            pts.len() - kept.len()
        );
    }
    kept
}

/// Fit of ln(value) against 1/hbar on (hbar, value) points.
pub fn exponential_fit_points(quantity: &str, pts: &[(f64, f64)]) -> Result<FitResult> {
    let kept = positive_points(quantity, pts);
    let x: Vec<f64> = kept.iter().map(|p| 1.0 / p.0).collect();
    let y: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let (intercept, slope, r_squared) = least_squares(&x, &y)?;
    Ok(FitResult {
        model: FitModel::ExponentialInverseHbar,
        quantity: quantity.to_string(),
        slope,
        intercept,
        r_squared,
        points: kept.len(),
    })
}

/// Fit of ln(value) against ln(hbar).
pub fn power_fit_points(quantity: &str, pts: &[(f64, f64)]) -> Result<FitResult> {
    let kept = positive_points(quantity, pts);
    let x: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let (intercept, slope, r_squared) = least_squares(&x, &y)?;
    Ok(FitResult {
        model: FitModel::PowerHbar,
        quantity: quantity.to_string(),
        slope,
        intercept,
        r_squared,
        points: kept.len(),
    })
}

pub fn exponential_fit(quantity: &str, sweep: &SweepRecord) -> Result<FitResult> {
    exponential_fit_points(quantity, &sweep.points(quantity))
}

pub fn power_fit(quantity: &str, sweep: &SweepRecord) -> Result<FitResult> {
    power_fit_points(quantity, &sweep.points(quantity))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_is_recovered() {
        let pts: Vec<(f64, f64)> = [0.2, 0.15, 0.1, 0.05]
            .iter()
            .map(|&h: &f64| (h, (-3.0 / h).exp()))
            .collect();
        let f = exponential_fit_points("x", &pts).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(f.verdict(), "exponentially small");
    }

    #[test]
    fn constant_values_are_not_exponentially_small() {
        let pts = vec![(0.2, 1.5), (0.15, 1.5), (0.1, 1.5)];
        let f = exponential_fit_points("c", &pts).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert_eq!(f.verdict(), "not exponentially small");
    }

    #[test]
    fn power_law_exponent() {
        let pts: Vec<(f64, f64)> = [0.3, 0.2, 0.1]
            .iter()
            .map(|&h: &f64| (h, 7.0 * h.powf(-2.0)))
            .collect();
        let f = power_fit_points("n", &pts).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-10);
    }

    #[test]
    fn too_few_points_after_filtering() {
        let pts = vec![(0.2, 1.0), (0.1, 0.0), (0.05, -1.0)];
        assert!(matches!(
            exponential_fit_points("z", &pts),
            Err(Error::Precondition(_))
        ));
    }
}
