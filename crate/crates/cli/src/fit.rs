//! Power-law fits on log-log axes.

use anyhow::{bail, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLaw {
    /// Coefficient in `y = a x^b`.
    pub a: f64,
    /// Exponent.
    pub b: f64,
    /// Coefficient of determination of the log-log line.
    pub r2: f64,
}

/// Least-squares line through `(ln x, ln y)`.
///
/// R² is 1 when the log values are all equal (the fit is then exact).
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLaw> {
    if points.len() < 3 {
        bail!("a power-law fit needs at least 3 points, got {}", points.len());
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        bail!("power-law fit needs positive values, got ({x}, {y})");
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = points.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        bail!("power-law fit needs at least two distinct x values");
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let intercept = my - b * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - b * x).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(PowerLaw {
        a: intercept.exp(),
        b,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_power_law_is_recovered() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|&x| (x, 2.0 * f64::powf(x, -0.5)))
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert_abs_diff_eq!(fit.a, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.b, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_values_have_zero_exponent() {
        let fit = fit_power_law(&[(1.0, 3.0), (4.0, 3.0), (9.0, 3.0)]).unwrap();
        assert_abs_diff_eq!(fit.b, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.a, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_power_law(&[(-1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
        assert!(fit_power_law(&[(2.0, 1.0), (2.0, 3.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn noisy_data_has_partial_r2() {
        let fit = fit_power_law(&[(1.0, 1.0), (2.0, 0.6), (4.0, 0.5), (8.0, 0.2)]).unwrap();
        assert!(fit.b < 0.0);
        assert!(fit.r2 > 0.0 && fit.r2 < 1.0);
    }
}
