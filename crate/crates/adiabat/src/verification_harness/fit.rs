use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares line through (x, ln y): y ≈ e^{intercept} e^{slope·x}.
#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub label: String,
    pub abscissa: Vec<f64>,
    pub log_values: Vec<f64>,
    pub slope: f64,
    /// −slope; with x = 1/ħ this is the fitted η.
    pub eta: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_stderr: f64,
}

pub const MIN_FIT_POINTS: usize = 4;

impl DecayFit {
    /// η ± 2 standard errors.
    pub fn eta_band(&self) -> (f64, f64) {
        (self.eta - 2.0 * self.slope_stderr, self.eta + 2.0 * self.slope_stderr)
    }

    /// Negative slope with R² at least `r2_min`.
    pub fn decays(&self, r2_min: f64) -> bool {
        self.slope < 0.0 && self.r2 >= r2_min
    }
}

pub fn fit_decay(label: &str, x: &[f64], y: &[f64]) -> Result<DecayFit> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("fit {label}: {} abscissae, {} values", x.len(), y.len())));
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::Invalid(format!("fit {label}: {} points, need {MIN_FIT_POINTS}", x.len())));
    }
    if let Some(v) = y.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Invalid(format!("fit {label}: value {v} has no logarithm")));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Invalid(format!("fit {label}: all abscissae equal")));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(DecayFit {
        label: label.into(),
        abscissa: x.to_vec(),
        log_values: ly,
        slope,
        eta: -slope,
        intercept,
        r2,
        slope_stderr,
    })
}
