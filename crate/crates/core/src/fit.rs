//! Ordinary least squares on log-log pairs.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Log-log regression `log y = intercept + slope * log x` over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// `[x_min, x_max]` of the points used.
    pub r_window: [f64; 2],
    /// Maximum absolute residual on the log scale.
    pub residual: f64,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub const MIN_FIT_POINTS: usize = 4;

impl RateFit {
    /// Fitted value at `x` on the original scale.
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

/// Fits `log ys` against `log xs`. Every value must be positive.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(invalid("fit", "abscissae and ordinates differ in length"));
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(invalid(
            "fit",
            format!("need at least {MIN_FIT_POINTS} points, got {}", xs.len()),
        ));
    }
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0) || !x.is_finite() {
            return Err(invalid("fit", format!("abscissa {x} is not positive")));
        }
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Degenerate(format!("value {y} at {x} has no logarithm")));
        }
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, intercept) = ols(&lx, &ly)?;
    let residual = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RateFit {
        slope,
        intercept,
        r_window: [lo, hi],
        residual,
        points: xs.len(),
        warnings: Vec::new(),
    })
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Err(invalid("fit", "all abscissae coincide"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
