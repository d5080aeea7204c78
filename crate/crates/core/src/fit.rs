//! Least-squares slope fits for measured scaling laws.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval for the slope (Student t).
    pub half_width: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Shape { expected: n, got: y.len() });
    }
    if n < 2 {
        return Err(Error::Config("a slope fit needs at least two points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("slope fit abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let half_width = if n > 2 {
        t_quantile_975(n - 2) * (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        half_width,
        r_squared,
    })
}

/// Slope of `log y` against `log x`. Nonpositive values are rejected.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

fn t_quantile_975(dof: usize) -> f64 {
    const TABLE: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    if dof == 0 {
        f64::INFINITY
    } else if dof <= TABLE.len() {
        TABLE[dof - 1]
    } else {
        1.96 + 2.4 / dof as f64
    }
}
