//! Pearson correlation, min-max scaling and least-squares lines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("zero variance; correlation is undefined")]
    ZeroVariance,
    #[error("constant input cannot be normalized")]
    Constant,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check(xs: &[f64], ys: &[f64]) -> Result<(), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewPoints(xs.len()));
    }
    Ok(())
}

/// Centered sums `(Sxx, Syy, Sxy)`.
fn moments(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).fold((0.0, 0.0, 0.0), |(sxx, syy, sxy), (x, y)| {
        let (dx, dy) = (x - mx, y - my);
        (sxx + dx * dx, syy + dy * dy, sxy + dx * dy)
    })
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check(xs, ys)?;
    let (sxx, syy, sxy) = moments(xs, ys);
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn minmax_normalize(xs: &[f64]) -> Result<Vec<f64>, StatsError> {
    if xs.len() < 2 {
        return Err(StatsError::TooFewPoints(xs.len()));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(StatsError::Constant);
    }
    Ok(xs.iter().map(|x| (x - lo) / (hi - lo)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, StatsError> {
    check(xs, ys)?;
    let (sxx, syy, sxy) = moments(xs, ys);
    if sxx == 0.0 {
        return Err(StatsError::Constant);
    }
    let slope = sxy / sxx;
    let intercept = mean(ys) - slope * mean(xs);
    let residuals = xs.iter().zip(ys).map(|(x, y)| y - (slope * x + intercept)).collect();
    // a constant y is fit exactly
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        residuals,
    })
}
