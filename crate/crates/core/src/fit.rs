//! Least-squares power-law fits on log-log axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest points a fit accepts.
pub const MIN_POINTS: usize = 4;

/// `log y = slope · log x + intercept`, fitted by ordinary least squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Smallest and largest `x` used.
    pub window: (f64, f64),
}

impl SlopeFit {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InsufficientData(format!("{} x values but {} y values", x.len(), y.len())));
        }
        if x.len() < MIN_POINTS {
            return Err(Error::InsufficientData(format!(
                "a slope fit needs at least {MIN_POINTS} points, got {}",
                x.len()
            )));
        }
        if let Some((a, b)) = x.iter().zip(y).find(|(a, b)| !(**a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite()))
        {
            return Err(Error::InsufficientData(format!("non-positive point ({a}, {b}) on a log-log fit")));
        }
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
        if sxx == 0.0 {
            return Err(Error::InsufficientData("all x values coincide".into()));
        }
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let ss_res: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - (slope * a + intercept)).powi(2)).sum();
        let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { x: x.to_vec(), y: y.to_vec(), slope, intercept, r_squared, window: (lo, hi) })
    }

    /// Decades of `x` spanned by the fit.
    pub fn decades(&self) -> f64 {
        (self.window.1 / self.window.0).log10()
    }

    pub fn within(&self, target: f64, tol: f64) -> bool {
        (self.slope - target).abs() <= tol
    }

    pub fn predict(&self, x: f64) -> f64 {
        (self.slope * x.ln() + self.intercept).exp()
    }
}
