//! Least-squares power laws in log-log coordinates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Fewest points a fit accepts.
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `y = C ε^p`.
    PurePower,
    /// `y = C ε^p ln(1/ε)`.
    PowerTimesLog,
    /// `y = C ε^p √ln(1/ε)`.
    PowerTimesSqrtlog,
}

impl FitModel {
    pub const ALL: [FitModel; 3] = [FitModel::PurePower, FitModel::PowerTimesLog, FitModel::PowerTimesSqrtlog];

    fn correction(self, eps: f64) -> f64 {
        match self {
            FitModel::PurePower => 1.0,
            FitModel::PowerTimesLog => (1.0 / eps).ln(),
            FitModel::PowerTimesSqrtlog => (1.0 / eps).ln().sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub model: FitModel,
    pub exponent: f64,
    pub prefactor: f64,
    /// 95% confidence half-width of the exponent.
    pub half_width: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    pub points: usize,
}

/// Fits `value ≈ C ε^p · correction(ε)` to `(ε, value)` rows.
pub fn fit_powerlaw(rows: &[(f64, f64)], model: FitModel) -> Result<PowerFit> {
    let n = rows.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::Fit(format!("need ≥ {MIN_FIT_POINTS} points, got {n}")));
    }
    for &(eps, y) in rows {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::Fit(format!("epsilon must be positive, got {eps}")));
        }
        if !(y.is_finite() && y > 0.0) {
            return Err(Error::Fit(format!("values must be positive, got {y} at epsilon {eps}")));
        }
        if model != FitModel::PurePower && eps >= 1.0 {
            return Err(Error::Fit(format!("log-corrected models need epsilon < 1, got {eps}")));
        }
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|&(e, y)| (y / model.correction(e)).ln()).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all epsilon values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = nf - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Fit(e.to_string()))?.inverse_cdf(0.975);
    Ok(PowerFit {
        model,
        exponent: slope,
        prefactor: intercept.exp(),
        half_width: t * se,
        residual: (sse / nf).sqrt(),
        points: n,
    })
}
