//! Growth-exponent extraction: least-squares fits of log(log m) against
//! log t (or log n) recover the stretched-exponential orders, which are then
//! compared against the closed-form predictions.

use crate::model::ExponentPrediction;
use thiserror::Error;

/// Points with log-moment at or below this are dropped so the outer
/// logarithm is defined and numerically stable (moment > e).
pub const ADMISSIBLE_LOG_MOMENT: f64 = 1.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 admissible points (moment > e), found {found}")]
    NotEnoughAdmissiblePoints { found: usize },
    #[error("abscissa values must be distinct")]
    DegenerateAbscissa,
}

/// Fitted growth exponent: log(log m) = rho_hat * log x + c_hat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    pub rho_hat: f64,
    pub c_hat: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub predicted: Option<ExponentPrediction>,
}

/// Outcome of checking a fitted exponent against its prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareReport {
    pub fitted: f64,
    pub predicted: f64,
    pub tol: f64,
    pub pass: bool,
}

fn loglog_fit(samples: &[(f64, f64)]) -> Result<ExponentFit, FitError> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(x, log_m)| *x > 0.0 && *log_m > ADMISSIBLE_LOG_MOMENT)
        .map(|&(x, log_m)| (x.ln(), log_m.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(FitError::NotEnoughAdmissiblePoints { found: pts.len() });
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::DegenerateAbscissa);
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(ExponentFit {
        rho_hat: slope,
        c_hat: intercept,
        r_squared,
        points_used: pts.len(),
        predicted: None,
    })
}

/// Fits the time exponent rho from samples (t, log m(t)): moments growing
/// like exp(c t^rho) give a line of slope rho in log(log m) vs log t.
pub fn fit_time_exponent(samples: &[(f64, f64)]) -> Result<ExponentFit, FitError> {
    loglog_fit(samples)
}

/// Fits the order exponent from samples (n, log m_n) at fixed time, with
/// log n as abscissa.
pub fn fit_order_exponent(samples: &[(f64, f64)]) -> Result<ExponentFit, FitError> {
    loglog_fit(samples)
}

/// Compares a fitted exponent against the predicted one at tolerance `tol`.
pub fn compare_exponents(fit: &ExponentFit, predicted_rho: f64, tol: f64) -> CompareReport {
    CompareReport {
        fitted: fit.rho_hat,
        predicted: predicted_rho,
        tol,
        pass: (fit.rho_hat - predicted_rho).abs() <= tol,
    }
}
