//! Reference solutions used to cross-validate the Monte Carlo estimators:
//! renewal closed forms for constant covariance, a product-trapezoid
//! Volterra solver for the first-jump renewal equation of both equations,
//! and the chaos-series second moment for constant covariance.

use crate::model::{EquationKind, NoiseSpec, TimeFamily};
use crate::specfun::{gamma_time_integral, SeriesError, SeriesEval};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("Volterra grid needs at least 16 steps, got {steps}")]
    TooFewSteps { steps: usize },
    #[error("step-doubling residual {residual} exceeds 1e-3; grid has not converged")]
    NotConverged { residual: f64 },
    #[error("parameter {name} out of range: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("chaos series needs a constant-covariance time family with a closed variance")]
    UnsupportedNoise,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Second moment of the heat solution under constant covariance A0:
/// u0^2 exp(A0 t^{2H} / (2H)). The renewal equation
/// h' = (A0 t^{2H-1} - 1) h with h(0) = 1 is separable; the e^t prefactor of
/// the jump representation cancels the -t in the exponent.
pub fn heat_renewal_closed(u0: f64, a0: f64, hurst: f64, t: f64) -> f64 {
    u0 * u0 * heat_renewal_closed_log(a0, hurst, t).exp()
}

/// log of the u0-free part of [`heat_renewal_closed`]: A0 t^{2H}/(2H).
pub fn heat_renewal_closed_log(a0: f64, hurst: f64, t: f64) -> f64 {
    a0 * t.powf(2.0 * hurst) / (2.0 * hurst)
}

/// Number of unordered index pairs of {1..n}: the merged jump rate of the
/// n-th moment representation.
pub fn pair_count(n: usize) -> f64 {
    (n * (n - 1)) as f64 / 2.0
}

/// n-th moment of the heat solution under constant covariance:
/// u0^n exp(nu_n A0 t^{2H} / (2H)); under constant covariance the paths drop
/// out and the rate-nu_n renewal argument gives the same separable equation.
pub fn nth_closed_constant_f(n: usize, u0: f64, a0: f64, hurst: f64, t: f64) -> f64 {
    u0.powi(n as i32) * nth_closed_constant_f_log1(n, a0, hurst, t).exp()
}

/// log(m_n / u0^n) for [`nth_closed_constant_f`]; stays finite where the
/// moment itself overflows.
pub fn nth_closed_constant_f_log1(n: usize, a0: f64, hurst: f64, t: f64) -> f64 {
    pair_count(n) * a0 * t.powf(2.0 * hurst) / (2.0 * hurst)
}

/// Uniform-grid solution of the first-jump renewal equation.
#[derive(Debug, Clone)]
pub struct VolterraGrid {
    pub t_max: f64,
    pub steps: usize,
    /// h on the nodes j * t_max / steps, h(0) = 1.
    pub h_values: Vec<f64>,
    /// |h(t_max) at `steps` - h(t_max) at `2*steps`|.
    pub doubling_residual: f64,
}

impl VolterraGrid {
    pub fn spacing(&self) -> f64 {
        self.t_max / self.steps as f64
    }

    pub fn last(&self) -> f64 {
        *self.h_values.last().unwrap()
    }
}

/// Solves h(t) = e^{-t} + A0 int_0^t e^{-s} K(t,s) h(t-s) ds on a uniform
/// grid, with K = (t-s)^{2H-1} for the heat equation and s^2 (t-s)^{2H-1}
/// for the wave equation (the squared gap is the wave-kernel mass picked up
/// at the first jump).
///
/// In the substituted variable u = t-s the kernel factor u^{2H-1} is
/// integrated exactly against a linear interpolant on the first cell, which
/// handles the H < 1/2 singularity; the remaining cells use the trapezoid
/// rule. Errors if doubling the step count moves h(t_max) by more than 1e-3.
pub fn volterra_solve(
    kind: EquationKind,
    a0: f64,
    hurst: f64,
    t_max: f64,
    steps: usize,
) -> Result<VolterraGrid, OracleError> {
    if steps < 16 {
        return Err(OracleError::TooFewSteps { steps });
    }
    if !(a0 >= 0.0) {
        return Err(OracleError::BadParameter { name: "a0", value: a0 });
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(OracleError::BadParameter { name: "hurst", value: hurst });
    }
    if !(t_max > 0.0) {
        return Err(OracleError::BadParameter { name: "t_max", value: t_max });
    }
    let coarse = volterra_raw(kind, a0, hurst, t_max, steps);
    let fine = volterra_raw(kind, a0, hurst, t_max, 2 * steps);
    let residual = (coarse.last().unwrap() - fine.last().unwrap()).abs();
    if residual > 1e-3 {
        return Err(OracleError::NotConverged { residual });
    }
    Ok(VolterraGrid { t_max, steps, h_values: coarse, doubling_residual: residual })
}

fn volterra_raw(kind: EquationKind, a0: f64, hurst: f64, t_max: f64, steps: usize) -> Vec<f64> {
    let dt = t_max / steps as f64;
    let two_h = 2.0 * hurst;
    // In the substituted variable u = t - s the equation reads
    //   h(t_j) = e^{-t_j} (1 + A0 int_0^{t_j} u^{2H-1} g(u) w_j(u) du),
    // with g(u) = e^u h(u) and w_j(u) = (t_j - u)^2 for the wave kernel,
    // 1 for the heat kernel.
    let mut h = Vec::with_capacity(steps + 1);
    let mut g = Vec::with_capacity(steps + 1);
    h.push(1.0);
    g.push(1.0);
    // Exact first-cell moments of u^{2H-1} against the linear hat basis on
    // [0, dt]; this absorbs the H < 1/2 endpoint singularity.
    let cell0_left = dt.powf(two_h) * (1.0 / two_h - 1.0 / (two_h + 1.0));
    let cell0_right = dt.powf(two_h) / (two_h + 1.0);
    for j in 1..=steps {
        let t_j = dt * j as f64;
        let wave_sq = |u: f64| match kind {
            EquationKind::Wave => (t_j - u) * (t_j - u),
            EquationKind::Heat => 1.0,
        };
        let node = |c: usize| (dt * c as f64).powf(two_h - 1.0) * g[c] * wave_sq(dt * c as f64);
        // Everything except the u = t_j endpoint, whose h_j is still unknown.
        let mut q_known = cell0_left * wave_sq(0.0);
        if j >= 2 {
            q_known += cell0_right * g[1] * wave_sq(dt);
            let mut acc = crate::numutil::KahanSum::new();
            acc.add(0.5 * node(1));
            for c in 2..j {
                acc.add(node(c));
            }
            q_known += dt * acc.total();
        }
        // Coefficient of h_j = e^{-t_j} g(t_j) in the quadrature.
        let self_weight = if j == 1 {
            cell0_right * t_j.exp() * wave_sq(t_j)
        } else {
            0.5 * dt * t_j.powf(two_h - 1.0) * t_j.exp() * wave_sq(t_j)
        };
        let emt = (-t_j).exp();
        // For the wave kernel wave_sq(t_j) = 0, so this is explicit there.
        let h_j = (emt + a0 * emt * q_known) / (1.0 - a0 * emt * self_weight);
        h.push(h_j);
        g.push(t_j.exp() * h_j);
    }
    h
}

/// Chaos-series second moment (normalized by u0^2) under constant spatial
/// covariance A0: sum_{n<=N} (A0 v(t))^n / n!, where v is the exact noise
/// variance factor of the family: t^{2H}/(2H) for the time-weighted family
/// and the closed double integral for the generalized family.
pub fn chaos_series_constant_f(
    noise: &NoiseSpec,
    a0: f64,
    t: f64,
    n_terms: usize,
) -> Result<SeriesEval, OracleError> {
    let v = match noise.time {
        TimeFamily::WhiteTime => t,
        TimeFamily::Do { hurst } => t.powf(2.0 * hurst) / (2.0 * hurst),
        TimeFamily::Generalized { a1, a2 } => gamma_time_integral(a1, a2, t)?,
        TimeFamily::Fractional { .. } => return Err(OracleError::UnsupportedNoise),
    };
    let x = a0 * v;
    let mut value = 0.0_f64;
    let mut term = 1.0_f64;
    for n in 0..=n_terms {
        value += term;
        term *= x / (n as f64 + 1.0);
    }
    // term now holds x^{N+1}/(N+1)!; the remaining tail is bounded by
    // term * e^x.
    Ok(SeriesEval {
        value,
        terms_used: n_terms + 1,
        truncation_bound: term * x.exp(),
    })
}
