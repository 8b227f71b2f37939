//! Heat and wave fundamental solutions, their Fourier transforms,
//! deterministic solutions for constant initial data, spatial covariance
//! evaluation, and samplers for the wave-displacement process.

use crate::model::{EquationKind, EquationSpec, SpatialCovariance};
use rand::{Rng, RngExt};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KernelError {
    #[error("time must be positive, got t={t}")]
    NonPositiveTime { t: f64 },
    #[error("wave kernel is a function only for d in {{1,2,3}}, got d={d}")]
    WaveDimension { d: usize },
    #[error("Riesz covariance is singular at x = 0; clip before evaluating")]
    RieszSingularity,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Gaussian heat kernel (2 pi t)^{-d/2} exp(-|x|^2 / (2t)).
pub fn heat_kernel(t: f64, x: &[f64]) -> Result<f64, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime { t });
    }
    let d = x.len() as f64;
    let q: f64 = x.iter().map(|v| v * v).sum();
    Ok((2.0 * std::f64::consts::PI * t).powf(-d / 2.0) * (-q / (2.0 * t)).exp())
}

/// Fourier transform of the heat kernel: exp(-t |xi|^2 / 2).
pub fn heat_kernel_ft(t: f64, xi: &[f64]) -> f64 {
    debug_assert!(t > 0.0);
    let q: f64 = xi.iter().map(|v| v * v).sum();
    (-t * q / 2.0).exp()
}

/// Fourier transform of the wave kernel: sin(t|xi|)/|xi|, with limit t as
/// |xi| -> 0. Small arguments switch to a 3-term series to avoid
/// cancellation.
pub fn wave_ft(t: f64, xi: &[f64]) -> f64 {
    let r = norm(xi);
    if r < 1e-8 {
        let z = t * r;
        let z2 = z * z;
        t * (1.0 - z2 / 6.0 + z2 * z2 / 120.0)
    } else {
        (t * r).sin() / r
    }
}

/// Total mass of the wave kernel: equal to t in every supported dimension.
pub fn wave_mass(t: f64, d: usize) -> Result<f64, KernelError> {
    if (1..=3).contains(&d) {
        Ok(t)
    } else {
        Err(KernelError::WaveDimension { d })
    }
}

/// Solution of the noiseless equation with constant initial data: u0 for the
/// heat equation, u0 + t*v0 for the wave equation.
pub fn deterministic_solution(eq: &EquationSpec, t: f64) -> f64 {
    match eq.kind {
        EquationKind::Heat => eq.u0,
        EquationKind::Wave => eq.u0 + t * eq.v0,
    }
}

/// Draws one displacement of the wave-kernel process at horizon `t`: the law
/// with density proportional to the wave kernel at time t.
///
/// d=1: t*U with U uniform on [-1,1]. d=3: t times a uniform point on the
/// unit sphere. d=2: radius via the closed-form inverse CDF
/// r = t*sqrt(1-(1-U)^2) of the normalized disk density, angle uniform.
pub fn sample_wave_displacement<R: Rng>(
    t: f64,
    d: usize,
    rng: &mut R,
) -> Result<Vec<f64>, KernelError> {
    let mut out = vec![0.0; d];
    wave_displacement_into(t, d, rng, &mut out)?;
    Ok(out)
}

/// Allocation-free variant used by the Monte Carlo engine.
pub(crate) fn wave_displacement_into<R: Rng>(
    t: f64,
    d: usize,
    rng: &mut R,
    out: &mut [f64],
) -> Result<(), KernelError> {
    debug_assert_eq!(out.len(), d);
    match d {
        1 => {
            let u: f64 = rng.random();
            out[0] = t * (2.0 * u - 1.0);
        }
        2 => {
            let u: f64 = rng.random();
            let one_minus = 1.0 - u;
            let r = t * (1.0 - one_minus * one_minus).max(0.0).sqrt();
            let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            out[0] = r * theta.cos();
            out[1] = r * theta.sin();
        }
        3 => {
            let z = 2.0 * rng.random::<f64>() - 1.0;
            let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            let s = (1.0 - z * z).max(0.0).sqrt();
            out[0] = t * s * phi.cos();
            out[1] = t * s * phi.sin();
            out[2] = t * z;
        }
        _ => return Err(KernelError::WaveDimension { d }),
    }
    Ok(())
}

/// Evaluates the spatial covariance at displacement `x`. The Riesz kernel is
/// singular at the origin; callers must clip small separations themselves.
pub fn covariance_eval(spatial: &SpatialCovariance, x: &[f64]) -> Result<f64, KernelError> {
    covariance_eval_radial(spatial, norm(x))
}

/// Radial form of [`covariance_eval`].
pub fn covariance_eval_radial(spatial: &SpatialCovariance, r: f64) -> Result<f64, KernelError> {
    match spatial {
        SpatialCovariance::Bounded { a0, profile } => match profile {
            crate::model::BoundedProfile::Constant => Ok(*a0),
            crate::model::BoundedProfile::GaussianBump { width } => {
                Ok(a0 * (-(r * r) / (width * width)).exp())
            }
        },
        SpatialCovariance::Riesz { alpha } => {
            if r == 0.0 {
                Err(KernelError::RieszSingularity)
            } else {
                Ok(r.powf(-alpha))
            }
        }
        SpatialCovariance::SpaceWhite => {
            // A Dirac mass has no pointwise value; lattice and Monte Carlo
            // front-ends must renormalize before reaching this call.
            Err(KernelError::RieszSingularity)
        }
    }
}
