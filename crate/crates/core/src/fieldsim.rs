//! Direct lattice discretization of the mild time-weighted heat equation in
//! d = 1: explicit Euler for the Laplacian, multiplicative Gaussian noise
//! with exact per-step variance of the s^{H-1/2} weight, and a Cholesky
//! factor of the (periodic) spatial covariance.

use crate::model::{BoundedProfile, SpatialCovariance};
use crate::numutil::KahanSum;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

/// Ridge added to the covariance diagonal before factorization.
pub const RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FieldSimError {
    #[error("stability requires dt <= dx^2: dt={dt}, dx^2={dx2}")]
    Unstable { dt: f64, dx2: f64 },
    #[error("lattice needs at least 8 sites, got {n_x}")]
    TooFewSites { n_x: usize },
    #[error("Hurst index must lie in (0,1), got {hurst}")]
    BadHurst { hurst: f64 },
    #[error("lattice noise supports bounded covariance only")]
    UnsupportedCovariance,
    #[error("domain half-width {half_width} too small; boundary wrap-around needs >= 6 sqrt(t_max) = {needed}")]
    DomainTooSmall { half_width: f64, needed: f64 },
    #[error("covariance matrix is not positive definite even after ridge jitter")]
    IndefiniteCovariance,
    #[error("parameter {name} out of range: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("time stepping needs n_t >= 1 when t_max > 0")]
    NoTimeSteps,
}

/// Configuration of one lattice run on the periodic domain [-L, L).
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    /// Domain half-width L.
    pub half_width: f64,
    pub n_x: usize,
    pub t_max: f64,
    pub n_t: usize,
    pub hurst: f64,
    /// Bounded covariance only; rough kernels need a lattice renormalization
    /// this simulator does not attempt.
    pub spatial: SpatialCovariance,
    pub u0: f64,
    pub n_rep: usize,
    pub seed: u64,
}

impl LatticeConfig {
    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n_x as f64
    }

    pub fn dt(&self) -> f64 {
        if self.n_t == 0 { 0.0 } else { self.t_max / self.n_t as f64 }
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.n_x)
            .map(|j| -self.half_width + self.dx() * j as f64)
            .collect()
    }

    fn validate(&self) -> Result<(), FieldSimError> {
        if self.n_x < 8 {
            return Err(FieldSimError::TooFewSites { n_x: self.n_x });
        }
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(FieldSimError::BadHurst { hurst: self.hurst });
        }
        if !matches!(self.spatial, SpatialCovariance::Bounded { .. }) {
            return Err(FieldSimError::UnsupportedCovariance);
        }
        if self.u0 < 0.0 {
            return Err(FieldSimError::BadParameter { name: "u0", value: self.u0 });
        }
        if self.t_max < 0.0 {
            return Err(FieldSimError::BadParameter { name: "t_max", value: self.t_max });
        }
        if self.n_rep == 0 {
            return Err(FieldSimError::BadParameter { name: "n_rep", value: 0.0 });
        }
        if self.t_max > 0.0 {
            if self.n_t == 0 {
                return Err(FieldSimError::NoTimeSteps);
            }
            let dt = self.dt();
            let dx2 = self.dx() * self.dx();
            if dt > dx2 {
                return Err(FieldSimError::Unstable { dt, dx2 });
            }
            let needed = 6.0 * self.t_max.sqrt();
            if self.half_width < needed {
                return Err(FieldSimError::DomainTooSmall {
                    half_width: self.half_width,
                    needed,
                });
            }
        }
        Ok(())
    }
}

/// Lower-triangular factor of the lattice covariance with ridge jitter;
/// reused across steps and replicas. The bump profile is periodized over the
/// domain (sum over periodic images), which keeps the covariance positive
/// semidefinite on the circle; a bare wrapped distance would not be. An
/// all-zero covariance factors to the zero matrix without jitter.
pub fn spatial_noise_factor(cfg: &LatticeConfig) -> Result<DMatrix<f64>, FieldSimError> {
    cfg.validate()?;
    let (a0, profile) = match cfg.spatial {
        SpatialCovariance::Bounded { a0, profile } => (a0, profile),
        _ => return Err(FieldSimError::UnsupportedCovariance),
    };
    let n = cfg.n_x;
    let span = 2.0 * cfg.half_width;
    let dx = cfg.dx();
    let cov = DMatrix::from_fn(n, n, |j, k| {
        let raw = (j as f64 - k as f64) * dx;
        match profile {
            BoundedProfile::Constant => a0,
            BoundedProfile::GaussianBump { width } => {
                let inv_w2 = 1.0 / (width * width);
                (-3..=3)
                    .map(|m| {
                        let d = raw + m as f64 * span;
                        a0 * (-d * d * inv_w2).exp()
                    })
                    .sum()
            }
        }
    });
    if cov.iter().all(|&c| c == 0.0) {
        return Ok(DMatrix::zeros(n, n));
    }
    let ridged = &cov + DMatrix::identity(n, n) * RIDGE;
    match ridged.cholesky() {
        Some(chol) => Ok(chol.l()),
        None => Err(FieldSimError::IndefiniteCovariance),
    }
}

/// Empirical moments of the final-time field, per site and power p = 1,2,3.
#[derive(Debug, Clone)]
pub struct FieldMoments {
    pub x: Vec<f64>,
    /// mean[p-1][j] estimates E[u(t_max, x_j)^p].
    pub mean: [Vec<f64>; 3],
    pub stderr: [Vec<f64>; 3],
    pub n_rep: usize,
}

impl FieldMoments {
    /// Spatial average of the p-th moment estimate (p in 1..=3).
    pub fn spatial_mean(&self, p: usize) -> f64 {
        let v = &self.mean[p - 1];
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Runs the explicit scheme
/// u_{m+1,j} = u_{m,j} + (dt/2) lap_j / dx^2 + u_{m,j} sqrt(w_m) xi_{m,j},
/// with w_m the exact step variance int_{t_m}^{t_{m+1}} s^{2H-1} ds and
/// (xi_m) drawn through the covariance factor, fresh each step.
///
/// The optional sink receives (replica, step, field) after every step
/// including the initial state; providing it forces a sequential run (the
/// replica results are identical either way).
pub fn simulate_do_field(
    cfg: &LatticeConfig,
    mut snapshot_sink: Option<&mut dyn FnMut(usize, usize, &[f64])>,
) -> Result<FieldMoments, FieldSimError> {
    cfg.validate()?;
    let factor = spatial_noise_factor(cfg)?;
    let n = cfg.n_x;

    if cfg.t_max == 0.0 {
        let mean = [vec![cfg.u0; n], vec![cfg.u0 * cfg.u0; n], vec![cfg.u0.powi(3); n]];
        let stderr = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        if let Some(sink) = snapshot_sink.as_mut() {
            for r in 0..cfg.n_rep {
                sink(r, 0, &vec![cfg.u0; n]);
            }
        }
        return Ok(FieldMoments { x: cfg.grid(), mean, stderr, n_rep: cfg.n_rep });
    }

    let dt = cfg.dt();
    let two_h = 2.0 * cfg.hurst;
    // Exact per-step weight of the s^{H-1/2} reweighting; square-integrable
    // even when the weight itself is singular at s = 0.
    let sqrt_w: Vec<f64> = (0..cfg.n_t)
        .map(|m| {
            let lo = dt * m as f64;
            let hi = dt * (m + 1) as f64;
            ((hi.powf(two_h) - lo.powf(two_h)) / two_h).sqrt()
        })
        .collect();
    let c_lap = dt / (2.0 * cfg.dx() * cfg.dx());

    let run_replica = |r: usize, sink: &mut Option<&mut dyn FnMut(usize, usize, &[f64])>| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64);
        let mut u = vec![cfg.u0; n];
        let mut next = vec![0.0_f64; n];
        let mut z = DVector::zeros(n);
        let mut xi = DVector::zeros(n);
        if let Some(f) = sink.as_mut() {
            f(r, 0, &u);
        }
        for (m, &sw) in sqrt_w.iter().enumerate() {
            for c in 0..n {
                z[c] = StandardNormal.sample(&mut rng);
            }
            xi.gemv(1.0, &factor, &z, 0.0);
            for j in 0..n {
                let left = u[(j + n - 1) % n];
                let right = u[(j + 1) % n];
                next[j] = u[j] + c_lap * (left - 2.0 * u[j] + right) + u[j] * sw * xi[j];
            }
            std::mem::swap(&mut u, &mut next);
            if let Some(f) = sink.as_mut() {
                f(r, m + 1, &u);
            }
        }
        u
    };

    // Snapshot dumping forces sequential execution; the per-replica streams
    // make the numbers identical either way.
    let finals: Vec<Vec<f64>> = if snapshot_sink.is_some() {
        (0..cfg.n_rep).map(|r| run_replica(r, &mut snapshot_sink)).collect()
    } else {
        (0..cfg.n_rep)
            .into_par_iter()
            .map(|r| run_replica(r, &mut None))
            .collect()
    };

    let mut mean: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut stderr: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let r_f = cfg.n_rep as f64;
    for j in 0..n {
        for p in 0..3 {
            let mut sum = KahanSum::new();
            for field in &finals {
                sum.add(field[j].powi(p as i32 + 1));
            }
            let m1 = sum.total() / r_f;
            let mut var = KahanSum::new();
            for field in &finals {
                let d = field[j].powi(p as i32 + 1) - m1;
                var.add(d * d);
            }
            let v = if cfg.n_rep > 1 { var.total() / (r_f - 1.0) } else { 0.0 };
            mean[p][j] = m1;
            stderr[p][j] = (v / r_f).sqrt();
        }
    }
    Ok(FieldMoments { x: cfg.grid(), mean, stderr, n_rep: cfg.n_rep })
}
