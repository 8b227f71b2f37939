//! Moments and growth exponents of stochastic heat and wave equations driven
//! by multiplicative Gaussian noise that is white in time with a s^{H-1/2}
//! weight, or carries the generalized covariance (st)^{a1} |s-t|^{a2}.
//!
//! | Module        | Contents                                                            |
//! |---------------|---------------------------------------------------------------------|
//! | [`model`]     | Noise/equation types, admissibility checks, exponent predictions    |
//! | [`kernels`]   | Heat/wave kernels, Fourier transforms, displacement samplers        |
//! | [`specfun`]   | Incomplete gamma, Beta, fractional-integral series, covariance mass |
//! | [`moment_mc`] | Jump-representation and path-integral Monte Carlo estimators        |
//! | [`oracles`]   | Renewal closed forms, Volterra solver, chaos series                 |
//! | [`fieldsim`]  | Direct lattice simulation of the d = 1 heat equation                |
//! | [`analysis`]  | Log-log exponent fitting and prediction comparison                  |
//!
//! Estimators draw replica r from stream r of a counter-based generator, so
//! results are reproducible bit for bit at any parallelism level.

pub mod analysis;
pub mod fieldsim;
pub mod kernels;
pub mod model;
pub mod moment_mc;
pub(crate) mod numutil;
pub mod oracles;
pub mod specfun;
