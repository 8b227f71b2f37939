//! Domain types for the equation/noise configuration, parameter validation
//! against the solvability and spectral-integrability conditions, and
//! closed-form growth-exponent predictions.

use thiserror::Error;

/// Shape of a bounded spatial covariance profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundedProfile {
    /// f(x) = A0 everywhere (perfectly correlated noise).
    Constant,
    /// f(x) = A0 * exp(-|x|^2 / width^2).
    GaussianBump { width: f64 },
}

/// Spatial covariance function f of the driving noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialCovariance {
    /// Bounded covariance with maximum A0 = f(0).
    Bounded { a0: f64, profile: BoundedProfile },
    /// Riesz kernel f(x) = |x|^{-alpha}.
    Riesz { alpha: f64 },
    /// White noise in space (d = 1 only).
    SpaceWhite,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpecError {
    #[error("parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("Riesz exponent must satisfy 0 < alpha < d, got alpha={alpha}, d={d}")]
    RieszAlphaOutOfRange { alpha: f64, d: usize },
    #[error("space-white covariance is only defined in dimension 1, got d={d}")]
    SpaceWhiteNeedsDimOne { d: usize },
    #[error("Hurst index must lie in {range}, got {hurst}")]
    HurstOutOfRange { hurst: f64, range: &'static str },
    #[error("generalized-noise parameters need a1 >= 0 and -1 < a2 <= 0, got a1={a1}, a2={a2}")]
    GeneralizedParamsOutOfRange { a1: f64, a2: f64 },
    #[error("generalized-noise parameters give H = {hurst} > 1")]
    GeneralizedHurstTooLarge { hurst: f64 },
    #[error("wave equation requires d in {{1,2,3}}, got d={d}")]
    WaveDimension { d: usize },
    #[error("spatial dimension must be >= 1")]
    ZeroDimension,
    #[error("initial datum u0 must be nonnegative, got {u0}")]
    NegativeInitialDatum { u0: f64 },
}

impl SpatialCovariance {
    /// Bounded covariance with scale `a0` (must be positive).
    pub fn bounded(a0: f64, profile: BoundedProfile) -> Result<Self, SpecError> {
        if !(a0 > 0.0) {
            return Err(SpecError::NonPositive { name: "a0", value: a0 });
        }
        if let BoundedProfile::GaussianBump { width } = profile {
            if !(width > 0.0) {
                return Err(SpecError::NonPositive { name: "width", value: width });
            }
        }
        Ok(SpatialCovariance::Bounded { a0, profile })
    }

    /// Riesz kernel with exponent `alpha`, valid in dimension `d`.
    pub fn riesz(alpha: f64, d: usize) -> Result<Self, SpecError> {
        if alpha > 0.0 && alpha < d as f64 {
            Ok(SpatialCovariance::Riesz { alpha })
        } else {
            Err(SpecError::RieszAlphaOutOfRange { alpha, d })
        }
    }

    /// Space-white covariance; only constructible in dimension 1.
    pub fn space_white(d: usize) -> Result<Self, SpecError> {
        if d == 1 {
            Ok(SpatialCovariance::SpaceWhite)
        } else {
            Err(SpecError::SpaceWhiteNeedsDimOne { d })
        }
    }

    /// The spatial roughness parameter: 0 for bounded covariance, alpha for
    /// the Riesz kernel, 1 for space-white noise.
    pub fn a_param(&self) -> f64 {
        match self {
            SpatialCovariance::Bounded { .. } => 0.0,
            SpatialCovariance::Riesz { alpha } => *alpha,
            SpatialCovariance::SpaceWhite => 1.0,
        }
    }
}

/// Temporal correlation family of the noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeFamily {
    /// White in time (H = 1/2, unit weight).
    WhiteTime,
    /// White in time reweighted by s^{H-1/2} (semimartingale surrogate for
    /// fractional noise with matching variance order t^{2H}).
    Do { hurst: f64 },
    /// Standard fractional noise, covariance alpha_H |s-t|^{2H-2}.
    Fractional { hurst: f64 },
    /// Covariance (st)^{a1} |s-t|^{a2} with 2 a1 + a2 = 2H - 2; interpolates
    /// between the two families above.
    Generalized { a1: f64, a2: f64 },
}

impl TimeFamily {
    pub fn do_noise(hurst: f64) -> Result<Self, SpecError> {
        if hurst > 0.0 && hurst < 1.0 {
            Ok(TimeFamily::Do { hurst })
        } else {
            Err(SpecError::HurstOutOfRange { hurst, range: "(0,1)" })
        }
    }

    pub fn fractional(hurst: f64) -> Result<Self, SpecError> {
        if hurst > 0.5 && hurst < 1.0 {
            Ok(TimeFamily::Fractional { hurst })
        } else {
            Err(SpecError::HurstOutOfRange { hurst, range: "(1/2,1)" })
        }
    }

    pub fn generalized(a1: f64, a2: f64) -> Result<Self, SpecError> {
        if !(a1 >= 0.0 && a2 > -1.0 && a2 <= 0.0) {
            return Err(SpecError::GeneralizedParamsOutOfRange { a1, a2 });
        }
        let hurst = a1 + a2 / 2.0 + 1.0;
        if hurst > 1.0 {
            return Err(SpecError::GeneralizedHurstTooLarge { hurst });
        }
        Ok(TimeFamily::Generalized { a1, a2 })
    }
}

/// Full noise specification: temporal family plus spatial covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub time: TimeFamily,
    pub spatial: SpatialCovariance,
}

impl NoiseSpec {
    pub fn new(time: TimeFamily, spatial: SpatialCovariance) -> Self {
        NoiseSpec { time, spatial }
    }

    /// Hurst index of the temporal family. For the generalized family this
    /// is the derived value H = a1 + a2/2 + 1.
    pub fn hurst(&self) -> f64 {
        match self.time {
            TimeFamily::WhiteTime => 0.5,
            TimeFamily::Do { hurst } | TimeFamily::Fractional { hurst } => hurst,
            TimeFamily::Generalized { a1, a2 } => a1 + a2 / 2.0 + 1.0,
        }
    }

    /// The fractional-noise normalization H(2H-1); only meaningful for the
    /// standard fractional family.
    pub fn alpha_h(&self) -> Option<f64> {
        match self.time {
            TimeFamily::Fractional { hurst } => Some(hurst * (2.0 * hurst - 1.0)),
            _ => None,
        }
    }

    pub fn a_param(&self) -> f64 {
        self.spatial.a_param()
    }
}

/// Which equation is driven by the noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquationKind {
    Heat,
    Wave,
}

/// Equation, dimension and (constant) initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquationSpec {
    pub kind: EquationKind,
    pub d: usize,
    pub u0: f64,
    /// Initial velocity; only used by the wave equation.
    pub v0: f64,
}

impl EquationSpec {
    pub fn heat(d: usize, u0: f64) -> Result<Self, SpecError> {
        if d == 0 {
            return Err(SpecError::ZeroDimension);
        }
        if u0 < 0.0 {
            return Err(SpecError::NegativeInitialDatum { u0 });
        }
        Ok(EquationSpec { kind: EquationKind::Heat, d, u0, v0: 0.0 })
    }

    pub fn wave(d: usize, u0: f64, v0: f64) -> Result<Self, SpecError> {
        if !(1..=3).contains(&d) {
            return Err(SpecError::WaveDimension { d });
        }
        if u0 < 0.0 {
            return Err(SpecError::NegativeInitialDatum { u0 });
        }
        Ok(EquationSpec { kind: EquationKind::Wave, d, u0, v0 })
    }
}

/// Predicted stretched-exponential growth exponents: moments grow like
/// exp(c * n^{rho_n} * t^{rho_t}).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentPrediction {
    /// Exponent of t.
    pub rho_t: f64,
    /// Exponent of the moment order n.
    pub rho_n: f64,
}

/// A single violated admissibility constraint, named after the condition it
/// checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("heat equation needs H > a/4: H={hurst}, a={a}")]
    HeatHurstTooSmall { hurst: f64, a: f64 },
    #[error("wave equation needs H > (a-2)/2: H={hurst}, a={a}")]
    WaveHurstTooSmall { hurst: f64, a: f64 },
    #[error("H must satisfy H < 1 for comparability across families: H={hurst}")]
    HurstNotBelowOne { hurst: f64 },
    #[error("spectral integrability needs a < min(2,d): a={a}, d={d}")]
    DalangViolated { a: f64, d: usize },
    #[error("Riesz kernel needs alpha < d: alpha={alpha}, d={d}")]
    RieszAlphaVsDim { alpha: f64, d: usize },
    #[error("space-white covariance needs d = 1: d={d}")]
    SpaceWhiteDim { d: usize },
    #[error("wave equation supports d in {{1,2,3}}: d={d}")]
    WaveDimTooLarge { d: usize },
}

/// Collects every violated constraint for the (equation, noise) pair; an
/// empty list means the configuration is admissible. Never aborts.
pub fn validate(eq: &EquationSpec, noise: &NoiseSpec) -> Vec<Violation> {
    let mut violations = Vec::new();
    let a = noise.a_param();
    let hurst = noise.hurst();
    let d = eq.d;

    match eq.kind {
        EquationKind::Heat => {
            if hurst <= a / 4.0 {
                violations.push(Violation::HeatHurstTooSmall { hurst, a });
            }
        }
        EquationKind::Wave => {
            if hurst <= (a - 2.0) / 2.0 {
                violations.push(Violation::WaveHurstTooSmall { hurst, a });
            }
            if d >= 4 {
                violations.push(Violation::WaveDimTooLarge { d });
            }
        }
    }
    if hurst >= 1.0 {
        violations.push(Violation::HurstNotBelowOne { hurst });
    }
    if let SpatialCovariance::Riesz { alpha } = noise.spatial {
        if alpha >= d as f64 {
            violations.push(Violation::RieszAlphaVsDim { alpha, d });
        }
        // White in time leaves no temporal smoothing, so the spectral
        // condition a < min(2,d) must hold on its own.
        if matches!(noise.time, TimeFamily::WhiteTime) && alpha >= 2.0_f64.min(d as f64) {
            violations.push(Violation::DalangViolated { a, d });
        }
    }
    if matches!(noise.spatial, SpatialCovariance::SpaceWhite) && d != 1 {
        violations.push(Violation::SpaceWhiteDim { d });
    }
    violations
}

/// Which frequency tail makes the spectral integral fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergingTail {
    SmallFrequency,
    LargeFrequency,
}

/// Result of evaluating the spectral integrability integral
/// int mu(dxi) / (1 + |xi|^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DalangIntegral {
    /// Numeric value when finite; None for bounded covariance where only the
    /// finiteness flag is meaningful (the spectral measure has finite mass).
    pub value: Option<f64>,
    pub finite: bool,
    pub diverging_tail: Option<DivergingTail>,
}

/// Evaluates int mu(dxi)/(1+|xi|^2) with mu(dxi) = |xi|^{-(d-alpha)} dxi
/// (Riesz constant set to 1) or mu = Lebesgue (space-white, d = 1).
///
/// Divergence is declared analytically when alpha >= min(2,d): for
/// alpha >= 2 the integrand itself fails at large frequencies, and for
/// alpha >= d the kernel |x|^{-alpha} is not locally integrable, which shows
/// up as a non-decaying spectral density at large frequencies.
pub fn dalang_integral(spatial: &SpatialCovariance, d: usize) -> DalangIntegral {
    match spatial {
        SpatialCovariance::Bounded { .. } => DalangIntegral {
            value: None,
            finite: true,
            diverging_tail: None,
        },
        SpatialCovariance::SpaceWhite => {
            // mu = Lebesgue in d = 1: integral of 1/(1+xi^2) = pi.
            DalangIntegral {
                value: Some(std::f64::consts::PI),
                finite: true,
                diverging_tail: None,
            }
        }
        SpatialCovariance::Riesz { alpha } => {
            let alpha = *alpha;
            if alpha <= 0.0 {
                return DalangIntegral {
                    value: None,
                    finite: false,
                    diverging_tail: Some(DivergingTail::SmallFrequency),
                };
            }
            if alpha >= 2.0_f64.min(d as f64) {
                return DalangIntegral {
                    value: None,
                    finite: false,
                    diverging_tail: Some(DivergingTail::LargeFrequency),
                };
            }
            // Radial reduction: S_{d-1} * int_0^inf r^{alpha-1}/(1+r^2) dr,
            // split at r = 1; each piece is de-singularized by u = r^beta so
            // plain adaptive quadrature applies.
            let surface = unit_sphere_area(d);
            let piece = |beta: f64| -> f64 {
                // int_0^1 r^{beta-1}/(1+r^2) dr = (1/beta) int_0^1 du/(1+u^{2/beta})
                let exponent = 2.0 / beta;
                crate::numutil::adaptive_simpson(
                    &|u: f64| 1.0 / (1.0 + u.powf(exponent)),
                    0.0,
                    1.0,
                    1e-12,
                ) / beta
            };
            let value = surface * (piece(alpha) + piece(2.0 - alpha));
            DalangIntegral {
                value: Some(value),
                finite: true,
                diverging_tail: None,
            }
        }
    }
}

/// Surface area of the unit sphere in R^d (2 for d = 1).
pub(crate) fn unit_sphere_area(d: usize) -> f64 {
    let d = d as f64;
    2.0 * std::f64::consts::PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0)
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PredictionError {
    #[error("heat exponents need a < 2, got a={a}")]
    HeatRoughness { a: f64 },
    #[error("wave exponents need a < 3, got a={a}")]
    WaveRoughness { a: f64 },
}

/// Closed-form growth exponents: heat moments grow like
/// exp(n^{(4-a)/(2-a)} t^{(4H-a)/(2-a)}), wave moments like
/// exp(n^{(4-a)/(3-a)} t^{(2H+2-a)/(3-a)}).
pub fn predicted_exponents(
    eq: &EquationSpec,
    noise: &NoiseSpec,
) -> Result<ExponentPrediction, PredictionError> {
    let a = noise.a_param();
    let hurst = noise.hurst();
    match eq.kind {
        EquationKind::Heat => {
            if a >= 2.0 {
                return Err(PredictionError::HeatRoughness { a });
            }
            Ok(ExponentPrediction {
                rho_t: (4.0 * hurst - a) / (2.0 - a),
                rho_n: (4.0 - a) / (2.0 - a),
            })
        }
        EquationKind::Wave => {
            if a >= 3.0 {
                return Err(PredictionError::WaveRoughness { a });
            }
            Ok(ExponentPrediction {
                rho_t: (2.0 * hurst + 2.0 - a) / (3.0 - a),
                rho_n: (4.0 - a) / (3.0 - a),
            })
        }
    }
}
