//! Monte Carlo estimators for the moment representations: heat and wave
//! second/n-th moments via pair-restarted processes driven by a merged
//! Poisson clock, and the exponential-functional estimator for the
//! generalized noise.
//!
//! Determinism contract: replica r draws from stream r of a counter-based
//! generator seeded with the master seed, and aggregation runs in replica
//! order, so results are bit-identical for any worker count.

use crate::kernels::{covariance_eval_radial, deterministic_solution, wave_displacement_into};
use crate::model::{EquationKind, EquationSpec, NoiseSpec, SpatialCovariance, TimeFamily};
use crate::numutil::{KahanSum, LogAccumulator};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

/// Separations below this are clipped before evaluating a Riesz covariance.
pub const RIESZ_CLIP: f64 = 1e-6;

/// Fraction of replicas inspected by the heavy-tail diagnostic.
const HEAVY_TAIL_TOP: f64 = 0.01;
/// Mass share above which the heavy-tail warning fires.
const HEAVY_TAIL_SHARE: f64 = 0.5;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EstimatorError {
    #[error("this estimator supports the time-weighted white families only, got {family}")]
    UnsupportedTimeFamily { family: &'static str },
    #[error("the exponential-functional route needs the generalized or fractional family")]
    NeedsGeneralizedFamily,
    #[error("space-white covariance has no pointwise values; use a bounded or Riesz kernel")]
    SpaceWhiteUnsupported,
    #[error("expected the {expected:?} equation")]
    WrongEquation { expected: EquationKind },
    #[error("moment order must be >= {min}, got {n}")]
    OrderTooSmall { n: usize, min: usize },
    #[error("need {expected} starting points of dimension {d}, got {got}")]
    BadStartingPoints { expected: usize, d: usize, got: usize },
    #[error("Riesz exponent must satisfy alpha < min(2,d) for the path integral, got alpha={alpha}, d={d}")]
    RieszTooRough { alpha: f64, d: usize },
    #[error("quadrature grid needs at least 16 steps, got {steps}")]
    GridTooCoarse { steps: usize },
    #[error("stride {stride} does not divide quad_steps {steps}")]
    BadStride { stride: usize, steps: usize },
    #[error("replica count must be positive")]
    NoReplicas,
}

/// Monte Carlo estimate with its sampling error and provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    /// Sample standard deviation / sqrt(n_rep), in the mean's units.
    pub stderr: f64,
    pub n_rep: usize,
    pub seed: u64,
    /// log of the mean, accumulated in the log domain; stays finite when the
    /// linear mean overflows.
    pub log_mean: f64,
    /// Set when the top 1% of replicas carries more than half the total
    /// mass; the linear-domain stderr is then unreliable.
    pub heavy_tail_warning: bool,
}

impl MomentEstimate {
    fn exact(value: f64, n_rep: usize, seed: u64) -> Self {
        MomentEstimate {
            mean: value,
            stderr: 0.0,
            n_rep,
            seed,
            log_mean: value.ln(),
            heavy_tail_warning: false,
        }
    }
}

/// Aggregates nonnegative per-replica values into an estimate of
/// e^{ln_scale} * E[V]. Sequential and replica-ordered for bit-exactness.
pub fn aggregate(values: &[f64], ln_scale: f64, seed: u64) -> MomentEstimate {
    let n = values.len();
    assert!(n > 0);
    let scale = ln_scale.exp();
    let mut sum = KahanSum::new();
    for &v in values {
        sum.add(v);
    }
    let mean_raw = sum.total() / n as f64;
    let mut var_sum = KahanSum::new();
    for &v in values {
        let d = v - mean_raw;
        var_sum.add(d * d);
    }
    let var = if n > 1 { var_sum.total() / (n - 1) as f64 } else { 0.0 };
    let stderr = scale * (var / n as f64).sqrt();

    let mut log_acc = LogAccumulator::new();
    for &v in values {
        log_acc.add_ln(v.ln());
    }
    let log_mean = ln_scale + log_acc.ln_total() - (n as f64).ln();

    let heavy_tail_warning = if mean_raw > 0.0 {
        let top = ((n as f64 * HEAVY_TAIL_TOP).ceil() as usize).max(1);
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let top_mass: f64 = sorted[..top].iter().sum();
        top_mass / sum.total() > HEAVY_TAIL_SHARE
    } else {
        false
    };

    MomentEstimate {
        mean: scale * mean_raw,
        stderr,
        n_rep: n,
        seed,
        log_mean,
        heavy_tail_warning,
    }
}

/// Aggregates per-replica values given by their logarithms. The linear-scale
/// statistics are computed under a max-shift so that the mean and stderr are
/// exact whenever they are representable, while `log_mean` stays finite even
/// when they are not.
pub fn aggregate_from_ln(ln_values: &[f64], ln_scale: f64, seed: u64) -> MomentEstimate {
    let n = ln_values.len();
    assert!(n > 0);
    let shift = ln_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        // All-zero sample.
        return MomentEstimate {
            mean: 0.0,
            stderr: 0.0,
            n_rep: n,
            seed,
            log_mean: f64::NEG_INFINITY,
            heavy_tail_warning: false,
        };
    }
    let scaled: Vec<f64> = ln_values.iter().map(|&l| (l - shift).exp()).collect();
    let mut sum = KahanSum::new();
    for &x in &scaled {
        sum.add(x);
    }
    let mean_x = sum.total() / n as f64;
    let mut var_sum = KahanSum::new();
    for &x in &scaled {
        let d = x - mean_x;
        var_sum.add(d * d);
    }
    let var_x = if n > 1 { var_sum.total() / (n - 1) as f64 } else { 0.0 };
    let lift = (ln_scale + shift).exp();
    let log_mean = ln_scale + shift + mean_x.ln();

    let top = ((n as f64 * HEAVY_TAIL_TOP).ceil() as usize).max(1);
    let mut sorted = scaled.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top_mass: f64 = sorted[..top].iter().sum();
    let heavy_tail_warning = top_mass / sum.total() > HEAVY_TAIL_SHARE;

    MomentEstimate {
        mean: lift * mean_x,
        stderr: lift * (var_x / n as f64).sqrt(),
        n_rep: n,
        seed,
        log_mean,
        heavy_tail_warning,
    }
}

fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

/// Pointwise covariance with the Riesz singularity clipped at [`RIESZ_CLIP`].
fn cov_clipped(spatial: &SpatialCovariance, delta: &[f64]) -> f64 {
    let r = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
    match spatial {
        SpatialCovariance::Riesz { .. } => {
            covariance_eval_radial(spatial, r.max(RIESZ_CLIP)).expect("clipped")
        }
        _ => covariance_eval_radial(spatial, r).expect("bounded covariance"),
    }
}

/// How an index's position moves between its own jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DisplacementLaw {
    /// Gaussian increment with variance = gap per coordinate (heat).
    Gaussian,
    /// Wave-kernel displacement over the gap (wave).
    WaveBall,
}

/// One replica's merged-clock jump structure for the n-th moment
/// representation: jump times of the rate nu_n = n(n-1)/2 process, the pair
/// hit by each jump, and each index's own jump times and positions there.
#[derive(Debug, Clone)]
pub struct PoissonPairEnsemble {
    pub n: usize,
    /// nu_n = n(n-1)/2, the merged jump rate.
    pub pair_rate: f64,
    /// Ascending jump times of the merged process on (0, t].
    pub sigma: Vec<f64>,
    /// Index pair (a, b), a < b, hit by each merged jump.
    pub pairs: Vec<(usize, usize)>,
    /// Jump times of each index (its own subsequence of sigma); the index
    /// starts at time 0 at its starting point.
    pub tau_per_index: Vec<Vec<f64>>,
    /// Position of each index at each of its own jump times.
    pub positions: Vec<Vec<Vec<f64>>>,
}

impl PoissonPairEnsemble {
    fn sample<R: Rng>(
        n: usize,
        t: f64,
        starts: &[Vec<f64>],
        law: DisplacementLaw,
        rng: &mut R,
    ) -> Self {
        let d = starts[0].len();
        let n_pairs = n * (n - 1) / 2;
        let pair_rate = n_pairs as f64;
        let pair_table: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .collect();

        let mut sigma = Vec::new();
        let mut pairs = Vec::new();
        let mut tau_per_index = vec![Vec::new(); n];
        let mut positions: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n];
        let mut current: Vec<Vec<f64>> = starts.to_vec();
        let mut last_jump = vec![0.0_f64; n];
        let mut scratch = vec![0.0_f64; d];

        let mut clock = 0.0_f64;
        loop {
            let u: f64 = rng.random();
            clock += -(1.0 - u).ln() / pair_rate;
            if clock > t {
                break;
            }
            let (a, b) = if n_pairs == 1 {
                pair_table[0]
            } else {
                pair_table[rng.random_range(0..n_pairs)]
            };
            for k in [a, b] {
                let gap = clock - last_jump[k];
                match law {
                    DisplacementLaw::Gaussian => {
                        let sd = gap.sqrt();
                        for c in 0..d {
                            let z: f64 = StandardNormal.sample(rng);
                            current[k][c] += sd * z;
                        }
                    }
                    DisplacementLaw::WaveBall => {
                        wave_displacement_into(gap, d, rng, &mut scratch)
                            .expect("dimension checked at entry");
                        for c in 0..d {
                            current[k][c] += scratch[c];
                        }
                    }
                }
                last_jump[k] = clock;
                tau_per_index[k].push(clock);
                positions[k].push(current[k].clone());
            }
            sigma.push(clock);
            pairs.push((a, b));
        }

        PoissonPairEnsemble { n, pair_rate, sigma, pairs, tau_per_index, positions }
    }

    /// Merged jump count; equals half the sum of per-index counts since
    /// every jump touches exactly two indices.
    pub fn merged_count(&self) -> usize {
        self.sigma.len()
    }
}

struct PairEstimatorSetup<'a> {
    eq: &'a EquationSpec,
    spatial: &'a SpatialCovariance,
    hurst: f64,
    law: DisplacementLaw,
}

/// The product inside the expectation of the n-th moment representation for
/// one sampled ensemble: the w legs at each index's last jump and the
/// per-jump factor (t - sigma_i)^{2H-1} [gap_a gap_b] f(X^a - X^b).
fn replica_product(setup: &PairEstimatorSetup, t: f64, ens: &PoissonPairEnsemble) -> f64 {
    let weight_exp = 2.0 * setup.hurst - 1.0;
    let mut value = 1.0_f64;
    for k in 0..ens.n {
        let last = ens.tau_per_index[k].last().copied().unwrap_or(0.0);
        value *= deterministic_solution(setup.eq, t - last);
    }
    let mut cursors = vec![0usize; ens.n];
    let mut delta = vec![0.0_f64; setup.eq.d];
    for (i, &sigma) in ens.sigma.iter().enumerate() {
        let (a, b) = ens.pairs[i];
        let (ca, cb) = (cursors[a], cursors[b]);
        let pos_a = &ens.positions[a][ca];
        let pos_b = &ens.positions[b][cb];
        for c in 0..delta.len() {
            delta[c] = pos_a[c] - pos_b[c];
        }
        let mut factor = (t - sigma).powf(weight_exp) * cov_clipped(setup.spatial, &delta);
        if setup.law == DisplacementLaw::WaveBall {
            let gap_a = sigma - if ca > 0 { ens.tau_per_index[a][ca - 1] } else { 0.0 };
            let gap_b = sigma - if cb > 0 { ens.tau_per_index[b][cb - 1] } else { 0.0 };
            factor *= gap_a * gap_b;
        }
        value *= factor;
        cursors[a] += 1;
        cursors[b] += 1;
    }
    value
}

fn preflight_pair(
    eq: &EquationSpec,
    noise: &NoiseSpec,
    expected: EquationKind,
    starts: &[Vec<f64>],
    n_rep: usize,
) -> Result<(), EstimatorError> {
    if eq.kind != expected {
        return Err(EstimatorError::WrongEquation { expected });
    }
    match noise.time {
        TimeFamily::WhiteTime | TimeFamily::Do { .. } => {}
        TimeFamily::Fractional { .. } => {
            return Err(EstimatorError::UnsupportedTimeFamily { family: "fractional" })
        }
        TimeFamily::Generalized { .. } => {
            return Err(EstimatorError::UnsupportedTimeFamily { family: "generalized" })
        }
    }
    if matches!(noise.spatial, SpatialCovariance::SpaceWhite) {
        return Err(EstimatorError::SpaceWhiteUnsupported);
    }
    if starts.len() < 2 {
        return Err(EstimatorError::OrderTooSmall { n: starts.len(), min: 2 });
    }
    if starts.iter().any(|x| x.len() != eq.d) {
        return Err(EstimatorError::BadStartingPoints {
            expected: starts.len(),
            d: eq.d,
            got: starts.iter().map(|x| x.len()).min().unwrap_or(0),
        });
    }
    if n_rep == 0 {
        return Err(EstimatorError::NoReplicas);
    }
    Ok(())
}

/// Unscaled per-replica products of the n-th moment representation, in
/// replica order. The estimator mean is e^{nu_n t} times the average.
pub fn pair_replica_values(
    eq: &EquationSpec,
    noise: &NoiseSpec,
    t: f64,
    starts: &[Vec<f64>],
    n_rep: usize,
    seed: u64,
) -> Result<Vec<f64>, EstimatorError> {
    preflight_pair(eq, noise, eq.kind, starts, n_rep)?;
    let law = match eq.kind {
        EquationKind::Heat => DisplacementLaw::Gaussian,
        EquationKind::Wave => DisplacementLaw::WaveBall,
    };
    let setup = PairEstimatorSetup { eq, spatial: &noise.spatial, hurst: noise.hurst(), law };
    let n = starts.len();
    let values: Vec<f64> = (0..n_rep)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            let ens = PoissonPairEnsemble::sample(n, t, starts, law, &mut rng);
            replica_product(&setup, t, &ens)
        })
        .collect();
    Ok(values)
}

fn pair_moment(
    eq: &EquationSpec,
    noise: &NoiseSpec,
    t: f64,
    starts: &[Vec<f64>],
    n_rep: usize,
    seed: u64,
) -> Result<MomentEstimate, EstimatorError> {
    preflight_pair(eq, noise, eq.kind, starts, n_rep)?;
    let n = starts.len();
    if t <= 0.0 {
        return Ok(MomentEstimate::exact(eq.u0.powi(n as i32), n_rep, seed));
    }
    let values = pair_replica_values(eq, noise, t, starts, n_rep, seed)?;
    let nu_n = (n * (n - 1)) as f64 / 2.0;
    Ok(aggregate(&values, nu_n * t, seed))
}

/// E[u(t,x) u(t,y)] for the heat equation via the two-process jump
/// representation. Identical, replica for replica, to the n = 2 case of
/// [`nth_moment_heat_mc`].
pub fn second_moment_heat_mc(
    eq: &EquationSpec,
    noise: &NoiseSpec,
    t: f64,
    x: &[f64],
    y: &[f64],
    n_rep: usize,
    seed: u64,
) -> Result<MomentEstimate, EstimatorError> {
    nth_moment_heat_mc(eq, noise, t, &[x.to_vec(), y.to_vec()], n_rep, seed)
}

/// E[u(t,x_1) ... u(t,x_n)] for the heat equation via the pair-ensemble
/// representation; the order is the number of starting points.
pub fn nth_moment_heat_mc(
    eq: &EquationSpec,
    noise: &NoiseSpec,
    t: f64,
    starts: &[Vec<f64>],
    n_rep: usize,
    seed: u64,
) -> Result<MomentEstimate, EstimatorError> {
    if eq.kind != EquationKind::Heat {
        return Err(EstimatorError::WrongEquation { expected: EquationKind::Heat });
    }
    pair_moment(eq, noise, t, starts, n_rep, seed)
}

/// Wave-equation second moment; displacements follow the wave-kernel law
/// and each jump carries the squared-gap renormalization mass.
pub fn second_moment_wave_mc(
    eq: &EquationSpec,
    noise: &NoiseSpec,
    t: f64,
    x: &[f64],
    y: &[f64],
    n_rep: usize,
    seed: u64,
) -> Result<MomentEstimate, EstimatorError> {
    nth_moment_wave_mc(eq, noise, t, &[x.to_vec(), y.to_vec()], n_rep, seed)
}

/// Wave-equation n-th moment via the pair ensemble; the per-jump factor is
/// (t - sigma_i)^{2H-1} gap_a gap_b f(X^a - X^b), where each gap is that
/// index's time since its own previous jump.
pub fn nth_moment_wave_mc(
    eq: &EquationSpec,
    noise: &NoiseSpec,
    t: f64,
    starts: &[Vec<f64>],
    n_rep: usize,
    seed: u64,
) -> Result<MomentEstimate, EstimatorError> {
    if eq.kind != EquationKind::Wave {
        return Err(EstimatorError::WrongEquation { expected: EquationKind::Wave });
    }
    pair_moment(eq, noise, t, starts, n_rep, seed)
}

/// Exact per-cell masses of |s-r|^{a2} over a uniform grid, indexed by the
/// cell-offset |p-q|; obtained from the closed double antiderivative
/// F2(x) = x^{a2+2} / ((a2+1)(a2+2)).
fn singular_cell_masses(a2: f64, cells: usize, dt: f64) -> Vec<f64> {
    let f2 = |x: f64| x.powf(a2 + 2.0) / ((a2 + 1.0) * (a2 + 2.0));
    let mut masses = Vec::with_capacity(cells);
    masses.push(2.0 * f2(dt));
    for j in 1..cells {
        let jf = j as f64;
        masses.push(f2((jf + 1.0) * dt) - 2.0 * f2(jf * dt) + f2((jf - 1.0) * dt));
    }
    masses
}

/// Node weights spreading each cell's exact singular mass uniformly over its
/// four corners (the product-trapezoid rule for the smooth factor).
fn fk_node_weights(a2: f64, nodes: usize, dt: f64) -> Vec<Vec<f64>> {
    let cells = nodes - 1;
    let masses = singular_cell_masses(a2, cells, dt);
    let mut omega = vec![vec![0.0_f64; nodes]; nodes];
    for p in 0..nodes {
        for q in 0..nodes {
            let mut w = 0.0;
            for cp in p.saturating_sub(1)..=p.min(cells - 1) {
                for cq in q.saturating_sub(1)..=q.min(cells - 1) {
                    w += masses[cp.abs_diff(cq)];
                }
            }
            omega[p][q] = 0.25 * w;
        }
    }
    omega
}

struct FkParams {
    a1: f64,
    a2: f64,
    d: usize,
    k: usize,
    t: f64,
}

/// Covariance evaluation with the enum dispatch hoisted out of the node
/// loops; radial argument, clipped like [`cov_clipped`].
#[derive(Clone, Copy)]
enum FastCov {
    Const(f64),
    Bump { a0: f64, inv_w2: f64 },
    Riesz { alpha: f64 },
}

impl FastCov {
    fn from_spatial(spatial: &SpatialCovariance) -> Self {
        match spatial {
            SpatialCovariance::Bounded { a0, profile } => match profile {
                crate::model::BoundedProfile::Constant => FastCov::Const(*a0),
                crate::model::BoundedProfile::GaussianBump { width } => {
                    FastCov::Bump { a0: *a0, inv_w2: 1.0 / (width * width) }
                }
            },
            SpatialCovariance::Riesz { alpha } => FastCov::Riesz { alpha: *alpha },
            SpatialCovariance::SpaceWhite => unreachable!("rejected at entry"),
        }
    }

    #[inline]
    fn eval_r2(&self, r2: f64) -> f64 {
        match *self {
            FastCov::Const(a0) => a0,
            FastCov::Bump { a0, inv_w2 } => a0 * (-r2 * inv_w2).exp(),
            FastCov::Riesz { alpha } => r2.sqrt().max(RIESZ_CLIP).powf(-alpha),
        }
    }
}

fn fk_family_params(noise: &NoiseSpec) -> Result<(f64, f64), EstimatorError> {
    match noise.time {
        TimeFamily::Generalized { a1, a2 } => Ok((a1, a2)),
        // The standard fractional family is the a1 = 0 slice.
        TimeFamily::Fractional { hurst } => Ok((0.0, 2.0 * hurst - 2.0)),
        _ => Err(EstimatorError::NeedsGeneralizedFamily),
    }
}

/// Per-replica log-values sum_{i<j} I(i,j) of the exponential functional,
/// evaluated on every requested stride of the simulation grid (stride 1 is
/// the full grid). All strides reuse the same Brownian nodes, which makes
/// stride differences pure quadrature bias.
#[allow(clippy::too_many_arguments)]
fn fk_replica_values(
    noise: &NoiseSpec,
    params: &FkParams,
    n_rep: usize,
    quad_steps: usize,
    seed: u64,
    strides: &[usize],
) -> Vec<Vec<f64>> {
    let m = quad_steps;
    let dt = params.t / m as f64;
    let spatial = noise.spatial;

    // Per-stride node weights and time-power vectors, shared read-only.
    let per_stride: Vec<(usize, Vec<Vec<f64>>, Vec<f64>)> = strides
        .iter()
        .map(|&s| {
            let nodes = m / s + 1;
            let dts = dt * s as f64;
            let omega = fk_node_weights(params.a2, nodes, dts);
            let w: Vec<f64> = (0..nodes)
                .map(|p| {
                    let time = dts * p as f64;
                    if params.a1 == 0.0 {
                        1.0
                    } else {
                        time.powf(params.a1)
                    }
                })
                .collect();
            (s, omega, w)
        })
        .collect();

    let cov = FastCov::from_spatial(&spatial);
    let values: Vec<Vec<f64>> = (0..n_rep)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            // k independent d-dimensional paths on the fine grid.
            let mut paths = vec![vec![0.0_f64; (m + 1) * params.d]; params.k];
            for path in paths.iter_mut() {
                for p in 1..=m {
                    for c in 0..params.d {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        path[p * params.d + c] = path[(p - 1) * params.d + c] + dt.sqrt() * z;
                    }
                }
            }
            per_stride
                .iter()
                .map(|(s, omega, w)| {
                    let nodes = m / s + 1;
                    // Contiguous subsampled paths for this stride.
                    let coarse: Vec<Vec<f64>> = paths
                        .iter()
                        .map(|path| {
                            (0..nodes)
                                .flat_map(|p| {
                                    (0..params.d).map(move |c| path[p * s * params.d + c])
                                })
                                .collect()
                        })
                        .collect();
                    let mut exponent = KahanSum::new();
                    for i in 0..params.k {
                        for j in (i + 1)..params.k {
                            let (bi, bj) = (&coarse[i], &coarse[j]);
                            for p in 0..nodes {
                                let row = &omega[p];
                                // Plain sum within a row, compensation across
                                // rows.
                                let mut acc = 0.0_f64;
                                if params.d == 1 {
                                    let x = bi[p];
                                    for q in 0..nodes {
                                        let dx = x - bj[q];
                                        acc += row[q] * w[q] * cov.eval_r2(dx * dx);
                                    }
                                } else {
                                    let xp = &bi[p * params.d..(p + 1) * params.d];
                                    for q in 0..nodes {
                                        let xq = &bj[q * params.d..(q + 1) * params.d];
                                        let r2: f64 = xp
                                            .iter()
                                            .zip(xq)
                                            .map(|(a, b)| (a - b) * (a - b))
                                            .sum();
                                        acc += row[q] * w[q] * cov.eval_r2(r2);
                                    }
                                }
                                exponent.add(w[p] * acc);
                            }
                        }
                    }
                    exponent.total()
                })
                .collect()
        })
        .collect();
    values
}

/// k-th moment of the heat solution under generalized noise via the
/// exponential functional of k independent Brownian paths:
/// u0^k E[exp(sum_{i<j} int int gamma(s,r) f(B^i_s - B^j_r) ds dr)].
///
/// The double integral uses exact cell masses of the |s-r|^{a2} factor and
/// corner averages of the smooth factor on a uniform grid of `quad_steps`
/// steps.
#[allow(clippy::too_many_arguments)]
pub fn fk_moment_generalized_mc(
    noise: &NoiseSpec,
    d: usize,
    k: usize,
    t: f64,
    u0: f64,
    n_rep: usize,
    quad_steps: usize,
    seed: u64,
) -> Result<MomentEstimate, EstimatorError> {
    Ok(fk_moment_with_strides(noise, d, k, t, u0, n_rep, quad_steps, seed, &[1])?
        .pop()
        .expect("one stride requested"))
}

/// Per-replica values of the exponential functional on the full grid, in
/// replica order; the estimator mean is u0^k times their average.
#[allow(clippy::too_many_arguments)]
pub fn fk_replica_exponential_values(
    noise: &NoiseSpec,
    d: usize,
    k: usize,
    t: f64,
    n_rep: usize,
    quad_steps: usize,
    seed: u64,
) -> Result<Vec<f64>, EstimatorError> {
    let (a1, a2) = fk_family_params(noise)?;
    if k == 0 {
        return Err(EstimatorError::OrderTooSmall { n: 0, min: 1 });
    }
    if quad_steps < 16 {
        return Err(EstimatorError::GridTooCoarse { steps: quad_steps });
    }
    if n_rep == 0 {
        return Err(EstimatorError::NoReplicas);
    }
    if t <= 0.0 || k == 1 {
        return Ok(vec![1.0; n_rep]);
    }
    let params = FkParams { a1, a2, d, k, t };
    Ok(fk_replica_values(noise, &params, n_rep, quad_steps, seed, &[1])
        .into_iter()
        .map(|row| row[0].exp())
        .collect())
}

/// [`fk_moment_generalized_mc`] evaluated on several grid strides of the same
/// Brownian paths; stride s uses every s-th node. Used for quadrature
/// convergence diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn fk_moment_with_strides(
    noise: &NoiseSpec,
    d: usize,
    k: usize,
    t: f64,
    u0: f64,
    n_rep: usize,
    quad_steps: usize,
    seed: u64,
    strides: &[usize],
) -> Result<Vec<MomentEstimate>, EstimatorError> {
    let (a1, a2) = fk_family_params(noise)?;
    if k == 0 {
        return Err(EstimatorError::OrderTooSmall { n: 0, min: 1 });
    }
    if d == 0 {
        return Err(EstimatorError::BadStartingPoints { expected: k, d: 0, got: 0 });
    }
    if quad_steps < 16 {
        return Err(EstimatorError::GridTooCoarse { steps: quad_steps });
    }
    for &s in strides {
        if s == 0 || quad_steps % s != 0 || quad_steps / s < 16 {
            return Err(EstimatorError::BadStride { stride: s, steps: quad_steps });
        }
    }
    if n_rep == 0 {
        return Err(EstimatorError::NoReplicas);
    }
    if let SpatialCovariance::Riesz { alpha } = noise.spatial {
        if alpha >= 2.0_f64.min(d as f64) {
            return Err(EstimatorError::RieszTooRough { alpha, d });
        }
    }
    if matches!(noise.spatial, SpatialCovariance::SpaceWhite) {
        return Err(EstimatorError::SpaceWhiteUnsupported);
    }
    if t <= 0.0 || k == 1 {
        // No pairs or no time window: the functional is exactly u0^k.
        return Ok(vec![MomentEstimate::exact(u0.powi(k as i32), n_rep, seed); strides.len()]);
    }
    let params = FkParams { a1, a2, d, k, t };
    let per_replica = fk_replica_values(noise, &params, n_rep, quad_steps, seed, strides);
    let ln_scale = k as f64 * u0.ln();
    Ok((0..strides.len())
        .map(|si| {
            let ln_values: Vec<f64> = per_replica.iter().map(|row| row[si]).collect();
            aggregate_from_ln(&ln_values, ln_scale, seed)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoundedProfile;
    use crate::oracles::{heat_renewal_closed, nth_closed_constant_f, volterra_solve};
    use crate::specfun::gamma_time_integral;

    fn heat_eq(d: usize) -> EquationSpec {
        EquationSpec::heat(d, 1.0).unwrap()
    }

    fn const_noise(hurst: f64, a0: f64) -> NoiseSpec {
        NoiseSpec::new(
            TimeFamily::do_noise(hurst).unwrap(),
            SpatialCovariance::bounded(a0, BoundedProfile::Constant).unwrap(),
        )
    }

    fn origin(n: usize, d: usize) -> Vec<Vec<f64>> {
        vec![vec![0.0; d]; n]
    }

    #[test]
    fn ensemble_pair_bookkeeping() {
        let mut rng = replica_rng(7, 0);
        let ens = PoissonPairEnsemble::sample(
            4,
            3.0,
            &origin(4, 2),
            DisplacementLaw::Gaussian,
            &mut rng,
        );
        // Every merged jump touches exactly two indices.
        let per_index: usize = ens.tau_per_index.iter().map(|v| v.len()).sum();
        assert_eq!(2 * ens.merged_count(), per_index);
        // sigma strictly increasing, within (0, t].
        for w in ens.sigma.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(ens.sigma.iter().all(|&s| s > 0.0 && s <= 3.0));
        // positions recorded at every per-index jump.
        for k in 0..4 {
            assert_eq!(ens.tau_per_index[k].len(), ens.positions[k].len());
        }
        assert_eq!(ens.pair_rate, 6.0);
    }

    #[test]
    fn zero_time_is_exact() {
        let eq = heat_eq(1);
        let noise = const_noise(0.5, 1.0);
        let est =
            second_moment_heat_mc(&eq, &noise, 0.0, &[0.0], &[0.0], 100, 1).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
        let eq3 = EquationSpec::heat(1, 2.0).unwrap();
        let est3 = nth_moment_heat_mc(&eq3, &noise, 0.0, &origin(3, 1), 100, 1).unwrap();
        assert_eq!(est3.mean, 8.0);
        let wave = EquationSpec::wave(1, 2.0, 0.7).unwrap();
        let estw = nth_moment_wave_mc(&wave, &noise, 0.0, &origin(3, 1), 100, 1).unwrap();
        assert_eq!(estw.mean, 8.0);
    }

    #[test]
    fn zero_covariance_replicas_are_exact() {
        // With f = 0 every replica with a jump contributes exactly 0 and
        // every jump-free replica contributes w(t)^2; the estimator stays
        // unbiased.
        let eq = EquationSpec::wave(1, 1.0, 0.5).unwrap();
        let noise0 = NoiseSpec::new(
            TimeFamily::do_noise(0.5).unwrap(),
            SpatialCovariance::Bounded { a0: 0.0, profile: BoundedProfile::Constant },
        );
        let t = 0.4;
        let values =
            pair_replica_values(&eq, &noise0, t, &origin(2, 1), 4000, 3).unwrap();
        let w_t = 1.0 + t * 0.5;
        for &v in &values {
            assert!(v == 0.0 || (v - w_t * w_t).abs() < 1e-12, "v={v}");
        }
        // Noiseless wave second moment is w(t)^2; the estimator stays
        // unbiased because only jump-free replicas survive.
        let est = aggregate(&values, t, 3);
        assert!((est.mean - w_t * w_t).abs() <= 3.0 * est.stderr + 1e-9);
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let eq = heat_eq(1);
        let noise = const_noise(0.7, 1.0);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                second_moment_heat_mc(&eq, &noise, 1.0, &[0.0], &[0.0], 20_000, 99).unwrap()
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert_eq!(a.log_mean.to_bits(), b.log_mean.to_bits());
    }

    #[test]
    fn second_vs_nth_identical_protocol() {
        let eq = heat_eq(1);
        let noise = const_noise(0.6, 1.3);
        let a = second_moment_heat_mc(&eq, &noise, 0.8, &[0.1], &[-0.2], 5000, 17).unwrap();
        let b = nth_moment_heat_mc(&eq, &noise, 0.8, &[vec![0.1], vec![-0.2]], 5000, 17)
            .unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn heat_second_moment_matches_renewal() {
        let eq = heat_eq(1);
        let noise = const_noise(0.5, 1.0);
        let est =
            second_moment_heat_mc(&eq, &noise, 1.0, &[0.0], &[0.0], 100_000, 11).unwrap();
        // At H = 1/2 with A0 = 1 every jump factor is exactly 1, so the
        // estimator is exact and stderr is 0.
        let exact = heat_renewal_closed(1.0, 1.0, 0.5, 1.0);
        assert!(
            (est.mean - exact).abs() <= 3.0 * est.stderr + 1e-12 * exact,
            "{} vs {exact} (se {})",
            est.mean,
            est.stderr
        );
        assert!(est.stderr / est.mean < 0.05);
        // A Hurst index away from 1/2 exercises the weighted product.
        let noise = const_noise(0.3, 1.0);
        let est = second_moment_heat_mc(&eq, &noise, 1.0, &[0.0], &[0.0], 100_000, 11).unwrap();
        let exact = heat_renewal_closed(1.0, 1.0, 0.3, 1.0);
        assert!(est.stderr > 0.0);
        assert!(
            (est.mean - exact).abs() <= 3.0 * est.stderr,
            "{} vs {exact} (se {})",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn heat_third_moment_matches_rate_renewal() {
        let eq = heat_eq(1);
        let noise = const_noise(0.75, 1.0);
        let est =
            nth_moment_heat_mc(&eq, &noise, 0.8, &origin(3, 1), 200_000, 5).unwrap();
        let exact = nth_closed_constant_f(3, 1.0, 1.0, 0.75, 0.8);
        assert!(
            (est.mean - exact).abs() < 3.0 * est.stderr,
            "{} vs {exact} (se {})",
            est.mean,
            est.stderr
        );
        assert!(!est.heavy_tail_warning);
    }

    #[test]
    fn wave_second_moment_matches_volterra() {
        let wave = EquationSpec::wave(1, 1.0, 0.0).unwrap();
        let noise = const_noise(0.6, 1.0);
        let t = 1.0;
        let est =
            second_moment_wave_mc(&wave, &noise, t, &[0.0], &[0.0], 100_000, 23).unwrap();
        let grid = volterra_solve(EquationKind::Wave, 1.0, 0.6, t, 4096).unwrap();
        let exact = t.exp() * grid.last();
        let tol = 3.0 * est.stderr + 0.01 * exact;
        assert!((est.mean - exact).abs() < tol, "{} vs {exact}", est.mean);
    }

    #[test]
    fn wave_no_jump_value_is_deterministic_leg_product() {
        let wave = EquationSpec::wave(3, 1.0, 0.5).unwrap();
        let noise = const_noise(0.5, 1.0);
        let t = 0.05;
        let values = pair_replica_values(&wave, &noise, t, &origin(2, 3), 3000, 8).unwrap();
        let w_t = 1.0 + 0.5 * t;
        let no_jump = w_t * w_t;
        // Replica values with no jumps dominate at tiny t and equal w(t)^2.
        let count = values.iter().filter(|&&v| (v - no_jump).abs() < 1e-12).count();
        assert!(count as f64 > 0.9 * values.len() as f64);
    }

    #[test]
    fn fk_first_moment_exact() {
        let noise = NoiseSpec::new(
            TimeFamily::generalized(0.25, -0.5).unwrap(),
            SpatialCovariance::bounded(1.0, BoundedProfile::Constant).unwrap(),
        );
        let est = fk_moment_generalized_mc(&noise, 1, 1, 1.0, 0.8, 50, 64, 2).unwrap();
        assert_eq!(est.mean, 0.8);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn fk_flat_covariance_flat_time_is_exponential() {
        // gamma == 1, f == 1: the exponent is exactly t^2 = 1 on any grid.
        let noise = NoiseSpec::new(
            TimeFamily::generalized(0.0, 0.0).unwrap(),
            SpatialCovariance::bounded(1.0, BoundedProfile::Constant).unwrap(),
        );
        let est = fk_moment_generalized_mc(&noise, 1, 2, 1.0, 1.0, 200, 32, 4).unwrap();
        assert!((est.mean - std::f64::consts::E).abs() < 1e-12);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn fk_constant_f_matches_pair_integral() {
        let (a1, a2) = (0.25, -0.5);
        let noise = NoiseSpec::new(
            TimeFamily::generalized(a1, a2).unwrap(),
            SpatialCovariance::bounded(1.0, BoundedProfile::Constant).unwrap(),
        );
        let ests =
            fk_moment_with_strides(&noise, 1, 2, 1.0, 1.0, 200, 256, 6, &[1, 2, 4]).unwrap();
        let exact = gamma_time_integral(a1, a2, 1.0).unwrap().exp();
        // First-order Richardson: bias(h) ~ 2 (E_h - E_{h/2}).
        let bias = 3.0 * (ests[0].mean - ests[1].mean).abs();
        assert!(
            (ests[0].mean - exact).abs() <= 3.0 * ests[0].stderr + bias + 1e-9,
            "{} vs {exact} (bias {bias})",
            ests[0].mean
        );
        // Differences contract roughly linearly under halving.
        let d_coarse = (ests[2].mean - ests[1].mean).abs();
        let d_fine = (ests[1].mean - ests[0].mean).abs();
        assert!(d_fine < d_coarse, "d_fine={d_fine} d_coarse={d_coarse}");
    }

    #[test]
    fn fk_generalized_approaches_time_weighted_family() {
        // a1 = H - 1/2, a2 -> -1: after the (a2+1)/2 normalization of the
        // exploding Beta mass the pair exponent approaches t^{2H}/(2H).
        let hurst = 0.75_f64;
        let (a1, a2) = (hurst - 0.5, -0.999);
        let noise = NoiseSpec::new(
            TimeFamily::generalized(a1, a2).unwrap(),
            SpatialCovariance::bounded(1.0, BoundedProfile::Constant).unwrap(),
        );
        let t = 1.0;
        let est = fk_moment_generalized_mc(&noise, 1, 2, t, 1.0, 50, 512, 9).unwrap();
        let normalized = est.log_mean * (a2 + 1.0) / 2.0;
        let target = t.powf(2.0 * hurst) / (2.0 * hurst);
        assert!(
            (normalized - target).abs() < 0.02,
            "normalized {normalized} vs {target}"
        );
    }

    #[test]
    fn fk_guards() {
        let noise = NoiseSpec::new(
            TimeFamily::generalized(0.25, -0.5).unwrap(),
            SpatialCovariance::bounded(1.0, BoundedProfile::Constant).unwrap(),
        );
        assert!(matches!(
            fk_moment_generalized_mc(&noise, 1, 0, 1.0, 1.0, 10, 64, 1),
            Err(EstimatorError::OrderTooSmall { .. })
        ));
        assert!(matches!(
            fk_moment_generalized_mc(&noise, 1, 2, 1.0, 1.0, 10, 8, 1),
            Err(EstimatorError::GridTooCoarse { .. })
        ));
        let do_noise = const_noise(0.5, 1.0);
        assert!(matches!(
            fk_moment_generalized_mc(&do_noise, 1, 2, 1.0, 1.0, 10, 64, 1),
            Err(EstimatorError::NeedsGeneralizedFamily)
        ));
        let rough = NoiseSpec::new(
            TimeFamily::generalized(0.25, -0.5).unwrap(),
            SpatialCovariance::Riesz { alpha: 1.5 },
        );
        assert!(matches!(
            fk_moment_generalized_mc(&rough, 1, 2, 1.0, 1.0, 10, 64, 1),
            Err(EstimatorError::RieszTooRough { .. })
        ));
    }

    #[test]
    fn poisson_route_rejects_generalized_family() {
        let eq = heat_eq(1);
        let noise = NoiseSpec::new(
            TimeFamily::generalized(0.25, -0.5).unwrap(),
            SpatialCovariance::bounded(1.0, BoundedProfile::Constant).unwrap(),
        );
        assert!(matches!(
            second_moment_heat_mc(&eq, &noise, 1.0, &[0.0], &[0.0], 10, 1),
            Err(EstimatorError::UnsupportedTimeFamily { .. })
        ));
    }

    #[test]
    fn heavy_tail_flag_fires_on_pathological_sample() {
        let mut values = vec![0.001_f64; 1000];
        values[0] = 1e9;
        let est = aggregate(&values, 0.0, 0);
        assert!(est.heavy_tail_warning);
        let flat = vec![1.0_f64; 1000];
        assert!(!aggregate(&flat, 0.0, 0).heavy_tail_warning);
    }

    #[test]
    fn aggregate_log_mean_consistent() {
        let values = vec![1.0, 2.0, 3.0, 4.0];
        let est = aggregate(&values, 1.5, 42);
        assert!((est.log_mean - (1.5 + 2.5_f64.ln())).abs() < 1e-12);
        assert!((est.mean - 1.5_f64.exp() * 2.5).abs() < 1e-12);
        assert_eq!(est.seed, 42);
    }
}
