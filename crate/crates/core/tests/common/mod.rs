//! Shared oracle machinery for the integration suites. The quadrature here
//! is deliberately independent of the library's adaptive integrator: a fixed
//! composite 8-point Gauss-Legendre rule.

/// 8-point Gauss-Legendre nodes (positive half) and weights on [-1, 1].
const GL_X: [f64; 4] = [
    0.1834346424956498,
    0.5255324099163290,
    0.7966664774136267,
    0.9602898564975363,
];
const GL_W: [f64; 4] = [
    0.3626837833783620,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];

/// Composite 8-point Gauss-Legendre quadrature with `panels` equal panels.
pub fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + h * (p as f64 + 0.5);
        let half = 0.5 * h;
        for i in 0..4 {
            total += GL_W[i] * f(mid + half * GL_X[i]);
            total += GL_W[i] * f(mid - half * GL_X[i]);
        }
    }
    total * 0.5 * h
}

/// Truncated jump-count oracle for the wave n-th moment with constant
/// covariance A0, v0 = 0 and u0 = 1: sums the exact zero-, one- and two-jump
/// contributions of the pair-ensemble representation by explicit quadrature.
///
/// Returns (value, truncation_bound) where the bound controls the omitted
/// three-and-more-jump terms.
pub fn wave_nth_moment_small_t_oracle(n: usize, a0: f64, hurst: f64, t: f64) -> (f64, f64) {
    let nu_n = (n * (n - 1)) as f64 / 2.0;
    let two_h_m1 = 2.0 * hurst - 1.0;

    // One jump: both hit indices take their first jump at s, so both gap
    // factors equal s.
    let t1 = nu_n
        * a0
        * gauss_legendre(&|s: f64| (t - s).powf(two_h_m1) * s * s, 0.0, t, 256);

    // Two jumps at s1 < s2 with labels rho1, rho2: the second jump's gap
    // product depends on how many indices the pairs share (2, 1 or 0).
    let n_f = n as f64;
    let share_two = 1.0;
    let share_one = 2.0 * (n_f - 2.0);
    let share_zero = nu_n - 1.0 - share_one;
    let inner = |s2: f64| {
        gauss_legendre(
            &|s1: f64| {
                let bracket = share_two * (s2 - s1) * (s2 - s1)
                    + share_one * s2 * (s2 - s1)
                    + share_zero * s2 * s2;
                (t - s1).powf(two_h_m1) * s1 * s1 * bracket
            },
            0.0,
            s2,
            128,
        )
    };
    let t2 = nu_n
        * a0
        * a0
        * gauss_legendre(&|s2: f64| (t - s2).powf(two_h_m1) * inner(s2), 0.0, t, 128);

    // Each jump contributes at most A0 t^2 (t - sigma)^{2H-1}; the ordered
    // integral of k such factors is (A0 t^2 t^{2H}/(2H))^k / k!.
    let c = nu_n * a0 * t.powf(2.0 * hurst + 2.0) / (2.0 * hurst);
    let tail = c.powi(3) / 6.0 * c.exp();

    (1.0 + t1 + t2, tail)
}
