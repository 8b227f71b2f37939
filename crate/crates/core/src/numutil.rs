//! Small numeric helpers shared across the crate: adaptive quadrature,
//! compensated summation and log-domain accumulation of positive series.

/// Kahan-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}

/// Accumulates a sum of positive terms given by their logarithms, keeping a
/// floating shift so that arbitrarily large or small magnitudes stay
/// representable. Only the logarithm of the total is exposed.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    ln_shift: f64,
    sum: KahanSum,
}

impl LogAccumulator {
    pub fn new() -> Self {
        LogAccumulator { ln_shift: f64::NEG_INFINITY, sum: KahanSum::new() }
    }

    pub fn add_ln(&mut self, ln_x: f64) {
        if ln_x == f64::NEG_INFINITY {
            return;
        }
        if ln_x > self.ln_shift {
            let scale = (self.ln_shift - ln_x).exp();
            let rescaled = self.sum.total() * scale;
            self.sum = KahanSum::new();
            self.sum.add(rescaled);
            self.sum.add(1.0);
            self.ln_shift = ln_x;
        } else {
            self.sum.add((ln_x - self.ln_shift).exp());
        }
    }

    pub fn ln_total(&self) -> f64 {
        if self.ln_shift == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.ln_shift + self.sum.total().ln()
        }
    }
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

/// Adaptive Simpson quadrature with absolute/relative tolerance `tol`.
/// The integrand must be finite on [a, b].
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        fm: f64,
        tol: f64,
        min_width: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson(f, a, fa, m, fm);
        let (right, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        // The width floor keeps rounding noise in the integrand from forcing
        // runaway subdivision.
        if depth == 0 || delta.abs() <= 15.0 * tol || (b - a) < min_width {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, flm, tol / 2.0, min_width, depth - 1)
                + recurse(f, m, fm, b, fb, right, frm, tol / 2.0, min_width, depth - 1)
        }
    }

    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, fm) = simpson(f, a, fa, b, fb);
    let min_width = (b - a).abs() * 1e-10;
    recurse(f, a, fa, b, fb, whole, fm, tol, min_width, 30)
}
