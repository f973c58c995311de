//! Adaptive Simpson quadrature for integrands given by their logarithm.
//!
//! The integrand is rescaled by its largest sampled value before
//! integrating, so the result is returned as a logarithm and stays finite
//! even when the integral itself is far below `f64::MIN_POSITIVE`.

const MAX_DEPTH: u32 = 48;

#[derive(Debug, Clone, Copy)]
pub struct LogQuadrature {
    /// Relative accuracy target for the integral.
    pub rel_tol: f64,
    /// Panels per segment before adaptive refinement.
    pub initial_panels: usize,
}

impl Default for LogQuadrature {
    fn default() -> Self {
        LogQuadrature {
            rel_tol: 1e-11,
            initial_panels: 64,
        }
    }
}

impl LogQuadrature {
    /// `ln ∫ exp(ln_f(z)) dz` over consecutive segments between `breakpoints`.
    ///
    /// Kinks and peaks of the integrand should sit on breakpoints or be
    /// resolved by `initial_panels`. Returns `-inf` for an integrand that is
    /// zero on every sampled node.
    pub fn ln_integral<F: Fn(f64) -> f64>(&self, ln_f: F, breakpoints: &[f64]) -> f64 {
        assert!(breakpoints.len() >= 2, "need at least one segment");
        let panels = self.initial_panels.max(2);

        let mut nodes = Vec::with_capacity((breakpoints.len() - 1) * panels + 1);
        for w in breakpoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            debug_assert!(b > a, "breakpoints must increase");
            for j in 0..panels {
                nodes.push(a + (b - a) * j as f64 / panels as f64);
            }
        }
        nodes.push(*breakpoints.last().unwrap());

        // midpoints double the sampling density for locating the peak
        let mut shift = f64::NEG_INFINITY;
        for w in nodes.windows(2) {
            shift = shift.max(ln_f(w[0])).max(ln_f(0.5 * (w[0] + w[1])));
        }
        shift = shift.max(ln_f(*nodes.last().unwrap()));
        if shift == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }

        let f = |z: f64| (ln_f(z) - shift).exp();

        // coarse pass fixes the absolute tolerance for the adaptive pass
        let coarse: Vec<Panel> = nodes.windows(2).map(|w| Panel::new(&f, w[0], w[1])).collect();
        let coarse_total: f64 = coarse.iter().map(|p| p.whole).sum();
        let span = breakpoints.last().unwrap() - breakpoints[0];
        let abs_tol = (self.rel_tol * coarse_total).max(f64::MIN_POSITIVE);
        // rounding in ln_f is amplified by exp; below this level the Simpson
        // error estimate is noise
        let noise = 16.0 * f64::EPSILON * (1.0 + shift.abs());

        let total: f64 = coarse
            .iter()
            .map(|p| p.refine(&f, abs_tol * (p.b - p.a) / span, noise, MAX_DEPTH))
            .sum();
        if total > 0.0 {
            total.ln() + shift
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Self {
        let (fa, fb) = (f(a), f(b));
        Panel::with_ends(f, a, b, fa, fb)
    }

    fn with_ends<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fb: f64) -> Self {
        let fm = f(0.5 * (a + b));
        Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole: (b - a) / 6.0 * (fa + 4.0 * fm + fb),
        }
    }

    fn refine<F: Fn(f64) -> f64>(&self, f: &F, tol: f64, noise: f64, depth: u32) -> f64 {
        let m = 0.5 * (self.a + self.b);
        let left = Panel::with_ends(f, self.a, m, self.fa, self.fm);
        let right = Panel::with_ends(f, m, self.b, self.fm, self.fb);
        let halves = left.whole + right.whole;
        let err = halves - self.whole;
        if depth == 0 || err.abs() <= 15.0 * tol.max(noise * halves.abs()) {
            // Richardson extrapolation
            halves + err / 15.0
        } else {
            left.refine(f, 0.5 * tol, noise, depth - 1) + right.refine(f, 0.5 * tol, noise, depth - 1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral() {
        let q = LogQuadrature::default();
        let ln_i = q.ln_integral(|z| -0.5 * z * z, &[-40.0, 0.0, 40.0]);
        let expected = (2.0 * std::f64::consts::PI).sqrt().ln();
        assert!((ln_i - expected).abs() < 1e-10, "{ln_i} vs {expected}");
    }

    #[test]
    fn laplace_kink_on_breakpoint() {
        let q = LogQuadrature::default();
        let ln_i = q.ln_integral(|z: f64| -z.abs() - std::f64::consts::LN_2, &[-50.0, 0.0, 50.0]);
        assert!(ln_i.abs() < 1e-11);
    }

    #[test]
    fn far_below_double_range() {
        // ∫ exp(-3000 - z²/2) = exp(-3000)·√(2π)
        let q = LogQuadrature::default();
        let ln_i = q.ln_integral(|z| -3000.0 - 0.5 * z * z, &[-30.0, 30.0]);
        let expected = -3000.0 + (2.0 * std::f64::consts::PI).sqrt().ln();
        assert!((ln_i - expected).abs() < 1e-10);
    }

    #[test]
    fn narrow_peak() {
        let s = 1e-3;
        let q = LogQuadrature {
            initial_panels: 256,
            ..Default::default()
        };
        let ln_i = q.ln_integral(|z| -0.5 * ((z - 0.3) / s).powi(2), &[0.0, 1.0]);
        let expected = (s * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((ln_i - expected).abs() < 1e-9);
    }

    #[test]
    fn zero_integrand() {
        let q = LogQuadrature::default();
        assert_eq!(q.ln_integral(|_| f64::NEG_INFINITY, &[0.0, 1.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn polynomial_is_exact() {
        let q = LogQuadrature::default();
        let ln_i = q.ln_integral(|z: f64| (z * z * z + 1.0).ln(), &[0.0, 2.0]);
        assert!((ln_i - 6f64.ln()).abs() < 1e-13);
    }
}
