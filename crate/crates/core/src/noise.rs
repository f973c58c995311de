//! Laplace distribution primitives and the seedable random stream used by
//! every mechanism.
//!
//! Sampling goes through the inverse cdf of a uniform variate so that a
//! given seed yields the same transcript on every platform.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Deterministic random stream.
///
/// Independent child streams are derived with [`Rng::child`]; a child
/// depends only on the parent's key and the child index, never on how many
/// values the parent has already produced.
#[derive(Debug, Clone)]
pub struct Rng {
    key: u64,
    inner: ChaCha12Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            key: seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn child(&self, index: u64) -> Rng {
        let key = splitmix64(self.key ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)));
        Rng {
            key,
            inner: ChaCha12Rng::seed_from_u64(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw from the open interval (0, 1) on a 2^-53 grid.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Laplace distribution with location `μ` and scale `λ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceDist {
    location: f64,
    scale: f64,
}

impl LaplaceDist {
    pub fn new(location: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::arg(format!("Laplace scale must be positive and finite, got {scale}")));
        }
        if !location.is_finite() {
            return Err(Error::arg(format!("Laplace location must be finite, got {location}")));
        }
        Ok(LaplaceDist { location, scale })
    }

    /// Zero-centred Laplace with scale `1/ε`.
    pub fn with_epsilon(epsilon: f64) -> Result<Self> {
        LaplaceDist::new(0.0, 1.0 / epsilon)
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (-(x - self.location).abs() / self.scale).exp() / (2.0 * self.scale)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        -(x - self.location).abs() / self.scale - (2.0 * self.scale).ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    }

    /// `1 - cdf(x)`, without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if z > 0.0 {
            0.5 * (-z).exp()
        } else {
            1.0 - 0.5 * z.exp()
        }
    }

    pub fn ln_cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if z < 0.0 {
            z - std::f64::consts::LN_2
        } else {
            (-0.5 * (-z).exp()).ln_1p()
        }
    }

    pub fn ln_sf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if z > 0.0 {
            -z - std::f64::consts::LN_2
        } else {
            (-0.5 * z.exp()).ln_1p()
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::arg(format!("quantile probability must lie in (0, 1), got {p}")));
        }
        Ok(self.quantile_unchecked(p))
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        if p < 0.5 {
            self.location + self.scale * (2.0 * p).ln()
        } else {
            self.location - self.scale * (2.0 * (1.0 - p)).ln()
        }
    }

    /// Lower-tail quantile for a probability given by its logarithm, usable
    /// far below the smallest positive double. Requires `ln_p < ln 0.5`.
    pub fn lower_quantile_ln(&self, ln_p: f64) -> Result<f64> {
        if !(ln_p < -std::f64::consts::LN_2) {
            return Err(Error::arg(format!("log-probability {ln_p} is not in the lower tail")));
        }
        Ok(self.location + self.scale * (ln_p + std::f64::consts::LN_2))
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        self.quantile_unchecked(rng.uniform())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_lap() -> LaplaceDist {
        LaplaceDist::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(LaplaceDist::new(0.0, 0.0).is_err());
        assert!(LaplaceDist::new(0.0, -1.0).is_err());
        assert!(LaplaceDist::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn pdf_values() {
        assert_eq!(std_lap().pdf(0.0), 0.5);
        assert_eq!(LaplaceDist::new(0.0, 2.0).unwrap().pdf(0.0), 0.25);
        assert!((std_lap().pdf(1.0) - 0.183_939_720_585_721_2).abs() < 1e-15);
        assert!((std_lap().ln_pdf(1.0) - std_lap().pdf(1.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn cdf_values() {
        let d = std_lap();
        assert_eq!(d.cdf(0.0), 0.5);
        assert_eq!(d.cdf(f64::INFINITY), 1.0);
        assert!((d.cdf(1.0) - 0.816_060_279_414_278_8).abs() < 1e-15);
        for x in [-30.0, -2.0, 0.0, 0.3, 4.0, 30.0] {
            assert!((d.sf(x) - (1.0 - d.cdf(x))).abs() < 1e-15);
            assert!((d.ln_cdf(x) - d.cdf(x).ln()).abs() < 1e-12);
            assert!((d.ln_sf(x) - d.sf(x).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_values() {
        let d = std_lap();
        assert_eq!(d.quantile(0.5).unwrap(), 0.0);
        assert!((d.quantile(0.25).unwrap() + std::f64::consts::LN_2).abs() < 1e-15);
        for x in [-3.0, 0.0, 2.0] {
            assert!((d.quantile(d.cdf(x)).unwrap() - x).abs() < 1e-12);
        }
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(d.quantile(p).is_err());
        }
    }

    #[test]
    fn cdf_of_quantile_grid() {
        let d = LaplaceDist::new(1.5, 0.7).unwrap();
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let x = d.quantile(p).unwrap();
            assert!((d.cdf(x) - p).abs() < 1e-10, "p={p}");
        }
        let mut last = 0.0;
        for i in -400..=400 {
            let c = d.cdf(i as f64 * 0.05);
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn lower_quantile_in_log_space() {
        let d = LaplaceDist::new(0.0, 2.0).unwrap();
        let p: f64 = 1e-3;
        assert!((d.lower_quantile_ln(p.ln()).unwrap() - d.quantile(p).unwrap()).abs() < 1e-12);
        // far beyond f64 range
        let x = d.lower_quantile_ln(-5000.0).unwrap();
        assert!((d.ln_cdf(x) + 5000.0).abs() < 1e-9);
        assert!(d.lower_quantile_ln(-0.1).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        // composite Simpson, independent of the crate's quadrature
        for (mu, lam) in [(0.0, 1.0), (3.0, 0.25), (-2.0, 4.0)] {
            let d = LaplaceDist::new(mu, lam).unwrap();
            let simpson = |a: f64, b: f64, n: usize| {
                let h = (b - a) / n as f64;
                let mut s = d.pdf(a) + d.pdf(b);
                for i in 1..n {
                    let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                    s += w * d.pdf(a + i as f64 * h);
                }
                s * h / 3.0
            };
            let total = simpson(mu - 40.0 * lam, mu, 200_000) + simpson(mu, mu + 40.0 * lam, 200_000);
            assert!((total - 1.0).abs() < 1e-9, "total {total}");
        }
    }

    #[test]
    fn pointwise_privacy_ratio() {
        let lam: f64 = 0.8;
        let delta = 1.0;
        let bound = (delta / lam).exp() * (1.0 + 1e-12);
        for shift in [-1.0, -0.5, 0.0, 0.25, 1.0] {
            let a = LaplaceDist::new(0.0, lam).unwrap();
            let b = LaplaceDist::new(shift, lam).unwrap();
            for i in -200..=200 {
                let x = i as f64 * 0.05;
                assert!(a.pdf(x) / b.pdf(x) <= bound);
            }
        }
    }

    #[test]
    fn seeded_streams_repeat() {
        let d = std_lap();
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        let xs: Vec<f64> = (0..100).map(|_| d.sample(&mut a)).collect();
        let ys: Vec<f64> = (0..100).map(|_| d.sample(&mut b)).collect();
        assert_eq!(xs, ys);
        let mut c = Rng::new(43);
        assert_ne!(xs[0], d.sample(&mut c));
    }

    #[test]
    fn children_ignore_parent_position() {
        let parent = Rng::new(7);
        let mut advanced = parent.clone();
        for _ in 0..10 {
            advanced.next_u64();
        }
        let mut c1 = parent.child(3);
        let mut c2 = advanced.child(3);
        assert_eq!(c1.next_u64(), c2.next_u64());
        assert_ne!(parent.child(3).next_u64(), parent.child(4).next_u64());
        assert_ne!(parent.child(0).key(), parent.key());
    }

    #[test]
    fn uniform_stays_open() {
        let mut rng = Rng::new(1);
        for _ in 0..100_000 {
            let u = rng.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn sample_mean() {
        let d = LaplaceDist::new(5.0, 1.0).unwrap();
        let mut rng = Rng::new(2024);
        let n = 1_000_000;
        let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 5.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn sample_variance() {
        let d = LaplaceDist::new(0.0, 2.0).unwrap();
        let mut rng = Rng::new(99);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / 8.0 - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn kolmogorov_smirnov_distance() {
        let d = LaplaceDist::new(-1.0, 0.5).unwrap();
        let mut rng = Rng::new(7);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = d.cdf(x);
                (f - i as f64 / n as f64).abs().max((((i + 1) as f64) / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.01, "KS distance {ks}");
    }
}
