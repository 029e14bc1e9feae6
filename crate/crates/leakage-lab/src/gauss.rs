//! The binary Gaussian-mixture source model: densities, sampling, and the
//! class-dependent affine transform that produces the released variable.

use crate::error::Error;
use crate::math::{self, normal_logpdf};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};

pub use crate::math::q_function;

/// Two-component Gaussian mixture with shared standard deviation.
///
/// Class 0 has mean `mu0`, class 1 has mean `mu1`, and `p_tilde = P(C = 0)`.
/// Construction enforces the canonical orientation `mu0 <= mu1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryGaussianMixture {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma: f64,
    pub p_tilde: f64,
}

impl BinaryGaussianMixture {
    pub fn new(mu0: f64, mu1: f64, sigma: f64, p_tilde: f64) -> Result<Self, Error> {
        if !(mu0.is_finite() && mu1.is_finite() && sigma.is_finite() && p_tilde.is_finite()) {
            return Err(Error::domain("mixture parameters must be finite"));
        }
        if sigma <= 0.0 {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if !(0.0..=1.0).contains(&p_tilde) {
            return Err(Error::domain(format!("p_tilde must lie in [0,1], got {p_tilde}")));
        }
        if mu0 > mu1 {
            return Err(Error::constraint(format!(
                "means must satisfy mu0 <= mu1, got mu0={mu0}, mu1={mu1}"
            )));
        }
        Ok(Self { mu0, mu1, sigma, p_tilde })
    }

    /// Mean separation `mu1 - mu0`.
    pub fn gap(&self) -> f64 {
        self.mu1 - self.mu0
    }

    /// Mixture density at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        self.p_tilde * normal_logpdf(x, self.mu0, self.sigma).exp()
            + (1.0 - self.p_tilde) * normal_logpdf(x, self.mu1, self.sigma).exp()
    }

    /// Apply the class-dependent shift `Z = X + (1-C) beta0 - C beta1`,
    /// optionally with independent noise of scale `gamma`.
    pub fn apply_affine(&self, beta0: f64, beta1: f64, gamma: f64) -> Result<TransformedModel, Error> {
        if beta0 < 0.0 || beta1 < 0.0 || gamma < 0.0 {
            return Err(Error::constraint(format!(
                "transform parameters must be nonnegative: beta0={beta0}, beta1={beta1}, gamma={gamma}"
            )));
        }
        let mu0p = self.mu0 + beta0;
        let mu1p = self.mu1 - beta1;
        if mu0p > mu1p {
            return Err(Error::constraint(format!(
                "transform crosses the means (mu0'={mu0p} > mu1'={mu1p}); the MAP rule would reverse"
            )));
        }
        TransformedModel::new(mu0p, mu1p, (self.sigma * self.sigma + gamma * gamma).sqrt(), self.p_tilde)
    }

    /// Draw `n` labeled samples; labels are Bernoulli(1 - p_tilde) for class 1
    /// and `x` follows the class-conditional Gaussian. Deterministic given `seed`.
    pub fn sample_pairs(&self, n: usize, seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let label_dist = Bernoulli::new(1.0 - self.p_tilde).expect("valid probability");
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let c = usize::from(label_dist.sample(&mut rng));
            let mu = if c == 0 { self.mu0 } else { self.mu1 };
            let normal = Normal::new(mu, self.sigma).expect("valid sigma");
            out.push(LabeledSample { x: normal.sample(&mut rng), c });
        }
        out
    }
}

/// Conditional distribution of the released `Z` after the affine transform:
/// `N(mu0p, sigma_eff^2)` for class 0, `N(mu1p, sigma_eff^2)` for class 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedModel {
    pub mu0p: f64,
    pub mu1p: f64,
    pub sigma_eff: f64,
    pub p_tilde: f64,
}

impl TransformedModel {
    pub fn new(mu0p: f64, mu1p: f64, sigma_eff: f64, p_tilde: f64) -> Result<Self, Error> {
        if sigma_eff <= 0.0 || !sigma_eff.is_finite() {
            return Err(Error::domain(format!("sigma_eff must be positive, got {sigma_eff}")));
        }
        if mu0p > mu1p {
            return Err(Error::constraint(format!(
                "transformed means must satisfy mu0' <= mu1', got {mu0p} > {mu1p}"
            )));
        }
        if !(0.0..=1.0).contains(&p_tilde) {
            return Err(Error::domain(format!("p_tilde must lie in [0,1], got {p_tilde}")));
        }
        Ok(Self { mu0p, mu1p, sigma_eff, p_tilde })
    }

    /// Normalized gap `d = (mu1' - mu0') / sigma_eff`.
    pub fn normalized_gap(&self) -> f64 {
        (self.mu1p - self.mu0p) / self.sigma_eff
    }

    /// Convenience constructor from a prior and normalized gap, with means
    /// placed symmetrically about zero and unit effective deviation.
    pub fn from_gap(d: f64, p_tilde: f64) -> Result<Self, Error> {
        if d < 0.0 {
            return Err(Error::domain(format!("normalized gap must be nonnegative, got {d}")));
        }
        Self::new(-0.5 * d, 0.5 * d, 1.0, p_tilde)
    }

    /// Log-density of `Z` given the class.
    pub fn class_logpdf(&self, z: f64, c: usize) -> f64 {
        let mu = if c == 0 { self.mu0p } else { self.mu1p };
        normal_logpdf(z, mu, self.sigma_eff)
    }

    /// Marginal density of `Z`.
    pub fn pdf(&self, z: f64) -> f64 {
        self.p_tilde * self.class_logpdf(z, 0).exp()
            + (1.0 - self.p_tilde) * self.class_logpdf(z, 1).exp()
    }

    /// Exact Bayes posterior `P(C = c | Z = z)` for both classes.
    pub fn posterior(&self, z: f64) -> [f64; 2] {
        let l0 = self.p_tilde.ln() + self.class_logpdf(z, 0);
        let l1 = (1.0 - self.p_tilde).ln() + self.class_logpdf(z, 1);
        let norm = math::logsumexp2(l0, l1);
        [(l0 - norm).exp(), (l1 - norm).exp()]
    }
}

/// One observation of the public value and its private class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub x: f64,
    pub c: usize,
}

/// Mixture density evaluated pointwise; errors on an invalid model are
/// handled at construction, so this is a thin wrapper kept for symmetry.
pub fn mixture_pdf(model: &BinaryGaussianMixture, x: f64) -> f64 {
    model.pdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::integrate;

    fn default_model() -> BinaryGaussianMixture {
        BinaryGaussianMixture::new(-3.0, 3.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(BinaryGaussianMixture::new(-3.0, 3.0, 0.0, 0.5).is_err());
        assert!(BinaryGaussianMixture::new(-3.0, 3.0, 1.0, 1.5).is_err());
        assert!(BinaryGaussianMixture::new(3.0, -3.0, 1.0, 0.5).is_err());
        assert!(BinaryGaussianMixture::new(f64::NAN, 3.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn pdf_at_midpoint_of_symmetric_mixture() {
        // both terms equal phi(3)/2 + phi(3)/2 = phi(3) = e^{-4.5}/sqrt(2pi)
        let m = default_model();
        let expect = (-4.5f64).exp() / SQRT_2PI_LOCAL;
        assert!((m.pdf(0.0) - expect).abs() < 1e-12);
        assert!((m.pdf(0.0) - 0.0044318).abs() < 1e-6);
    }

    const SQRT_2PI_LOCAL: f64 = 2.5066282746310005024;

    #[test]
    fn pdf_degenerate_prior_is_single_gaussian_mode() {
        let m = BinaryGaussianMixture::new(-3.0, 3.0, 2.0, 1.0).unwrap();
        let expect = 1.0 / (2.0 * SQRT_2PI_LOCAL);
        assert!((m.pdf(-3.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn pdf_normalizes() {
        for (m0, m1, s, p) in [(-3.0, 3.0, 1.0, 0.5), (-1.0, 4.0, 2.5, 0.2), (0.0, 0.0, 0.7, 0.9)] {
            let m = BinaryGaussianMixture::new(m0, m1, s, p).unwrap();
            let r = integrate(|x| m.pdf(x), m0 - 10.0 * s, m1 + 10.0 * s, 1e-10);
            assert!((r.value - 1.0).abs() < 1e-8, "integral {}", r.value);
        }
    }

    #[test]
    fn affine_identity_and_shift() {
        let m = default_model();
        let id = m.apply_affine(0.0, 0.0, 0.0).unwrap();
        assert_eq!(id.mu0p, -3.0);
        assert_eq!(id.mu1p, 3.0);
        assert!((id.normalized_gap() - 6.0).abs() < 1e-15);

        let t = m.apply_affine(2.0, 2.0, 0.0).unwrap();
        assert_eq!((t.mu0p, t.mu1p), (-1.0, 1.0));
        assert!((t.normalized_gap() - 2.0).abs() < 1e-15);

        let collapsed = m.apply_affine(3.0, 3.0, 0.0).unwrap();
        assert_eq!(collapsed.normalized_gap(), 0.0);
    }

    #[test]
    fn affine_rejects_crossed_means() {
        let m = default_model();
        assert!(m.apply_affine(4.0, 4.0, 0.0).is_err());
        assert!(m.apply_affine(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn noisy_affine_widens_sigma() {
        let m = default_model();
        let t = m.apply_affine(1.0, 1.0, 2.0).unwrap();
        assert!((t.sigma_eff - 5.0f64.sqrt()).abs() < 1e-15);
        // d decreasing in gamma at fixed beta
        let mut prev = f64::INFINITY;
        for g in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let d = m.apply_affine(1.0, 1.0, g).unwrap().normalized_gap();
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn sampling_is_deterministic_and_degenerate_prior_yields_one_class() {
        let m = default_model();
        let a = m.sample_pairs(64, 9);
        let b = m.sample_pairs(64, 9);
        assert_eq!(a, b);

        let all_zero = BinaryGaussianMixture::new(-3.0, 3.0, 1.0, 1.0).unwrap();
        assert!(all_zero.sample_pairs(100, 1).iter().all(|s| s.c == 0));
    }

    #[test]
    fn sampling_class_conditional_mean_within_clt_bound() {
        let m = default_model();
        let samples = m.sample_pairs(10_000, 42);
        let (mut sum, mut n0) = (0.0, 0usize);
        for s in &samples {
            if s.c == 0 {
                sum += s.x;
                n0 += 1;
            }
        }
        let mean = sum / n0 as f64;
        let bound = 4.0 / (n0 as f64).sqrt();
        assert!((mean + 3.0).abs() < bound, "class-0 mean {mean}, n0 {n0}");

        // empirical class frequency near the prior
        let freq = n0 as f64 / samples.len() as f64;
        let fb = 4.0 * (0.25f64 / samples.len() as f64).sqrt();
        assert!((freq - 0.5).abs() < fb);
    }

    #[test]
    fn posterior_sums_to_one_and_tracks_prior_at_zero_gap() {
        let t = TransformedModel::from_gap(0.0, 0.3).unwrap();
        let p = t.posterior(0.7);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        assert!((p[0] - 0.3).abs() < 1e-12);
    }
}
