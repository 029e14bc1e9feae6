//! Sample-based estimators of Sibson mutual information and mutual
//! information built from adversary posteriors.
//!
//! The source equations index the class sum by the true label, which would
//! make the summand constant in the summation variable; the estimators here
//! sum over all `G` classes, matching the preceding derivation step. The
//! labels stay in the batch type for the losses that do consume them.

use crate::error::Error;
use crate::leakage::SibsonOrder;
use crate::math::logsumexp;

const POSTERIOR_FLOOR: f64 = 1e-12;

/// Predetermined prior `P_C` over `G` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDistribution {
    probs: Vec<f64>,
}

impl PriorDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, Error> {
        if probs.is_empty() {
            return Err(Error::domain("prior needs at least one class"));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::domain("prior entries must lie in [0,1]"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("prior sums to {sum}, expected 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(num_classes: usize) -> Self {
        Self {
            probs: vec![1.0 / num_classes as f64; num_classes],
        }
    }

    /// Empirical label frequencies.
    pub fn from_labels(labels: &[usize], num_classes: usize) -> Result<Self, Error> {
        if labels.is_empty() {
            return Err(Error::domain("cannot build a prior from an empty label set"));
        }
        let mut counts = vec![0usize; num_classes];
        for &c in labels {
            if c >= num_classes {
                return Err(Error::domain(format!("label {c} out of range (G={num_classes})")));
            }
            counts[c] += 1;
        }
        Ok(Self {
            probs: counts.iter().map(|&k| k as f64 / labels.len() as f64).collect(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, c: usize) -> f64 {
        self.probs[c]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Adversary posteriors for `N` samples with `S` latent draws each, plus the
/// true labels.
#[derive(Debug, Clone)]
pub struct PosteriorBatch {
    posteriors: Vec<f64>,
    labels: Vec<usize>,
    num_samples: usize,
    num_draws: usize,
    num_classes: usize,
}

impl PosteriorBatch {
    pub fn new(
        posteriors: Vec<f64>,
        labels: Vec<usize>,
        num_draws: usize,
        num_classes: usize,
    ) -> Result<Self, Error> {
        let num_samples = labels.len();
        if num_samples == 0 || num_draws == 0 || num_classes == 0 {
            return Err(Error::shape("batch dimensions must all be positive"));
        }
        if posteriors.len() != num_samples * num_draws * num_classes {
            return Err(Error::shape(format!(
                "posterior tensor has {} entries, expected {}*{}*{}",
                posteriors.len(),
                num_samples,
                num_draws,
                num_classes
            )));
        }
        if labels.iter().any(|&c| c >= num_classes) {
            return Err(Error::domain("label out of class range"));
        }
        for (idx, slice) in posteriors.chunks_exact(num_classes).enumerate() {
            if slice.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::domain(format!("posterior slice {idx} has entries outside [0,1]")));
            }
            let sum: f64 = slice.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("posterior slice {idx} sums to {sum}")));
            }
        }
        Ok(Self { posteriors, labels, num_samples, num_draws, num_classes })
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn num_draws(&self) -> usize {
        self.num_draws
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn slice(&self, sample: usize, draw: usize) -> &[f64] {
        let start = (sample * self.num_draws + draw) * self.num_classes;
        &self.posteriors[start..start + self.num_classes]
    }
}

fn check_consistency(batch: &PosteriorBatch, prior: &PriorDistribution) -> Result<(), Error> {
    if batch.num_classes() != prior.num_classes() {
        return Err(Error::shape(format!(
            "batch has {} classes, prior has {}",
            batch.num_classes(),
            prior.num_classes()
        )));
    }
    Ok(())
}

fn check_prior_support(slice: &[f64], prior: &PriorDistribution) -> Result<(), Error> {
    for (c, (&p_hat, &p_c)) in slice.iter().zip(prior.probs()).enumerate() {
        if p_c == 0.0 && p_hat > 0.0 {
            return Err(Error::domain(format!(
                "posterior mass {p_hat} on class {c} with zero prior probability"
            )));
        }
    }
    Ok(())
}

/// Empirical Sibson mutual information from adversary posteriors, in nats.
///
/// `(alpha/(alpha-1)) ln( (1/N) sum_n (1/S) sum_i
///  ( sum_c (P(c|z_in)/P_C(c))^alpha P_C(c) )^{1/alpha} )`,
/// accumulated entirely in log-space with a streaming log-sum-exp over `n`.
pub fn empirical_sibson_mi(
    batch: &PosteriorBatch,
    prior: &PriorDistribution,
    order: SibsonOrder,
) -> Result<f64, Error> {
    let (value, _) = sibson_value_and_grad(batch, prior, order, false)?;
    Ok(value)
}

/// Value plus gradient with respect to every posterior entry; the gradient
/// half is what the privatizer loss backpropagates through a frozen
/// adversary.
pub(crate) fn sibson_value_and_grad(
    batch: &PosteriorBatch,
    prior: &PriorDistribution,
    order: SibsonOrder,
    with_grad: bool,
) -> Result<(f64, Vec<f64>), Error> {
    if order.is_infinite() {
        return Err(Error::domain("empirical Sibson estimator requires a finite order"));
    }
    let alpha = order.alpha();
    check_consistency(batch, prior)?;
    let g = batch.num_classes();
    let (n, s) = (batch.num_samples(), batch.num_draws());

    // streaming log-sum-exp state over the n-average
    let mut running_max = f64::NEG_INFINITY;
    let mut running_sum = 0.0_f64;
    let mut inner_log = vec![0.0_f64; g];
    let mut per_draw = Vec::with_capacity(s);
    let mut ln_inner_all = if with_grad { Vec::with_capacity(n * s) } else { Vec::new() };

    for sample in 0..n {
        per_draw.clear();
        for draw in 0..s {
            let slice = batch.slice(sample, draw);
            check_prior_support(slice, prior)?;
            for c in 0..g {
                let p_c = prior.prob(c);
                if p_c == 0.0 {
                    inner_log[c] = f64::NEG_INFINITY;
                    continue;
                }
                let p_hat = slice[c].clamp(POSTERIOR_FLOOR, 1.0);
                inner_log[c] = alpha * p_hat.ln() + (1.0 - alpha) * p_c.ln();
            }
            let ln_inner = logsumexp(&inner_log);
            if with_grad {
                ln_inner_all.push(ln_inner);
            }
            per_draw.push(ln_inner / alpha);
        }
        let m = logsumexp(&per_draw) - (s as f64).ln();
        if m > running_max {
            if running_max.is_finite() {
                running_sum = running_sum * (running_max - m).exp();
            }
            running_max = m;
            running_sum += 1.0;
        } else {
            running_sum += (m - running_max).exp();
        }
    }
    let ln_total = running_max + running_sum.ln() - (n as f64).ln();
    let kappa = alpha / (alpha - 1.0);
    let value = kappa * ln_total;

    let mut grad = Vec::new();
    if with_grad {
        grad = vec![0.0; n * s * g];
        let ln_norm = (kappa / (n as f64 * s as f64)).ln() - ln_total;
        for sample in 0..n {
            for draw in 0..s {
                let ln_inner = ln_inner_all[sample * s + draw];
                let slice = batch.slice(sample, draw);
                for c in 0..g {
                    let p_c = prior.prob(c);
                    if p_c == 0.0 {
                        continue;
                    }
                    let raw = slice[c];
                    if raw < POSTERIOR_FLOOR || raw > 1.0 {
                        continue; // clamped entries carry no gradient
                    }
                    let lp = raw.ln();
                    let ln_g = ln_norm + (1.0 - alpha) / alpha * ln_inner
                        + (alpha - 1.0) * (lp - p_c.ln());
                    grad[(sample * s + draw) * g + c] = ln_g.exp();
                }
            }
        }
    }
    Ok((value, grad))
}

/// Empirical mutual information as the mean KL divergence between the
/// posterior estimate and the prior, in nats.
pub fn empirical_mi(batch: &PosteriorBatch, prior: &PriorDistribution) -> Result<f64, Error> {
    let (value, _) = mi_value_and_grad(batch, prior, false)?;
    Ok(value)
}

pub(crate) fn mi_value_and_grad(
    batch: &PosteriorBatch,
    prior: &PriorDistribution,
    with_grad: bool,
) -> Result<(f64, Vec<f64>), Error> {
    check_consistency(batch, prior)?;
    let g = batch.num_classes();
    let (n, s) = (batch.num_samples(), batch.num_draws());
    let scale = 1.0 / (n as f64 * s as f64);
    let mut total = 0.0;
    let mut grad = if with_grad { vec![0.0; n * s * g] } else { Vec::new() };
    for sample in 0..n {
        for draw in 0..s {
            let slice = batch.slice(sample, draw);
            check_prior_support(slice, prior)?;
            for c in 0..g {
                let p_c = prior.prob(c);
                if p_c == 0.0 {
                    continue;
                }
                let raw = slice[c];
                if raw == 0.0 {
                    continue; // 0 ln 0 := 0
                }
                let p_hat = raw.clamp(POSTERIOR_FLOOR, 1.0);
                let log_ratio = p_hat.ln() - p_c.ln();
                total += p_hat * log_ratio;
                if with_grad && (POSTERIOR_FLOOR..=1.0).contains(&raw) {
                    grad[(sample * s + draw) * g + c] = scale * (log_ratio + 1.0);
                }
            }
        }
    }
    Ok((scale * total, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::TransformedModel;
    use crate::leakage::{sibson_mi_quadrature, SibsonOrder};
    use crate::math::integrate;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn order(alpha: f64) -> SibsonOrder {
        SibsonOrder::new(alpha).unwrap()
    }

    fn prior_batch(g: usize, n: usize) -> PosteriorBatch {
        let prior = PriorDistribution::uniform(g);
        let posteriors: Vec<f64> = (0..n).flat_map(|_| prior.probs().to_vec()).collect();
        PosteriorBatch::new(posteriors, vec![0; n], 1, g).unwrap()
    }

    fn one_hot_batch(g: usize, n: usize) -> PosteriorBatch {
        let mut posteriors = Vec::with_capacity(n * g);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % g;
            let mut row = vec![0.0; g];
            row[c] = 1.0;
            posteriors.extend(row);
            labels.push(c);
        }
        PosteriorBatch::new(posteriors, labels, 1, g).unwrap()
    }

    #[test]
    fn sibson_zero_when_posterior_equals_prior() {
        for g in [2usize, 10] {
            for alpha in [2.0, 20.0] {
                let v = empirical_sibson_mi(&prior_batch(g, 7), &PriorDistribution::uniform(g), order(alpha))
                    .unwrap();
                assert!(v.abs() < 1e-12, "g={g} alpha={alpha}: {v}");
            }
        }
    }

    #[test]
    fn sibson_ln_g_for_one_hot_posteriors() {
        for g in [2usize, 10] {
            for alpha in [2.0, 20.0] {
                let v = empirical_sibson_mi(&one_hot_batch(g, 3 * g), &PriorDistribution::uniform(g), order(alpha))
                    .unwrap();
                assert!((v - (g as f64).ln()).abs() < 1e-10, "g={g} alpha={alpha}: {v}");
            }
        }
    }

    #[test]
    fn mi_zero_and_ln_g_extremes() {
        for g in [2usize, 10] {
            let zero = empirical_mi(&prior_batch(g, 5), &PriorDistribution::uniform(g)).unwrap();
            assert!(zero.abs() < 1e-12);
            let full = empirical_mi(&one_hot_batch(g, 2 * g), &PriorDistribution::uniform(g)).unwrap();
            assert!((full - (g as f64).ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_prior_with_posterior_mass_is_an_error() {
        let prior = PriorDistribution::new(vec![1.0, 0.0]).unwrap();
        let batch = PosteriorBatch::new(vec![0.5, 0.5], vec![0], 1, 2).unwrap();
        assert!(empirical_sibson_mi(&batch, &prior, order(2.0)).is_err());
        assert!(empirical_mi(&batch, &prior).is_err());
    }

    #[test]
    fn batch_validation_rejects_bad_shapes() {
        assert!(PosteriorBatch::new(vec![0.6, 0.4], vec![2], 1, 2).is_err());
        assert!(PosteriorBatch::new(vec![0.6, 0.3], vec![0], 1, 2).is_err());
        assert!(PosteriorBatch::new(vec![0.6, 0.4, 0.5], vec![0], 1, 2).is_err());
    }

    fn bayes_batch(t: &TransformedModel, n: usize, seed: u64) -> (PosteriorBatch, PriorDistribution) {
        use rand_distr::{Bernoulli, Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels_dist = Bernoulli::new(1.0 - t.p_tilde).unwrap();
        let mut posteriors = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = usize::from(labels_dist.sample(&mut rng));
            let mu = if c == 0 { t.mu0p } else { t.mu1p };
            let z: f64 = Normal::new(mu, t.sigma_eff).unwrap().sample(&mut rng);
            let post = t.posterior(z);
            posteriors.extend(post);
            labels.push(c);
        }
        let prior = PriorDistribution::new(vec![t.p_tilde, 1.0 - t.p_tilde]).unwrap();
        (PosteriorBatch::new(posteriors, labels, 1, 2).unwrap(), prior)
    }

    fn mi_quadrature(t: &TransformedModel) -> f64 {
        let priors = [t.p_tilde, 1.0 - t.p_tilde];
        let lo = t.mu0p - 12.0 * t.sigma_eff;
        let hi = t.mu1p + 12.0 * t.sigma_eff;
        (0..2)
            .map(|c| {
                integrate(
                    |z| {
                        let joint = priors[c] * t.class_logpdf(z, c).exp();
                        let post = t.posterior(z)[c];
                        if joint == 0.0 {
                            0.0
                        } else {
                            joint * (post / priors[c]).ln()
                        }
                    },
                    lo,
                    hi,
                    1e-10,
                )
                .value
            })
            .sum()
    }

    #[test]
    fn monte_carlo_estimates_converge_to_quadrature() {
        let t = TransformedModel::from_gap(2.0, 0.5).unwrap();
        let (batch, prior) = bayes_batch(&t, 20_000, 1234);
        let sib = empirical_sibson_mi(&batch, &prior, order(20.0)).unwrap();
        let sib_exact = sibson_mi_quadrature(&t, order(20.0)).unwrap();
        assert!((sib - sib_exact).abs() < 0.02, "sibson {sib} vs {sib_exact}");

        let mi = empirical_mi(&batch, &prior).unwrap();
        let mi_exact = mi_quadrature(&t);
        assert!((mi - mi_exact).abs() < 0.02, "mi {mi} vs {mi_exact}");
    }

    #[test]
    fn estimator_error_shrinks_with_sample_size() {
        let t = TransformedModel::from_gap(2.0, 0.5).unwrap();
        let exact = sibson_mi_quadrature(&t, order(20.0)).unwrap();
        let mut errs = Vec::new();
        for n in [1_000usize, 10_000, 20_000] {
            // average the absolute error over a few seeds per size
            let mut total = 0.0;
            for seed in 0..4 {
                let (batch, prior) = bayes_batch(&t, n, 100 + seed);
                total += (empirical_sibson_mi(&batch, &prior, order(20.0)).unwrap() - exact).abs();
            }
            errs.push(total / 4.0);
        }
        assert!(errs[2] < errs[0], "errors did not shrink: {errs:?}");
    }

    #[test]
    fn sibson_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, s, g) = (3usize, 2usize, 3usize);
        let mut posteriors = Vec::new();
        for _ in 0..n * s {
            let mut row: Vec<f64> = (0..g).map(|_| rand::Rng::gen_range(&mut rng, 0.1..1.0)).collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
            posteriors.extend(row);
        }
        let labels = vec![0, 1, 2];
        let prior = PriorDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        let batch = PosteriorBatch::new(posteriors.clone(), labels.clone(), s, g).unwrap();
        let (_, grad) = sibson_value_and_grad(&batch, &prior, order(7.0), true).unwrap();

        let h = 1e-7;
        for idx in [0usize, 4, 10, 17] {
            let mut up = posteriors.clone();
            up[idx] += h;
            let mut dn = posteriors.clone();
            dn[idx] -= h;
            // bypass the simplex check for the perturbed tensors
            let f = |p: Vec<f64>| {
                let b = PosteriorBatch {
                    posteriors: p,
                    labels: labels.clone(),
                    num_samples: n,
                    num_draws: s,
                    num_classes: g,
                };
                sibson_value_and_grad(&b, &prior, order(7.0), false).unwrap().0
            };
            let fd = (f(up) - f(dn)) / (2.0 * h);
            assert!(
                (grad[idx] - fd).abs() < 1e-5 * fd.abs().max(1.0),
                "idx {idx}: grad {} vs fd {fd}",
                grad[idx]
            );
        }
    }

    proptest! {
        #[test]
        fn estimators_are_permutation_and_duplication_invariant(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, s, g) = (6usize, 2usize, 3usize);
            let mut posteriors = Vec::new();
            for _ in 0..n * s {
                let mut row: Vec<f64> = (0..g).map(|_| rand::Rng::gen_range(&mut rng, 0.05..1.0)).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= sum);
                posteriors.extend(row);
            }
            let labels: Vec<usize> = (0..n).map(|i| i % g).collect();
            let prior = PriorDistribution::uniform(g);
            let batch = PosteriorBatch::new(posteriors.clone(), labels.clone(), s, g).unwrap();
            let base_sib = empirical_sibson_mi(&batch, &prior, order(5.0)).unwrap();
            let base_mi = empirical_mi(&batch, &prior).unwrap();

            // permute the samples
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut permuted = Vec::with_capacity(posteriors.len());
            let mut perm_labels = Vec::with_capacity(n);
            for &i in &perm {
                permuted.extend_from_slice(&posteriors[i * s * g..(i + 1) * s * g]);
                perm_labels.push(labels[i]);
            }
            let pbatch = PosteriorBatch::new(permuted, perm_labels, s, g).unwrap();
            prop_assert!((empirical_sibson_mi(&pbatch, &prior, order(5.0)).unwrap() - base_sib).abs() < 1e-12);
            prop_assert!((empirical_mi(&pbatch, &prior).unwrap() - base_mi).abs() < 1e-12);

            // duplicate every sample
            let mut doubled = posteriors.clone();
            doubled.extend_from_slice(&posteriors);
            let mut dlabels = labels.clone();
            dlabels.extend_from_slice(&labels);
            let dbatch = PosteriorBatch::new(doubled, dlabels, s, g).unwrap();
            prop_assert!((empirical_sibson_mi(&dbatch, &prior, order(5.0)).unwrap() - base_sib).abs() < 1e-12);
            prop_assert!((empirical_mi(&dbatch, &prior).unwrap() - base_mi).abs() < 1e-12);

            // range invariant under the uniform prior
            prop_assert!(base_sib >= -1e-12 && base_sib <= (g as f64).ln() + 1e-12);
        }
    }
}
