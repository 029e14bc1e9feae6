//! Sample-based Sibson MI and MI from exact Bayes posteriors, converging to
//! the quadrature values as the sample count grows.

use leakage_lab::estimators::{empirical_mi, empirical_sibson_mi, PosteriorBatch, PriorDistribution};
use leakage_lab::gauss::TransformedModel;
use leakage_lab::leakage::{sibson_mi_quadrature, SibsonOrder};
use leakage_lab::math::integrate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};

fn bayes_batch(t: &TransformedModel, n: usize, seed: u64) -> PosteriorBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label_dist = Bernoulli::new(1.0 - t.p_tilde).unwrap();
    let mut posteriors = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = usize::from(label_dist.sample(&mut rng));
        let mu = if c == 0 { t.mu0p } else { t.mu1p };
        let z: f64 = Normal::new(mu, t.sigma_eff).unwrap().sample(&mut rng);
        posteriors.extend(t.posterior(z));
        labels.push(c);
    }
    PosteriorBatch::new(posteriors, labels, 1, 2).unwrap()
}

fn main() {
    let t = TransformedModel::from_gap(2.0, 0.5).unwrap();
    let order = SibsonOrder::new(20.0).unwrap();
    let prior = PriorDistribution::uniform(2);

    let sibson_exact = sibson_mi_quadrature(&t, order).unwrap();
    let mi_exact: f64 = (0..2)
        .map(|c| {
            integrate(
                |z| 0.5 * t.class_logpdf(z, c).exp() * (t.posterior(z)[c] / 0.5).ln(),
                t.mu0p - 12.0,
                t.mu1p + 12.0,
                1e-10,
            )
            .value
        })
        .sum();
    println!("channel: gap 2, equal priors");
    println!("quadrature values: sibson(20) = {sibson_exact:.5}, mutual information = {mi_exact:.5}\n");

    println!("{:>7} {:>12} {:>10} {:>12} {:>10}", "N", "sibson_hat", "error", "mi_hat", "error");
    for n in [1_000usize, 5_000, 20_000, 80_000] {
        let batch = bayes_batch(&t, n, 42);
        let sib = empirical_sibson_mi(&batch, &prior, order).unwrap();
        let mi = empirical_mi(&batch, &prior).unwrap();
        println!(
            "{n:>7} {sib:12.5} {:10.5} {mi:12.5} {:10.5}",
            (sib - sibson_exact).abs(),
            (mi - mi_exact).abs()
        );
    }

    // the estimator endpoints
    let one_hot = PosteriorBatch::new(vec![1.0, 0.0, 0.0, 1.0], vec![0, 1], 1, 2).unwrap();
    println!(
        "\none-hot posteriors: sibson = {:.6} (ln 2 = {:.6})",
        empirical_sibson_mi(&one_hot, &prior, order).unwrap(),
        std::f64::consts::LN_2
    );
}
