//! Cross-module verification suite: every closed-form result is checked
//! against an independent numerical route, and the structural invariants
//! are exercised on grids. The CLI `verify` experiment runs these and exits
//! nonzero if any check fails.

use crate::affine_opt::{
    condition_threshold, inactive_solution_segment, kkt_residuals, noisy_objective_hessian,
    optimize_noisy_affine, solve_affine, DistortionBudget,
};
use crate::error::Error;
use crate::estimators::{empirical_mi, empirical_sibson_mi, PosteriorBatch, PriorDistribution};
use crate::gauss::{BinaryGaussianMixture, TransformedModel};
use crate::leakage::{
    map_accuracy, max_leakage_binary, max_leakage_discrete, max_leakage_hetero,
    max_leakage_three_class, sibson_mi_exp_bound, sibson_mi_max_approx, sibson_mi_piecewise_bound,
    sibson_mi_quadrature, DiscreteChannel, HeteroscedasticModel, SibsonOrder, ThreeClassModel,
};
use crate::math::{integrate, normal_logpdf, q_function};
use crate::nn::{cross_entropy, Activation, DenseNet, OutputLoss};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use std::io::Write;
use std::path::Path;

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn q_exact(x: f64) -> f64 {
    q_function(x).expect("finite grid point")
}

/// MAP accuracy recomputed from a supplied tail function, so a perturbed
/// tail function makes the monotonicity checks fail.
fn map_accuracy_from_q(q: impl Fn(f64) -> f64, d: f64, p: f64) -> f64 {
    let l = ((1.0 - p) / p).ln();
    p * q(l / d - 0.5 * d) + (1.0 - p) * q(-l / d - 0.5 * d)
}

fn sibson_approx_from_q(q: impl Fn(f64) -> f64, d: f64, p: f64, alpha: f64) -> f64 {
    let (mu0, mu1) = (-0.5 * d, 0.5 * d);
    let z0 = ((2.0 / alpha) * ((1.0 - p) / p).ln() + mu0 * mu0 - mu1 * mu1) / (2.0 * (mu0 - mu1));
    let val = p.powf(1.0 / alpha) * (1.0 - q(z0 - mu0)) + (1.0 - p).powf(1.0 / alpha) * q(z0 - mu1);
    alpha / (alpha - 1.0) * val.ln()
}

fn check_q_symmetry(q: impl Fn(f64) -> f64) -> CheckResult {
    let mut worst = 0.0_f64;
    let mut x = -8.0;
    while x <= 8.0 {
        worst = worst.max((q(x) + q(-x) - 1.0).abs());
        x += 0.0625;
    }
    check("q_symmetry", worst <= 1e-12, format!("max |Q(x)+Q(-x)-1| = {worst:.2e}"))
}

fn check_q_decreasing(q: impl Fn(f64) -> f64) -> CheckResult {
    let mut ok = true;
    let mut prev = f64::INFINITY;
    let mut x = -8.0;
    while x <= 8.0 {
        let v = q(x);
        if v >= prev {
            ok = false;
        }
        prev = v;
        x += 0.0625;
    }
    check("q_strictly_decreasing", ok, "finite grid, step 1/16".into())
}

fn check_map_monotone(q: impl Fn(f64) -> f64 + Copy) -> CheckResult {
    // Strictness is asserted where consecutive values are representable
    // apart; at skewed priors and small gaps the true slope sits below one
    // ulp of max(p, 1-p) and only nondecrease can be demanded of f64.
    let mut ok = true;
    let mut total_rise = f64::INFINITY;
    for p in [0.1f64, 0.3, 0.5, 0.7, 0.9] {
        let floor = p.max(1.0 - p);
        let mut d = 0.1;
        let first = map_accuracy_from_q(q, d, p);
        let mut prev = first;
        while d < 8.0 {
            d += 0.1;
            let v = map_accuracy_from_q(q, d, p);
            if v < prev || (prev > floor + 1e-12 && v <= prev) {
                ok = false;
            }
            prev = v;
        }
        total_rise = total_rise.min(prev - first);
        if prev <= floor {
            ok = false;
        }
    }
    check("map_accuracy_monotone_in_d", ok, format!("min net rise over d in [0.1, 8]: {total_rise:.3e}"))
}

fn check_sibson_approx_monotone(q: impl Fn(f64) -> f64 + Copy) -> CheckResult {
    let mut ok = true;
    for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let mut d = 0.1;
        let mut prev = sibson_approx_from_q(q, d, p, 20.0);
        while d < 8.0 {
            d += 0.1;
            let v = sibson_approx_from_q(q, d, p, 20.0);
            if v <= prev {
                ok = false;
            }
            prev = v;
        }
    }
    check("sibson_approx_monotone_in_d", ok, "alpha 20, d in [0.1, 8]".into())
}

fn check_mixture_normalization() -> CheckResult {
    let mut worst = 0.0_f64;
    for (m0, m1, s, p) in [(-3.0, 3.0, 1.0, 0.5), (-1.0, 4.0, 2.5, 0.2), (0.0, 0.5, 0.3, 0.9)] {
        let m = BinaryGaussianMixture::new(m0, m1, s, p).expect("valid");
        let r = integrate(|x| m.pdf(x), m0 - 10.0 * s, m1 + 10.0 * s, 1e-10);
        worst = worst.max((r.value - 1.0).abs());
    }
    check("mixture_pdf_normalization", worst <= 1e-8, format!("max |integral - 1| = {worst:.2e}"))
}

fn check_leakage_ranges() -> CheckResult {
    let mut ok = true;
    for d in [0.0, 0.5, 2.0, 6.0, 20.0] {
        let t = TransformedModel::from_gap(d, 0.4).expect("valid");
        let v = max_leakage_binary(&t);
        ok &= (-1e-12..=std::f64::consts::LN_2 + 1e-12).contains(&v);
    }
    let three = ThreeClassModel::new(-1.0, 0.3, 2.0, 0.8, [0.2, 0.3, 0.5]).expect("valid");
    let v3 = max_leakage_three_class(&three);
    ok &= (0.0..=3f64.ln() + 1e-12).contains(&v3);
    for g in [2usize, 6] {
        let ch = DiscreteChannel::from_deterministic_map(g, |c| c % 3).expect("valid");
        let (nats, _) = max_leakage_discrete(&ch);
        ok &= (0.0..=(g as f64).ln() + 1e-12).contains(&nats);
    }
    check("leakage_range_bounds", ok, "binary/three-class/discrete within [0, ln |C|]".into())
}

fn check_sibson_alpha_monotone() -> CheckResult {
    let t = TransformedModel::from_gap(2.0, 0.35).expect("valid");
    let mut prev = f64::NEG_INFINITY;
    let mut ok = true;
    for alpha in [1.5, 2.0, 5.0, 20.0, 100.0] {
        let v = sibson_mi_quadrature(&t, SibsonOrder::new(alpha).expect("valid")).expect("finite");
        if v < prev - 1e-12 {
            ok = false;
        }
        prev = v;
    }
    check("sibson_quadrature_nondecreasing_in_alpha", ok, "alpha in {1.5, 2, 5, 20, 100}".into())
}

fn check_alpha_limit() -> CheckResult {
    let order = SibsonOrder::new(1e4).expect("valid");
    let mut worst = 0.0_f64;
    for p in [0.3, 0.5, 0.7] {
        for d in [0.5, 1.0, 2.0, 3.0, 4.0, 6.0] {
            let t = TransformedModel::from_gap(d, p).expect("valid");
            let diff = (sibson_mi_quadrature(&t, order).expect("finite") - max_leakage_binary(&t)).abs();
            worst = worst.max(diff);
        }
    }
    check("sibson_alpha_limit_matches_max_leakage", worst <= 1e-3, format!("max |I_1e4 - I_inf| = {worst:.2e}"))
}

fn check_approx_fidelity() -> CheckResult {
    // the source's closeness claim, checked for d >= 1 at order 20
    let order = SibsonOrder::new(20.0).expect("valid");
    let mut worst = 0.0_f64;
    for p in [0.3, 0.5, 0.7] {
        for d in [1.0, 2.0, 3.0, 4.0, 6.0] {
            let t = TransformedModel::from_gap(d, p).expect("valid");
            let exact = sibson_mi_quadrature(&t, order).expect("finite");
            let (approx, _) = sibson_mi_max_approx(&t, order).expect("distinct means");
            worst = worst.max((approx - exact).abs() / exact.abs());
        }
    }
    check("sibson_approx_fidelity_d_ge_1", worst <= 0.005, format!("max relative error {worst:.4}"))
}

fn check_bound_ordering() -> CheckResult {
    let mut ok = true;
    let order = SibsonOrder::new(5.0).expect("valid");
    for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
        for d in [0.25, 0.5, 1.0, 2.0, 3.0] {
            let t = TransformedModel::from_gap(d, p).expect("valid");
            let exact = sibson_mi_quadrature(&t, order).expect("finite");
            let bound = sibson_mi_exp_bound(p, d, order).expect("finite");
            if bound < exact {
                ok = false;
            }
        }
    }
    check("exp_bound_dominates_oracle", ok, "5x5 grid at order 5".into())
}

fn check_piecewise_sandwich() -> CheckResult {
    let order = SibsonOrder::new(20.0).expect("valid");
    let mut ok = true;
    for d in [1.0, 2.0, 3.0] {
        let t = TransformedModel::from_gap(d, 0.5).expect("valid");
        let exact = sibson_mi_quadrature(&t, order).expect("finite");
        let piecewise = sibson_mi_piecewise_bound(&t, order).expect("finite");
        let exp_b = sibson_mi_exp_bound(0.5, d, order).expect("finite");
        ok &= piecewise >= exact && piecewise <= exp_b;
    }
    check("piecewise_bound_sandwich", ok, "oracle <= piecewise <= exp bound, d in {1,2,3}".into())
}

fn check_hetero_quadrature() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0_f64;
    for _ in 0..8 {
        let m = HeteroscedasticModel::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.4..1.5),
            rng.gen_range(1.6..4.0),
            0.5,
        )
        .expect("valid");
        let (nats, _) = max_leakage_hetero(&m);
        let lo = m.mu0p.min(m.mu1p) - 12.0 * m.sigma1.max(m.sigma0);
        let hi = m.mu0p.max(m.mu1p) + 12.0 * m.sigma1.max(m.sigma0);
        let oracle = integrate(
            |z| m.class_logpdf(z, 0).exp().max(m.class_logpdf(z, 1).exp()),
            lo,
            hi,
            1e-11,
        )
        .value
        .ln();
        worst = worst.max((nats - oracle).abs());
    }
    check("hetero_matches_quadrature", worst <= 1e-8, format!("max |closed form - oracle| = {worst:.2e}"))
}

fn check_argmin_coincidence() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let order = SibsonOrder::new(20.0).expect("valid");
    let mut ok = true;
    for _ in 0..3 {
        let p: f64 = rng.gen_range(0.2..0.8);
        let gap: f64 = rng.gen_range(2.0..8.0);
        let budget: f64 = rng.gen_range(0.2..0.9) * p * (1.0 - p) * gap * gap;
        let model = BinaryGaussianMixture::new(0.0, gap, 1.0, p).expect("valid");
        let n = 200;
        let b0_max = (budget / (1.0 - p)).sqrt();
        let b1_max = (budget / p).sqrt();
        let mut best = [(f64::INFINITY, 0usize, 0usize); 3];
        for i in 0..n {
            for j in 0..n {
                let b0 = b0_max * i as f64 / (n - 1) as f64;
                let b1 = b1_max * j as f64 / (n - 1) as f64;
                if (1.0 - p) * b0 * b0 + p * b1 * b1 > budget || b0 + b1 > gap {
                    continue;
                }
                let t = model.apply_affine(b0, b1, 0.0).expect("feasible");
                let vals = [
                    map_accuracy(&t),
                    max_leakage_binary(&t),
                    sibson_mi_max_approx(&t, order).map(|(v, _)| v).unwrap_or(f64::NEG_INFINITY),
                ];
                for (k, v) in vals.into_iter().enumerate() {
                    if v < best[k].0 {
                        best[k] = (v, i, j);
                    }
                }
            }
        }
        for k in 1..3 {
            if best[k].1.abs_diff(best[0].1) > 1 || best[k].2.abs_diff(best[0].2) > 1 {
                ok = false;
            }
        }
    }
    check("corollary_argmin_coincidence", ok, "three metrics share the 200x200 grid argmin".into())
}

fn check_threshold_forms() -> CheckResult {
    let mut worst = 0.0_f64;
    for i in 1..100 {
        let p = i as f64 / 100.0;
        let m = BinaryGaussianMixture::new(-1.5, 4.0, 1.0, p).expect("valid");
        let direct = condition_threshold(&m);
        let denom = (p / (1.0 - p)).sqrt() + ((1.0 - p) / p).sqrt();
        let ratio = (m.gap() / denom).powi(2);
        worst = worst.max((direct - ratio).abs() / direct.max(1.0));
    }
    check("condition_threshold_forms_agree", worst <= 1e-12, format!("max relative gap {worst:.2e}"))
}

fn check_solver_against_grid() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut ok = true;
    for _ in 0..5 {
        let p: f64 = rng.gen_range(0.1..0.9);
        let gap: f64 = rng.gen_range(1.0..8.0);
        let d: f64 = rng.gen_range(0.1..10.0);
        let m = BinaryGaussianMixture::new(0.0, gap, 1.0, p).expect("valid");
        let sol = solve_affine(&m, DistortionBudget::new(d).expect("valid"));
        let n = 400;
        let b0_max = (d / (1.0 - p)).sqrt().min(gap);
        let b1_max = (d / p).sqrt().min(gap);
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                let b0 = b0_max * i as f64 / n as f64;
                let b1 = b1_max * j as f64 / n as f64;
                if (1.0 - p) * b0 * b0 + p * b1 * b1 <= d && b0 + b1 <= gap {
                    best = best.max(b0 + b1);
                }
            }
        }
        if (sol.beta0 + sol.beta1 - best).abs() > 2.0 * b0_max.max(b1_max) / n as f64 {
            ok = false;
        }
    }
    check("solve_affine_matches_grid", ok, "5 random instances, 400x400 grid".into())
}

fn check_kkt_at_optimum() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let p: f64 = rng.gen_range(0.15..0.85);
        let gap: f64 = rng.gen_range(2.0..8.0);
        let m = BinaryGaussianMixture::new(0.0, gap, 1.0, p).expect("valid");
        let d_max = condition_threshold(&m);
        let d = rng.gen_range(0.05..0.95) * d_max;
        let budget = DistortionBudget::new(d).expect("valid");
        let sol = solve_affine(&m, budget);
        let r = kkt_residuals(&m, budget, sol.beta0, sol.beta1).expect("recoverable");
        worst = worst.max(r.max());
    }
    check("kkt_residuals_at_optimum", worst <= 1e-8, format!("max residual {worst:.2e}"))
}

fn check_segment_feasibility() -> CheckResult {
    let m = BinaryGaussianMixture::new(-3.0, 3.0, 1.0, 0.5).expect("valid");
    let mut ok = true;
    for d in [9.0, 10.5, 13.0, 20.0] {
        let (lo, hi) = inactive_solution_segment(&m, DistortionBudget::new(d).expect("valid")).expect("segment");
        for b0 in [lo, hi, 0.5 * (lo + hi)] {
            let b1 = m.gap() - b0;
            let used = 0.5 * b0 * b0 + 0.5 * b1 * b1;
            ok &= used <= d + 1e-9 && b0 >= 0.0 && b1 >= 0.0;
        }
    }
    check("segment_endpoints_feasible", ok, "budget boundary points on the collapse line".into())
}

fn check_regime_continuity() -> CheckResult {
    let m = BinaryGaussianMixture::new(-3.0, 3.0, 1.0, 0.4).expect("valid");
    let d_max = condition_threshold(&m);
    let eps = 1e-6;
    let lo = solve_affine(&m, DistortionBudget::new(d_max - eps).expect("valid"));
    let hi = solve_affine(&m, DistortionBudget::new(d_max + eps).expect("valid"));
    let gap = (lo.beta0 - hi.beta0).abs().max((lo.beta1 - hi.beta1).abs());
    check("regime_boundary_continuity", gap <= 1e-5, format!("parameter jump {gap:.2e} at eps=1e-6"))
}

fn check_hessian_nonpositive() -> CheckResult {
    let m = BinaryGaussianMixture::new(-3.0, 3.0, 1.0, 0.5).expect("valid");
    let mut ok = true;
    for i in 0..30 {
        for j in 0..30 {
            let beta = 5.9 * i as f64 / 29.0;
            let gamma = 3.0 * j as f64 / 29.0;
            let (_, det) = noisy_objective_hessian(&m, beta, gamma).expect("analyzed regime");
            ok &= det <= 0.0;
        }
    }
    check("hessian_determinant_nonpositive", ok, "30x30 grid in (beta, gamma)".into())
}

fn check_noisy_optimizer() -> CheckResult {
    let m = BinaryGaussianMixture::new(-3.0, 3.0, 1.0, 0.5).expect("valid");
    let d = 4.0;
    let sol = optimize_noisy_affine(&m, DistortionBudget::new(d).expect("valid"), 16, 9).expect("starts >= 1");
    let n = 200;
    let mut best = f64::INFINITY;
    let cap = (d / 0.5).sqrt();
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let b0 = cap * i as f64 / n as f64;
                let b1 = cap * j as f64 / n as f64;
                let g = d.sqrt() * k as f64 / n as f64;
                if 0.5 * b0 * b0 + 0.5 * b1 * b1 + g * g <= d && b0 + b1 <= m.gap() {
                    best = best.min((m.gap() - b0 - b1) / (1.0 + g * g).sqrt());
                }
            }
        }
    }
    let diff = (sol.objective - best).abs();
    check("noisy_optimizer_matches_grid", diff <= 1e-3, format!("|pgd - grid| = {diff:.2e}"))
}

fn check_estimators_against_oracles() -> CheckResult {
    let t = TransformedModel::from_gap(2.0, 0.5).expect("valid");
    let n = 20_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let labels_dist = Bernoulli::new(0.5).expect("valid");
    let mut posteriors = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = usize::from(labels_dist.sample(&mut rng));
        let mu = if c == 0 { t.mu0p } else { t.mu1p };
        let z: f64 = Normal::new(mu, t.sigma_eff).expect("valid").sample(&mut rng);
        posteriors.extend(t.posterior(z));
        labels.push(c);
    }
    let batch = PosteriorBatch::new(posteriors, labels, 1, 2).expect("consistent");
    let prior = PriorDistribution::uniform(2);
    let order = SibsonOrder::new(20.0).expect("valid");
    let sib = empirical_sibson_mi(&batch, &prior, order).expect("finite");
    let sib_exact = sibson_mi_quadrature(&t, order).expect("finite");
    let mi = empirical_mi(&batch, &prior).expect("finite");
    let mi_exact: f64 = (0..2)
        .map(|c| {
            integrate(
                |z| {
                    let joint = 0.5 * t.class_logpdf(z, c).exp();
                    joint * (t.posterior(z)[c] / 0.5).ln()
                },
                t.mu0p - 12.0,
                t.mu1p + 12.0,
                1e-10,
            )
            .value
        })
        .sum();
    let worst = (sib - sib_exact).abs().max((mi - mi_exact).abs());
    check(
        "estimators_match_quadrature",
        worst <= 0.02,
        format!("sibson |{sib:.4} - {sib_exact:.4}|, mi |{mi:.4} - {mi_exact:.4}|"),
    )
}

struct CeLoss(usize);
impl OutputLoss for CeLoss {
    fn value(&self, out: &[f64]) -> f64 {
        cross_entropy(out, self.0).expect("label in range")
    }
    fn grad(&self, out: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; out.len()];
        g[self.0] = -1.0 / out[self.0].clamp(1e-12, 1.0);
        g
    }
}

fn check_gradients() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst = 0.0_f64;
    for trial in 0..10 {
        let hidden = 2 + (trial % 4);
        let net = DenseNet::init(
            &[2, hidden, 3],
            &[Activation::Relu, Activation::Softmax],
            trial as u64,
        )
        .expect("valid dims");
        let input = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let loss = CeLoss(trial % 3);
        let (_, pg, _) = crate::nn::grad_with(&net, &input, &loss).expect("finite");
        let params = net.params_flat();
        let h = 1e-5;
        for i in 0..params.len() {
            let mut up = net.clone();
            let mut pu = params.clone();
            pu[i] += h;
            up.set_params_flat(&pu).expect("same length");
            let mut dn = net.clone();
            let mut pd = params.clone();
            pd[i] -= h;
            dn.set_params_flat(&pd).expect("same length");
            let fd = (loss.value(&up.forward(&input).expect("ok"))
                - loss.value(&dn.forward(&input).expect("ok")))
                / (2.0 * h);
            let denom = fd.abs().max(pg[i].abs()).max(1e-6);
            worst = worst.max((pg[i] - fd).abs() / denom);
        }
    }
    check("gradient_matches_finite_differences", worst < 1e-4, format!("worst relative error {worst:.2e}"))
}

fn check_quadrature_self_consistency() -> CheckResult {
    // the adaptive integrator against a fixed-panel Simpson rule
    let t = TransformedModel::from_gap(6.0, 0.5).expect("valid");
    let order = SibsonOrder::new(20.0).expect("valid");
    let adaptive = sibson_mi_quadrature(&t, order).expect("finite");
    let alpha = 20.0;
    let f = |z: f64| {
        let a0 = alpha * normal_logpdf(z, t.mu0p, 1.0) + 0.5f64.ln();
        let a1 = alpha * normal_logpdf(z, t.mu1p, 1.0) + 0.5f64.ln();
        (crate::math::logsumexp2(a0, a1) / alpha).exp()
    };
    let (lo, hi) = (t.mu0p - 12.0, t.mu1p + 12.0);
    let n = 40_000usize;
    let h = (hi - lo) / n as f64;
    let mut simpson = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        simpson += w * f(lo + i as f64 * h);
    }
    simpson *= h / 3.0;
    let second = alpha / (alpha - 1.0) * simpson.ln();
    let diff = (adaptive - second).abs();
    check("quadrature_agrees_with_simpson", diff <= 1e-8, format!("|adaptive - simpson| = {diff:.2e}"))
}

/// Run every check against the exact tail function.
pub fn run_verification_suite() -> Vec<CheckResult> {
    run_verification_suite_with_q(q_exact)
}

/// Run the suite with a caller-supplied tail function driving the Q-based
/// checks; the fault-injection tests pass a perturbed one.
pub fn run_verification_suite_with_q(q: impl Fn(f64) -> f64 + Copy) -> Vec<CheckResult> {
    vec![
        check_q_symmetry(q),
        check_q_decreasing(q),
        check_map_monotone(q),
        check_sibson_approx_monotone(q),
        check_mixture_normalization(),
        check_leakage_ranges(),
        check_sibson_alpha_monotone(),
        check_alpha_limit(),
        check_approx_fidelity(),
        check_bound_ordering(),
        check_piecewise_sandwich(),
        check_hetero_quadrature(),
        check_argmin_coincidence(),
        check_threshold_forms(),
        check_solver_against_grid(),
        check_kkt_at_optimum(),
        check_segment_feasibility(),
        check_regime_continuity(),
        check_hessian_nonpositive(),
        check_noisy_optimizer(),
        check_estimators_against_oracles(),
        check_gradients(),
        check_quadrature_self_consistency(),
    ]
}

/// Write the machine-readable report; returns true when every check passed.
pub fn write_report(results: &[CheckResult], path: &Path) -> Result<bool, Error> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "check,status,detail")?;
    let mut all = true;
    for r in results {
        all &= r.passed;
        writeln!(
            out,
            "{},{},\"{}\"",
            r.name,
            if r.passed { "pass" } else { "fail" },
            r.detail.replace('"', "'")
        )?;
    }
    Ok(all)
}
