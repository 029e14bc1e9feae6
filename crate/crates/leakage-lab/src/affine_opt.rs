//! Closed-form and numerical optimization of the affine privatizer under a
//! distortion budget: the budget condition, KKT verification, the optimal
//! line segment of the unconstrained regime, and the non-convex noisy
//! variant with its Hessian.

use crate::error::Error;
use crate::gauss::BinaryGaussianMixture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scalar distortion budget `D >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionBudget(f64);

impl DistortionBudget {
    pub fn new(d: f64) -> Result<Self, Error> {
        if !d.is_finite() || d < 0.0 {
            return Err(Error::domain(format!("budget must be a nonnegative real, got {d}")));
        }
        Ok(DistortionBudget(d))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Which constraint binds at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    BudgetActive,
    BudgetInactive,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::BudgetActive => write!(f, "active"),
            Regime::BudgetInactive => write!(f, "inactive"),
        }
    }
}

/// Optimal affine shift under the budget, with the attained objective
/// `(mu0' - mu1')/(2 sigma)`.
#[derive(Debug, Clone, Copy)]
pub struct AffineSolution {
    pub beta0: f64,
    pub beta1: f64,
    pub regime: Regime,
    pub objective: f64,
}

/// Local optimum of the noisy-affine problem; `objective` is the attained
/// normalized gap `(mu1 - beta1 - mu0 - beta0)/sqrt(sigma^2 + gamma^2)`.
#[derive(Debug, Clone, Copy)]
pub struct NoisyAffineSolution {
    pub beta0: f64,
    pub beta1: f64,
    pub gamma: f64,
    pub objective: f64,
    pub multistart_count: usize,
}

pub(crate) fn weighted_distortion(p_tilde: f64, beta0: f64, beta1: f64, gamma: f64) -> f64 {
    (1.0 - p_tilde) * beta0 * beta0 + p_tilde * beta1 * beta1 + gamma * gamma
}

/// Largest budget for which the distortion constraint is active,
/// `D_max = p(1-p)(mu1 - mu0)^2`. The equivalent ratio form is evaluated as
/// a consistency check.
pub fn condition_threshold(model: &BinaryGaussianMixture) -> f64 {
    let p = model.p_tilde;
    let gap = model.gap();
    let direct = p * (1.0 - p) * gap * gap;
    let denom = (p / (1.0 - p)).sqrt() + ((1.0 - p) / p).sqrt();
    let ratio_form = (gap / denom).powi(2);
    debug_assert!(
        (direct - ratio_form).abs() <= 1e-12 * direct.max(1.0),
        "threshold forms disagree: {direct} vs {ratio_form}"
    );
    direct
}

/// Closed-form solution of the budgeted mean-shift problem: budget-active
/// below the condition threshold, mean-collapsing above it.
///
/// The collapsing branch takes `beta0* = p gap`, `beta1* = (1-p) gap`: the
/// active branch's value at the threshold budget and the double root of the
/// segment quadratic. The source prints this pair with the priors swapped,
/// which breaks both feasibility just past the threshold and continuity at
/// it, so the orientation here follows the algebra.
pub fn solve_affine(model: &BinaryGaussianMixture, budget: DistortionBudget) -> AffineSolution {
    let p = model.p_tilde;
    let gap = model.gap();
    let d_budget = budget.value();
    let d_max = condition_threshold(model);
    let (beta0, beta1, regime) = if d_budget <= d_max {
        if d_budget == 0.0 {
            (0.0, 0.0, Regime::BudgetActive)
        } else {
            (
                (p / (1.0 - p) * d_budget).sqrt(),
                ((1.0 - p) / p * d_budget).sqrt(),
                Regime::BudgetActive,
            )
        }
    } else {
        (gap * p, gap * (1.0 - p), Regime::BudgetInactive)
    };
    let objective = -(gap - beta0 - beta1) / (2.0 * model.sigma);
    AffineSolution { beta0, beta1, regime, objective }
}

/// Residuals of the stationarity system and complementary slackness at a
/// candidate point, with the multiplier recovered from the first stationarity
/// equation on the budget boundary and set to zero off it.
#[derive(Debug, Clone, Copy)]
pub struct KktResiduals {
    pub stationarity0: f64,
    pub stationarity1: f64,
    pub complementary: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity0.max(self.stationarity1).max(self.complementary)
    }
}

pub fn kkt_residuals(
    model: &BinaryGaussianMixture,
    budget: DistortionBudget,
    beta0: f64,
    beta1: f64,
) -> Result<KktResiduals, Error> {
    if beta0 < 0.0 || beta1 < 0.0 {
        return Err(Error::constraint("KKT check needs beta0, beta1 >= 0"));
    }
    let p = model.p_tilde;
    let d_budget = budget.value();
    let slack = d_budget - weighted_distortion(p, beta0, beta1, 0.0);
    let on_boundary = slack.abs() <= 1e-9 * d_budget.max(1.0);
    if on_boundary {
        if (1.0 - p) * beta0 == 0.0 {
            return Err(Error::domain(
                "cannot recover the multiplier: (1-p) beta0 = 0 on the active boundary",
            ));
        }
        let gamma_star = -1.0 / (2.0 * (1.0 - p) * beta0);
        Ok(KktResiduals {
            stationarity0: (1.0 + 2.0 * gamma_star * (1.0 - p) * beta0).abs(),
            stationarity1: (1.0 + 2.0 * gamma_star * p * beta1).abs(),
            complementary: (gamma_star * slack).abs(),
        })
    } else {
        Ok(KktResiduals {
            stationarity0: 1.0,
            stationarity1: 1.0,
            complementary: 0.0,
        })
    }
}

/// Endpoints of the optimal `beta0` segment on the mean-collapsing line
/// `beta0 + beta1 = mu1 - mu0` once the budget exceeds the condition
/// threshold. Solving the intersection with the distortion boundary gives
/// `beta0 = p gap +- sqrt(D - p(1-p) gap^2)`, clipped to `[0, gap]`.
pub fn inactive_solution_segment(
    model: &BinaryGaussianMixture,
    budget: DistortionBudget,
) -> Result<(f64, f64), Error> {
    let p = model.p_tilde;
    let gap = model.gap();
    let d_budget = budget.value();
    let d_max = condition_threshold(model);
    if d_budget < d_max {
        return Err(Error::domain(format!(
            "segment is empty: budget {d_budget} below the condition threshold {d_max}"
        )));
    }
    let root = (d_budget - d_max).max(0.0).sqrt();
    let low = (p * gap - root).clamp(0.0, gap);
    let high = (p * gap + root).clamp(0.0, gap);
    Ok((low, high))
}

fn noisy_objective(gap: f64, sigma: f64, s: f64, gamma: f64) -> f64 {
    (gap - s) / (sigma * sigma + gamma * gamma).sqrt()
}

/// Project `(s, gamma)` onto the feasible set
/// `{w s^2 + gamma^2 <= d, 0 <= s <= gap, gamma >= 0}` by alternating the
/// box clamp with an exact ellipse projection (multiplier by bisection).
fn project(mut s: f64, mut gamma: f64, w: f64, d: f64, gap: f64) -> (f64, f64) {
    for _ in 0..64 {
        s = s.clamp(0.0, gap);
        gamma = gamma.max(0.0);
        let level = w * s * s + gamma * gamma;
        if level <= d + 1e-15 {
            break;
        }
        let (s0, g0) = (s, gamma);
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        let residual = |lam: f64| {
            let sp = s0 / (1.0 + 2.0 * lam * w);
            let gp = g0 / (1.0 + 2.0 * lam);
            w * sp * sp + gp * gp - d
        };
        while residual(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e18 {
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * hi.max(1.0) {
                break;
            }
        }
        let lam = 0.5 * (lo + hi);
        s = s0 / (1.0 + 2.0 * lam * w);
        gamma = g0 / (1.0 + 2.0 * lam);
    }
    // hard feasibility: shrink radially if bisection left us marginally outside
    let level = w * s * s + gamma * gamma;
    if d == 0.0 {
        return (if w == 0.0 { s.clamp(0.0, gap) } else { 0.0 }, 0.0);
    }
    if level > d {
        let t = (d / level).sqrt();
        s *= t;
        gamma *= t;
    }
    (s.clamp(0.0, gap), gamma.max(0.0))
}

/// Multistart projected-gradient descent on the reduced two-variable
/// objective `(gap - s)/sqrt(sigma^2 + gamma^2)` over the budget ellipse,
/// with the shift split `beta0 = p s`, `beta1 = (1-p) s` that minimizes the
/// distortion at fixed total shift. Only local optimality is promised: the
/// Hessian determinant is nonpositive throughout the analyzed regime.
pub fn optimize_noisy_affine(
    model: &BinaryGaussianMixture,
    budget: DistortionBudget,
    starts: usize,
    seed: u64,
) -> Result<NoisyAffineSolution, Error> {
    if starts == 0 {
        return Err(Error::domain("multistart needs at least one start"));
    }
    let p = model.p_tilde;
    let gap = model.gap();
    let sigma = model.sigma;
    let w = p * (1.0 - p);
    let d_budget = budget.value();

    let s_cap = if w == 0.0 { gap } else { gap.min((d_budget / w).sqrt()) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, usize, f64, f64)> = None;

    for start_idx in 0..starts {
        let (mut s, mut gamma) = match start_idx {
            0 => (s_cap, 0.0),
            1 => (0.0, d_budget.sqrt()),
            _ => {
                let s0 = rng.gen_range(0.0..=s_cap.max(f64::MIN_POSITIVE));
                let headroom = (d_budget - w * s0 * s0).max(0.0).sqrt();
                (s0, rng.gen_range(0.0..=headroom.max(f64::MIN_POSITIVE)))
            }
        };
        let proj = project(s, gamma, w, d_budget, gap);
        s = proj.0;
        gamma = proj.1;
        let mut f = noisy_objective(gap, sigma, s, gamma);
        for _ in 0..400 {
            let denom = sigma * sigma + gamma * gamma;
            let grad_s = -1.0 / denom.sqrt();
            let grad_g = -(gap - s) * gamma / denom.powf(1.5);
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-14 {
                let (sn, gn) = project(s - step * grad_s, gamma - step * grad_g, w, d_budget, gap);
                let fn_ = noisy_objective(gap, sigma, sn, gn);
                if fn_ < f - 1e-15 {
                    let displacement = (sn - s).abs().max((gn - gamma).abs());
                    s = sn;
                    gamma = gn;
                    f = fn_;
                    moved = displacement > 1e-13;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let candidate = (f, start_idx, s, gamma);
        best = Some(match best {
            None => candidate,
            Some(b) => {
                if (candidate.0, candidate.1) < (b.0, b.1) {
                    candidate
                } else {
                    b
                }
            }
        });
    }

    let (objective, _, s, gamma) = best.expect("at least one start");
    Ok(NoisyAffineSolution {
        beta0: p * s,
        beta1: (1.0 - p) * s,
        gamma,
        objective,
        multistart_count: starts,
    })
}

/// Analytic Hessian of `f(beta, gamma) = (gap - beta)/sqrt(sigma^2 + gamma^2)`
/// in the regime `gap - beta > 0`, with its determinant
/// `-(d2f/dbeta dgamma)^2 <= 0`.
pub fn noisy_objective_hessian(
    model: &BinaryGaussianMixture,
    beta: f64,
    gamma: f64,
) -> Result<([[f64; 2]; 2], f64), Error> {
    let gap = model.gap();
    if gap - beta <= 0.0 {
        return Err(Error::domain(format!(
            "Hessian analyzed for gap - beta > 0; got beta={beta} at gap={gap}"
        )));
    }
    let v = model.sigma * model.sigma + gamma * gamma;
    let cross = gamma / v.powf(1.5);
    let h_gg = (gap - beta) / v.powf(1.5) * (3.0 * gamma * gamma / v - 1.0);
    let h = [[0.0, cross], [cross, h_gg]];
    Ok((h, -cross * cross))
}
