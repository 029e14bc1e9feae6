//! The constrained mean-shift optimizer: both solution regimes, KKT
//! residual verification, and the optimal segment once the budget stops
//! binding.

use leakage_lab::affine_opt::{
    condition_threshold, inactive_solution_segment, kkt_residuals, solve_affine, DistortionBudget,
};
use leakage_lab::gauss::BinaryGaussianMixture;

fn main() {
    let model = BinaryGaussianMixture::new(-3.0, 3.0, 1.0, 0.5).unwrap();
    let d_max = condition_threshold(&model);
    println!("gap {}, prior {}: budget threshold D_max = {d_max}", model.gap(), model.p_tilde);

    for d in [1.0, 4.0, 9.0, 13.0, 16.0] {
        let budget = DistortionBudget::new(d).unwrap();
        let sol = solve_affine(&model, budget);
        print!(
            "D = {d:5}: beta = ({:.4}, {:.4})  regime {}  objective {:+.4}",
            sol.beta0, sol.beta1, sol.regime, sol.objective
        );
        match kkt_residuals(&model, budget, sol.beta0, sol.beta1) {
            Ok(r) => println!("  max KKT residual {:.2e}", r.max()),
            Err(e) => println!("  ({e})"),
        }
        if d >= d_max {
            let (lo, hi) = inactive_solution_segment(&model, budget).unwrap();
            println!("          every beta0 in [{lo:.4}, {hi:.4}] on the collapse line is optimal");
        }
    }

    // a non-optimal point leaves visible residuals
    let budget = DistortionBudget::new(4.0).unwrap();
    let r = kkt_residuals(&model, budget, 0.5, 0.5).unwrap();
    println!("\nnon-optimal point (0.5, 0.5) at D=4: residuals {r:?}");
}
