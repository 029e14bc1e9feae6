//! Closed-form privacy-utility curve: for each distortion budget, the
//! optimal affine shift and every metric evaluated at it.

use leakage_lab::affine_opt::{condition_threshold, solve_affine, DistortionBudget};
use leakage_lab::gauss::BinaryGaussianMixture;
use leakage_lab::leakage::{
    map_accuracy, max_leakage_binary, sibson_mi_max_approx, sibson_mi_quadrature, SibsonOrder,
};

fn main() {
    let model = BinaryGaussianMixture::new(-3.0, 3.0, 1.0, 0.5).unwrap();
    let order = SibsonOrder::new(20.0).unwrap();
    println!(
        "source N({}, {}) / N({}, {}), prior {}, condition threshold D_max = {}",
        model.mu0,
        model.sigma,
        model.mu1,
        model.sigma,
        model.p_tilde,
        condition_threshold(&model)
    );
    println!("{:>5} {:>8} {:>8} {:>9} {:>9} {:>10} {:>11} {:>11}",
        "D", "beta0*", "beta1*", "regime", "map_acc", "max_leak", "sibson_appr", "sibson_quad");
    for d in [0.5, 1.0, 2.0, 4.0, 6.0, 9.0, 12.0] {
        let sol = solve_affine(&model, DistortionBudget::new(d).unwrap());
        let t = model.apply_affine(sol.beta0, sol.beta1, 0.0).unwrap();
        let approx = sibson_mi_max_approx(&t, order)
            .map(|(v, _)| format!("{v:11.6}"))
            .unwrap_or_else(|_| format!("{:>11}", "-"));
        println!(
            "{d:5.1} {:8.4} {:8.4} {:>9} {:9.6} {:10.6} {approx} {:11.6}",
            sol.beta0,
            sol.beta1,
            sol.regime.to_string(),
            map_accuracy(&t),
            max_leakage_binary(&t),
            sibson_mi_quadrature(&t, order).unwrap()
        );
    }
}
