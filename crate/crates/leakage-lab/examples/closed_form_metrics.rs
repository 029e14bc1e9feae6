//! Every metric on one transformed model: the quadrature oracle, the
//! max-function approximation, both closed-form upper bounds, and the
//! heteroscedastic and three-class leakage variants.

use leakage_lab::gauss::TransformedModel;
use leakage_lab::leakage::{
    map_accuracy, max_leakage_binary, max_leakage_hetero, max_leakage_three_class,
    sibson_mi_exp_bound, sibson_mi_max_approx, sibson_mi_piecewise_bound, sibson_mi_quadrature,
    HeteroscedasticModel, SibsonOrder, ThreeClassModel,
};

fn main() {
    println!("binary mixture, gap d, equal priors, order 20:");
    let order = SibsonOrder::new(20.0).unwrap();
    for d in [0.5, 1.0, 2.0, 3.0, 6.0] {
        let t = TransformedModel::from_gap(d, 0.5).unwrap();
        let quad = sibson_mi_quadrature(&t, order).unwrap();
        let (approx, z0) = sibson_mi_max_approx(&t, order).unwrap();
        let piecewise = sibson_mi_piecewise_bound(&t, order).unwrap();
        let exp_bound = sibson_mi_exp_bound(0.5, d, order).unwrap();
        println!(
            "  d={d}: map_acc={:.5} max_leak={:.5} | sibson: quad={quad:.5} approx={approx:.5} (z0={z0:.3}) piecewise<={piecewise:.5} exp<={exp_bound:.3}",
            map_accuracy(&t),
            max_leakage_binary(&t),
        );
    }

    println!("\nalpha -> infinity: the quadrature approaches the maximal leakage");
    let t = TransformedModel::from_gap(2.0, 0.5).unwrap();
    for alpha in [2.0, 5.0, 20.0, 100.0, 1e4] {
        let v = sibson_mi_quadrature(&t, SibsonOrder::new(alpha).unwrap()).unwrap();
        println!("  alpha={alpha:>7}: I_alpha = {v:.6}");
    }
    println!("  maximal leakage = {:.6}", max_leakage_binary(&t));

    println!("\nunequal variances (closed form via the quadratic crossing):");
    let m = HeteroscedasticModel::new(0.0, 0.0, 1.0, 2.0, 0.5).unwrap();
    let (nats, crossings) = max_leakage_hetero(&m);
    println!("  sigma 1 vs 2, equal means: leakage {nats:.6} nats, crossings {crossings:?}");

    println!("\nthree ordered classes:");
    for (means, label) in [((-1.0, 0.0, 1.0), "close"), ((-20.0, 0.0, 20.0), "separated")] {
        let m = ThreeClassModel::new(means.0, means.1, means.2, 1.0, [1.0 / 3.0; 3]).unwrap();
        println!(
            "  means {:?} ({label}): leakage {:.6} nats (ln 3 = {:.6})",
            means,
            max_leakage_three_class(&m),
            3f64.ln()
        );
    }
}
