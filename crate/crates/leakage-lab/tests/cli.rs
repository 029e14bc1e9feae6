//! End-to-end runs of the `leakage-lab` binary: config handling, CSV
//! artifacts, exit codes, and determinism across reruns and parallel mode.

use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_leakage-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn theory_sweep_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "sweep.conf",
        "experiment = theory_sweep\ndistortion_budgets = 4,9,16\n",
    );
    let out_dir = dir.path().join("out");
    let output = run(&[&config, "--out", out_dir.to_str().unwrap()]);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));

    let csv = std::fs::read_to_string(out_dir.join("theory_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "D,beta0_star,beta1_star,regime,map_accuracy,max_leakage,sibson_mi_approx,sibson_mi_quadrature"
    );
    assert_eq!(lines.len(), 4);
    let d4: Vec<&str> = lines[1].split(',').collect();
    assert!((d4[1].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(d4[3], "active");
    // D = 16 collapses the means: accuracy 0.5 at equal priors
    let d16: Vec<&str> = lines[3].split(',').collect();
    assert!((d16[4].parse::<f64>().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "experiment = theory_sweep\nalpha = 1.0\n",
        "experiment = theory_sweep\nwhatever = 3\n",
        "distortion_budgets = 1\n",
    ] {
        let config = write_config(dir.path(), "bad.conf", body);
        let output = run(&[&config]);
        assert_eq!(output.status.code(), Some(1), "config: {body:?}");
    }
    let output = run(&[dir.path().join("missing.conf").to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));

    let usage = run(&["--out"]);
    assert_eq!(usage.status.code(), Some(1));
}

#[test]
fn verify_experiment_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "verify.conf", "experiment = verify\n");
    let out_dir = dir.path().join("out");
    let output = run(&[&config, "--out", out_dir.to_str().unwrap()]);
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    let pass_lines = stdout.lines().filter(|l| l.starts_with("PASS ")).count();
    assert!(pass_lines >= 12, "only {pass_lines} PASS lines:\n{stdout}");
    assert!(!stdout.contains("FAIL "));

    let report = std::fs::read_to_string(out_dir.join("verification_report.csv")).unwrap();
    assert!(report.lines().count() >= 13);
    assert!(report.lines().skip(1).all(|l| l.contains(",pass,")));
}

#[test]
fn synthetic_training_runs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let body = "experiment = train_synthetic\nn_train = 400\nn_val = 200\nbatch_size = 200\n\
                epochs = 2\nadversary_steps_k = 2\nsamples_s = 2\ndistortion_budgets = 0,2\nseed = 5\n";
    let config = write_config(dir.path(), "train.conf", body);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let out_c = dir.path().join("c");

    let first = run(&[&config, "--out", out_a.to_str().unwrap()]);
    assert!(first.status.success(), "stderr: {}", String::from_utf8_lossy(&first.stderr));
    let second = run(&[&config, "--out", out_b.to_str().unwrap()]);
    assert!(second.status.success());
    let parallel = run(&[&config, "--parallel-budgets", "--out", out_c.to_str().unwrap()]);
    assert!(parallel.status.success());

    let a = std::fs::read(out_a.join("tradeoff.csv")).unwrap();
    let b = std::fs::read(out_b.join("tradeoff.csv")).unwrap();
    let c = std::fs::read(out_c.join("tradeoff.csv")).unwrap();
    assert_eq!(a, b, "rerun differs");
    assert_eq!(a, c, "parallel mode differs");

    let text = String::from_utf8(a).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "budget,achieved_distortion,adversary_accuracy,metric,alpha,privatizer,seed,theory_map_accuracy,diverged"
    );
    assert_eq!(text.lines().count(), 3);
    assert!(out_a.join("trace_budget0.csv").exists());
    assert!(out_a.join("trace_budget1.csv").exists());
    let trace = std::fs::read_to_string(out_a.join("trace_budget0.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "epoch,adversary_loss,privatizer_loss,mean_distortion,adversary_accuracy,rho"
    );
}

/// Ten-class blob images written in the IDX container format, so the MNIST
/// path runs end to end without the real data set.
fn write_blob_idx(dir: &Path, n: usize, side: usize) -> (String, String) {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
    let mut pixels = Vec::with_capacity(n * side * side);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 10;
        let cx = class % 4;
        let cy = class / 4;
        for y in 0..side {
            for x in 0..side {
                let lit = x / (side / 4).max(1) == cx && y / (side / 3).max(1) == cy;
                let noise: u8 = rng.gen_range(0..32);
                pixels.push(if lit { 220u8.saturating_add(noise) } else { noise });
            }
        }
        labels.push(class as u8);
    }
    let mut img = Vec::new();
    img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    img.extend_from_slice(&(n as u32).to_be_bytes());
    img.extend_from_slice(&(side as u32).to_be_bytes());
    img.extend_from_slice(&(side as u32).to_be_bytes());
    img.extend_from_slice(&pixels);
    let mut lbl = Vec::new();
    lbl.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    lbl.extend_from_slice(&(n as u32).to_be_bytes());
    lbl.extend_from_slice(&labels);
    let ip = dir.join("train-images-idx3-ubyte");
    let lp = dir.join("train-labels-idx1-ubyte");
    std::fs::write(&ip, img).unwrap();
    std::fs::write(&lp, lbl).unwrap();
    (ip.display().to_string(), lp.display().to_string())
}

#[test]
fn mnist_pipeline_runs_on_idx_fixture() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_idx(dir.path(), 300, 8);
    let body = format!(
        "experiment = train_mnist\nmnist_dir = {}\nn_train = 240\nn_val = 60\nbatch_size = 120\n\
         epochs = 2\nadversary_steps_k = 2\nsamples_s = 2\nlatent_dim = 4\ndistortion_budgets = 0.05\n",
        dir.path().display()
    );
    let config = write_config(dir.path(), "mnist.conf", &body);
    let out_dir = dir.path().join("out");
    let output = run(&[&config, "--out", out_dir.to_str().unwrap()]);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let csv = std::fs::read_to_string(out_dir.join("tradeoff.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[5], "mlp");
    let acc: f64 = row[2].parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    // no closed-form baseline for images
    assert_eq!(row[7], "NaN");
}
