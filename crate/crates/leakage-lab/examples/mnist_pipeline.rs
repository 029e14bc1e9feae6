//! The image pipeline end to end on generated data: write a ten-class blob
//! data set in the IDX container format, load it back, and train the
//! network privatizer at two per-pixel distortion budgets.
//!
//! Point `--mnist-dir` style usage at real IDX files through the
//! `leakage-lab` binary instead; this example stays self-contained.

use leakage_lab::datasets::{load_mnist_idx, Dataset, Split};
use leakage_lab::leakage::SibsonOrder;
use leakage_lab::training::{
    alternating_train, evaluate_adversary, Metric, PenaltySchedule, PrivatizerKind, TrainingConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn write_blob_idx(dir: &std::path::Path, n: usize, side: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pixels = Vec::with_capacity(n * side * side);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 10;
        let (cx, cy) = (class % 4, class / 4);
        for y in 0..side {
            for x in 0..side {
                let lit = x / (side / 4).max(1) == cx && y / (side / 3).max(1) == cy;
                let noise: u8 = rng.gen_range(0..40);
                pixels.push(if lit { 200u8.saturating_add(noise) } else { noise });
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
    std::fs::write(dir.join("train-images-idx3-ubyte"), img).unwrap();
    let mut lbl = Vec::new();
    lbl.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    lbl.extend_from_slice(&(n as u32).to_be_bytes());
    lbl.extend_from_slice(&labels);
    std::fs::write(dir.join("train-labels-idx1-ubyte"), lbl).unwrap();
}

fn take(src: &Dataset, start: usize, n: usize, split: Split) -> Dataset {
    let dim = src.feature_dim();
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in start..start + n {
        features.extend_from_slice(src.row(i));
        labels.push(src.labels()[i]);
    }
    Dataset::new(features, labels, dim, src.num_classes(), split).unwrap()
}

fn main() {
    let dir = std::env::temp_dir().join("leakage-lab-blob-idx");
    std::fs::create_dir_all(&dir).unwrap();
    write_blob_idx(&dir, 1200, 8);

    let full = load_mnist_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )
    .unwrap();
    println!("loaded {} images of {} pixels", full.len(), full.feature_dim());
    let train = take(&full, 0, 1000, Split::Train);
    let val = take(&full, 1000, 200, Split::Validation);
    let p0 = train.labels().iter().filter(|&&c| c == 0).count() as f64 / train.len() as f64;

    for budget in [0.2, 0.01] {
        let config = TrainingConfig {
            minibatch: 250,
            latent_samples: 3,
            adversary_steps: 5,
            epochs: 15,
            distortion_budget: budget,
            order: SibsonOrder::new(20.0).unwrap(),
            metric: Metric::Sibson,
            privatizer: PrivatizerKind::Mlp,
            learning_rate: 2e-3,
            seed: 7,
            penalty: PenaltySchedule::Ramp,
            privatizer_hidden: vec![32, 16],
            adversary_hidden: vec![32, 16],
            latent_dim: 4,
            dropout: 0.0,
            distortion_normalizer: train.feature_dim() as f64,
        };
        let pair = alternating_train(&config, &train).unwrap();
        let (acc, dist) =
            evaluate_adversary(&pair.privatizer, &pair.adversary, &val, 3, p0, 11).unwrap();
        println!(
            "budget {budget}: adversary accuracy {acc:.3}, achieved per-pixel distortion {:.4}",
            dist / train.feature_dim() as f64
        );
    }
}
