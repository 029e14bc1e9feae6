//! Dataset generation and ingestion: synthetic Bernoulli-Gaussian draws with
//! train/validation splits, IDX image/label containers, and seeded minibatch
//! partitioning.

use crate::error::Error;
use crate::gauss::BinaryGaussianMixture;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

/// Feature matrix with class labels; immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    feature_dim: usize,
    num_classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        feature_dim: usize,
        num_classes: usize,
        split: Split,
    ) -> Result<Self, Error> {
        if feature_dim == 0 || num_classes == 0 {
            return Err(Error::shape("feature dimension and class count must be positive"));
        }
        if features.len() != labels.len() * feature_dim {
            return Err(Error::shape(format!(
                "{} feature values inconsistent with {} labels of dim {feature_dim}",
                features.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&c| c >= num_classes) {
            return Err(Error::domain("label out of class range"));
        }
        Ok(Self { features, labels, feature_dim, num_classes, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    /// Export as CSV with one feature column per dimension and the label last.
    pub fn write_csv(&self, path: &Path) -> Result<(), Error> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        if self.feature_dim == 1 {
            writeln!(out, "x,c")?;
        } else {
            let cols: Vec<String> = (0..self.feature_dim).map(|i| format!("x{i}")).collect();
            writeln!(out, "{},c", cols.join(","))?;
        }
        for i in 0..self.len() {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{},{}", row.join(","), self.labels[i])?;
        }
        Ok(())
    }
}

/// Draw `n_train + n_val` labeled points from the mixture and split them in
/// order. Defaults elsewhere follow the 10000/5000 synthetic setup.
pub fn gen_synthetic(
    model: &BinaryGaussianMixture,
    n_train: usize,
    n_val: usize,
    seed: u64,
) -> (Dataset, Dataset) {
    let samples = model.sample_pairs(n_train + n_val, seed);
    let build = |chunk: &[crate::gauss::LabeledSample], split| {
        Dataset::new(
            chunk.iter().map(|s| s.x).collect(),
            chunk.iter().map(|s| s.c).collect(),
            1,
            2,
            split,
        )
        .expect("consistent by construction")
    };
    (
        build(&samples[..n_train], Split::Train),
        build(&samples[n_train..], Split::Validation),
    )
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32, Error> {
    bytes
        .get(offset..offset + 4)
        .map(|s| u32::from_be_bytes(s.try_into().unwrap()))
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            message: "truncated header".into(),
        })
}

/// Parse big-endian IDX image and label containers into a dataset with
/// pixel bytes scaled to `[0, 1]`.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, Error> {
    let img_bytes = std::fs::read(images_path)?;
    let magic = read_u32_be(&img_bytes, 0, images_path)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Parse {
            path: images_path.display().to_string(),
            message: format!("image magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"),
        });
    }
    let n = read_u32_be(&img_bytes, 4, images_path)? as usize;
    let rows = read_u32_be(&img_bytes, 8, images_path)? as usize;
    let cols = read_u32_be(&img_bytes, 12, images_path)? as usize;
    let pixels = n * rows * cols;
    let payload = img_bytes.get(16..16 + pixels).ok_or_else(|| Error::Parse {
        path: images_path.display().to_string(),
        message: format!("truncated payload: {} bytes for {pixels} pixels", img_bytes.len() - 16),
    })?;

    let lbl_bytes = std::fs::read(labels_path)?;
    let lbl_magic = read_u32_be(&lbl_bytes, 0, labels_path)?;
    if lbl_magic != IDX_LABEL_MAGIC {
        return Err(Error::Parse {
            path: labels_path.display().to_string(),
            message: format!("label magic {lbl_magic:#010x}, expected {IDX_LABEL_MAGIC:#010x}"),
        });
    }
    let n_labels = read_u32_be(&lbl_bytes, 4, labels_path)? as usize;
    if n_labels != n {
        return Err(Error::Parse {
            path: labels_path.display().to_string(),
            message: format!("{n_labels} labels for {n} images"),
        });
    }
    let label_payload = lbl_bytes.get(8..8 + n).ok_or_else(|| Error::Parse {
        path: labels_path.display().to_string(),
        message: "truncated label payload".into(),
    })?;
    let labels: Vec<usize> = label_payload.iter().map(|&b| b as usize).collect();
    if labels.iter().any(|&c| c > 9) {
        return Err(Error::Parse {
            path: labels_path.display().to_string(),
            message: "label outside 0..=9".into(),
        });
    }
    let features: Vec<f64> = payload.iter().map(|&b| b as f64 / 255.0).collect();
    Dataset::new(features, labels, rows * cols, 10, Split::Train)
}

/// Seeded permutation of `0..N` cut into `ceil(N/M)` blocks; the last short
/// block is kept.
pub fn minibatches(dataset: &Dataset, batch_size: usize, epoch_seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "minibatch size must be at least 1");
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}
