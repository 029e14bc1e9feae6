//! Privacy-utility trade-off laboratory for Gaussian-mixture data.
//!
//! The crate covers three layers:
//!
//! * closed-form theory: MAP adversary accuracy, maximal information
//!   leakage, and Sibson mutual information of a binary Gaussian mixture
//!   under budgeted affine transforms, with the constrained optimizers and
//!   their KKT verification ([`gauss`], [`leakage`], [`affine_opt`]);
//! * sample-based estimation: empirical Sibson mutual information and
//!   mutual information built from adversary posteriors ([`estimators`]);
//! * the data-driven pipeline: a small dense-network engine, the
//!   alternating privatizer/adversary training loop, dataset handling, and
//!   experiment orchestration with CSV outputs ([`nn`], [`training`],
//!   [`datasets`], [`experiment`], [`verify`]).
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `leakage-lab` binary for config-driven experiment runs.

pub mod affine_opt;
pub mod datasets;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod gauss;
pub mod leakage;
pub mod math;
pub mod nn;
pub mod training;
pub mod verify;

pub use error::Error;
pub use gauss::{BinaryGaussianMixture, LabeledSample, TransformedModel};
pub use leakage::SibsonOrder;
