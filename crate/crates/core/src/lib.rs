//! Target signature estimation from bag-labeled hyperspectral pixels.
//!
//! Training data arrive as *bags*: a positive bag holds at least one pixel
//! with some sub-pixel amount of target material, a negative bag holds none.
//! Which pixels carry the target is unknown. The crate searches for the
//! signature that maximizes a diverse-density style objective built on the
//! spectral matched filter:
//!
//! ```text
//! J(x) = alpha * sum_j max_i mf(x, b+_ji)  -  beta * sum_j mean_i mf(x, b-_ji)
//! mf(x, b) = (x - mu)' S^-1 (b - mu) / sqrt((x - mu)' S^-1 (x - mu))
//! ```
//!
//! with `alpha = 1/N+` and `beta = 1/N-` by default. Maximization uses an
//! elitist evolutionary search with two-scale Gaussian mutations.
//!
//! The crate is `no_std` (it needs `alloc`). File formats and the command
//! line live in the `misig` crate.
//!
//! ```
//! use misig_core::{BackgroundModel, Matrix, Regularization, Spectrum};
//!
//! let model = BackgroundModel::from_parts(
//!     Spectrum::new(vec![0.0, 0.0]).unwrap(),
//!     Matrix::identity(2),
//!     Regularization::Absolute(0.0),
//! )
//! .unwrap();
//! let sig = Spectrum::new(vec![1.0, 0.0]).unwrap();
//! let px = Spectrum::new(vec![2.0, 0.0]).unwrap();
//! assert!((model.matched_filter(&sig, &px).unwrap() - 2.0).abs() < 1e-12);
//! ```
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod background;
pub mod bags;
mod error;
pub mod eval;
pub mod evo;
pub mod linalg;
pub mod objective;
pub mod synth;

pub use background::{
    fit_background, BackgroundModel, InstanceScorer, PreparedSignature, Regularization,
};
pub use bags::{
    validate, Bag, BagSet, Label, Location, Pixel, Spectrum, ValidationIssue, ValidationReport,
};
pub use error::{Error, Result};
pub use eval::{
    detection_map, grid_search_2d, roc, DetectionMap, GridSearchResult, RocCurve, RocOptions,
    RocPoint,
};
pub use evo::{
    init_population, mutate, run, step, EAConfig, EstimationResult, InitMode, Member,
    MutationParams, MutationSetting, Population,
};
pub use linalg::{Cholesky, Matrix};
pub use objective::{
    negative_bag_term, objective, positive_bag_term, Objective, ObjectiveBreakdown,
    ObjectiveConfig, Weight,
};
pub use synth::{
    generate_scene, mix_pixel, sample_bags, GroundTruth, Scene, SyntheticConfig, TargetLayout,
};
