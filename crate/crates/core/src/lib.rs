//! Emotion-share regression toolkit.
//!
//! One linear epsilon-insensitive SVR per emotion over embedding features,
//! a hyperparameter grid scored on a development split, arithmetic-mean late
//! fusion across upstream models, and per-emotion Spearman evaluation.
//!
//! ```no_run
//! use emoshare::{align, generate_synthetic, fuse_mean, evaluate, grid_search};
//! use emoshare::{GridSpec, Holdout, Scoring, SvrHyperparams, SyntheticSpec};
//!
//! let data = generate_synthetic(&SyntheticSpec::default())?;
//! let split = align(&data.features, &data.labels, &data.partition)?;
//! let grid = GridSpec::paper_grid(Scoring::Nmae);
//! let mut dev_predictions = Vec::new();
//! for (train, dev) in split.train.features.iter().zip(&split.dev.features) {
//!     let holdout = Holdout {
//!         train_features: train,
//!         train_labels: &split.train.labels,
//!         dev_features: dev,
//!         dev_labels: &split.dev.labels,
//!     };
//!     let result = grid_search(holdout, &grid, &SvrHyperparams::default())?;
//!     dev_predictions.push(emoshare::predict(&result.best_bundle, dev)?);
//! }
//! let fused = fuse_mean(&dev_predictions)?;
//! println!("{}", evaluate(&fused, &split.dev.labels)?.to_table());
//! # Ok::<(), emoshare::Error>(())
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod fusion;
pub mod json;
pub mod metrics;
pub mod model;
pub mod scaler;
pub mod selection;
pub mod svr;
pub mod synth;

pub use data::{
    align, load_feature_table, load_label_table, load_partition, normalize_label_rows,
    AlignedDataset, FeatureTable, LabelTable, PartitionMap, Split, SplitView, EMOTIONS,
    N_EMOTIONS,
};
pub use error::{Error, Result};
pub use fusion::{fuse_mean, PredictionMatrix};
pub use metrics::{evaluate, rank_average, spearman, EvalReport};
pub use model::{predict, train_bundle, LinearModelBundle};
pub use scaler::{fit_scaler, ScalerKind, ScalerParams};
pub use selection::{grid_search, score, GridConfig, GridResult, GridSpec, Holdout, Scoring};
pub use svr::{train_svr, SvrFit, SvrHyperparams};
pub use synth::{generate_synthetic, SyntheticData, SyntheticSpec};
