//! Robust comparison of model residual variances.
//!
//! The centerpiece is the Morgan-Pitman equality-of-variances test for
//! paired out-of-sample residuals, hardened with Cribari-Neto's HC4
//! covariance estimator so heavy-tailed errors do not wreck the level.
//! Around it sit the diagnostics (bias t-tests, distance-correlation
//! independence checks, Wasserstein-1 distances, nested-model F tests,
//! density curves), the residual-generation protocols (k-fold
//! cross-validation and out-of-bag bootstrap), deterministic synthetic
//! dataset generators, a small model zoo (polynomial least squares and a
//! dense network trained from scratch), and a Monte Carlo harness for
//! Type I error and power estimation.

pub mod companion;
pub mod datagen;
pub mod error;
pub mod models;
pub mod montecarlo;
pub mod resample;
pub mod special;
pub mod stats;
pub mod util;

pub use companion::{
    bias_test, dcor_perm_test, distance_correlation, kde_density, nested_f_test, paired_t_test,
    wasserstein1, wasserstein_to_delta, DensityCurve, EmpiricalDistribution,
};
pub use datagen::{
    preprocess_tabular, sample_equicorrelated_gaussian, sample_t, simdata1, simdata2, simdata3,
    simdata4, simdata4_from_generator, Dataset, DatasetMeta,
};
pub use error::{Error, Result};
pub use models::{
    adam_step, glorot_normal_init, net_forward, net_gradients, poly_features, train_net,
    Activation, AdamState, ModelSpec, NetSpec, PolySpec, TrainedModel,
};
pub use montecarlo::{
    estimate_rejection_rate, power_curve, wilson_interval, DistFamily, DistSpec, McConfig,
    McReport, PowerPoint, TestKind,
};
pub use resample::{
    kfold_assignments, kfold_residuals, kfold_residuals_with_assignment, oob_bootstrap_residuals,
    read_residuals_csv, ResidualSet, ResidualSidecar, Scheme,
};
pub use stats::{
    classic_mp_test, hc4_covariance, mp_hc4_test, mp_statistic, ols_fit, pearson_corr,
    uv_transform, Alternative, Hc4Fit, Method, OlsFit, PairedSample, TestResult, UvPair,
};
