//! Tests for equality of mean vectors across several high-dimensional
//! groups, the trace estimators they need, comparison tests, and a Monte
//! Carlo harness for their size and power.

pub mod data;
pub mod error;
pub mod harness;
pub mod mean_tests;
pub mod normal;
pub mod oracle;
pub mod synthetic;
pub mod traces;

pub use data::{validate_dataset, EstimatorKind, GroupSample, MultiGroupDataset, TestName, TestOptions, TestOutcome};
pub use error::{Error, Result};
pub use mean_tests::{
    asymptotic_power, sigma_hat, t_stat, test_equal_means, test_equal_means_with, true_mean_and_variance,
    TrueModelSpec, VarianceParts,
};
pub use normal::{cdf, normal_upper_quantile, pdf, upper_tail};
pub use reference_tests::{t_bs, t_cq, t_sk, SkIntermediates};
pub use synthetic::{
    build_sigma, gen_alt_means, gen_group, sym_sqrt, AltMeanSpec, CovarianceKind, CovarianceModel,
    InnovationDistribution, StreamKey,
};
pub use traces::{estimate_traces, DatasetMoments, GroupMoments, TraceEstimates};
