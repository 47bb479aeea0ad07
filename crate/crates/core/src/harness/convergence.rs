use nalgebra::DVector;
use serde::Serialize;

use super::config::{CovarianceCase, SimConfig};
use super::exec::{Execution, Executor};
use super::run::Population;
use crate::error::Result;
use crate::synthetic::{self, InnovationDistribution, StreamKey};
use crate::traces::{self, GroupMoments};

const CONVERGENCE_TAG: u64 = 0x636f_6e76;

/// Estimators tracked by convergence runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceEstimator {
    /// UMVUE of `tr Σ₁²`.
    Umvue,
    /// Gram-form UNE of `tr Σ₁²`.
    Une,
    /// `tr(S₁ S₂)` for `tr(Σ₁ Σ₂)`.
    PluginCross,
}

impl ConvergenceEstimator {
    pub const ALL: [ConvergenceEstimator; 3] = [Self::Umvue, Self::Une, Self::PluginCross];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Umvue => "umvue",
            Self::Une => "une",
            Self::PluginCross => "plugin_cross",
        }
    }
}

/// Error of `(1/p)·estimate` against `(1/p)·truth` along a grid of sample
/// sizes, for one estimator, distribution and dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSeries {
    pub estimator: ConvergenceEstimator,
    pub case: CovarianceCase,
    pub distribution: InnovationDistribution,
    pub p: usize,
    /// `(1/p)·true value`.
    pub truth: f64,
    pub n_grid: Vec<usize>,
    /// Mean over replications of `(estimate − truth)/p`.
    pub mean_error: Vec<f64>,
    /// Root mean square of `(estimate − truth)/p`.
    pub rmse: Vec<f64>,
}

/// Errors of the three estimators for two groups of size `n` each.
fn one_replication(
    cfg: &SimConfig,
    pop: &Population,
    exp: u64,
    dist: InnovationDistribution,
    p: usize,
    n: usize,
    rep: u64,
) -> Result<[f64; 3]> {
    let mu = DVector::zeros(p);
    let mut groups = Vec::with_capacity(2);
    for g in 0..2 {
        let mut rng = StreamKey::new(cfg.master_seed, exp, rep, g as u64).rng();
        groups.push(synthetic::gen_group_with(&format!("g{}", g + 1), pop.gammas[g].as_ref(), &mu, n, dist, &mut rng)?);
    }
    let m1 = GroupMoments::new(&groups[0])?;
    let m2 = GroupMoments::new(&groups[1])?;
    Ok([m1.tr_sq_umvue(), traces::tr_sq_une_from(&groups[0], &m1)?, traces::frobenius_dot(&m1.cov, &m2.cov)])
}

/// Convergence series for every `(p, distribution, estimator)`, ordered by
/// `p`, then distribution, then estimator.
pub fn run_estimator_convergence(cfg: &SimConfig, exec: Execution) -> Result<Vec<ConvergenceSeries>> {
    cfg.validate_convergence()?;
    let executor = Executor::new(exec)?;
    let mut out = Vec::new();
    for &p in &cfg.p_list {
        let pop = Population::new(cfg.covariance, 2, p)?;
        let truth = [
            traces::frobenius_dot(&pop.sigmas[0], &pop.sigmas[0]),
            traces::frobenius_dot(&pop.sigmas[0], &pop.sigmas[0]),
            traces::frobenius_dot(&pop.sigmas[0], &pop.sigmas[1]),
        ];
        for &dist in &cfg.distributions {
            let mut mean_error = vec![Vec::new(); 3];
            let mut rmse = vec![Vec::new(); 3];
            for &n in &cfg.n_grid {
                let exp = synthetic::mix(&[CONVERGENCE_TAG, cfg.covariance.code(), dist.code(), p as u64, n as u64]);
                let draws =
                    executor.map(cfg.replications, |rep| one_replication(cfg, &pop, exp, dist, p, n, rep as u64))?;
                let r = draws.len() as f64;
                for e in 0..3 {
                    let errs: Vec<f64> = draws.iter().map(|d| (d[e] - truth[e]) / p as f64).collect();
                    mean_error[e].push(traces::pairwise_sum(&errs) / r);
                    let sq: Vec<f64> = errs.iter().map(|x| x * x).collect();
                    rmse[e].push((traces::pairwise_sum(&sq) / r).sqrt());
                }
            }
            for (e, estimator) in ConvergenceEstimator::ALL.into_iter().enumerate() {
                out.push(ConvergenceSeries {
                    estimator,
                    case: cfg.covariance,
                    distribution: dist,
                    p,
                    truth: truth[e] / p as f64,
                    n_grid: cfg.n_grid.clone(),
                    mean_error: std::mem::take(&mut mean_error[e]),
                    rmse: std::mem::take(&mut rmse[e]),
                });
            }
        }
    }
    Ok(out)
}
