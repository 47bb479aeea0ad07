use std::collections::hash_map::{Entry, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::config::{CovarianceCase, SimConfig, SimTest};
use super::exec::{Execution, Executor};
use crate::data::{EstimatorKind, MultiGroupDataset, TestOptions, TestOutcome};
use crate::error::Result;
use crate::mean_tests::{self, TrueModelSpec};
use crate::normal;
use crate::reference_tests;
use crate::synthetic::{self, AltMeanSpec, InnovationDistribution, StreamKey};
use crate::traces::DatasetMoments;

const TESTS_TAG: u64 = 0x7465_7374;

/// Size (null means) or power (alternative means) run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Asl,
    Power,
}

/// One `(case, distribution, p, n*)` coordinate of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Cell {
    pub case: CovarianceCase,
    pub distribution: InnovationDistribution,
    pub p: usize,
    pub n_star: usize,
}

impl Cell {
    /// Stream identifier; independent of amplitude so that a power run with
    /// `a = 0` reuses the size run's data.
    pub fn experiment_id(&self) -> u64 {
        synthetic::mix(&[TESTS_TAG, self.case.code(), self.distribution.code(), self.p as u64, self.n_star as u64])
    }
}

/// Cells of a configuration, ordered by `p`, then `n*`, then distribution.
pub fn cells(cfg: &SimConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &p in &cfg.p_list {
        for &n_star in &cfg.n_star_list {
            for &distribution in &cfg.distributions {
                out.push(Cell { case: cfg.covariance, distribution, p, n_star });
            }
        }
    }
    out
}

/// True covariances and their square roots for one `(case, p)`.
pub(crate) struct Population {
    pub(crate) sigmas: Vec<DMatrix<f64>>,
    /// `None` for the identity.
    pub(crate) gammas: Vec<Option<DMatrix<f64>>>,
    pub(crate) clamped: usize,
}

impl Population {
    pub(crate) fn new(case: CovarianceCase, k: usize, p: usize) -> Result<Self> {
        let mut sigmas = Vec::with_capacity(k);
        let mut gammas = Vec::with_capacity(k);
        let mut clamped = 0;
        for g in 0..k {
            let sigma = synthetic::build_sigma(&case.model(g, p))?;
            match case {
                CovarianceCase::Case1 => gammas.push(None),
                CovarianceCase::Case2 => {
                    let root = synthetic::sym_sqrt(&sigma, synthetic::DEFAULT_SQRT_TOL)?;
                    clamped += root.clamped;
                    gammas.push(Some(root.matrix));
                }
            }
            sigmas.push(sigma);
        }
        Ok(Self { sigmas, gammas, clamped })
    }
}

/// Outcome of one replication: a z-score per configured test (`None` when
/// the replication was degenerate for that test) and the realised
/// `Σ_{i<j} ‖μ_i − μ_j‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub z: Vec<Option<f64>>,
    pub mean_separation: f64,
}

fn group_means(cfg: &SimConfig, cell: &Cell, amplitude: f64, replication: u64) -> Result<Vec<DVector<f64>>> {
    if amplitude == 0.0 {
        return Ok(vec![DVector::zeros(cell.p); cfg.k]);
    }
    let draw = if cfg.redraw_means { replication } else { 0 };
    let mut rng = StreamKey::new(cfg.master_seed, cell.experiment_id(), draw, StreamKey::MEANS).rng();
    let means = synthetic::gen_alt_means(cell.p, AltMeanSpec { amplitude }, &mut rng)?;
    Ok(means.into_iter().take(cfg.k).collect())
}

fn separation(means: &[DVector<f64>]) -> f64 {
    let mut s = 0.0;
    for i in 0..means.len() {
        for j in (i + 1)..means.len() {
            s += (&means[i] - &means[j]).norm_squared();
        }
    }
    s
}

fn run_test(test: SimTest, ds: &MultiGroupDataset, m: &DatasetMoments, alpha: f64) -> Result<TestOutcome> {
    let g = ds.groups();
    match test {
        SimTest::OurUmvue => mean_tests::test_equal_means_with(ds, m, TestOptions::new(alpha, EstimatorKind::Umvue)?),
        SimTest::OurUne => mean_tests::test_equal_means_with(ds, m, TestOptions::new(alpha, EstimatorKind::Une)?),
        SimTest::Bs => reference_tests::t_bs_from(&m.groups[0], &m.groups[1], alpha),
        SimTest::Cq => reference_tests::t_cq_with(&g[0], &g[1], &m.groups[0], &m.groups[1], alpha),
        SimTest::Sk => reference_tests::t_sk_from(m, alpha),
    }
}

fn replicate(cfg: &SimConfig, cell: &Cell, pop: &Population, amplitude: f64, rep: u64) -> Result<ReplicationRecord> {
    let means = group_means(cfg, cell, amplitude, rep)?;
    let sizes = cfg.group_sizes(cell.n_star);
    let exp = cell.experiment_id();
    let mut groups = Vec::with_capacity(cfg.k);
    for (g, (mu, &n)) in means.iter().zip(&sizes).enumerate() {
        let mut rng = StreamKey::new(cfg.master_seed, exp, rep, g as u64).rng();
        let label = format!("g{}", g + 1);
        groups.push(synthetic::gen_group_with(&label, pop.gammas[g].as_ref(), mu, n, cell.distribution, &mut rng)?);
    }
    let ds = MultiGroupDataset::new(groups)?;
    let moments = DatasetMoments::new(&ds)?;
    let mut z = Vec::with_capacity(cfg.tests.len());
    for &test in &cfg.tests {
        match run_test(test, &ds, &moments, cfg.alpha) {
            Ok(o) => z.push(Some(o.z)),
            Err(e) if e.is_degenerate() => z.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(ReplicationRecord { z, mean_separation: separation(&means) })
}

/// Every replication of one cell, in replication order.
pub fn replicate_cell(cfg: &SimConfig, cell: &Cell, mode: SimMode, exec: Execution) -> Result<Vec<ReplicationRecord>> {
    cfg.validate()?;
    let pop = Population::new(cell.case, cfg.k, cell.p)?;
    let executor = Executor::new(exec)?;
    replicate_with(cfg, cell, &pop, amplitude_for(cfg, mode), &executor)
}

fn replicate_with(
    cfg: &SimConfig,
    cell: &Cell,
    pop: &Population,
    amplitude: f64,
    executor: &Executor,
) -> Result<Vec<ReplicationRecord>> {
    executor.map(cfg.replications, |rep| replicate(cfg, cell, pop, amplitude, rep as u64))
}

fn amplitude_for(cfg: &SimConfig, mode: SimMode) -> f64 {
    match mode {
        SimMode::Asl => 0.0,
        SimMode::Power => cfg.amplitude,
    }
}

/// Rejection counts of one test in one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestTally {
    pub test: SimTest,
    pub replications: usize,
    pub rejections: usize,
    /// Replications where the statistic could not be standardised; they are
    /// left out of the rate.
    pub degenerate: usize,
}

impl TestTally {
    /// `rejections / (replications − degenerate)`; `None` if every
    /// replication was degenerate.
    pub fn rate(&self) -> Option<f64> {
        let used = self.replications - self.degenerate;
        (used > 0).then(|| self.rejections as f64 / used as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub cell: Cell,
    pub group_sizes: Vec<usize>,
    pub tallies: Vec<TestTally>,
    /// Mean over replications of the asymptotic power at the true
    /// covariances (power runs only).
    pub theory_power: Option<f64>,
    /// Eigenvalues of the true covariances clamped to zero.
    pub clamped_eigenvalues: usize,
}

impl CellResult {
    pub fn tally(&self, test: SimTest) -> Option<&TestTally> {
        self.tallies.iter().find(|t| t.test == test)
    }

    pub fn rate(&self, test: SimTest) -> Option<f64> {
        self.tally(test).and_then(TestTally::rate)
    }
}

/// Tallies of a finished set of replications.
pub fn tally(tests: &[SimTest], alpha: f64, records: &[ReplicationRecord]) -> Result<Vec<TestTally>> {
    let xi = normal::normal_upper_quantile(alpha)?;
    Ok(tests
        .iter()
        .enumerate()
        .map(|(t, &test)| {
            let mut tally = TestTally { test, replications: records.len(), rejections: 0, degenerate: 0 };
            for r in records {
                match r.z[t] {
                    Some(z) if z > xi => tally.rejections += 1,
                    Some(_) => {}
                    None => tally.degenerate += 1,
                }
            }
            tally
        })
        .collect())
}

/// Results of a size or power run, one entry per cell in [`cells`] order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRun {
    pub mode: SimMode,
    pub tests: Vec<SimTest>,
    pub cells: Vec<CellResult>,
}

/// Runs every cell of the configuration.
pub fn run(cfg: &SimConfig, mode: SimMode, exec: Execution) -> Result<SimulationRun> {
    cfg.validate()?;
    let executor = Executor::new(exec)?;
    let amplitude = amplitude_for(cfg, mode);
    let mut populations: HashMap<usize, Population> = HashMap::new();
    let mut results = Vec::new();
    for cell in cells(cfg) {
        let pop = match populations.entry(cell.p) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(Population::new(cell.case, cfg.k, cell.p)?),
        };
        let records = replicate_with(cfg, &cell, pop, amplitude, &executor)?;
        let sizes = cfg.group_sizes(cell.n_star);
        let theory_power = match mode {
            SimMode::Asl => None,
            SimMode::Power => {
                let spec = TrueModelSpec::new(pop.sigmas.clone(), vec![DVector::zeros(cell.p); cfg.k], sizes.clone())?;
                let sigma_n = spec.null_variance().sqrt();
                let mut total = 0.0;
                for r in &records {
                    total += mean_tests::asymptotic_power(r.mean_separation, sigma_n, cfg.alpha)?;
                }
                Some(total / records.len() as f64)
            }
        };
        results.push(CellResult {
            cell,
            group_sizes: sizes,
            tallies: tally(&cfg.tests, cfg.alpha, &records)?,
            theory_power,
            clamped_eigenvalues: pop.clamped,
        });
    }
    Ok(SimulationRun { mode, tests: cfg.tests.clone(), cells: results })
}

/// Size run: all means zero whatever the configured amplitude.
pub fn run_asl(cfg: &SimConfig, exec: Execution) -> Result<SimulationRun> {
    run(cfg, SimMode::Asl, exec)
}

/// Power run under the alternative layout with the configured amplitude.
pub fn run_power(cfg: &SimConfig, exec: Execution) -> Result<SimulationRun> {
    run(cfg, SimMode::Power, exec)
}
