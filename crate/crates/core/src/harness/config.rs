use serde::{Deserialize, Serialize};

use crate::data::EstimatorKind;
use crate::error::{Error, Result};
use crate::synthetic::{CovarianceModel, InnovationDistribution};

/// Covariance layout of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceCase {
    /// `Σ_i = I_p` for every group.
    Case1,
    /// `Σ_i = W_i Ψ_i W_i`, `i = 1, 2, 3`.
    Case2,
}

impl CovarianceCase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Case1 => "case1",
            Self::Case2 => "case2",
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            Self::Case1 => 1,
            Self::Case2 => 2,
        }
    }

    /// Covariance model of group `group` (0-based).
    pub fn model(self, group: usize, p: usize) -> CovarianceModel {
        match self {
            Self::Case1 => CovarianceModel::identity(p),
            Self::Case2 => CovarianceModel::structured(group + 1, p),
        }
    }
}

/// A test run inside each replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimTest {
    OurUmvue,
    OurUne,
    Bs,
    Cq,
    Sk,
}

impl SimTest {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::OurUmvue => "our_umvue",
            Self::OurUne => "our_une",
            Self::Bs => "bs",
            Self::Cq => "cq",
            Self::Sk => "sk",
        }
    }

    /// Short column label for rendered tables.
    pub fn column(self) -> &'static str {
        match self {
            Self::OurUmvue => "umvue",
            Self::OurUne => "une",
            Self::Bs => "bs",
            Self::Cq => "cq",
            Self::Sk => "sk",
        }
    }

    fn min_group_size(self) -> usize {
        match self {
            Self::OurUmvue => EstimatorKind::Umvue.min_group_size(),
            Self::OurUne => EstimatorKind::Une.min_group_size(),
            Self::Bs => 2,
            Self::Cq => 4,
            Self::Sk => 2,
        }
    }
}

fn default_k() -> usize {
    3
}

fn default_rule() -> Vec<f64> {
    vec![0.5, 1.0, 1.5]
}

fn default_alpha() -> f64 {
    0.05
}

fn default_tests() -> Vec<SimTest> {
    vec![SimTest::OurUmvue, SimTest::OurUne, SimTest::Sk]
}

fn default_true() -> bool {
    true
}

/// Grid used by full-scale runs.
pub const FULL_P_LIST: [usize; 5] = [20, 50, 100, 500, 800];
pub const FULL_N_STAR_LIST: [usize; 4] = [20, 50, 100, 200];
pub const FULL_REPLICATIONS: usize = 10_000;

/// Experiment description, read from JSON field for field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    pub p_list: Vec<usize>,
    #[serde(default)]
    pub n_star_list: Vec<usize>,
    /// Group `i` has `round(group_size_rule[i] · n*)` observations.
    #[serde(default = "default_rule")]
    pub group_size_rule: Vec<f64>,
    pub distributions: Vec<InnovationDistribution>,
    pub covariance: CovarianceCase,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default = "default_tests")]
    pub tests: Vec<SimTest>,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Draw a fresh alternative mean vector in every replication instead of
    /// one per cell.
    #[serde(default = "default_true")]
    pub redraw_means: bool,
    /// Sample sizes for convergence runs.
    #[serde(default)]
    pub n_grid: Vec<usize>,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Same experiment over the full `(p, n*)` grid with full replication count.
    pub fn full_grid(mut self) -> Self {
        self.p_list = FULL_P_LIST.to_vec();
        self.n_star_list = FULL_N_STAR_LIST.to_vec();
        self.replications = FULL_REPLICATIONS;
        self
    }

    pub fn group_sizes(&self, n_star: usize) -> Vec<usize> {
        self.group_size_rule.iter().map(|r| (r * n_star as f64).round() as usize).collect()
    }

    fn validate_common(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k < 2 {
            return bad(format!("k: need at least 2 groups, got {}", self.k));
        }
        if self.covariance == CovarianceCase::Case2 && self.k > 3 {
            return bad(format!("k: case2 defines covariances for at most 3 groups, got {}", self.k));
        }
        if self.p_list.is_empty() || self.p_list.contains(&0) {
            return bad("p_list: must be a nonempty list of positive dimensions".into());
        }
        if self.distributions.is_empty() {
            return bad("distributions: must not be empty".into());
        }
        if self.replications == 0 {
            return bad("replications: must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads: must be at least 1".into());
        }
        Ok(())
    }

    /// Checks a configuration for size or power runs.
    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_star_list.is_empty() || self.n_star_list.contains(&0) {
            return bad("n_star_list: must be a nonempty list of positive sizes".into());
        }
        if self.group_size_rule.len() != self.k {
            return bad(format!(
                "group_size_rule: needs one multiplier per group ({}), got {}",
                self.k,
                self.group_size_rule.len()
            ));
        }
        if self.group_size_rule.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("group_size_rule: multipliers must be positive".into());
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return bad(format!("amplitude: must be finite and nonnegative, got {}", self.amplitude));
        }
        if self.amplitude > 0.0 && self.k > 3 {
            return bad(format!("amplitude: the alternative layout covers at most 3 groups, got k = {}", self.k));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha: must lie in (0, 1), got {}", self.alpha));
        }
        if self.tests.is_empty() {
            return bad("tests: must not be empty".into());
        }
        for &t in &self.tests {
            if matches!(t, SimTest::Bs | SimTest::Cq) && self.k != 2 {
                return bad(format!("tests: {} compares exactly 2 groups, k = {}", t.as_str(), self.k));
            }
            for &n_star in &self.n_star_list {
                let sizes = self.group_sizes(n_star);
                let min = t.min_group_size();
                if let Some(&n) = sizes.iter().find(|&&n| n < min) {
                    return bad(format!(
                        "n_star_list: n* = {n_star} gives a group of {n}, {} needs at least {min}",
                        t.as_str()
                    ));
                }
                let total: usize = sizes.iter().sum();
                if t == SimTest::Sk && total < self.k + 3 {
                    return bad(format!("n_star_list: n* = {n_star} leaves too few degrees of freedom for sk"));
                }
                if t == SimTest::Bs && total < 4 {
                    return bad(format!("n_star_list: n* = {n_star} is too small for bs"));
                }
            }
        }
        Ok(())
    }

    /// Checks a configuration for convergence runs.
    pub fn validate_convergence(&self) -> Result<()> {
        self.validate_common()?;
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid: must not be empty for convergence runs".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid: must be strictly increasing".into()));
        }
        let min = EstimatorKind::Une.min_group_size();
        if self.n_grid[0] < min {
            return Err(Error::Config(format!("n_grid: sizes below {min} are not supported by the UNE estimator")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SimConfig {
        SimConfig::from_json(
            r#"{"p_list": [20], "n_star_list": [50], "distributions": ["normal", "chi2_2"],
                "covariance": "case1", "replications": 10, "master_seed": 7}"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults() {
        let cfg = base();
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.group_sizes(50), vec![25, 50, 75]);
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.tests, default_tests());
        assert!(cfg.redraw_means);
        cfg.validate().unwrap();
        assert_eq!(SimConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = SimConfig::from_json(
            r#"{"p_list": [20], "n_star_list": [50], "distributions": ["normal"], "covariance": "case1",
                "replications": 10, "master_seed": 7, "replicates": 3}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("replicates"));
    }

    #[test]
    fn invalid_configs() {
        type Edit = Box<dyn Fn(&mut SimConfig)>;
        let cases: Vec<(&str, Edit)> = vec![
            ("replications", Box::new(|c| c.replications = 0)),
            ("k", Box::new(|c| c.k = 1)),
            ("group_size_rule", Box::new(|c| c.group_size_rule = vec![1.0, 1.0])),
            ("amplitude", Box::new(|c| c.amplitude = -0.1)),
            ("alpha", Box::new(|c| c.alpha = 1.0)),
            ("tests", Box::new(|c| c.tests = vec![SimTest::Bs])),
            ("n_star_list", Box::new(|c| c.n_star_list = vec![6])),
            ("p_list", Box::new(|c| c.p_list = vec![])),
            ("threads", Box::new(|c| c.threads = Some(0))),
        ];
        for (field, mutate) in cases {
            let mut cfg = base();
            mutate(&mut cfg);
            let msg = cfg.validate().unwrap_err().to_string();
            assert!(msg.contains(field), "{field}: {msg}");
        }
    }

    #[test]
    fn convergence_grid() {
        let mut cfg = base();
        cfg.n_grid = vec![10, 50, 50];
        assert!(cfg.validate_convergence().is_err());
        cfg.n_grid = vec![5, 10];
        assert!(cfg.validate_convergence().is_err());
        cfg.n_grid = vec![10, 50, 200];
        cfg.validate_convergence().unwrap();
    }

    #[test]
    fn full_grid_overrides() {
        let cfg = base().full_grid();
        assert_eq!(cfg.p_list, FULL_P_LIST);
        assert_eq!(cfg.n_star_list, FULL_N_STAR_LIST);
        assert_eq!(cfg.replications, FULL_REPLICATIONS);
    }
}
