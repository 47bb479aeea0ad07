//! Observation containers shared by every test and estimator.
//!
//! Observations are stored row-wise: a group with `n` observations in
//! dimension `p` is an `n × p` matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// One group's observations.
///
/// Construction guarantees `n ≥ 1`, `p ≥ 1` and finite entries. The stronger
/// `n ≥ 2` requirement is enforced by [`MultiGroupDataset`] and by the
/// estimators that need it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    label: String,
    data: DMatrix<f64>,
}

impl GroupSample {
    pub fn new(label: impl Into<String>, data: DMatrix<f64>) -> Result<Self> {
        let label = label.into();
        if data.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                context: format!("group `{label}` has no coordinates"),
                expected: 1,
                found: 0,
            });
        }
        if data.nrows() == 0 {
            return Err(Error::too_few(&label, 0, 1));
        }
        for column in 0..data.ncols() {
            for row in 0..data.nrows() {
                if !data[(row, column)].is_finite() {
                    return Err(Error::NonFinite { group: label, row, column });
                }
            }
        }
        Ok(Self { label, data })
    }

    /// Builds a group from row vectors.
    pub fn from_rows(label: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let label = label.into();
        let p = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                context: format!("row length in group `{label}`"),
                expected: p,
                found: bad.len(),
            });
        }
        let data = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(label, data)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Dimension.
    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub(crate) fn require(&self, required: usize) -> Result<()> {
        if self.n() < required {
            Err(Error::too_few(&self.label, self.n(), required))
        } else {
            Ok(())
        }
    }
}

/// `k ≥ 2` groups sharing a dimension, each with at least two observations.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiGroupDataset {
    groups: Vec<GroupSample>,
}

impl MultiGroupDataset {
    pub fn new(groups: Vec<GroupSample>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::TooFewGroups { found: groups.len() });
        }
        let p = groups[0].p();
        for (i, g) in groups.iter().enumerate() {
            if g.p() != p {
                return Err(Error::DimensionMismatch {
                    context: format!("dimension of group `{}`", g.label()),
                    expected: p,
                    found: g.p(),
                });
            }
            if groups[..i].iter().any(|h| h.label() == g.label()) {
                return Err(Error::DuplicateLabel(g.label().to_string()));
            }
            g.require(2)?;
        }
        Ok(Self { groups })
    }

    /// Groups labelled rows by label, in order of first appearance.
    pub fn from_labeled_rows<S: AsRef<str>>(rows: &[(S, Vec<f64>)]) -> Result<Self> {
        validate_dataset(rows)
    }

    pub fn groups(&self) -> &[GroupSample] {
        &self.groups
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn p(&self) -> usize {
        self.groups[0].p()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(GroupSample::n).collect()
    }

    pub fn total_n(&self) -> usize {
        self.groups.iter().map(GroupSample::n).sum()
    }

    pub fn into_groups(self) -> Vec<GroupSample> {
        self.groups
    }
}

/// Validates labelled observation rows and groups them into a dataset.
///
/// Checks run in the order: ragged rows, non-finite values, number of groups,
/// group sizes.
pub fn validate_dataset<S: AsRef<str>>(rows: &[(S, Vec<f64>)]) -> Result<MultiGroupDataset> {
    let p = rows.first().map(|(_, r)| r.len()).unwrap_or(0);
    for (_, r) in rows {
        if r.len() != p {
            return Err(Error::DimensionMismatch { context: "row length".into(), expected: p, found: r.len() });
        }
    }
    let mut order: Vec<&str> = Vec::new();
    let mut members: Vec<Vec<&Vec<f64>>> = Vec::new();
    for (label, r) in rows {
        let label = label.as_ref();
        let slot = match order.iter().position(|l| *l == label) {
            Some(i) => i,
            None => {
                order.push(label);
                members.push(Vec::new());
                order.len() - 1
            }
        };
        if let Some(column) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { group: label.to_string(), row: members[slot].len(), column });
        }
        members[slot].push(r);
    }
    if order.len() < 2 {
        return Err(Error::TooFewGroups { found: order.len() });
    }
    let groups = order
        .iter()
        .zip(&members)
        .map(|(label, rs)| {
            let data = DMatrix::from_fn(rs.len(), p, |i, j| rs[i][j]);
            GroupSample::new(*label, data)
        })
        .collect::<Result<Vec<_>>>()?;
    MultiGroupDataset::new(groups)
}

/// Which family of trace estimators standardises a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Normal-theory unbiased estimators built from `S_i`.
    Umvue,
    /// Distribution-free U-statistic estimators.
    Une,
    /// Leave-out estimators of Chen and Qin.
    ChenQin,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Umvue => "umvue",
            EstimatorKind::Une => "une",
            EstimatorKind::ChenQin => "cq",
        }
    }

    /// Smallest group size for which every estimator of this kind exists.
    pub fn min_group_size(self) -> usize {
        match self {
            EstimatorKind::Umvue => 3,
            EstimatorKind::Une => 6,
            EstimatorKind::ChenQin => 4,
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "umvue" => Ok(EstimatorKind::Umvue),
            "une" => Ok(EstimatorKind::Une),
            "cq" | "chen_qin" | "chenqin" => Ok(EstimatorKind::ChenQin),
            other => Err(Error::Domain(format!("unknown estimator `{other}`"))),
        }
    }
}

/// The statistics this crate can compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestName {
    /// The standardised k-sample statistic `T_n / σ̂_n`.
    Our,
    /// Bai–Saranadasa two-sample test.
    Bs,
    /// Chen–Qin two-sample test.
    Cq,
    /// Srivastava–Kubokawa k-sample test.
    Sk,
}

impl TestName {
    pub fn as_str(self) -> &'static str {
        match self {
            TestName::Our => "our",
            TestName::Bs => "bs",
            TestName::Cq => "cq",
            TestName::Sk => "sk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOptions {
    alpha: f64,
    pub estimator: EstimatorKind,
}

impl TestOptions {
    pub fn new(alpha: f64, estimator: EstimatorKind) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, estimator })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for TestOptions {
    fn default() -> Self {
        Self { alpha: 0.05, estimator: EstimatorKind::Umvue }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Result of a one-sided upper-tail test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub test: TestName,
    pub statistic: f64,
    pub std_err: f64,
    pub z: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    /// `None` when the test carries its own variance estimate.
    pub estimator: Option<EstimatorKind>,
}

impl TestOutcome {
    pub(crate) fn standardise(
        test: TestName,
        statistic: f64,
        std_err: f64,
        alpha: f64,
        estimator: Option<EstimatorKind>,
    ) -> Result<Self> {
        let xi = normal::normal_upper_quantile(alpha)?;
        let z = statistic / std_err;
        Ok(Self { test, statistic, std_err, z, p_value: normal::upper_tail(z), alpha, reject: z > xi, estimator })
    }
}
