//! Sample moments and estimators of the trace functionals `tr Σ_i²` and
//! `tr(Σ_i Σ_j)`.
//!
//! Three families are available (see [`EstimatorKind`]):
//!
//! * UMVUE: `(n−1)²/((n+1)(n−2)) · (tr S² − (tr S)²/(n−1))` for `tr Σ²` and the
//!   plug-in `tr(S_i S_j)` for the cross term. Unbiased under normality.
//! * UNE: a sixth-order U-statistic for `tr Σ²`, evaluated here through the
//!   off-diagonal Gram matrix in `O(n²p)`; the cross term is again
//!   `tr(S_i S_j)`, which coincides with the third-order U-statistic exactly.
//! * Chen–Qin leave-out estimators.
//!
//! The direct enumeration forms of the U-statistics live in [`crate::oracle`].

use nalgebra::{DMatrix, DVector};

use crate::data::{EstimatorKind, GroupSample, MultiGroupDataset};
use crate::error::{Error, Result};

/// Sums with a fixed pairwise reduction tree.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

fn mean_of_rows(data: &DMatrix<f64>) -> DVector<f64> {
    // Accumulate deviations from the first row: identical rows give an exact mean.
    let n = data.nrows();
    DVector::from_fn(data.ncols(), |j, _| {
        let base = data[(0, j)];
        let dev: f64 = data.column(j).iter().map(|x| x - base).sum();
        base + dev / n as f64
    })
}

fn centred(data: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = data.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    c
}

fn symmetrise(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Arithmetic mean of the rows.
pub fn sample_mean(g: &GroupSample) -> DVector<f64> {
    mean_of_rows(g.data())
}

/// Unbiased sample covariance `S` (divisor `n − 1`), exactly symmetric.
pub fn sample_covariance(g: &GroupSample) -> Result<DMatrix<f64>> {
    g.require(2)?;
    let mean = sample_mean(g);
    Ok(covariance_from(g.data(), &mean))
}

fn covariance_from(data: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let c = centred(data, mean);
    let mut s = c.transpose() * &c;
    s /= (data.nrows() - 1) as f64;
    symmetrise(&mut s);
    s
}

/// First and second sample moments of one group plus the traces every
/// statistic reuses.
#[derive(Debug, Clone)]
pub struct GroupMoments {
    pub n: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// `tr S`
    pub trace: f64,
    /// `tr S² = ‖S‖_F²`
    pub trace_sq: f64,
}

impl GroupMoments {
    pub fn new(g: &GroupSample) -> Result<Self> {
        g.require(2)?;
        let mean = sample_mean(g);
        let cov = covariance_from(g.data(), &mean);
        let trace = cov.trace();
        let trace_sq = frobenius_dot(&cov, &cov);
        Ok(Self { n: g.n(), mean, cov, trace, trace_sq })
    }

    /// UMVUE of `tr Σ²`; needs `n ≥ 3`.
    pub fn tr_sq_umvue(&self) -> f64 {
        let n = self.n as f64;
        (n - 1.0).powi(2) / ((n + 1.0) * (n - 2.0)) * (self.trace_sq - self.trace * self.trace / (n - 1.0))
    }
}

/// Moments for every group of a dataset.
#[derive(Debug, Clone)]
pub struct DatasetMoments {
    pub groups: Vec<GroupMoments>,
}

impl DatasetMoments {
    pub fn new(ds: &MultiGroupDataset) -> Result<Self> {
        let groups = ds.groups().iter().map(GroupMoments::new).collect::<Result<_>>()?;
        Ok(Self { groups })
    }
}

/// `Σ_ij a_ij b_ij`, which is `tr(A B)` for symmetric inputs.
pub(crate) fn frobenius_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

pub fn tr_sq_umvue(g: &GroupSample) -> Result<f64> {
    g.require(3)?;
    Ok(GroupMoments::new(g)?.tr_sq_umvue())
}

fn check_same_p(a: &GroupSample, b: &GroupSample) -> Result<()> {
    if a.p() != b.p() {
        return Err(Error::DimensionMismatch {
            context: format!("groups `{}` and `{}`", a.label(), b.label()),
            expected: a.p(),
            found: b.p(),
        });
    }
    Ok(())
}

/// Plug-in cross-trace `tr(S_a S_b)`.
pub fn tr_cross_plugin(a: &GroupSample, b: &GroupSample) -> Result<f64> {
    check_same_p(a, b)?;
    let sa = sample_covariance(a)?;
    let sb = sample_covariance(b)?;
    Ok(frobenius_dot(&sa, &sb))
}

/// Off-diagonal Gram matrix `Θ` of a group's observations: `θ_jk = x_j·x_k`
/// for `j ≠ k`, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct GramOffDiagonal {
    theta: DMatrix<f64>,
}

impl GramOffDiagonal {
    /// Gram matrix of the rows as given.
    pub fn raw(g: &GroupSample) -> Self {
        Self::from_rows(g.data().clone())
    }

    /// Gram matrix of the rows after subtracting the group mean.
    pub fn centred(g: &GroupSample) -> Self {
        Self::from_rows(centred(g.data(), &sample_mean(g)))
    }

    fn from_rows(rows: DMatrix<f64>) -> Self {
        let mut theta = &rows * rows.transpose();
        symmetrise(&mut theta);
        theta.fill_diagonal(0.0);
        Self { theta }
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    /// `Σ_jk θ_jk²`
    pub fn q2(&self) -> f64 {
        let sq: Vec<f64> = self.theta.iter().map(|t| t * t).collect();
        pairwise_sum(&sq)
    }

    fn row_sums(&self) -> Vec<f64> {
        // Θ is symmetric, so column sums over contiguous storage are row sums.
        self.theta.column_iter().map(|c| pairwise_sum(c.as_slice())).collect()
    }

    /// `Σ_j (Σ_k θ_jk)²`
    pub fn q12(&self) -> f64 {
        let sq: Vec<f64> = self.row_sums().iter().map(|r| r * r).collect();
        pairwise_sum(&sq)
    }

    /// `Σ_jk θ_jk` (signed).
    pub fn q1(&self) -> f64 {
        pairwise_sum(&self.row_sums())
    }

    /// Closed form of the sixth-order U-statistic for `tr Σ²`.
    pub(crate) fn une_tr_sq(&self) -> f64 {
        une_from_sums(self.theta.nrows(), self.q2(), self.q12(), self.q1())
    }
}

fn une_from_sums(n: usize, q2: f64, q12: f64, q1: f64) -> f64 {
    let n = n as f64;
    q2 / (n * (n - 3.0)) - 2.0 * q12 / (n * (n - 2.0) * (n - 3.0)) + q1 * q1 / (n * (n - 1.0) * (n - 2.0) * (n - 3.0))
}

/// `q2`, `q12`, `q1` of the centred rows `y` without forming `Θ`, through
/// `‖YY'‖_F² = ‖Y'Y‖_F²` and row sums `y_j·Σy − ‖y_j‖²`; `c = Y'Y`.
fn gram_sums_via_cross_product(y: &DMatrix<f64>, c: &DMatrix<f64>) -> (f64, f64, f64) {
    let norms: Vec<f64> = y.row_iter().map(|r| r.norm_squared()).collect();
    let fourth: Vec<f64> = norms.iter().map(|v| v * v).collect();
    let q2 = frobenius_dot(c, c) - pairwise_sum(&fourth);
    let total = y.row_sum();
    let rows: Vec<f64> = y.row_iter().zip(&norms).map(|(r, nrm)| r.dot(&total) - nrm).collect();
    let sq: Vec<f64> = rows.iter().map(|r| r * r).collect();
    (q2, pairwise_sum(&sq), pairwise_sum(&rows))
}

/// UNE of `tr Σ²` in `O(np · min(n, p))`; needs `n ≥ 6`.
pub fn tr_sq_une_fast(g: &GroupSample) -> Result<f64> {
    g.require(6)?;
    une_with(g, &sample_mean(g), None)
}

/// As [`tr_sq_une_fast`], reusing the group's moments.
pub(crate) fn tr_sq_une_from(g: &GroupSample, m: &GroupMoments) -> Result<f64> {
    g.require(6)?;
    une_with(g, &m.mean, Some(&m.cov))
}

fn une_with(g: &GroupSample, mean: &DVector<f64>, cov: Option<&DMatrix<f64>>) -> Result<f64> {
    let (n, p) = (g.n(), g.p());
    let y = centred(g.data(), mean);
    if n <= p {
        return Ok(GramOffDiagonal::from_rows(y).une_tr_sq());
    }
    let c = match cov {
        Some(s) => s * (n - 1) as f64,
        None => y.transpose() * &y,
    };
    let (q2, q12, q1) = gram_sums_via_cross_product(&y, &c);
    Ok(une_from_sums(n, q2, q12, q1))
}

/// Chen–Qin leave-two-out estimator of `tr Σ²`; needs `n ≥ 4`.
///
/// `(1/(n(n−1))) Σ_{j≠k} [x_j'(x_k − x̄_(j,k))] [x_k'(x_j − x̄_(j,k))]`. The
/// estimator is unbiased for centred data but not location invariant.
pub fn cq_tr_sq(g: &GroupSample) -> Result<f64> {
    g.require(4)?;
    let n = g.n();
    let nf = n as f64;
    let x = g.data();
    let mean = sample_mean(g);
    let y = centred(x, &mean);
    // x_k − x̄_(j,k) = ((n−1)y_k + y_j − Σy) / (n−2), and Σy is kept for exactness.
    let h = x * y.transpose();
    let hsum: Vec<f64> = (0..n).map(|j| h.row(j).iter().sum()).collect();
    let f = |j: usize, k: usize| (h[(j, k)] * (nf - 1.0) + h[(j, j)] - hsum[j]) / (nf - 2.0);
    let mut terms = Vec::with_capacity(n * (n - 1));
    for j in 0..n {
        for k in 0..n {
            if j != k {
                terms.push(f(j, k) * f(k, j));
            }
        }
    }
    Ok(pairwise_sum(&terms) / (nf * (nf - 1.0)))
}

/// Chen–Qin leave-one-out estimator of `tr(Σ_a Σ_b)`.
pub fn cq_tr_cross(a: &GroupSample, b: &GroupSample) -> Result<f64> {
    check_same_p(a, b)?;
    a.require(2)?;
    b.require(2)?;
    let leave_one_out = |g: &GroupSample| {
        // rows x_l − x̄_(l) = (n y_l − Σy) / (n−1)
        let n = g.n() as f64;
        let y = centred(g.data(), &sample_mean(g));
        let total = y.row_sum();
        let mut d = y * n;
        for mut row in d.row_iter_mut() {
            row -= &total;
        }
        d / (n - 1.0)
    };
    let da = leave_one_out(a);
    let db = leave_one_out(b);
    let f1 = a.data() * db.transpose(); // [l, k] = x_al'(x_bk − x̄_b(k))
    let f2 = da * b.data().transpose(); // [l, k] = x_bk'(x_al − x̄_a(l))
    let prod: Vec<f64> = f1.iter().zip(f2.iter()).map(|(u, v)| u * v).collect();
    Ok(pairwise_sum(&prod) / (a.n() * b.n()) as f64)
}

/// Estimates of `tr Σ_i²` for every group and `tr(Σ_i Σ_j)` for every `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEstimates {
    pub tr_sq: Vec<f64>,
    /// Pairs `(i, j)` with `i < j`, in lexicographic order.
    pub tr_cross: Vec<f64>,
    pub kind: EstimatorKind,
}

impl TraceEstimates {
    pub fn k(&self) -> usize {
        self.tr_sq.len()
    }

    /// Index of pair `(i, j)`, `i ≠ j`, in [`Self::tr_cross`].
    pub fn pair_index(k: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * (2 * k - i - 1) / 2 + (j - i - 1)
    }

    pub fn cross(&self, i: usize, j: usize) -> f64 {
        self.tr_cross[Self::pair_index(self.k(), i, j)]
    }
}

pub fn estimate_traces(ds: &MultiGroupDataset, kind: EstimatorKind) -> Result<TraceEstimates> {
    let moments = match kind {
        EstimatorKind::ChenQin => None,
        _ => Some(DatasetMoments::new(ds)?),
    };
    estimate_traces_with(ds, moments.as_ref(), kind)
}

/// As [`estimate_traces`], reusing precomputed moments where the kind needs them.
pub fn estimate_traces_with(
    ds: &MultiGroupDataset,
    moments: Option<&DatasetMoments>,
    kind: EstimatorKind,
) -> Result<TraceEstimates> {
    let min = kind.min_group_size();
    for g in ds.groups() {
        g.require(min)?;
    }
    let k = ds.k();
    let groups = ds.groups();
    let owned;
    let moments = match (kind, moments) {
        (EstimatorKind::ChenQin, _) => None,
        (_, Some(m)) => Some(m),
        (_, None) => {
            owned = DatasetMoments::new(ds)?;
            Some(&owned)
        }
    };
    let tr_sq: Vec<f64> = match kind {
        EstimatorKind::Umvue => moments.unwrap().groups.iter().map(GroupMoments::tr_sq_umvue).collect(),
        EstimatorKind::Une => {
            groups.iter().zip(&moments.unwrap().groups).map(|(g, m)| tr_sq_une_from(g, m)).collect::<Result<_>>()?
        }
        EstimatorKind::ChenQin => groups.iter().map(cq_tr_sq).collect::<Result<_>>()?,
    };
    let mut tr_cross = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            tr_cross.push(match moments {
                Some(m) => frobenius_dot(&m.groups[i].cov, &m.groups[j].cov),
                None => cq_tr_cross(&groups[i], &groups[j])?,
            });
        }
    }
    if let Some(bad) = tr_sq.iter().chain(&tr_cross).find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite trace estimate {bad}")));
    }
    Ok(TraceEstimates { tr_sq, tr_cross, kind })
}
