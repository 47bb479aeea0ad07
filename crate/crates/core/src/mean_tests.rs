//! The k-sample statistic
//!
//! ```text
//! T_n = Σ_{i<j} ‖x̄_i − x̄_j‖² − (k−1) Σ_i tr(S_i)/n_i
//! ```
//!
//! its null variance
//!
//! ```text
//! σ_n² = Σ_i 2(k−1)²/(n_i(n_i−1)) · tr Σ_i² + Σ_{i<j} 4/(n_i n_j) · tr(Σ_i Σ_j)
//! ```
//!
//! and the one-sided test that rejects when `T_n / σ̂_n > ξ_α`.
//!
//! `T_n` is unbiased for `Σ_{i<j} ‖μ_i − μ_j‖²` and, for `k = 2`, coincides
//! with the Chen–Qin statistic. Its asymptotic normality requires the usual
//! high-dimensional regularity conditions (finite eighth moments of the
//! innovations, group proportions bounded away from zero, and
//! `tr(Σ_l Σ_d Σ_l Σ_h) = o(tr(Σ_l Σ_d) tr(Σ_l Σ_h))`); none of these can be
//! checked from data.

use nalgebra::{DMatrix, DVector};

use crate::data::{EstimatorKind, MultiGroupDataset, TestName, TestOptions, TestOutcome};
use crate::error::{Error, Result};
use crate::normal;
use crate::traces::{self, DatasetMoments, GroupMoments, TraceEstimates};

/// `T_n` from group means and covariance traces.
pub fn t_stat(ds: &MultiGroupDataset) -> Result<f64> {
    Ok(t_stat_from(&DatasetMoments::new(ds)?.groups))
}

pub fn t_stat_from(groups: &[GroupMoments]) -> f64 {
    let k = groups.len();
    let mut between = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            between += (&groups[i].mean - &groups[j].mean).norm_squared();
        }
    }
    let correction: f64 = groups.iter().map(|g| g.trace / g.n as f64).sum();
    between - (k - 1) as f64 * correction
}

/// Summands of `σ̂_n²`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceParts {
    pub sigma_sq_hat: f64,
    /// `2(k−1)²/(n_i(n_i−1)) · tr̂Σ_i²`, one per group.
    pub per_group_terms: Vec<f64>,
    /// `4/(n_i n_j) · tr̂(Σ_iΣ_j)` for `i < j` in lexicographic order.
    pub cross_terms: Vec<f64>,
}

impl VarianceParts {
    /// Combines trace values (estimated or true) with the group sizes.
    pub fn from_traces(ns: &[usize], tr_sq: &[f64], tr_cross: &[f64]) -> Self {
        let k = ns.len();
        let km1 = (k - 1) as f64;
        let per_group_terms: Vec<f64> = ns
            .iter()
            .zip(tr_sq)
            .map(|(&n, t)| {
                let n = n as f64;
                2.0 * km1 * km1 / (n * (n - 1.0)) * t
            })
            .collect();
        let mut cross_terms = Vec::with_capacity(tr_cross.len());
        for i in 0..k {
            for j in (i + 1)..k {
                let t = tr_cross[TraceEstimates::pair_index(k, i, j)];
                cross_terms.push(4.0 / (ns[i] * ns[j]) as f64 * t);
            }
        }
        let sigma_sq_hat = per_group_terms.iter().chain(&cross_terms).sum();
        Self { sigma_sq_hat, per_group_terms, cross_terms }
    }

    pub fn from_estimates(ns: &[usize], est: &TraceEstimates) -> Self {
        Self::from_traces(ns, &est.tr_sq, &est.tr_cross)
    }

    pub fn sigma_hat(&self) -> Result<f64> {
        if self.sigma_sq_hat > 0.0 {
            Ok(self.sigma_sq_hat.sqrt())
        } else {
            Err(Error::NonPositiveVariance(self.sigma_sq_hat))
        }
    }
}

/// Estimated null variance of `T_n`. Errors if the estimate is not positive.
pub fn sigma_hat(ds: &MultiGroupDataset, kind: EstimatorKind) -> Result<VarianceParts> {
    let est = traces::estimate_traces(ds, kind)?;
    let parts = VarianceParts::from_estimates(&ds.sizes(), &est);
    parts.sigma_hat()?;
    Ok(parts)
}

pub fn test_equal_means(ds: &MultiGroupDataset, opts: TestOptions) -> Result<TestOutcome> {
    let moments = DatasetMoments::new(ds)?;
    test_equal_means_with(ds, &moments, opts)
}

/// As [`test_equal_means`] with precomputed moments.
pub fn test_equal_means_with(
    ds: &MultiGroupDataset,
    moments: &DatasetMoments,
    opts: TestOptions,
) -> Result<TestOutcome> {
    let est = traces::estimate_traces_with(ds, Some(moments), opts.estimator)?;
    let parts = VarianceParts::from_estimates(&ds.sizes(), &est);
    let std_err = parts.sigma_hat()?;
    let statistic = t_stat_from(&moments.groups);
    TestOutcome::standardise(TestName::Our, statistic, std_err, opts.alpha(), Some(opts.estimator))
}

/// Population parameters for the exact moments of `T_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModelSpec {
    sigmas: Vec<DMatrix<f64>>,
    mus: Vec<DVector<f64>>,
    ns: Vec<usize>,
}

impl TrueModelSpec {
    pub fn new(sigmas: Vec<DMatrix<f64>>, mus: Vec<DVector<f64>>, ns: Vec<usize>) -> Result<Self> {
        let k = sigmas.len();
        if k < 2 {
            return Err(Error::TooFewGroups { found: k });
        }
        for (what, len) in [("means", mus.len()), ("group sizes", ns.len())] {
            if len != k {
                return Err(Error::DimensionMismatch { context: format!("number of {what}"), expected: k, found: len });
            }
        }
        let p = sigmas[0].nrows();
        for s in &sigmas {
            if s.nrows() != p || s.ncols() != p {
                return Err(Error::DimensionMismatch {
                    context: "covariance shape".into(),
                    expected: p,
                    found: s.ncols(),
                });
            }
            if (s - s.transpose()).abs().max() > 1e-12 * s.abs().max().max(1.0) {
                return Err(Error::Domain("covariance matrix is not symmetric".into()));
            }
        }
        if let Some(m) = mus.iter().find(|m| m.len() != p) {
            return Err(Error::DimensionMismatch { context: "mean length".into(), expected: p, found: m.len() });
        }
        if let Some(&n) = ns.iter().find(|&&n| n < 2) {
            return Err(Error::too_few("model", n, 2));
        }
        Ok(Self { sigmas, mus, ns })
    }

    pub fn ns(&self) -> &[usize] {
        &self.ns
    }

    /// `Σ_{i<j} ‖μ_i − μ_j‖²`
    pub fn mean_separation(&self) -> f64 {
        let k = self.mus.len();
        let mut s = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                s += (&self.mus[i] - &self.mus[j]).norm_squared();
            }
        }
        s
    }

    /// `σ_n²` from the true traces.
    pub fn null_variance(&self) -> f64 {
        let k = self.sigmas.len();
        let tr_sq: Vec<f64> = self.sigmas.iter().map(|s| traces::frobenius_dot(s, s)).collect();
        let mut tr_cross = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                tr_cross.push(traces::frobenius_dot(&self.sigmas[i], &self.sigmas[j]));
            }
        }
        VarianceParts::from_traces(&self.ns, &tr_sq, &tr_cross).sigma_sq_hat
    }
}

/// Exact mean and variance of `T_n` under the model.
pub fn true_mean_and_variance(spec: &TrueModelSpec) -> (f64, f64) {
    let k = spec.mus.len() as f64;
    let total: DVector<f64> = spec.mus.iter().fold(DVector::zeros(spec.mus[0].len()), |acc, m| acc + m);
    let mean_term: f64 = spec
        .mus
        .iter()
        .zip(&spec.sigmas)
        .zip(&spec.ns)
        .map(|((mu, sigma), &n)| {
            let v = &total - mu * k;
            4.0 / n as f64 * (sigma * &v).dot(&v)
        })
        .sum();
    (spec.mean_separation(), spec.null_variance() + mean_term)
}

/// `Φ(−ξ_α + ‖μ‖/σ_n)` where `‖μ‖ = Σ_{i<j} ‖μ_i − μ_j‖²`.
pub fn asymptotic_power(mu_quadratic: f64, sigma_n: f64, alpha: f64) -> Result<f64> {
    if sigma_n.is_nan() || sigma_n <= 0.0 {
        return Err(Error::Domain(format!("sigma_n must be positive, got {sigma_n}")));
    }
    let xi = normal::normal_upper_quantile(alpha)?;
    if mu_quadratic == 0.0 {
        return Ok(alpha);
    }
    Ok(normal::cdf(-xi + mu_quadratic / sigma_n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::GroupSample;
    use crate::reference_tests;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal_group(rng: &mut ChaCha8Rng, label: &str, n: usize, p: usize, shift: f64) -> GroupSample {
        GroupSample::new(label, DMatrix::from_fn(n, p, |_, _| shift + rng.sample::<f64, _>(StandardNormal))).unwrap()
    }

    fn dataset(rng: &mut ChaCha8Rng, ns: &[usize], p: usize) -> MultiGroupDataset {
        let groups = ns.iter().enumerate().map(|(i, &n)| normal_group(rng, &format!("g{i}"), n, p, 0.0)).collect();
        MultiGroupDataset::new(groups).unwrap()
    }

    fn map_groups(ds: &MultiGroupDataset, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> MultiGroupDataset {
        MultiGroupDataset::new(ds.groups().iter().map(|g| GroupSample::new(g.label(), f(g.data())).unwrap()).collect())
            .unwrap()
    }

    #[test]
    fn constant_dataset() {
        let v = [0.3, -1.7, 2.2];
        let groups = (0..3).map(|i| GroupSample::from_rows(format!("g{i}"), &vec![v.to_vec(); 6]).unwrap()).collect();
        let ds = MultiGroupDataset::new(groups).unwrap();
        assert_eq!(t_stat(&ds).unwrap(), 0.0);
        for kind in [EstimatorKind::Umvue, EstimatorKind::Une, EstimatorKind::ChenQin] {
            let opts = TestOptions::new(0.05, kind).unwrap();
            assert_eq!(test_equal_means(&ds, opts), Err(Error::NonPositiveVariance(0.0)));
        }
    }

    #[test]
    fn two_groups_match_chen_qin_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ds = dataset(&mut rng, &[9, 13], 6);
        let t = t_stat(&ds).unwrap();
        let cq = reference_tests::t_cq(&ds.groups()[0], &ds.groups()[1], 0.05).unwrap();
        assert!((t - cq.statistic).abs() <= 1e-12 * t.abs());
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ds = dataset(&mut rng, &[7, 8, 9], 5);
        let moved = map_groups(&ds, |m| m.add_scalar(37.5));
        let (a, b) = (t_stat(&ds).unwrap(), t_stat(&moved).unwrap());
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn variance_parts_closed_form() {
        // k = 3, n = 20 each, Σ = I_p: 3·(8/380)·p + 3·(4/400)·p
        let p = 17.0;
        let parts = VarianceParts::from_traces(&[20, 20, 20], &[p; 3], &[p; 3]);
        let expected = 3.0 * (8.0 / 380.0) * p + 3.0 * (4.0 / 400.0) * p;
        assert!((parts.sigma_sq_hat - expected).abs() < 1e-12 * expected);
        let sum: f64 = parts.per_group_terms.iter().chain(&parts.cross_terms).sum();
        assert!((parts.sigma_sq_hat - sum).abs() <= 1e-12 * sum);

        // k = 2 gives the Chen–Qin leading variance
        let two = VarianceParts::from_traces(&[10, 15], &[3.0, 5.0], &[2.0]);
        let cq = 2.0 / 90.0 * 3.0 + 2.0 / 210.0 * 5.0 + 4.0 / 150.0 * 2.0;
        assert!((two.sigma_sq_hat - cq).abs() < 1e-15);
    }

    #[test]
    fn une_and_umvue_variance_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let ds = dataset(&mut rng, &[50, 100, 150], 100);
        let a = sigma_hat(&ds, EstimatorKind::Umvue).unwrap().sigma_sq_hat;
        let b = sigma_hat(&ds, EstimatorKind::Une).unwrap().sigma_sq_hat;
        assert!((a - b).abs() / a < 0.1, "{a} vs {b}");
    }

    #[test]
    fn z_grows_with_a_mean_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let ds = dataset(&mut rng, &[15, 20, 25], 10);
        let opts = TestOptions::default();
        let mut last = test_equal_means(&ds, opts).unwrap().z;
        for delta in [0.5, 1.0, 2.0, 4.0] {
            let mut groups = ds.clone().into_groups();
            groups[1] = GroupSample::new("g1", groups[1].data().add_scalar(delta)).unwrap();
            let z = test_equal_means(&MultiGroupDataset::new(groups).unwrap(), opts).unwrap().z;
            assert!(z > last, "delta {delta}: {z} <= {last}");
            last = z;
        }
    }

    #[test]
    fn outcome_fields_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = dataset(&mut rng, &[12, 14, 16], 8);
        let out = test_equal_means(&ds, TestOptions::new(0.1, EstimatorKind::Une).unwrap()).unwrap();
        assert_eq!(out.z, out.statistic / out.std_err);
        assert!((out.p_value - (1.0 - normal::cdf(out.z))).abs() < 1e-14);
        assert_eq!(out.reject, out.z > normal::normal_upper_quantile(0.1).unwrap());
        assert_eq!(out.estimator, Some(EstimatorKind::Une));
    }

    #[test]
    fn exact_moments_special_cases() {
        let p = 6;
        let n = 11usize;
        let eye = DMatrix::<f64>::identity(p, p);
        let mu = DVector::from_element(p, 0.4);
        let spec = TrueModelSpec::new(vec![eye.clone(); 3], vec![mu.clone(); 3], vec![n; 3]).unwrap();
        let (m, v) = true_mean_and_variance(&spec);
        assert_eq!(m, 0.0);
        let (pf, nf) = (p as f64, n as f64);
        let closed = 6.0 * pf / (nf * (nf - 1.0)) * 4.0 + 12.0 * pf / (nf * nf);
        // 2(k−1)² = 8 per group: 3·8p/(n(n−1)) = 24p/(n(n−1)); cross: 3·4p/n²
        assert!((v - closed).abs() < 1e-12 * closed);

        let mus = vec![DVector::zeros(p), DVector::from_element(p, 1.0), DVector::from_element(p, -1.0)];
        let spec = TrueModelSpec::new(vec![eye; 3], mus, vec![n; 3]).unwrap();
        let (m, v2) = true_mean_and_variance(&spec);
        assert!((m - 6.0 * pf).abs() < 1e-12);
        // v_i = Σμ − 3μ_i: (0, −3·1, 3·1) ⇒ mean term 4/n · (9p + 9p)
        assert!((v2 - closed - 4.0 / nf * 18.0 * pf).abs() < 1e-10);
    }

    #[test]
    fn model_spec_validation() {
        let eye = DMatrix::<f64>::identity(2, 2);
        assert!(TrueModelSpec::new(vec![eye.clone()], vec![DVector::zeros(2)], vec![5]).is_err());
        assert!(matches!(
            TrueModelSpec::new(vec![eye.clone(); 2], vec![DVector::zeros(3); 2], vec![5, 5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn power_function() {
        let alpha = 0.05;
        assert_eq!(asymptotic_power(0.0, 1.3, alpha).unwrap(), alpha);
        let xi = normal::normal_upper_quantile(alpha).unwrap();
        assert!((asymptotic_power(xi * 2.0, 2.0, alpha).unwrap() - 0.5).abs() < 1e-15);
        let grid: Vec<f64> = (0..100).map(|i| asymptotic_power(i as f64 * 0.05, 1.0, alpha).unwrap()).collect();
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        assert!(asymptotic_power(1.0, 0.0, alpha).is_err());
        assert!(asymptotic_power(1.0, 1.0, 1.2).is_err());
    }
}
