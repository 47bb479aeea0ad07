//! Simulation models: covariance cases, standardised innovations, group
//! generation `x = Γz + μ`, and the alternative mean layout.
//!
//! Randomness comes from keyed ChaCha streams ([`StreamKey`]): every
//! `(seed, experiment, replication, group)` tuple owns an independent stream,
//! so any replication can be regenerated on its own and parallel scheduling
//! never changes the data.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::GroupSample;
use crate::error::{Error, Result};

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a list of words into one key component.
pub(crate) fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x2545_f491_4f6c_dd1d, |h, &w| splitmix64(h ^ w))
}

/// Identifies one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub experiment: u64,
    pub replication: u64,
    pub group: u64,
}

impl StreamKey {
    /// Group slot reserved for alternative-mean draws.
    pub const MEANS: u64 = u64::MAX;

    pub fn new(master_seed: u64, experiment: u64, replication: u64, group: u64) -> Self {
        Self { master_seed, experiment, replication, group }
    }

    /// The ChaCha key is derived from `(seed, experiment, group)`; the
    /// replication index selects the ChaCha stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = mix(&[self.master_seed, self.experiment, self.group]);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.replication);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InnovationDistribution {
    /// `N(0, 1)`
    #[serde(rename = "normal")]
    StdNormal,
    /// `(χ²₂ − 2)/2`
    #[serde(rename = "chi2_2")]
    Chi2_2Std,
    /// `(χ²₈ − 8)/4`
    #[serde(rename = "chi2_8")]
    Chi2_8Std,
}

impl InnovationDistribution {
    pub const ALL: [InnovationDistribution; 3] = [Self::StdNormal, Self::Chi2_2Std, Self::Chi2_8Std];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::StdNormal => "normal",
            Self::Chi2_2Std => "chi2_2",
            Self::Chi2_8Std => "chi2_8",
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            Self::StdNormal => 1,
            Self::Chi2_2Std => 2,
            Self::Chi2_8Std => 8,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Self::StdNormal => rng.sample(StandardNormal),
            Self::Chi2_2Std => chi_square_std(rng, 2),
            Self::Chi2_8Std => chi_square_std(rng, 8),
        }
    }
}

/// `(χ²_df − df)/√(2 df)` as a sum of squared normals.
fn chi_square_std<R: Rng + ?Sized>(rng: &mut R, df: u32) -> f64 {
    let s: f64 = (0..df).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum();
    (s - df as f64) / (2.0 * df as f64).sqrt()
}

/// `rows × cols` i.i.d. innovations, filled observation by observation.
pub fn draw_innovations<R: Rng + ?Sized>(
    dist: InnovationDistribution,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            z[(i, j)] = dist.sample(rng);
        }
    }
    z
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceKind {
    /// `Σ = I_p`
    Identity,
    /// `Σ_i = W_i Ψ_i W_i` for group index `i ∈ {1, 2, 3}`.
    Structured(usize),
    Explicit(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub kind: CovarianceKind,
    pub p: usize,
}

impl CovarianceModel {
    pub fn identity(p: usize) -> Self {
        Self { kind: CovarianceKind::Identity, p }
    }

    pub fn structured(group: usize, p: usize) -> Self {
        Self { kind: CovarianceKind::Structured(group), p }
    }

    pub fn explicit(sigma: DMatrix<f64>) -> Self {
        let p = sigma.nrows();
        Self { kind: CovarianceKind::Explicit(sigma), p }
    }
}

/// Builds `Σ` for a covariance model.
///
/// The structured case uses weights `w_j = 2i + (p − j + 1)/p` and
/// correlations `ψ_jk = (−1)^{j+k} (0.2 i)^{|j−k|^0.1}` (1-based `j, k`).
pub fn build_sigma(model: &CovarianceModel) -> Result<DMatrix<f64>> {
    let p = model.p;
    if p == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    match &model.kind {
        CovarianceKind::Identity => Ok(DMatrix::identity(p, p)),
        CovarianceKind::Structured(i) => {
            if !(1..=3).contains(i) {
                return Err(Error::Domain(format!("structured covariance group index must be 1, 2 or 3, got {i}")));
            }
            let i = *i as f64;
            let w: Vec<f64> = (1..=p).map(|j| 2.0 * i + (p - j + 1) as f64 / p as f64).collect();
            let base = 0.2 * i;
            Ok(DMatrix::from_fn(p, p, |a, b| {
                if a == b {
                    w[a] * w[a]
                } else {
                    let d = a.abs_diff(b);
                    let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    w[a] * w[b] * sign * base.powf((d as f64).powf(0.1))
                }
            }))
        }
        CovarianceKind::Explicit(m) => {
            if m.nrows() != m.ncols() {
                return Err(Error::DimensionMismatch {
                    context: "explicit covariance".into(),
                    expected: m.nrows(),
                    found: m.ncols(),
                });
            }
            if m != &m.transpose() {
                return Err(Error::Domain("explicit covariance is not symmetric".into()));
            }
            Ok(m.clone())
        }
    }
}

/// Symmetric PSD square root with the number of eigenvalues clamped to zero.
#[derive(Debug, Clone)]
pub struct SquareRoot {
    pub matrix: DMatrix<f64>,
    pub clamped: usize,
}

pub const DEFAULT_SQRT_TOL: f64 = 1e-8;

/// `Γ` with `Γ² = Σ`; eigenvalues in `[−tol·λ_max, 0)` are set to zero,
/// anything more negative is an error.
pub fn sym_sqrt(sigma: &DMatrix<f64>, tol: f64) -> Result<SquareRoot> {
    if sigma.nrows() != sigma.ncols() {
        return Err(Error::DimensionMismatch {
            context: "square root".into(),
            expected: sigma.nrows(),
            found: sigma.ncols(),
        });
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let threshold = tol * lambda_max;
    let mut clamped = 0;
    let mut roots = DVector::zeros(eig.eigenvalues.len());
    for (r, &l) in roots.iter_mut().zip(eig.eigenvalues.iter()) {
        if l < -threshold {
            return Err(Error::NotPsd { eigenvalue: l, threshold });
        }
        if l < 0.0 {
            clamped += 1;
        } else {
            *r = l.sqrt();
        }
    }
    let q = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * roots[j]);
    let mut matrix = &scaled * q.transpose();
    let n = matrix.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    Ok(SquareRoot { matrix, clamped })
}

/// `n` observations `x = Γz + μ`.
pub fn gen_group<R: Rng + ?Sized>(
    label: &str,
    gamma: &DMatrix<f64>,
    mu: &DVector<f64>,
    n: usize,
    dist: InnovationDistribution,
    rng: &mut R,
) -> Result<GroupSample> {
    if gamma.nrows() != mu.len() {
        return Err(Error::DimensionMismatch {
            context: "Γ rows vs μ".into(),
            expected: mu.len(),
            found: gamma.nrows(),
        });
    }
    gen_group_with(label, Some(gamma), mu, n, dist, rng)
}

/// As [`gen_group`]; `None` stands for `Γ = I` (innovation dimension = `p`).
pub(crate) fn gen_group_with<R: Rng + ?Sized>(
    label: &str,
    gamma: Option<&DMatrix<f64>>,
    mu: &DVector<f64>,
    n: usize,
    dist: InnovationDistribution,
    rng: &mut R,
) -> Result<GroupSample> {
    let m = gamma.map_or(mu.len(), |g| g.ncols());
    let z = draw_innovations(dist, n, m, rng);
    let mut x = match gamma {
        Some(g) => z * g.transpose(),
        None => z,
    };
    for mut row in x.row_iter_mut() {
        row += mu.transpose();
    }
    GroupSample::new(label, x)
}

/// Amplitude `a` of the alternative `μ₁ = 0, μ₂ = u, μ₃ = −u`,
/// `u_i = (−1)^i v_i`, `v_i ~ U(0, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltMeanSpec {
    pub amplitude: f64,
}

pub fn gen_alt_means<R: Rng + ?Sized>(p: usize, spec: AltMeanSpec, rng: &mut R) -> Result<[DVector<f64>; 3]> {
    let a = spec.amplitude;
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("amplitude must be a finite nonnegative number, got {a}")));
    }
    let u = DVector::from_fn(p, |i, _| {
        let v = if a == 0.0 { 0.0 } else { a * rng.random::<f64>() };
        // 1-based index i + 1: odd positions negative
        if i % 2 == 0 {
            -v
        } else {
            v
        }
    });
    Ok([DVector::zeros(p), u.clone(), -u])
}
