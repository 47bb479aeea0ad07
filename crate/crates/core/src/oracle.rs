//! Direct enumeration of the U-statistic estimators.
//!
//! These evaluate the defining sums over ordered tuples of distinct indices
//! and cost `O(n⁶p)` and `O(n_a³ n_b³ p)`. They exist to check the closed
//! forms in [`crate::traces`] and are only practical for `n` around ten.

use nalgebra::DVector;

use crate::data::GroupSample;
use crate::error::{Error, Result};

/// Largest group size the CLI evaluates enumeration oracles for without `--force`.
pub const ORACLE_SOFT_LIMIT: usize = 12;

fn rows(g: &GroupSample) -> Vec<DVector<f64>> {
    (0..g.n()).map(|i| g.data().row(i).transpose()).collect()
}

fn falling(n: usize, l: usize) -> f64 {
    (0..l).map(|i| (n - i) as f64).product()
}

/// Sum over ordered triples of distinct indices `(a, b, c)` below `n`.
fn for_triples(n: usize, mut f: impl FnMut(usize, usize, usize)) {
    for a in 0..n {
        for b in 0..n {
            if b == a {
                continue;
            }
            for c in 0..n {
                if c != a && c != b {
                    f(a, b, c);
                }
            }
        }
    }
}

/// `(1/(n)₆) Σ (x₁−x₂)'(x₃−x₄) · (x₃−x₅)'(x₁−x₆)` over distinct 6-tuples.
pub fn tr_sq_une_direct(g: &GroupSample) -> Result<f64> {
    g.require(6)?;
    let x = rows(g);
    let n = x.len();
    // Partial sums are kept per leading index and combined in index order.
    let mut per_first = vec![0.0; n];
    for (k1, acc) in per_first.iter_mut().enumerate() {
        for k3 in 0..n {
            if k3 == k1 {
                continue;
            }
            for k2 in 0..n {
                if k2 == k1 || k2 == k3 {
                    continue;
                }
                let d12 = &x[k1] - &x[k2];
                for k4 in 0..n {
                    if [k1, k2, k3].contains(&k4) {
                        continue;
                    }
                    let left = d12.dot(&(&x[k3] - &x[k4]));
                    for k5 in 0..n {
                        if [k1, k2, k3, k4].contains(&k5) {
                            continue;
                        }
                        let d35 = &x[k3] - &x[k5];
                        for k6 in 0..n {
                            if [k1, k2, k3, k4, k5].contains(&k6) {
                                continue;
                            }
                            *acc += left * d35.dot(&(&x[k1] - &x[k6]));
                        }
                    }
                }
            }
        }
    }
    Ok(per_first.iter().sum::<f64>() / falling(n, 6))
}

/// `(1/((n_a)₃(n_b)₃)) Σ (a₁−a₂)'(b₄−b₅) · (b₄−b₆)'(a₁−a₃)` over distinct
/// triples from each group.
pub fn tr_cross_une_direct(a: &GroupSample, b: &GroupSample) -> Result<f64> {
    if a.p() != b.p() {
        return Err(Error::DimensionMismatch {
            context: format!("groups `{}` and `{}`", a.label(), b.label()),
            expected: a.p(),
            found: b.p(),
        });
    }
    a.require(3)?;
    b.require(3)?;
    let (xa, xb) = (rows(a), rows(b));
    let mut total = 0.0;
    for_triples(xa.len(), |k1, k2, k3| {
        let d12 = &xa[k1] - &xa[k2];
        let d13 = &xa[k1] - &xa[k3];
        let mut inner = 0.0;
        for_triples(xb.len(), |k4, k5, k6| {
            inner += d12.dot(&(&xb[k4] - &xb[k5])) * (&xb[k4] - &xb[k6]).dot(&d13);
        });
        total += inner;
    });
    Ok(total / (falling(xa.len(), 3) * falling(xb.len(), 3)))
}
