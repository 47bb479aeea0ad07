//! Standard normal distribution function and its upper quantile.
//!
//! The distribution function is Hart's double-precision rational
//! approximation (as arranged by West); the quantile starts from Acklam's
//! rational approximation and is polished with one Halley step against it.
//! Absolute error of both is far below `1e-8` on the whole domain.

use crate::data::check_alpha;
use crate::error::Result;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `P(Z > |x|)`, computed without cancellation.
fn tail_abs(x: f64) -> f64 {
    let a = x.abs();
    if a > 37.0 {
        return 0.0;
    }
    let e = (-0.5 * a * a).exp();
    if a < 7.071_067_811_865_47 {
        let mut num = 3.526_249_659_989_11e-2 * a + 0.700_383_064_443_688;
        num = num * a + 6.373_962_203_531_65;
        num = num * a + 33.912_866_078_383;
        num = num * a + 112.079_291_497_871;
        num = num * a + 221.213_596_169_931;
        num = num * a + 220.206_867_912_376;
        let mut den = 8.838_834_764_831_84e-2 * a + 1.755_667_163_182_64;
        den = den * a + 16.064_177_579_207;
        den = den * a + 86.780_732_202_946_1;
        den = den * a + 296.564_248_779_674;
        den = den * a + 637.333_633_378_831;
        den = den * a + 793.826_512_519_948;
        den = den * a + 440.413_735_824_752;
        e * num / den
    } else {
        // Laplace continued fraction, twelve levels deep
        let b = (1..=12).rev().fold(a, |b, k| a + k as f64 / b);
        e / b / SQRT_2PI
    }
}

/// Standard normal distribution function `Φ(x)`.
pub fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let t = tail_abs(x);
    if x > 0.0 {
        1.0 - t
    } else {
        t
    }
}

/// Upper-tail probability `1 − Φ(x)`, accurate in the far right tail.
pub fn upper_tail(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let t = tail_abs(x);
    if x > 0.0 {
        t
    } else {
        1.0 - t
    }
}

fn acklam_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// `ξ_α` with `Φ(ξ_α) = 1 − α`.
pub fn normal_upper_quantile(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 0.5 {
        return Ok(0.0);
    }
    // Solve upper_tail(x) = alpha; work in the tail that avoids 1 - alpha.
    let mut x = -acklam_lower(alpha);
    let e = upper_tail(x) - alpha;
    let u = -e / pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Φ(x) = 1/2 + φ(x) Σ x^(2k+1) / (2k+1)!!, summed until the terms vanish.
    fn series_cdf(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut k = 1.0;
        while term.abs() > 1e-300 && k < 2000.0 {
            term *= x * x / (2.0 * k + 1.0);
            sum += term;
            k += 1.0;
        }
        0.5 + pdf(x) * sum
    }

    fn bisect_upper_quantile(alpha: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 1.0 - series_cdf(mid) > alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cdf_matches_series_oracle() {
        let mut worst: f64 = 0.0;
        let mut x = -7.0;
        while x <= 7.0 {
            worst = worst.max((cdf(x) - series_cdf(x)).abs());
            x += 0.01;
        }
        assert!(worst < 1e-12, "worst absolute error {worst:e}");
    }

    #[test]
    fn quantile_values() {
        assert!((normal_upper_quantile(0.05).unwrap() - 1.64485).abs() < 1e-4);
        assert_eq!(normal_upper_quantile(0.5).unwrap(), 0.0);
        // oracle: bisection on the series form
        let oracle = bisect_upper_quantile(0.025);
        assert!((oracle - 1.959964).abs() < 1e-5);
        assert!((normal_upper_quantile(0.025).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn quantile_matches_oracle_on_grid() {
        for &a in &[1e-6, 1e-4, 0.001, 0.01, 0.02, 0.0242, 0.1, 0.3, 0.7, 0.9, 0.99, 0.9999] {
            let got = normal_upper_quantile(a).unwrap();
            let want = bisect_upper_quantile(a);
            assert!((got - want).abs() < 1e-8, "alpha={a}: {got} vs {want}");
        }
    }

    #[test]
    fn quantile_domain() {
        for a in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(normal_upper_quantile(a).is_err());
        }
    }

    #[test]
    fn upper_tail_far_right() {
        // 1 - Φ(10) ≈ 7.6198530241605e-24, lost entirely by 1 - cdf
        let t = upper_tail(10.0);
        assert!((t / 7.619_853_024_160_526e-24 - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn quantile_and_tail_are_inverse(alpha in 1e-6f64..(1.0 - 1e-6)) {
            let x = normal_upper_quantile(alpha).unwrap();
            prop_assert!((upper_tail(x) - alpha).abs() < 1e-7);
        }

        #[test]
        fn cdf_symmetry(x in -30.0f64..30.0) {
            prop_assert!((cdf(x) + cdf(-x) - 1.0).abs() < 1e-15);
        }
    }
}
