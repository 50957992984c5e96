//! Standard normal CDF and quantile without a stats dependency.
//!
//! The CDF goes through Cody's rational-approximation erfc (SPECFUN
//! `CALERF`), accurate to about 1 ulp over the full range. The quantile is
//! Acklam's rational initial guess polished with two Halley steps against
//! that CDF, which lands it at full double precision.

use crate::error::{Error, Result};

const SQRPI: f64 = 5.641_895_835_477_562_9e-1;
const THRESH: f64 = 0.46875;
const XBIG: f64 = 26.543;

const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_5e3,
    1.857_777_061_846_031_5e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_1e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_170_6e3,
];
const ERFC_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_376_0e0,
    6.611_919_063_714_163_0e1,
    2.986_351_381_974_001_3e2,
    8.819_522_212_417_691_0e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const ERFC_D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125_0e2,
    5.371_811_018_620_098_6e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_6e3,
    4.362_619_090_143_247_2e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];
const ERFC_P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378_0e-4,
    1.631_538_713_730_209_8e-2,
];
const ERFC_Q: [f64; 5] = [
    2.568_520_192_289_822_4e0,
    1.872_952_849_923_460_5e0,
    5.279_051_029_514_284_1e-1,
    6.051_834_131_244_131_9e-2,
    2.335_204_976_268_691_8e-3,
];

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= THRESH {
        // Small arguments: erfc = 1 - erf with erf from the central rational.
        let ysq = y * y;
        let mut xnum = ERF_A[4] * ysq;
        let mut xden = ysq;
        for i in 0..3 {
            xnum = (xnum + ERF_A[i]) * ysq;
            xden = (xden + ERF_B[i]) * ysq;
        }
        return 1.0 - x * (xnum + ERF_A[3]) / (xden + ERF_B[3]);
    }

    let result = if y <= 4.0 {
        let mut xnum = ERFC_C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + ERFC_C[i]) * y;
            xden = (xden + ERFC_D[i]) * y;
        }
        let ratio = (xnum + ERFC_C[7]) / (xden + ERFC_D[7]);
        scaled_down(y) * ratio
    } else if y < XBIG {
        let ysq = 1.0 / (y * y);
        let mut xnum = ERFC_P[5] * ysq;
        let mut xden = ysq;
        for i in 0..4 {
            xnum = (xnum + ERFC_P[i]) * ysq;
            xden = (xden + ERFC_Q[i]) * ysq;
        }
        let ratio = ysq * (xnum + ERFC_P[4]) / (xden + ERFC_Q[4]);
        scaled_down(y) * ((SQRPI - ratio) / y)
    } else {
        0.0
    };

    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// exp(-y^2) split as exp(-ysq^2) * exp(-(y - ysq)(y + ysq)) with ysq a
/// 1/16-grid truncation of y, which keeps the product accurate when y^2
/// would lose low bits.
fn scaled_down(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// P(Z <= x) for a standard normal Z.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

const ACK_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239e0,
];
const ACK_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACK_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838e0,
    -2.549_732_539_343_734e0,
    4.374_664_141_464_968e0,
    2.938_163_982_698_783e0,
];
const ACK_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996e0,
    3.754_408_661_907_416e0,
];
const ACK_P_LOW: f64 = 0.02425;

fn acklam_initial(p: f64) -> f64 {
    if p < ACK_P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((ACK_C[0] * q + ACK_C[1]) * q + ACK_C[2]) * q + ACK_C[3]) * q + ACK_C[4]) * q
            + ACK_C[5])
            / ((((ACK_D[0] * q + ACK_D[1]) * q + ACK_D[2]) * q + ACK_D[3]) * q + 1.0)
    } else if p <= 1.0 - ACK_P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((ACK_A[0] * r + ACK_A[1]) * r + ACK_A[2]) * r + ACK_A[3]) * r + ACK_A[4]) * r
            + ACK_A[5])
            * q
            / (((((ACK_B[0] * r + ACK_B[1]) * r + ACK_B[2]) * r + ACK_B[3]) * r + ACK_B[4]) * r
                + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((ACK_C[0] * q + ACK_C[1]) * q + ACK_C[2]) * q + ACK_C[3]) * q + ACK_C[4]) * q
            + ACK_C[5])
            / ((((ACK_D[0] * q + ACK_D[1]) * q + ACK_D[2]) * q + ACK_D[3]) * q + 1.0)
    }
}

/// Inverse of `standard_normal_cdf` on (0, 1).
pub fn standard_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::BadProbability(p));
    }
    let mut x = acklam_initial(p);
    for _ in 0..2 {
        let e = standard_normal_cdf(x) - p;
        let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
        if !u.is_finite() {
            break;
        }
        x -= u / (1.0 + x * u / 2.0);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::ContinuousCDF;

    #[test]
    fn erfc_matches_reference_points() {
        assert_eq!(erfc(0.0), 1.0);
        // erfc(1) to 17 digits.
        assert!((erfc(1.0) - 0.157_299_207_050_285_13).abs() < 1e-16);
        assert!((erfc(-1.0) - (2.0 - 0.157_299_207_050_285_13)).abs() < 1e-15);
        // Far tails saturate cleanly.
        assert_eq!(erfc(27.0), 0.0);
        assert_eq!(erfc(-27.0), 2.0);
        assert!(erfc(5.0) > 0.0 && erfc(5.0) < 2e-12);
    }

    #[test]
    fn cdf_hits_high_precision_anchors() {
        // 40-digit evaluations of erfc(-x / sqrt 2) / 2, rounded to f64.
        let anchors = [
            (-6.0, 9.865_876_450_376_98e-10),
            (-4.1875, 1.410_220_105_016_680_2e-5),
            (-2.0, 0.022_750_131_948_179_21),
            (-1.0, 0.158_655_253_931_457_05),
            (0.5, 0.691_462_461_274_013_1),
            (1.96, 0.975_002_104_851_779_5),
            (3.0, 0.998_650_101_968_369_9),
            (7.0, 0.999_999_999_998_720_1),
        ];
        for (x, want) in anchors {
            let got = standard_normal_cdf(x);
            // Rounding x / sqrt 2 once is unavoidable, and the lower tail
            // magnifies that relative error by about x^2.
            let tol = (8.0 + x * x) * f64::EPSILON * want;
            assert!((got - want).abs() <= tol, "x={x}: got {got:e}, want {want:e}");
        }
    }

    #[test]
    fn cdf_matches_statrs_across_the_real_line() {
        // statrs carries a few 1e-10 relative error in the far tails, so the
        // comparison tolerance covers its error, not ours.
        let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        let mut x = -8.0;
        while x <= 8.0 {
            let got = standard_normal_cdf(x);
            let want = normal.cdf(x);
            let tol = 1e-16 + want.abs() * 1e-9;
            assert!((got - want).abs() <= tol, "x={x}: got {got}, want {want}");
            x += 0.0625;
        }
    }

    #[test]
    fn quantile_matches_statrs_on_a_dense_grid() {
        let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        let mut worst = 0.0f64;
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let got = standard_normal_quantile(p).unwrap();
            let want = normal.inverse_cdf(p);
            worst = worst.max((got - want).abs());
        }
        for &p in &[1e-10, 1e-8, 1e-5, 1e-3, 1.0 - 1e-3, 1.0 - 1e-5, 1.0 - 1e-8] {
            let got = standard_normal_quantile(p).unwrap();
            let want = normal.inverse_cdf(p);
            worst = worst.max((got - want).abs());
        }
        assert!(worst <= 1e-9, "worst absolute gap {worst}");
    }

    #[test]
    fn quantile_hits_the_classic_critical_values() {
        let z975 = standard_normal_quantile(0.975).unwrap();
        assert!((z975 - 1.959_963_984_540_054).abs() < 1e-12, "z975={z975}");
        let z95 = standard_normal_quantile(0.95).unwrap();
        assert!((z95 - 1.644_853_626_951_472_2).abs() < 1e-12, "z95={z95}");
        let z50 = standard_normal_quantile(0.5).unwrap();
        assert!(z50.abs() < 1e-15);
    }

    #[test]
    fn quantile_inverts_the_cdf() {
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let x = standard_normal_quantile(p).unwrap();
            assert!((standard_normal_cdf(x) - p).abs() < 1e-14, "p={p}");
            let x_sym = standard_normal_quantile(1.0 - p).unwrap();
            assert!((x + x_sym).abs() < 1e-12, "asymmetry at p={p}");
        }
    }

    #[test]
    fn quantile_rejects_probabilities_outside_the_open_interval() {
        for bad in [0.0, 1.0, -0.25, 1.5, f64::NAN] {
            assert!(matches!(
                standard_normal_quantile(bad),
                Err(Error::BadProbability(_))
            ));
        }
    }
}
