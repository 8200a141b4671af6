// The quantile coefficients below are the published values; they carry
// more digits than f64 keeps.
#![allow(clippy::excessive_precision)]

//! Small numeric toolbox: Gaussian tail functions, the inverse normal CDF,
//! log-sum-exp, and a least-squares slope fit.
//!
//! The tail functions work in the log domain far beyond where `Q(x)`
//! underflows, which the bound comparisons at large horizons rely on.

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;

/// Upper tail `Q(x) = P(Z > x)` of the standard normal distribution.
pub fn q_fn(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

/// `ln Q(x)`, stable for arbitrarily large `x`.
///
/// Below `x = 36` this is the logarithm of the `erfc` form; beyond that the
/// Mills-ratio asymptotic series takes over (relative error below 1e-12 at
/// the crossover).
pub fn ln_q(x: f64) -> f64 {
    if x < 0.0 {
        // ln(1 - Q(-x)); Q(-x) <= 1/2 here so the log1p path is accurate.
        return libm::log1p(-q_fn(-x));
    }
    if x < 36.0 {
        libm::log(q_fn(x))
    } else {
        let inv2 = 1.0 / (x * x);
        let series = -inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
        -0.5 * x * x - libm::log(x) - LN_SQRT_2PI + libm::log1p(series)
    }
}

/// Inverse of the standard normal CDF (Wichura's AS 241, double precision).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must lie in (0,1)");
    let q = p - 0.5;
    if libm::fabs(q) <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&PPND_A, r) / poly(&PPND_B, r);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = libm::sqrt(-libm::log(r));
    let val = if r <= 5.0 {
        r -= 1.6;
        poly(&PPND_C, r) / poly(&PPND_D, r)
    } else {
        r -= 5.0;
        poly(&PPND_E, r) / poly(&PPND_F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Upper-tail quantile `Q^{-1}(eps)`.
pub fn q_inv(eps: f64) -> f64 {
    -normal_quantile(eps)
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    let mut acc = coeffs[7];
    for c in coeffs[..7].iter().rev() {
        acc = acc * x + c;
    }
    acc
}

const PPND_A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const PPND_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const PPND_C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const PPND_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const PPND_E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const PPND_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

/// Maximizes a concave function on `[lo, hi]` by derivative-free ternary
/// search until the bracket is narrower than `tol`; returns `(x, f(x))`.
///
/// Points where `f` is `-inf` (diverging moment integrals) act as hard
/// walls and shrink the bracket from that side.
pub fn maximize_concave(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let mut lo = lo;
    let mut hi = hi;
    while hi - lo > tol {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// `ln(sum_i exp(x_i))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| libm::exp(x - max)).sum();
    max + libm::log(sum)
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination of the fit.
    pub r_squared: f64,
    /// Standard error of the slope estimate.
    pub stderr: f64,
}

/// Fits `y = a + b x` by least squares; needs at least three points.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let m = xs.len();
    if m < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: m });
    }
    let mf = m as f64;
    let x_bar = xs.iter().sum::<f64>() / mf;
    let y_bar = ys.iter().sum::<f64>() / mf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - x_bar) * (x - x_bar);
        sxy += (x - x_bar) * (y - y_bar);
        syy += (y - y_bar) * (y - y_bar);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("degenerate abscissa in slope fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let sse = (syy - slope * sxy).max(0.0);
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let stderr = libm::sqrt(sse / (mf - 2.0) / sxx);
    Ok(SlopeFit { slope, intercept, r_squared, stderr })
}
