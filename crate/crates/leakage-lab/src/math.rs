//! Scalar numerics shared by every metric: the Gaussian tail function,
//! log-domain helpers, and adaptive Gauss-Kronrod quadrature.

use crate::error::Error;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_286_95;
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_502_4;

// Rational Chebyshev coefficients for erf/erfc (W. J. Cody, Math. Comp. 23, 1969).
// Relative accuracy is below 1e-16 in all three regimes.
const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_21e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];
const ERFC_C: [f64; 9] = [
    5.641_884_969_886_700_89e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const ERFC_D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];
const ERFC_P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const ERFC_Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];

fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// `exp(x^2) * erfc(x)` for `x >= 0`; stays finite for arbitrarily large `x`.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 0.46875 {
        return (x * x).exp() * (1.0 - erf_small(x));
    }
    if x <= 4.0 {
        let mut num = ERFC_C[8] * x;
        let mut den = x;
        for i in 0..7 {
            num = (num + ERFC_C[i]) * x;
            den = (den + ERFC_D[i]) * x;
        }
        (num + ERFC_C[7]) / (den + ERFC_D[7])
    } else {
        let z = 1.0 / (x * x);
        let mut num = ERFC_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERFC_P[i]) * z;
            den = (den + ERFC_Q[i]) * z;
        }
        let r = z * (num + ERFC_P[4]) / (den + ERFC_Q[4]);
        (FRAC_1_SQRT_PI - r) / x
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let res = if y < 0.46875 {
        1.0 - erf_small(y)
    } else {
        // Split the exponent so exp(-y^2) loses no accuracy to argument rounding.
        let ysq = (y * 16.0).trunc() / 16.0;
        let del = (y - ysq) * (y + ysq);
        (-ysq * ysq).exp() * (-del).exp() * erfcx(y)
    };
    if x < 0.0 {
        2.0 - res
    } else {
        res
    }
}

/// Standard normal tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> Result<f64, Error> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("q_function: non-finite input {x}")));
    }
    Ok(0.5 * erfc(x / std::f64::consts::SQRT_2))
}

/// `Q(x)` without the domain check, for internal hot paths. Infinite
/// arguments arise from degenerate priors and take their limit values.
pub(crate) fn q(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 1.0;
    }
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `ln Q(x)`, accurate far into the tail where `Q` itself underflows.
pub fn ln_q(x: f64) -> f64 {
    if x <= 0.0 {
        q(x).ln()
    } else {
        -0.5 * x * x - std::f64::consts::LN_2 + erfcx(x / std::f64::consts::SQRT_2).ln()
    }
}

/// `ln Phi(x)` where `Phi` is the standard normal CDF.
pub fn ln_phi(x: f64) -> f64 {
    ln_q(-x)
}

/// Log-density of `N(mu, sigma^2)` at `x`.
pub fn normal_logpdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let t = (x - mu) / sigma;
    -0.5 * t * t - sigma.ln() - SQRT_2PI.ln()
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln sum_i exp(v_i)` without overflow; `-inf` for an empty slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|&v| (v - m).exp()).sum();
    m + s.ln()
}

// 15-point Kronrod extension of the 7-point Gauss rule (positive half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_96,
    0.063_092_092_629_978_553_29,
    0.104_790_010_322_250_183_8,
    0.140_653_259_715_525_918_7,
    0.169_004_726_639_267_902_8,
    0.190_350_578_064_785_409_9,
    0.204_432_940_075_298_892_4,
    0.209_482_141_084_727_828_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_3,
    0.279_705_391_489_276_667_9,
    0.381_830_050_505_118_944_9,
    0.417_959_183_673_469_387_8,
];

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut values = [0.0; 15];
    values[14] = fc;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let lo = f(center - dx);
        let hi = f(center + dx);
        values[2 * j] = lo;
        values[2 * j + 1] = hi;
        kronrod += WGK[j] * (lo + hi);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let value = kronrod * half;
    // conservative estimate: scale |K - G| by the integrand's deviation mass,
    // which keeps kinked integrands from terminating early
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((values[2 * j] - mean).abs() + (values[2 * j + 1] - mean).abs());
    }
    resasc *= half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / resasc).powf(1.5);
        err = if scale < 1.0 { resasc * scale } else { resasc };
    }
    (value, err)
}

/// Result of an adaptive quadrature run.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
}

/// Acceptance needs the children's own estimates below tolerance AND the
/// parent panel to agree with their sum. A kink can make one rule pair
/// coincidentally self-consistent; it will not fool parent and both
/// children at once.
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: (f64, f64),
    tol: f64,
    depth: u32,
    out: &mut QuadResult,
) {
    let mid = 0.5 * (a + b);
    let left = kronrod_panel(f, a, mid);
    let right = kronrod_panel(f, mid, b);
    let children = left.0 + right.0;
    let delta = (children - whole.0).abs();
    let err = (left.1 + right.1).max(delta);
    if depth >= 60 || (left.1 + right.1 <= tol && delta <= tol) {
        out.value += children;
        out.abs_error += err;
        return;
    }
    adapt(f, a, mid, left, 0.5 * tol, depth + 1, out);
    adapt(f, mid, b, right, 0.5 * tol, depth + 1, out);
}

/// Integrate `f` over `[a, b]` by adaptive Gauss-Kronrod bisection until the
/// accumulated error estimate is below `abs_tol`. The interval starts from
/// sixteen panels so narrow features away from the endpoints still get
/// sampled before the error test runs.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> QuadResult {
    let mut out = QuadResult {
        value: 0.0,
        abs_error: 0.0,
    };
    if a == b {
        return out;
    }
    const PANELS: usize = 16;
    let width = (b - a) / PANELS as f64;
    for i in 0..PANELS {
        let lo = a + i as f64 * width;
        let hi = if i == PANELS - 1 { b } else { lo + width };
        let whole = kronrod_panel(&f, lo, hi);
        adapt(&f, lo, hi, whole, abs_tol / PANELS as f64, 0, &mut out);
    }
    out
}
