//! Probability distributions backing the threshold calibration and the
//! Step-2 tests: standard normal, Student t and Fisher F survival
//! functions on top of the regularized incomplete beta.
//!
//! Accuracy budget: the incomplete beta targets 1e-10 relative error for
//! shape parameters up to 1e4, and tail p-values down to 1e-12 must stay
//! representable (Step 2 runs with cutoffs as small as 1e-10), so survival
//! functions are computed directly rather than as `1 - cdf`.

// coefficient tables are kept with their published digits
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

/// Degrees of freedom attached to a test statistic.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Df {
    Student(f64),
    Fisher(f64, f64),
}

/// A two-sample test outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub df: Df,
    pub p_value: f64,
}

// ---------------------------------------------------------------------------
// Error function (rational approximations, three regions)
// ---------------------------------------------------------------------------

const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];
const FRAC_1_SQRT_PI: f64 = 5.6418958354775628695e-1;

fn erf_core(x: f64) -> f64 {
    let z = x * x;
    let mut xnum = ERF_A[4] * z;
    let mut xden = z;
    for i in 0..3 {
        xnum = (xnum + ERF_A[i]) * z;
        xden = (xden + ERF_B[i]) * z;
    }
    x * (xnum + ERF_A[3]) / (xden + ERF_B[3])
}

// exp(-y^2) evaluated as exp(-hi^2)*exp(-(y-hi)(y+hi)) with hi a multiple of
// 1/16, which keeps the argument of the second factor small and the tail
// relatively accurate.
fn exp_msq(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Complementary error function, positive-axis relative accuracy ~1e-15.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        // erf_core carries the sign of x
        return 1.0 - erf_core(x);
    }
    let res = if y <= 4.0 {
        let mut xnum = ERF_C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + ERF_C[i]) * y;
            xden = (xden + ERF_D[i]) * y;
        }
        exp_msq(y) * (xnum + ERF_C[7]) / (xden + ERF_D[7])
    } else if y < 26.65 {
        let z = 1.0 / (y * y);
        let mut xnum = ERF_P[5] * z;
        let mut xden = z;
        for i in 0..4 {
            xnum = (xnum + ERF_P[i]) * z;
            xden = (xden + ERF_Q[i]) * z;
        }
        let r = z * (xnum + ERF_P[4]) / (xden + ERF_Q[4]);
        exp_msq(y) * (FRAC_1_SQRT_PI - r) / y
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - res
    } else {
        res
    }
}

/// Standard normal distribution function.
///
/// Monotone, absolute error well under 1e-12 on finite inputs.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal survival function `1 - cdf(x)`, computed directly so the
/// far tail keeps relative accuracy.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

// ---------------------------------------------------------------------------
// Log-gamma and a cancellation-free log-beta
// ---------------------------------------------------------------------------

const LANCZOS: [f64; 14] = [
    57.1562356658629235,
    -59.5979603554754912,
    14.1360979747417471,
    -0.491913816097620199,
    0.339946499848118887e-4,
    0.465236289270485756e-4,
    -0.983744753048795646e-4,
    0.158088703224912494e-3,
    -0.210264441724104883e-3,
    0.217439618115212643e-3,
    -0.164318106536763890e-3,
    0.844182239838527433e-4,
    -0.261908384015814087e-4,
    0.368991826595316234e-5,
];

/// `ln Gamma(x)` for `x > 0`, full double precision.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut y = x;
    let tmp = x + 5.24218750000000000; // 671/128
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = 0.999999999999997092;
    for c in LANCZOS {
        y += 1.0;
        ser += c / y;
    }
    tmp + (2.5066282746310005 * ser / x).ln()
}

// Stirling remainder phi(z) = ln Gamma(z) - [(z-1/2) ln z - z + ln(2*pi)/2],
// accurate to ~1e-16 absolute for z >= 10.
fn stirling_correction(z: f64) -> f64 {
    debug_assert!(z >= 10.0);
    let r = 1.0 / (z * z);
    // Bernoulli series B_{2n} / (2n (2n-1) z^{2n-1})
    let s = 1.0 / 12.0
        + r * (-1.0 / 360.0
            + r * (1.0 / 1260.0
                + r * (-1.0 / 1680.0
                    + r * (1.0 / 1188.0 + r * (-691.0 / 360360.0 + r * (1.0 / 156.0))))));
    s / z
}

/// `ln B(a, b)` arranged so the huge leading Stirling terms cancel
/// algebraically rather than in floating point; keeps the incomplete-beta
/// prefactor relatively accurate up to shape parameters of 1e4 and beyond.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let sum = a + b;
    if lo >= 10.0 {
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        (lo - 0.5) * (lo / sum).ln() + (hi - 0.5) * (hi / sum).ln() - 0.5 * sum.ln()
            + half_ln_2pi
            + stirling_correction(lo)
            + stirling_correction(hi)
            - stirling_correction(sum)
    } else if hi >= 10.0 {
        // ln Gamma(hi) - ln Gamma(hi + lo), expanded so no large terms collide
        let d = -(hi - 0.5) * (lo / hi).ln_1p() - lo * sum.ln() + lo
            + stirling_correction(hi)
            - stirling_correction(sum);
        ln_gamma(lo) + d
    } else {
        ln_gamma(lo) + ln_gamma(hi) - ln_gamma(sum)
    }
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta
// ---------------------------------------------------------------------------

const BETA_EPS: f64 = 1e-15;
const BETA_MAX_ITER: usize = 1000;

// Continued fraction for the incomplete beta (modified Lentz iteration).
fn beta_cont_frac(a: f64, b: f64, x: f64) -> Result<f64> {
    let fpmin = f64::MIN_POSITIVE / BETA_EPS;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < fpmin {
        d = fpmin;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = 1.0 + aa / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = 1.0 + aa / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= BETA_EPS {
            return Ok(h);
        }
    }
    Err(Error::Domain(format!(
        "incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}"
    )))
}

// ln(x) and ln(1-x) without cancellation on either end of [0,1].
fn ln_x_ln_1mx(x: f64) -> (f64, f64) {
    if x <= 0.5 {
        (x.ln(), (-x).ln_1p())
    } else {
        ((x - 1.0).ln_1p(), (1.0 - x).ln())
    }
}

/// Regularized incomplete beta `I_x(a, b)` for `a, b > 0`, `x` in `[0, 1]`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "incomplete beta needs a, b > 0, got a={a}, b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("incomplete beta needs x in [0,1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let (ln_x, ln_1mx) = ln_x_ln_1mx(x);
    let ln_front = a * ln_x + b * ln_1mx - ln_beta(a, b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cont_frac(a, b, x)? / a)
    } else {
        Ok(1.0 - front * beta_cont_frac(b, a, 1.0 - x)? / b)
    }
}

// ---------------------------------------------------------------------------
// Survival functions and the Welch rule
// ---------------------------------------------------------------------------

/// Student t survival function `P(T > t)` with `df > 0` (fractional degrees
/// of freedom are accepted).
pub fn student_t_sf(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::Domain(format!("student_t_sf needs df > 0, got {df}")));
    }
    if t.is_nan() {
        return Err(Error::Domain("student_t_sf got NaN statistic".into()));
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    let h = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, h)?;
    Ok(if t > 0.0 { tail } else { 1.0 - tail })
}

/// Fisher F survival function `P(F > f)` for `f >= 0`.
pub fn fisher_f_sf(f: f64, df1: f64, df2: f64) -> Result<f64> {
    if !(df1 > 0.0) || !(df2 > 0.0) {
        return Err(Error::Domain(format!(
            "fisher_f_sf needs positive degrees of freedom, got ({df1}, {df2})"
        )));
    }
    if !(f >= 0.0) {
        return Err(Error::Domain(format!("fisher_f_sf needs f >= 0, got {f}")));
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    let x = df2 / (df2 + df1 * f);
    regularized_incomplete_beta(0.5 * df2, 0.5 * df1, x)
}

/// Two-sample location test with unequal dispersions:
/// `T = |m_l - m_r| / sqrt(s2_l/n_l + s2_r/n_r)` referred to a Student law
/// with [`welch_df`] degrees of freedom.
pub fn welch_t_test(
    mean_left: f64,
    s2_left: f64,
    n_left: usize,
    mean_right: f64,
    s2_right: f64,
    n_right: usize,
    two_sided: bool,
) -> Result<TestResult> {
    let se = (s2_left / n_left as f64 + s2_right / n_right as f64).sqrt();
    let statistic = (mean_left - mean_right).abs() / se;
    let df = welch_df(s2_left, s2_right, n_left, n_right)? as f64;
    let tail = student_t_sf(statistic, df)?;
    let p_value = if two_sided { (2.0 * tail).min(1.0) } else { tail.min(1.0) };
    Ok(TestResult {
        statistic,
        df: Df::Student(df),
        p_value,
    })
}

/// Two-sample dispersion test: `F = s2_l / s2_r` with the two-sided p-value
/// `2 * min(SF(F), 1 - SF(F))` capped at 1 (the lower tail goes through the
/// reflection identity so tiny values stay relatively accurate).
pub fn variance_ratio_test(
    s2_left: f64,
    n_left: usize,
    s2_right: f64,
    n_right: usize,
) -> Result<TestResult> {
    if n_left < 2 || n_right < 2 {
        return Err(Error::SegmentTooShort {
            len: n_left.min(n_right),
            min: 2,
        });
    }
    if !(s2_right > 0.0) {
        return Err(Error::DegenerateVariance(
            "right sample variance is zero".into(),
        ));
    }
    let statistic = s2_left / s2_right;
    let (d1, d2) = ((n_left - 1) as f64, (n_right - 1) as f64);
    let upper = fisher_f_sf(statistic, d1, d2)?;
    let lower = if statistic > 0.0 {
        fisher_f_sf(1.0 / statistic, d2, d1)?
    } else {
        0.0
    };
    Ok(TestResult {
        statistic,
        df: Df::Fisher(d1, d2),
        p_value: (2.0 * upper.min(lower)).min(1.0),
    })
}

/// Combined degrees of freedom for a two-sample statistic with unequal
/// dispersions, floored to an integer:
///
/// `floor( (s2l/nl + s2r/nr)^2 / ( (s2l/(nl*sqrt(nl-1)))^2 + (s2r/(nr*sqrt(nr-1)))^2 ) )`
pub fn welch_df(s2_left: f64, s2_right: f64, n_left: usize, n_right: usize) -> Result<u64> {
    if n_left < 2 || n_right < 2 {
        return Err(Error::SegmentTooShort {
            len: n_left.min(n_right),
            min: 2,
        });
    }
    if !(s2_left >= 0.0) || !(s2_right >= 0.0) {
        return Err(Error::Domain("negative variance".into()));
    }
    if s2_left == 0.0 && s2_right == 0.0 {
        return Err(Error::DegenerateVariance(
            "both sample variances are zero".into(),
        ));
    }
    let (nl, nr) = (n_left as f64, n_right as f64);
    let tl = s2_left / nl;
    let tr = s2_right / nr;
    let num = (tl + tr) * (tl + tr);
    let den = tl * tl / (nl - 1.0) + tr * tr / (nr - 1.0);
    Ok((num / den).floor() as u64)
}
