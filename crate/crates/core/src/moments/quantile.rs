//! Standard univariate laws used for the projection `Re(M z)`.
//!
//! All families are symmetric about zero and taken in their textbook
//! standard form: unit-variance Gaussian, Laplace with unit scale, logistic
//! with unit scale, Cauchy with unit scale and Student's t with `nu` degrees
//! of freedom.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serialized as `gaussian`, `laplace`, `logistic`, `cauchy` or `t:<nu>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum QuantileFamily {
    Gaussian,
    Laplace,
    Logistic,
    Cauchy,
    StudentT { nu: f64 },
}

impl QuantileFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QuantileFamily::StudentT { nu } if !(nu > 0.0 && nu.is_finite()) => Err(
                Error::InvalidFamily(format!("Student-t degrees of freedom must be > 0, got {nu}")),
            ),
            _ => Ok(()),
        }
    }

}

impl fmt::Display for QuantileFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantileFamily::Gaussian => write!(f, "gaussian"),
            QuantileFamily::Laplace => write!(f, "laplace"),
            QuantileFamily::Logistic => write!(f, "logistic"),
            QuantileFamily::Cauchy => write!(f, "cauchy"),
            QuantileFamily::StudentT { nu } => write!(f, "t:{nu}"),
        }
    }
}

impl FromStr for QuantileFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let fam = match s.trim() {
            "gaussian" => QuantileFamily::Gaussian,
            "laplace" => QuantileFamily::Laplace,
            "logistic" => QuantileFamily::Logistic,
            "cauchy" => QuantileFamily::Cauchy,
            other => {
                let nu = other
                    .strip_prefix("t:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidFamily(format!("unknown family '{other}'")))?;
                QuantileFamily::StudentT { nu }
            }
        };
        fam.validate()?;
        Ok(fam)
    }
}

impl TryFrom<String> for QuantileFamily {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<QuantileFamily> for String {
    fn from(f: QuantileFamily) -> String {
        f.to_string()
    }
}

/// Absolute tolerance of the Student-t quantile bisection.
pub const STUDENT_T_TOL: f64 = 1e-8;

/// Quantile of the standard law, `0 < p < 1`.
pub fn quantile(family: QuantileFamily, p: f64) -> Result<f64> {
    family.validate()?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::POutOfRange { p, range: "(0, 1)" });
    }
    Ok(match family {
        QuantileFamily::Gaussian => normal_quantile(p),
        QuantileFamily::Laplace => {
            if p < 0.5 {
                (2.0 * p).ln()
            } else {
                -(2.0 * (1.0 - p)).ln()
            }
        }
        QuantileFamily::Logistic => (p / (1.0 - p)).ln(),
        QuantileFamily::Cauchy => (PI * (p - 0.5)).tan(),
        QuantileFamily::StudentT { nu } => student_t_quantile(nu, p),
    })
}

/// Cumulative distribution function of the standard law.
pub fn cdf(family: QuantileFamily, x: f64) -> Result<f64> {
    family.validate()?;
    Ok(match family {
        QuantileFamily::Gaussian => 0.5 * libm::erfc(-x / SQRT_2),
        QuantileFamily::Laplace => {
            if x < 0.0 {
                0.5 * x.exp()
            } else {
                1.0 - 0.5 * (-x).exp()
            }
        }
        QuantileFamily::Logistic => {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        }
        QuantileFamily::Cauchy => 0.5 + x.atan() / PI,
        QuantileFamily::StudentT { nu } => student_t_cdf(nu, x),
    })
}

// Acklam's rational approximation followed by one Halley step on erfc.
// The lower half is evaluated directly; `1 - p` is exact for `p >= 0.5`.
fn normal_quantile(p: f64) -> f64 {
    if p > 0.5 {
        return -normal_quantile(1.0 - p);
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
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
    };

    let e = 0.5 * libm::erfc(-x / SQRT_2) - p;
    let u = e * (2.0 * PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

// With x = sqrt(nu) tan(t) the t density becomes proportional to cos(t)^(nu-1)
// on (-pi/2, pi/2), so F(x) = 1/2 + I(atan(x/sqrt nu)) / (2 I(pi/2)) with
// I(a) = int_0^a cos(t)^(nu-1) dt.
fn student_t_cdf(nu: f64, x: f64) -> f64 {
    let theta = (x / nu.sqrt()).atan();
    let total = cos_power_integral(nu, FRAC_PI_2);
    let part = cos_power_integral(nu, theta.abs());
    let tail = (0.5 * part / total).min(0.5);
    if x >= 0.0 {
        0.5 + tail
    } else {
        0.5 - tail
    }
}

fn student_t_quantile(nu: f64, p: f64) -> f64 {
    if p < 0.5 {
        return -student_t_quantile(nu, 1.0 - p);
    }
    if p == 0.5 {
        return 0.0;
    }
    // Target fraction of the half-line mass, searched over the angle.
    let total = cos_power_integral(nu, FRAC_PI_2);
    let target = (2.0 * p - 1.0) * total;
    let (mut lo, mut hi) = (0.0_f64, FRAC_PI_2);
    let to_x = |t: f64| nu.sqrt() * t.tan();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cos_power_integral(nu, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        let (xl, xh) = (to_x(lo), to_x(hi));
        if xh - xl <= STUDENT_T_TOL * xh.abs().max(1.0) {
            break;
        }
    }
    to_x(0.5 * (lo + hi))
}

/// `int_0^a cos(t)^(nu-1) dt` for `0 <= a <= pi/2` by tanh-sinh quadrature.
/// The integrand is evaluated through `sin(pi/2 - t)` so that the endpoint
/// singularity at `pi/2` for `nu < 1` is resolved.
fn cos_power_integral(nu: f64, a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let half = 0.5 * a;
    let gap = FRAC_PI_2 - a;
    let f = |dist_to_upper: f64| {
        // t = a - dist_to_upper, so pi/2 - t = gap + dist_to_upper.
        (gap + dist_to_upper).sin().powf(nu - 1.0)
    };
    let h = 1.0 / 64.0;
    let mut sum = 0.0;
    let mut k: i64 = -(6.0 / h) as i64;
    let kmax = -k;
    while k <= kmax {
        let tau = k as f64 * h;
        let s = FRAC_PI_2 * tau.sinh();
        let cosh_s = s.cosh();
        // 1 - tanh(s) and 1 + tanh(s), computed without cancellation.
        let one_minus = 2.0 / (1.0 + (2.0 * s).exp());
        let one_plus = 2.0 / (1.0 + (-2.0 * s).exp());
        let w = FRAC_PI_2 * tau.cosh() / (cosh_s * cosh_s);
        if w < 1e-300 || one_minus <= 0.0 || one_plus <= 0.0 {
            k += 1;
            continue;
        }
        let dist_to_upper = half * one_minus;
        let v = f(dist_to_upper);
        if v.is_finite() {
            sum += w * v;
        }
        k += 1;
    }
    sum * half * h
}
