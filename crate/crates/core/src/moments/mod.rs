//! Moments of a complex random row `M`, the real composite covariance of
//! `(Re M, Im M)`, and the safety factors of the supported ambiguity models.
//!
//! Conventions: `gamma[j][k] = E[conj(M_j - mu_j) (M_k - mu_k)]` and
//! `j[j][k] = E[(M_j - mu_j)(M_k - mu_k)]`, so that for a column `z` the
//! scalar `M z` has variance `z^H gamma z` and pseudo-variance `z^T j z`.

mod quantile;
mod sampling;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::complex::{embed_mat, serde_real_mat, unembed_mat, CMat, CVec, C64, STRUCTURE_TOL};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{check_psd, min_eigenvalue, psd_sqrt, symmetrize, PSD_TOL};

pub use quantile::{cdf, quantile, QuantileFamily, STUDENT_T_TOL};
pub use sampling::{sample_gaussian_row, sample_projection, GaussianRowSampler, ProjectionSampler};

/// Mean, covariance and pseudo-covariance of a complex random row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMoments", into = "RawMoments")]
pub struct ComplexMoments {
    mu: CVec,
    gamma: CMat,
    j: CMat,
}

#[derive(Serialize, Deserialize)]
struct RawMoments {
    mu: CVec,
    gamma: CMat,
    j: CMat,
}

impl TryFrom<RawMoments> for ComplexMoments {
    type Error = Error;
    fn try_from(r: RawMoments) -> Result<Self> {
        ComplexMoments::new(r.mu, r.gamma, r.j)
    }
}

impl From<ComplexMoments> for RawMoments {
    fn from(m: ComplexMoments) -> Self {
        RawMoments {
            mu: m.mu,
            gamma: m.gamma,
            j: m.j,
        }
    }
}

fn structure_tol(m: &CMat) -> f64 {
    let scale = (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |k| (i, k)))
        .map(|ix| m[ix].norm())
        .fold(1.0, f64::max);
    STRUCTURE_TOL * scale
}

impl ComplexMoments {
    pub fn new(mu: CVec, gamma: CMat, j: CMat) -> Result<Self> {
        let n = mu.len();
        check_dim(n, gamma.nrows())?;
        check_dim(n, gamma.ncols())?;
        check_dim(n, j.nrows())?;
        check_dim(n, j.ncols())?;
        if !gamma.is_hermitian(structure_tol(&gamma)) {
            return Err(Error::InconsistentMoments("covariance is not Hermitian".into()));
        }
        if !j.is_symmetric(structure_tol(&j)) {
            return Err(Error::InconsistentMoments(
                "pseudo-covariance is not symmetric".into(),
            ));
        }
        // The eigenvalues of the embedding are those of gamma, each twice.
        let lam = min_eigenvalue(&embed_mat(&gamma));
        if lam < -PSD_TOL {
            return Err(Error::InconsistentMoments(format!(
                "covariance has eigenvalue {lam:e}"
            )));
        }
        let m = ComplexMoments { mu, gamma, j };
        let l = m.composite_raw();
        if check_psd(&l).is_err() {
            return Err(Error::InconsistentMoments(format!(
                "composite covariance has eigenvalue {:e}",
                min_eigenvalue(&l)
            )));
        }
        Ok(m)
    }

    /// A deterministic row: zero covariance and pseudo-covariance.
    pub fn deterministic(mu: CVec) -> Self {
        let n = mu.len();
        ComplexMoments {
            mu,
            gamma: CMat::zeros(n, n),
            j: CMat::zeros(n, n),
        }
    }

    /// Proper (circular) moments, `J = 0`.
    pub fn proper(mu: CVec, gamma: CMat) -> Result<Self> {
        let n = mu.len();
        ComplexMoments::new(mu, gamma, CMat::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Moments of `-M`: the mean flips sign, second-order terms are unchanged.
    pub fn negated(&self) -> Self {
        ComplexMoments {
            mu: self.mu.scale(C64::new(-1.0, 0.0)),
            gamma: self.gamma.clone(),
            j: self.j.clone(),
        }
    }

    pub fn mu(&self) -> &CVec {
        &self.mu
    }

    pub fn gamma(&self) -> &CMat {
        &self.gamma
    }

    pub fn j(&self) -> &CMat {
        &self.j
    }

    pub fn is_degenerate(&self) -> bool {
        self.gamma.frobenius_norm() == 0.0 && self.j.frobenius_norm() == 0.0
    }

    fn composite_raw(&self) -> DMatrix<f64> {
        let n = self.dim();
        let s = self.gamma.add(&self.j).expect("validated shape");
        let d = self.j.sub(&self.gamma).expect("validated shape");
        let l = DMatrix::from_fn(2 * n, 2 * n, |a, b| {
            let (i, k) = (a % n, b % n);
            0.5 * match (a < n, b < n) {
                (true, true) => s[(i, k)].re,
                (false, false) => -d[(i, k)].re,
                (true, false) => s[(i, k)].im,
                (false, true) => d[(i, k)].im,
            }
        });
        symmetrize(&l)
    }
}

/// Covariance of the stacked real vector `[Re M; Im M]` (as a column):
/// `[[G_R, G_RI], [G_IR, G_I]]` with `G_R = Re(gamma + j)/2`,
/// `G_I = Re(gamma - j)/2`, `G_RI = Im(gamma + j)/2` and `G_IR = G_RI^T`.
pub fn composite_from_complex(m: &ComplexMoments) -> Result<DMatrix<f64>> {
    let l = m.composite_raw();
    check_psd(&l).map_err(|_| {
        Error::InconsistentMoments(format!(
            "composite covariance has eigenvalue {:e}",
            min_eigenvalue(&l)
        ))
    })?;
    Ok(l)
}

/// Inverse of [`composite_from_complex`]: returns `(gamma, j)`.
pub fn complex_from_composite(l: &DMatrix<f64>) -> Result<(CMat, CMat)> {
    if l.nrows() != l.ncols() {
        return Err(Error::DimensionMismatch {
            expected: l.nrows(),
            found: l.ncols(),
        });
    }
    if l.nrows() % 2 != 0 {
        return Err(Error::OddDimension(l.nrows()));
    }
    let n = l.nrows() / 2;
    let l = symmetrize(l);
    let rr = |i, k| l[(i, k)];
    let ii = |i, k| l[(n + i, n + k)];
    let ri = |i, k| l[(i, n + k)];
    let ir = |i, k| l[(n + i, k)];
    let gamma = CMat::from_fn(n, n, |i, k| C64::new(rr(i, k) + ii(i, k), ri(i, k) - ir(i, k)));
    let j = CMat::from_fn(n, n, |i, k| C64::new(rr(i, k) - ii(i, k), ri(i, k) + ir(i, k)));
    Ok((gamma, j))
}

/// Mean and variance of the real scalar `Re(M z)`.
pub fn projection_moments(m: &ComplexMoments, z: &CVec) -> Result<(f64, f64)> {
    check_dim(m.dim(), z.len())?;
    let mean = m.mu.dotu(z)?.re;
    let gz = m.gamma.mul_vec(z)?;
    let jz = m.j.mul_vec(z)?;
    let quad = z.conj().dotu(&gz)?.re;
    let pseudo = z.dotu(&jz)?.re;
    let var = 0.5 * (quad + pseudo);
    let floor = PSD_TOL * (1.0 + quad.abs());
    if var < -floor {
        return Err(Error::InconsistentMoments(format!(
            "negative projection variance {var:e}"
        )));
    }
    Ok((mean, var.max(0.0)))
}

/// Distributional assumption attached to a chance row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmbiguityModel {
    /// Elliptical law whose standardized projection follows `family`.
    Ces { family: QuantileFamily },
    /// Every law with the given mean and covariance.
    Known,
    /// Given mean, composite covariance bounded above by `l`.
    UnknownCov {
        #[serde(with = "serde_real_mat")]
        l: DMatrix<f64>,
    },
    /// Mean in an ellipsoid of size `zeta`, composite second moment bounded by `l`.
    UnknownMoments {
        zeta: f64,
        #[serde(with = "serde_real_mat")]
        l: DMatrix<f64>,
    },
}

impl AmbiguityModel {
    pub fn gaussian() -> Self {
        AmbiguityModel::Ces {
            family: QuantileFamily::Gaussian,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            AmbiguityModel::Ces { family } => family.validate(),
            AmbiguityModel::Known => Ok(()),
            AmbiguityModel::UnknownCov { l } => check_bound(l, n),
            AmbiguityModel::UnknownMoments { zeta, l } => {
                if !(*zeta >= 0.0 && zeta.is_finite()) {
                    return Err(Error::Invalid(format!("zeta must be >= 0, got {zeta}")));
                }
                check_bound(l, n)
            }
        }
    }

    /// Range of confidence levels the reformulation is valid for.
    pub fn p_range(&self) -> &'static str {
        match self {
            AmbiguityModel::Ces { .. } => "[0.5, 1)",
            _ => "(0, 1)",
        }
    }

    /// Upper bound on the composite covariance for the robust models.
    pub fn covariance_bound(&self) -> Option<&DMatrix<f64>> {
        match self {
            AmbiguityModel::UnknownCov { l } | AmbiguityModel::UnknownMoments { l, .. } => Some(l),
            _ => None,
        }
    }

    pub fn zeta(&self) -> f64 {
        match self {
            AmbiguityModel::UnknownMoments { zeta, .. } => *zeta,
            _ => 0.0,
        }
    }

    /// Law used to sample the projection, if the model fixes one.
    pub fn sampling_family(&self) -> Option<QuantileFamily> {
        match self {
            AmbiguityModel::Ces { family } => Some(*family),
            _ => None,
        }
    }

    /// Replaces the covariance bound of a robust model; other models are unchanged.
    pub fn with_bound(&self, bound: DMatrix<f64>) -> Self {
        match self {
            AmbiguityModel::UnknownCov { .. } => AmbiguityModel::UnknownCov { l: bound },
            AmbiguityModel::UnknownMoments { zeta, .. } => AmbiguityModel::UnknownMoments {
                zeta: *zeta,
                l: bound,
            },
            other => other.clone(),
        }
    }
}

fn check_bound(l: &DMatrix<f64>, n: usize) -> Result<()> {
    check_dim(2 * n, l.nrows())?;
    check_dim(2 * n, l.ncols())?;
    let asym = (l - l.transpose()).amax();
    if asym > STRUCTURE_TOL * l.amax().max(1.0) {
        return Err(Error::Invalid("covariance bound is not symmetric".into()));
    }
    check_psd(l)
}

/// Short CLI spelling of the model kind (the bound matrix is supplied separately).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    Ces(QuantileFamily),
    Known,
    UnknownCov,
    UnknownMoments { zeta: f64 },
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("ces:") {
            return Ok(ModelKind::Ces(rest.parse()?));
        }
        if let Some(rest) = s.strip_prefix("unknown-moments:") {
            let zeta: f64 = rest
                .parse()
                .map_err(|_| Error::Invalid(format!("bad zeta in model '{s}'")))?;
            if !(zeta >= 0.0) {
                return Err(Error::Invalid(format!("zeta must be >= 0, got {zeta}")));
            }
            return Ok(ModelKind::UnknownMoments { zeta });
        }
        match s {
            "known" => Ok(ModelKind::Known),
            "unknown-cov" => Ok(ModelKind::UnknownCov),
            _ => Err(Error::Invalid(format!("unknown model '{s}'"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Ces(fam) => write!(f, "ces:{fam}"),
            ModelKind::Known => write!(f, "known"),
            ModelKind::UnknownCov => write!(f, "unknown-cov"),
            ModelKind::UnknownMoments { zeta } => write!(f, "unknown-moments:{zeta}"),
        }
    }
}

impl ModelKind {
    /// Builds the model; robust kinds take `bound` as their covariance bound.
    pub fn build(&self, bound: impl FnOnce() -> DMatrix<f64>) -> AmbiguityModel {
        match *self {
            ModelKind::Ces(family) => AmbiguityModel::Ces { family },
            ModelKind::Known => AmbiguityModel::Known,
            ModelKind::UnknownCov => AmbiguityModel::UnknownCov { l: bound() },
            ModelKind::UnknownMoments { zeta } => AmbiguityModel::UnknownMoments { zeta, l: bound() },
        }
    }
}

/// Multiplier of the standard-deviation term for level `p`. For the
/// unknown-moments model this is only the covariance factor; the mean
/// ellipsoid contributes a separate `sqrt(zeta)` term.
pub fn safety_factor(model: &AmbiguityModel, p: f64) -> Result<f64> {
    match model {
        AmbiguityModel::Ces { family } => {
            if !(0.5..1.0).contains(&p) {
                return Err(Error::POutOfRange { p, range: "[0.5, 1)" });
            }
            // The quantile at 0.5 is exactly zero for every symmetric family.
            if p == 0.5 {
                family.validate()?;
                return Ok(0.0);
            }
            quantile(*family, p)
        }
        _ => {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::POutOfRange { p, range: "(0, 1)" });
            }
            Ok((p / (1.0 - p)).sqrt())
        }
    }
}

/// Hermitian PSD square root of a Hermitian PSD matrix.
pub fn hermitian_sqrt(g: &CMat) -> Result<CMat> {
    unembed_mat(&psd_sqrt(&embed_mat(g))?)
}
