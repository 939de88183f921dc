//! Deterministic second-order cone forms of chance constraints
//! `P[Re(M z) <= m] >= p` over the embedded variable `x = [Re z; Im z]`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::complex::{embed_mat, embed_vec, CMat, CVec, C64};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{check_psd, flip_imag_blocks, min_eigenvalue, symmetrize, PSD_TOL};
use crate::moments::{
    complex_from_composite, composite_from_complex, hermitian_sqrt, safety_factor, AmbiguityModel,
    ComplexMoments,
};

/// Real PSD matrix `K` with `x^T K x = (z^H G z + Re(z^T J z)) / 2` for `x = [Re z; Im z]`.
pub fn k_matrix(m: &ComplexMoments) -> Result<DMatrix<f64>> {
    Ok(flip_imag_blocks(&composite_from_complex(m)?))
}

/// The same quadratic form built from a composite covariance (or bound) `l`.
pub fn k_from_composite(l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if l.nrows() % 2 != 0 {
        return Err(Error::OddDimension(l.nrows()));
    }
    Ok(flip_imag_blocks(l))
}

/// Returns `Q` with `Q^T Q = K`. Cholesky first, eigen-decomposition
/// `Q = sqrt(Lambda) U^T` when `K` is singular.
pub fn factor_psd(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if k.nrows() != k.ncols() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            found: k.ncols(),
        });
    }
    let k = symmetrize(k);
    check_psd(&k)?;
    let tol = 1e-8 * (1.0 + k.norm());
    if let Some(ch) = Cholesky::new(k.clone()) {
        let q = ch.l().transpose();
        if (q.transpose() * &q - &k).norm() <= tol {
            return Ok(q);
        }
    }
    let eig = SymmetricEigen::new(k.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// `Qhat1 = Q1 + Q4 + i(Q3 - Q2)` and `Qhat2 = Q1 - Q4 + i(Q3 + Q2)` for the
/// block split `Q = [[Q1, Q2], [Q3, Q4]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    pub qhat1: CMat,
    pub qhat2: CMat,
}

impl CouplingMatrices {
    /// `(Qhat1^H lam + Qhat2^T conj(lam)) / 2`, the complex form of `Q^T [Re lam; Im lam]`.
    pub fn apply(&self, lam: &CVec) -> Result<CVec> {
        let a = self.qhat1.adjoint().mul_vec(lam)?;
        let b = self.qhat2.transpose().mul_vec(&lam.conj())?;
        Ok(a.add(&b)?.scale(C64::new(0.5, 0.0)))
    }

    /// `Re(lam^H Qhat1 u + lam^H Qhat2 conj(u)) / 2`, equal to `lam_e^T Q u_e`.
    pub fn pairing(&self, lam: &CVec, u: &CVec) -> Result<f64> {
        let a = lam.conj().dotu(&self.qhat1.mul_vec(u)?)?;
        let b = lam.conj().dotu(&self.qhat2.mul_vec(&u.conj())?)?;
        Ok(0.5 * (a + b).re)
    }
}

pub fn coupling_from_factor(q: &DMatrix<f64>) -> Result<CouplingMatrices> {
    if q.nrows() != q.ncols() {
        return Err(Error::DimensionMismatch {
            expected: q.nrows(),
            found: q.ncols(),
        });
    }
    if q.nrows() % 2 != 0 {
        return Err(Error::OddDimension(q.nrows()));
    }
    let n = q.nrows() / 2;
    let b = |r: usize, c: usize, i: usize, j: usize| q[(r * n + i, c * n + j)];
    let qhat1 = CMat::from_fn(n, n, |i, j| {
        C64::new(b(0, 0, i, j) + b(1, 1, i, j), b(1, 0, i, j) - b(0, 1, i, j))
    });
    let qhat2 = CMat::from_fn(n, n, |i, j| {
        C64::new(b(0, 0, i, j) - b(1, 1, i, j), b(1, 0, i, j) + b(0, 1, i, j))
    });
    Ok(CouplingMatrices { qhat1, qhat2 })
}

/// One individual chance constraint `P[Re(M z) <= rhs] >= p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChanceRow {
    pub moments: ComplexMoments,
    pub model: AmbiguityModel,
    pub rhs: f64,
    pub p: f64,
}

impl ChanceRow {
    pub fn new(moments: ComplexMoments, model: AmbiguityModel, rhs: f64, p: f64) -> Result<Self> {
        let row = ChanceRow {
            moments,
            model,
            rhs,
            p,
        };
        row.validate()?;
        Ok(row)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.moments.dim();
        self.model.validate(n)?;
        if !self.rhs.is_finite() {
            return Err(Error::Invalid(format!("non-finite right-hand side {}", self.rhs)));
        }
        safety_factor(&self.model, self.p)?;
        if let Some(l) = self.model.covariance_bound() {
            let gap = l - composite_from_complex(&self.moments)?;
            let lam = min_eigenvalue(&gap);
            if lam < -PSD_TOL * l.amax().max(1.0) {
                return Err(Error::InconsistentMoments(format!(
                    "nominal covariance exceeds the bound (eigenvalue {lam:e})"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.moments.dim()
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        ChanceRow::new(self.moments.clone(), self.model.clone(), self.rhs, p)
    }
}

/// `||F x + g|| <= h^T x + c` over `x = [Re z; Im z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocData {
    pub f: DMatrix<f64>,
    pub g: DVector<f64>,
    pub h: DVector<f64>,
    pub c: f64,
}

impl SocData {
    /// `h^T x + c - ||F x + g||`, non-negative when the cone constraint holds.
    pub fn slack(&self, x: &DVector<f64>) -> f64 {
        self.h.dot(x) + self.c - (&self.f * x + &self.g).norm()
    }
}

/// Origin of a norm term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    /// `k_p ||Q x||`, the spread of the projection.
    Spread,
    /// `sqrt(zeta) ||G^(1/2) z||`, the mean-uncertainty ellipsoid.
    MeanEllipsoid,
}

/// A norm term `coef * ||factor x||`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormTerm {
    pub kind: TermKind,
    pub coef: f64,
    pub factor: DMatrix<f64>,
}

/// `a^T x + sum_i coef_i ||F_i x|| <= rhs`, the deterministic equivalent of a chance row.
/// With no norm terms it is a plain linear inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicConstraint {
    pub a: DVector<f64>,
    pub rhs: f64,
    pub terms: Vec<NormTerm>,
}

impl DeterministicConstraint {
    pub fn is_linear(&self) -> bool {
        self.terms.is_empty()
    }

    /// `rhs - a^T x - sum coef ||F x||`.
    pub fn slack_embedded(&self, x: &DVector<f64>) -> f64 {
        let spread: f64 = self
            .terms
            .iter()
            .map(|t| t.coef * (&t.factor * x).norm())
            .sum();
        self.rhs - self.a.dot(x) - spread
    }

    pub fn slack(&self, z: &CVec) -> Result<f64> {
        check_dim(self.a.len(), 2 * z.len())?;
        Ok(self.slack_embedded(&embed_vec(z)))
    }

    /// Cone data. A single norm term gives the complete constraint; with two
    /// terms each entry is `||coef_i F_i x|| <= t_i` (`h = 0`, `c = 0`) and the
    /// budgets `t_i` are shared through `a^T x + t_1 + t_2 <= rhs`.
    pub fn soc_data(&self) -> Vec<SocData> {
        let dim = self.a.len();
        match self.terms.as_slice() {
            [] => Vec::new(),
            [t] => vec![SocData {
                f: &t.factor * t.coef,
                g: DVector::zeros(t.factor.nrows()),
                h: -&self.a,
                c: self.rhs,
            }],
            terms => terms
                .iter()
                .map(|t| SocData {
                    f: &t.factor * t.coef,
                    g: DVector::zeros(t.factor.nrows()),
                    h: DVector::zeros(dim),
                    c: 0.0,
                })
                .collect(),
        }
    }
}

/// `a` with `a^T [Re z; Im z] = Re(mu z)`.
pub fn mean_vector(mu: &CVec) -> DVector<f64> {
    let n = mu.len();
    let e = embed_vec(mu);
    DVector::from_fn(2 * n, |i, _| if i < n { e[i] } else { -e[i] })
}

/// Embedded factor `F` with `||F x|| = ||G^(1/2) z||` for the Hermitian `G`
/// implied by a composite matrix.
pub fn mean_ellipsoid_factor(l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (g, _) = complex_from_composite(l)?;
    Ok(embed_mat(&hermitian_sqrt(&g)?))
}

fn is_zero(m: &DMatrix<f64>) -> bool {
    m.iter().all(|&v| v == 0.0)
}

pub fn deterministic_constraint(row: &ChanceRow) -> Result<DeterministicConstraint> {
    row.validate()?;
    let k = safety_factor(&row.model, row.p)?;
    let kmat = match row.model.covariance_bound() {
        Some(l) => k_from_composite(l)?,
        None => k_matrix(&row.moments)?,
    };
    let q = factor_psd(&kmat)?;
    let mut terms = Vec::new();
    if k > 0.0 && !is_zero(&q) {
        terms.push(NormTerm {
            kind: TermKind::Spread,
            coef: k,
            factor: q,
        });
    }
    if let AmbiguityModel::UnknownMoments { zeta, l } = &row.model {
        let f = mean_ellipsoid_factor(l)?;
        if *zeta > 0.0 && !is_zero(&f) {
            terms.push(NormTerm {
                kind: TermKind::MeanEllipsoid,
                coef: zeta.sqrt(),
                factor: f,
            });
        }
    }
    Ok(DeterministicConstraint {
        a: mean_vector(row.moments.mu()),
        rhs: row.rhs,
        terms,
    })
}

/// Checks `Q^T Q = K` to the factorization tolerance.
pub fn factor_residual(k: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (q.transpose() * q - k).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::QuantileFamily;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar(mu: C64, gamma: f64, j: f64) -> ComplexMoments {
        ComplexMoments::new(
            CVec(vec![mu]),
            CMat::from_rows(vec![vec![c(gamma, 0.0)]]).unwrap(),
            CMat::from_rows(vec![vec![c(j, 0.0)]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn k_matrix_scalar_cases() {
        assert_eq!(
            k_matrix(&scalar(c(0.0, 0.0), 2.0, 0.0)).unwrap(),
            DMatrix::identity(2, 2)
        );
        assert_eq!(
            k_matrix(&scalar(c(0.0, 0.0), 2.0, 2.0)).unwrap(),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])
        );
    }

    #[test]
    fn factor_edge_cases() {
        let i = DMatrix::<f64>::identity(4, 4);
        let q = factor_psd(&i).unwrap();
        assert!(factor_residual(&i, &q) < 1e-14);
        let z = DMatrix::<f64>::zeros(4, 4);
        assert!(is_zero(&factor_psd(&z).unwrap()));
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(factor_psd(&bad), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn coupling_edge_cases() {
        let cm = coupling_from_factor(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(cm.qhat1, CMat::identity(2).scale(c(2.0, 0.0)));
        assert_eq!(cm.qhat2, CMat::zeros(2, 2));
        let cm = coupling_from_factor(&DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(cm.qhat1, CMat::zeros(2, 2));
        assert!(matches!(
            coupling_from_factor(&DMatrix::zeros(3, 3)),
            Err(Error::OddDimension(3))
        ));
    }

    #[test]
    fn gaussian_scalar_row() {
        let row = ChanceRow::new(scalar(c(0.0, 0.0), 2.0, 0.0), AmbiguityModel::gaussian(), 1.0, 0.95)
            .unwrap();
        let dc = deterministic_constraint(&row).unwrap();
        assert_eq!(dc.terms.len(), 1);
        for z in [c(1.0, 0.0), c(0.3, -0.4), c(0.0, 2.0)] {
            let zz = CVec(vec![z]);
            let slack = dc.slack(&zz).unwrap();
            let expect = 1.0 - 1.6448536269514722 * z.norm();
            assert!((slack - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_row_is_linear() {
        let m = ComplexMoments::deterministic(CVec(vec![c(2.0, 0.0), c(-1.0, 0.0)]));
        let row = ChanceRow::new(m, AmbiguityModel::Known, 0.5, 0.9).unwrap();
        let dc = deterministic_constraint(&row).unwrap();
        assert!(dc.is_linear());
        assert!(dc.soc_data().is_empty());
        let z = CVec(vec![c(0.5, 0.1), c(0.5, -0.1)]);
        assert!((dc.slack(&z).unwrap() - (0.5 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn unknown_moments_proper_scalar() {
        let zeta = 0.3;
        let p = 0.8;
        let m = scalar(c(0.0, 0.0), 2.0, 0.0);
        let l = composite_from_complex(&m).unwrap();
        let row = ChanceRow::new(m, AmbiguityModel::UnknownMoments { zeta, l }, 1.0, p).unwrap();
        let dc = deterministic_constraint(&row).unwrap();
        assert_eq!(dc.terms.len(), 2);
        assert_eq!(dc.soc_data().len(), 2);
        let z = CVec(vec![c(0.2, 0.7)]);
        let coef = (p / (2.0 * (1.0 - p))).sqrt() + zeta.sqrt();
        let expect = 1.0 - coef * (2.0f64).sqrt() * z.norm();
        assert!((dc.slack(&z).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn bound_below_nominal_rejected() {
        let m = scalar(c(0.0, 0.0), 2.0, 0.0);
        let l = DMatrix::identity(2, 2) * 0.5;
        let r = ChanceRow::new(m, AmbiguityModel::UnknownCov { l }, 1.0, 0.9);
        assert!(matches!(r, Err(Error::InconsistentMoments(_))));
    }

    #[test]
    fn ces_range_enforced() {
        let m = scalar(c(0.0, 0.0), 1.0, 0.0);
        let fam = AmbiguityModel::Ces {
            family: QuantileFamily::Logistic,
        };
        assert!(matches!(
            ChanceRow::new(m.clone(), fam, 1.0, 0.4),
            Err(Error::POutOfRange { .. })
        ));
        assert!(ChanceRow::new(m, AmbiguityModel::Known, 1.0, 0.4).is_ok());
    }
}
