//! Dense complex vectors and matrices, and the real embeddings that carry
//! every complex constraint into a real conic program.
//!
//! `embed_vec` maps `a` to `[Re a; Im a]` and `embed_mat` maps `A` to the block
//! matrix `[[Re A, -Im A], [Im A, Re A]]`. Both are injective and compatible
//! with sums, real scaling, products and (conjugate) transposition, so that
//! `embed_vec(A a) = embed_mat(A) embed_vec(a)` and
//! `Re(a^H b) = embed_vec(a) . embed_vec(b)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};

pub type C64 = Complex64;

/// Default absolute tolerance for algebraic identities.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Tolerance used by the Hermitian / symmetric structure checks.
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Serialize, Deserialize)]
struct ComplexRepr {
    re: f64,
    im: f64,
}

impl From<C64> for ComplexRepr {
    fn from(c: C64) -> Self {
        ComplexRepr { re: c.re, im: c.im }
    }
}

/// Serde adapter writing a scalar as `{"re": .., "im": ..}`.
pub mod serde_c64 {
    use super::*;

    pub fn serialize<S: Serializer>(c: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
        ComplexRepr::from(*c).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<C64, D::Error> {
        let r = ComplexRepr::deserialize(d)?;
        Ok(C64::new(r.re, r.im))
    }
}

/// Serde adapter for dense real matrices as row-major arrays of arrays.
pub mod serde_real_mat {
    use super::*;
    use serde::de::Error as _;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged real matrix"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }
}

/// Dense complex column vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CVec(pub Vec<C64>);

impl CVec {
    pub fn zeros(n: usize) -> Self {
        CVec(vec![C64::new(0.0, 0.0); n])
    }

    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        check_dim(re.len(), im.len())?;
        Ok(CVec(re.iter().zip(im).map(|(&r, &i)| C64::new(r, i)).collect()))
    }

    pub fn from_real(re: &[f64]) -> Self {
        CVec(re.iter().map(|&r| C64::new(r, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    pub fn re(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.im).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn conj(&self) -> CVec {
        CVec(self.0.iter().map(|c| c.conj()).collect())
    }

    pub fn scale(&self, s: C64) -> CVec {
        CVec(self.0.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &CVec) -> Result<CVec> {
        check_dim(self.len(), other.len())?;
        Ok(CVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &CVec) -> Result<CVec> {
        check_dim(self.len(), other.len())?;
        Ok(CVec(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// Bilinear product `a^T b` (no conjugation). Used for `Re(mu z)` with a row `mu`.
    pub fn dotu(&self, other: &CVec) -> Result<C64> {
        check_dim(self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn sum(&self) -> C64 {
        self.0.iter().sum()
    }
}

impl From<Vec<C64>> for CVec {
    fn from(v: Vec<C64>) -> Self {
        CVec(v)
    }
}

impl std::ops::Index<usize> for CVec {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for CVec {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl Serialize for CVec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<ComplexRepr> = self.0.iter().map(|&c| c.into()).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<ComplexRepr>::deserialize(d)?;
        Ok(CVec(v.into_iter().map(|r| C64::new(r.re, r.im)).collect()))
    }
}

/// Dense complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        for r in &rows {
            check_dim(ncols, r.len())?;
        }
        Ok(CMat {
            rows: nrows,
            cols: ncols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Builds `re + i im` from two real matrices of equal shape.
    pub fn from_parts(re: &DMatrix<f64>, im: &DMatrix<f64>) -> Result<Self> {
        check_dim(re.nrows(), im.nrows())?;
        check_dim(re.ncols(), im.ncols())?;
        Ok(CMat::from_fn(re.nrows(), re.ncols(), |i, j| {
            C64::new(re[(i, j)], im[(i, j)])
        }))
    }

    pub fn from_real(re: &DMatrix<f64>) -> Self {
        CMat::from_fn(re.nrows(), re.ncols(), |i, j| C64::new(re[(i, j)], 0.0))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> CVec {
        CVec(self.data[i * self.cols..(i + 1) * self.cols].to_vec())
    }

    pub fn re(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].re)
    }

    pub fn im(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].im)
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].conj())
    }

    /// Conjugate transpose `A^H`.
    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &CMat) -> Result<CMat> {
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)?;
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &CMat) -> Result<CMat> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn mul_vec(&self, x: &CVec) -> Result<CVec> {
        check_dim(self.cols, x.len())?;
        Ok(CVec(
            (0..self.rows)
                .map(|i| {
                    self.data[i * self.cols..(i + 1) * self.cols]
                        .iter()
                        .zip(&x.0)
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect(),
        ))
    }

    pub fn mul(&self, other: &CMat) -> Result<CMat> {
        check_dim(self.cols, other.rows)?;
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &CMat) -> Result<f64> {
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.rows == self.cols
            && self
                .max_abs_diff(&self.adjoint())
                .map_or(false, |d| d <= tol)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && self
                .max_abs_diff(&self.transpose())
                .map_or(false, |d| d <= tol)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Serialize for CMat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<ComplexRepr>> = (0..self.rows)
            .map(|i| self.row(i).0.into_iter().map(Into::into).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rows = Vec::<Vec<ComplexRepr>>::deserialize(d)?;
        CMat::from_rows(
            rows.into_iter()
                .map(|r| r.into_iter().map(|c| C64::new(c.re, c.im)).collect())
                .collect(),
        )
        .map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// `[Re a; Im a]`.
pub fn embed_vec(a: &CVec) -> DVector<f64> {
    let n = a.len();
    DVector::from_fn(2 * n, |i, _| if i < n { a[i].re } else { a[i - n].im })
}

/// Inverse of [`embed_vec`]; fails on odd length.
pub fn unembed_vec(x: &DVector<f64>) -> Result<CVec> {
    if x.len() % 2 != 0 {
        return Err(Error::OddDimension(x.len()));
    }
    let n = x.len() / 2;
    Ok(CVec((0..n).map(|i| C64::new(x[i], x[n + i])).collect()))
}

/// `[[Re A, -Im A], [Im A, Re A]]`.
pub fn embed_mat(a: &CMat) -> DMatrix<f64> {
    let (n, m) = a.shape();
    DMatrix::from_fn(2 * n, 2 * m, |i, j| {
        let c = a[(i % n, j % m)];
        match (i < n, j < m) {
            (true, true) | (false, false) => c.re,
            (true, false) => -c.im,
            (false, true) => c.im,
        }
    })
}

/// Reads a complex matrix back out of a `2n x 2m` embedding (left block column).
pub fn unembed_mat(x: &DMatrix<f64>) -> Result<CMat> {
    if x.nrows() % 2 != 0 {
        return Err(Error::OddDimension(x.nrows()));
    }
    if x.ncols() % 2 != 0 {
        return Err(Error::OddDimension(x.ncols()));
    }
    let (n, m) = (x.nrows() / 2, x.ncols() / 2);
    Ok(CMat::from_fn(n, m, |i, j| C64::new(x[(i, j)], x[(n + i, j)])))
}

/// Hermitian inner product `a^H b`.
pub fn herm_inner(a: &CVec, b: &CVec) -> Result<C64> {
    check_dim(a.len(), b.len())?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Returns the unit vector `u = z / |z|`, which attains `sup_{|u|<=1} Re(z^H u) = |z|`.
pub fn dual_norm_certificate(z: &CVec) -> Result<CVec> {
    let norm = z.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(z.scale(C64::new(1.0 / norm, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn embed_scalar_and_zero() {
        let v = embed_vec(&CVec(vec![c(1.0, 2.0)]));
        assert_eq!(v.as_slice(), &[1.0, 2.0]);
        let z = embed_vec(&CVec::zeros(3));
        assert_eq!(z.len(), 6);
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn embed_imaginary_unit_matrix() {
        let m = CMat::from_rows(vec![vec![c(0.0, 1.0)]]).unwrap();
        let e = embed_mat(&m);
        assert_eq!(e, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    }

    #[test]
    fn embed_identity_is_identity() {
        assert_eq!(embed_mat(&CMat::identity(3)), DMatrix::identity(6, 6));
    }

    #[test]
    fn inner_product_examples() {
        let a = CVec(vec![c(1.0, 1.0)]);
        assert_eq!(herm_inner(&a, &a).unwrap(), c(2.0, 0.0));
        let e1 = CVec::from_real(&[1.0, 0.0]);
        let e2 = CVec::from_real(&[0.0, 1.0]);
        assert_eq!(herm_inner(&e1, &e2).unwrap(), c(0.0, 0.0));
        assert!(matches!(
            herm_inner(&e1, &a),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn certificate_examples() {
        let z = CVec(vec![c(3.0, 4.0)]);
        let u = dual_norm_certificate(&z).unwrap();
        assert!((u[0] - c(0.6, 0.8)).norm() < 1e-15);
        assert!((herm_inner(&z, &u).unwrap().re - 5.0).abs() < 1e-14);

        let e = CVec::from_real(&[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(dual_norm_certificate(&e).unwrap(), e);
        assert!(matches!(
            dual_norm_certificate(&CVec::zeros(2)),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn json_shapes() {
        let m = CMat::from_rows(vec![vec![c(1.0, -2.0), c(0.5, 0.0)]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"[[{"re":1.0,"im":-2.0},{"re":0.5,"im":0.0}]]"#);
        let back: CMat = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<CMat>(r#"[[{"re":1,"im":0}],[]]"#).is_err());
    }

    #[test]
    fn unembed_rejects_odd() {
        assert!(matches!(
            unembed_vec(&DVector::zeros(3)),
            Err(Error::OddDimension(3))
        ));
    }
}
