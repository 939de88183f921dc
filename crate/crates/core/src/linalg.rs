//! Small real dense helpers shared by the moment and reformulation code.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalue floor below which a symmetric matrix is rejected as not PSD.
pub const PSD_TOL: f64 = 1e-9;

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn psd_floor(m: &DMatrix<f64>) -> f64 {
    PSD_TOL * m.amax().max(1.0)
}

pub(crate) fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    let min = min_eigenvalue(m);
    if min < -psd_floor(m) {
        Err(Error::NotPsd { min_eigenvalue: min })
    } else {
        Ok(())
    }
}

/// Symmetric PSD square root `S` with `S S = m`; tiny negative eigenvalues are clamped.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let floor = psd_floor(m);
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -floor {
            return Err(Error::NotPsd { min_eigenvalue: *v });
        }
        *v = v.max(0.0).sqrt();
    }
    let u = &eig.eigenvectors;
    Ok(u * DMatrix::from_diagonal(&roots) * u.transpose())
}

/// `diag(I_n, -I_n) m diag(I_n, -I_n)` for a `2n x 2n` matrix.
pub(crate) fn flip_imag_blocks(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() / 2;
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if (i < n) == (j < n) {
            m[(i, j)]
        } else {
            -m[(i, j)]
        }
    })
}
