//! Seeded samplers for calibration runs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal, StudentT};

use super::{composite_from_complex, ComplexMoments, QuantileFamily};
use crate::complex::{CVec, C64};
use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;

/// Draws standard variates of one family.
#[derive(Debug, Clone)]
pub enum ProjectionSampler {
    Gaussian,
    Laplace,
    Logistic,
    Cauchy(Cauchy<f64>),
    StudentT(StudentT<f64>),
}

impl ProjectionSampler {
    pub fn new(family: QuantileFamily) -> Result<Self> {
        family.validate()?;
        Ok(match family {
            QuantileFamily::Gaussian => ProjectionSampler::Gaussian,
            QuantileFamily::Laplace => ProjectionSampler::Laplace,
            QuantileFamily::Logistic => ProjectionSampler::Logistic,
            QuantileFamily::Cauchy => ProjectionSampler::Cauchy(
                Cauchy::new(0.0, 1.0).map_err(|e| Error::InvalidFamily(e.to_string()))?,
            ),
            QuantileFamily::StudentT { nu } => ProjectionSampler::StudentT(
                StudentT::new(nu).map_err(|e| Error::InvalidFamily(e.to_string()))?,
            ),
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ProjectionSampler::Gaussian => rng.sample(StandardNormal),
            ProjectionSampler::Laplace => {
                let u: f64 = open_unit(rng) - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            ProjectionSampler::Logistic => {
                let u = open_unit(rng);
                (u / (1.0 - u)).ln()
            }
            ProjectionSampler::Cauchy(d) => d.sample(rng),
            ProjectionSampler::StudentT(d) => d.sample(rng),
        }
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// `count` i.i.d. draws of `mean + std * X`, `X` standard under `family`.
pub fn sample_projection(
    family: QuantileFamily,
    mean: f64,
    std: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(std >= 0.0) {
        return Err(Error::Invalid(format!("standard deviation must be >= 0, got {std}")));
    }
    let sampler = ProjectionSampler::new(family)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let x = sampler.draw(&mut rng);
            if std == 0.0 {
                mean
            } else {
                mean + std * x
            }
        })
        .collect())
}

/// Complex Gaussian rows with prescribed mean, covariance and pseudo-covariance.
#[derive(Debug, Clone)]
pub struct GaussianRowSampler {
    mu: CVec,
    root: DMatrix<f64>,
}

impl GaussianRowSampler {
    pub fn new(m: &ComplexMoments) -> Result<Self> {
        let l = composite_from_complex(m)?;
        let root = psd_sqrt(&l).map_err(|e| Error::InconsistentMoments(e.to_string()))?;
        Ok(GaussianRowSampler {
            mu: m.mu().clone(),
            root,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        let n = self.mu.len();
        let xi = DVector::from_fn(2 * n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &self.root * xi;
        CVec(
            (0..n)
                .map(|i| self.mu[i] + C64::new(y[i], y[n + i]))
                .collect(),
        )
    }
}

/// One complex Gaussian row drawn with a fresh generator seeded by `seed`.
pub fn sample_gaussian_row(m: &ComplexMoments, seed: u64) -> Result<CVec> {
    let s = GaussianRowSampler::new(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(s.draw(&mut rng))
}
