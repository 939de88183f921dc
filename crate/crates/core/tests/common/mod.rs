//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use cczsg::complex::{dual_norm_certificate, embed_mat, embed_vec, herm_inner, unembed_vec};
use cczsg::games::{ConstraintRow, GameSpec, NormMode, PlayerSpec};
use cczsg::moments::{AmbiguityModel, ComplexMoments};
use cczsg::reformulate::{coupling_from_factor, deterministic_constraint, k_matrix, ChanceRow};
use cczsg::{CMat, CVec, C64};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cvec(n: usize) -> impl Strategy<Value = CVec> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), n)
        .prop_map(|v| CVec(v.into_iter().map(|(a, b)| c(a, b)).collect()))
}

pub fn cmat(r: usize, k: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), r * k)
        .prop_map(move |v| CMat::from_fn(r, k, |i, j| c(v[i * k + j].0, v[i * k + j].1)))
}

fn to_nalgebra(a: &CMat) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_nalgebra(a: &DMatrix<C64>) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

// --- embedding properties -------------------------------------------------

pub type Phi1Case = (CVec, CVec, f64);

pub fn phi1_case() -> impl Strategy<Value = Phi1Case> {
    (1usize..7).prop_flat_map(|n| (cvec(n), cvec(n), -5.0..5.0f64))
}

/// Linearity, isometry, the inner-product identity and the roundtrip.
pub fn check_phi1((a, b, s): Phi1Case) -> Result<(), TestCaseError> {
    let (ea, eb) = (embed_vec(&a), embed_vec(&b));
    prop_assert!((embed_vec(&a.add(&b).unwrap()) - (&ea + &eb)).amax() <= 1e-12);
    prop_assert!((embed_vec(&a.sub(&b).unwrap()) - (&ea - &eb)).amax() <= 1e-12);
    prop_assert!((embed_vec(&a.scale(c(s, 0.0))) - &ea * s).amax() <= 1e-12);
    let direct: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    prop_assert!((ea.norm_squared() - direct).abs() <= 1e-12 * (1.0 + direct));
    let inner: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum();
    prop_assert!((ea.dot(&eb) - inner).abs() <= 1e-12 * (1.0 + inner.abs()));
    prop_assert_eq!(unembed_vec(&ea).unwrap(), a);
    Ok(())
}

pub type Phi2Case = (CMat, CMat, CVec);

pub fn phi2_case() -> impl Strategy<Value = Phi2Case> {
    (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|(n, k, m)| (cmat(n, k), cmat(k, m), cvec(k)))
}

/// Products, matrix-vector products, adjoints and the identity.
pub fn check_phi2((a, b, x): Phi2Case) -> Result<(), TestCaseError> {
    let ab = from_nalgebra(&(to_nalgebra(&a) * to_nalgebra(&b)));
    prop_assert!((embed_mat(&ab) - embed_mat(&a) * embed_mat(&b)).amax() <= 1e-10);
    let ax = to_nalgebra(&a) * DVector::from_column_slice(&x.0);
    let ax = CVec(ax.iter().copied().collect());
    prop_assert!((embed_vec(&ax) - embed_mat(&a) * embed_vec(&x)).amax() <= 1e-10);
    prop_assert!((embed_mat(&a.adjoint()) - embed_mat(&a).transpose()).amax() <= 1e-12);
    let n = a.nrows();
    prop_assert_eq!(embed_mat(&CMat::identity(n)), DMatrix::identity(2 * n, 2 * n));
    Ok(())
}

pub fn well_conditioned() -> impl Strategy<Value = CMat> {
    (1usize..6).prop_flat_map(|n| {
        cmat(n, n).prop_map(move |r| {
            let shift = CMat::identity(n).scale(c(4.0 * n as f64, 0.0));
            r.add(&shift).unwrap()
        })
    })
}

/// `phi2(D^-1) = phi2(D)^-1`, with the complex inverse taken independently.
pub fn check_phi2_inverse(d: CMat) -> Result<(), TestCaseError> {
    let inv = to_nalgebra(&d).try_inverse().expect("well conditioned");
    let lhs = embed_mat(&from_nalgebra(&inv));
    let rhs = embed_mat(&d).try_inverse().expect("well conditioned");
    prop_assert!((lhs - rhs).amax() <= 1e-8);
    Ok(())
}

// --- quadratic form --------------------------------------------------------

/// Moments of `M = mu + a xi` for a real standard vector `xi` (or, when
/// `proper`, the circular law with the same `Gamma` and `J = 0`).
#[derive(Debug, Clone)]
pub struct FactorMoments {
    pub mu: CVec,
    pub a: CMat,
    pub proper: bool,
}

impl FactorMoments {
    pub fn gamma(&self) -> CMat {
        self.a.conj().mul(&self.a.transpose()).unwrap()
    }

    pub fn j(&self) -> CMat {
        if self.proper {
            CMat::zeros(self.a.nrows(), self.a.nrows())
        } else {
            self.a.mul(&self.a.transpose()).unwrap()
        }
    }

    pub fn moments(&self) -> ComplexMoments {
        ComplexMoments::new(self.mu.clone(), self.gamma(), self.j()).unwrap()
    }

    /// `Re(mu . z)`.
    pub fn mean(&self, z: &CVec) -> f64 {
        self.mu.iter().zip(z.iter()).map(|(m, x)| (m * x).re).sum()
    }

    /// Variance of `Re(M z)` read off the factor: `|Re(a^T z)|^2`, or
    /// `|a^T z|^2 / 2` in the proper case.
    pub fn variance(&self, z: &CVec) -> f64 {
        let (n, k) = self.a.shape();
        (0..k)
            .map(|l| {
                let w: C64 = (0..n).map(|i| self.a[(i, l)] * z[i]).sum();
                if self.proper {
                    0.5 * w.norm_sqr()
                } else {
                    w.re * w.re
                }
            })
            .sum()
    }
}

pub fn factor_moments(n: usize) -> impl Strategy<Value = FactorMoments> {
    (cvec(n), cmat(n, n), any::<bool>()).prop_map(|(mu, a, proper)| FactorMoments { mu, a, proper })
}

pub fn quad_case() -> impl Strategy<Value = (FactorMoments, CVec)> {
    (1usize..6).prop_flat_map(|n| (factor_moments(n), cvec(n)))
}

/// `x^T K x` against the complex form and the factor variance.
pub fn check_quadratic((f, z): (FactorMoments, CVec)) -> Result<(), TestCaseError> {
    let m = f.moments();
    let x = embed_vec(&z);
    let lhs = (x.transpose() * k_matrix(&m).unwrap() * &x)[(0, 0)];
    let gz = f.gamma().mul_vec(&z).unwrap();
    let jz = f.j().mul_vec(&z).unwrap();
    let zgz: C64 = z.iter().zip(gz.iter()).map(|(a, b)| a.conj() * b).sum();
    let zjz: C64 = z.iter().zip(jz.iter()).map(|(a, b)| a * b).sum();
    let complex = 0.5 * (zgz.re + zjz.re);
    let scale = 1.0 + complex.abs();
    prop_assert!((lhs - complex).abs() <= 1e-9 * scale, "{lhs} vs {complex}");
    prop_assert!((f.variance(&z) - complex).abs() <= 1e-9 * scale);
    Ok(())
}

// --- coupling --------------------------------------------------------------

pub fn coupling_case() -> impl Strategy<Value = (DMatrix<f64>, CVec, CVec)> {
    (1usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(-3.0..3.0f64, 4 * n * n),
            cvec(n),
            cvec(n),
        )
            .prop_map(move |(q, lam, u)| (DMatrix::from_vec(2 * n, 2 * n, q), lam, u))
    })
}

/// `phi1(lam)^T Q phi1(u) = Re(lam^H Q1 u + lam^H Q2 conj(u)) / 2`.
pub fn check_coupling((q, lam, u): (DMatrix<f64>, CVec, CVec)) -> Result<(), TestCaseError> {
    let cm = coupling_from_factor(&q).unwrap();
    let lhs = embed_vec(&lam).dot(&(&q * embed_vec(&u)));
    let t1 = herm_inner(&lam, &cm.qhat1.mul_vec(&u).unwrap()).unwrap();
    let t2 = herm_inner(&lam, &cm.qhat2.mul_vec(&u.conj()).unwrap()).unwrap();
    let rhs = 0.5 * (t1 + t2).re;
    prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    Ok(())
}

// --- dual-norm certificate -------------------------------------------------

pub fn certificate_case() -> impl Strategy<Value = (CVec, u64)> {
    (1usize..8)
        .prop_flat_map(|n| (cvec(n), any::<u64>()))
        .prop_filter("nonzero", |(z, _)| z.norm() > 1e-6)
}

/// The certificate is a unit vector attaining `|z|`, and random unit vectors never beat it.
pub fn check_certificate((z, seed): (CVec, u64)) -> Result<(), TestCaseError> {
    let u = dual_norm_certificate(&z).unwrap();
    let norm = z.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    prop_assert!(u.norm() <= 1.0 + 1e-12);
    let attained = herm_inner(&z, &u).unwrap().re;
    prop_assert!((attained - norm).abs() <= 1e-10 * (1.0 + norm));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..50 {
        let w = CVec(
            (0..z.len())
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        );
        let w = w.scale(c(1.0 / w.norm().max(1e-300), 0.0));
        prop_assert!(herm_inner(&z, &w).unwrap().re <= norm + 1e-10 * (1.0 + norm));
    }
    Ok(())
}

/// Runs `check` on `cases` generated inputs; returns the first failure message.
pub fn run_suite<S: Strategy>(
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, check).map_err(|e| e.to_string())
}

// --- classical matrix games ------------------------------------------------

/// Value of the real matrix game `max_u min_v u^T A v` over the simplices,
/// by the tableau simplex method (Bland's rule) on
/// `max sum y s.t. B y <= 1, y >= 0` with `B = A + shift > 0`.
pub fn lp_game_value(a: &DMatrix<f64>) -> f64 {
    let (n, m) = (a.nrows(), a.ncols());
    let shift = 1.0 - a.min();
    let cols = m + n + 1;
    let mut t = vec![vec![0.0; cols]; n + 1];
    for i in 0..n {
        for j in 0..m {
            t[i][j] = a[(i, j)] + shift;
        }
        t[i][m + i] = 1.0;
        t[i][cols - 1] = 1.0;
    }
    for j in 0..m {
        t[n][j] = -1.0;
    }
    let mut basis: Vec<usize> = (m..m + n).collect();
    loop {
        let Some(enter) = (0..cols - 1).find(|&j| t[n][j] < -1e-12) else {
            break;
        };
        let mut leave: Option<usize> = None;
        for i in 0..n {
            if t[i][enter] > 1e-12 {
                let r = t[i][cols - 1] / t[i][enter];
                leave = match leave {
                    None => Some(i),
                    Some(k) => {
                        let rk = t[k][cols - 1] / t[k][enter];
                        if r < rk - 1e-15 || ((r - rk).abs() <= 1e-15 && basis[i] < basis[k]) {
                            Some(i)
                        } else {
                            Some(k)
                        }
                    }
                };
            }
        }
        let r = leave.expect("bounded by construction");
        let p = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let pivot = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && row[enter] != 0.0 {
                let f = row[enter];
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x -= f * y;
                }
            }
        }
        basis[r] = enter;
    }
    1.0 / t[n][cols - 1] - shift
}

// --- rows active at the equilibrium ----------------------------------------

pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// A game in which player 1 simply maximizes `Re(u_j)` over real strategies
/// in `dim` actions, cut by one chance row that is active at the optimum.
#[derive(Debug, Clone)]
pub struct ActiveRowGame {
    pub game: GameSpec,
    pub row: FactorMoments,
    pub rhs: f64,
    pub target: usize,
}

fn random_factor(rng: &mut ChaCha8Rng, n: usize, proper: bool) -> FactorMoments {
    let mut draw = || c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mu = CVec((0..n).map(|_| draw()).collect());
    let a = CMat::from_fn(n, n, |_, _| draw().scale(0.5));
    FactorMoments { mu, a, proper }
}

/// Builds an [`ActiveRowGame`]; the rhs sits halfway between the row's
/// reformulated left side at the uniform strategy and at the best vertex.
pub fn active_row_game(seed: u64, dim: usize, model: AmbiguityModel, p: f64) -> ActiveRowGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let proper = rng.random_bool(0.5);
        let f = random_factor(&mut rng, dim, proper);
        let m = f.moments();
        let model = model.with_bound(cczsg::moments::composite_from_complex(&m).unwrap() * 1.25);
        let probe = deterministic_constraint(&ChanceRow::new(m.clone(), model.clone(), 0.0, p).unwrap()).unwrap();
        let lhs = |z: &CVec| -probe.slack(z).unwrap();
        let uniform = CVec::from_real(&vec![1.0 / dim as f64; dim]);
        let at_uniform = lhs(&uniform);
        let (target, at_vertex) = (0..dim)
            .map(|j| {
                let mut e = vec![0.0; dim];
                e[j] = 1.0;
                (j, lhs(&CVec::from_real(&e)))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if at_vertex - at_uniform < 0.2 {
            continue;
        }
        let rhs = 0.5 * (at_uniform + at_vertex);
        let payoff = CMat::from_fn(dim, 2, |i, _| c(if i == target { 1.0 } else { 0.0 }, 0.0));
        let mut player1 = PlayerSpec::unconstrained(dim, 0.0, NormMode::Imag);
        player1.rows.push(ConstraintRow::Chance {
            moments: m,
            model,
            rhs,
            p,
        });
        let game = GameSpec {
            payoff,
            player1,
            player2: PlayerSpec::unconstrained(2, 0.0, NormMode::Imag),
        };
        return ActiveRowGame {
            game,
            row: f,
            rhs,
            target,
        };
    }
}
