//! Instance builders: the transmitter-jammer payoff and seeded random games.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{embed_vec, herm_inner, CMat, CVec, C64};
use crate::error::{Error, Player, Result};
use crate::games::{ConstraintRow, GameSpec, NormMode, PlayerSpec, StrategySetSpec};
use crate::moments::{composite_from_complex, ComplexMoments, ModelKind};
use crate::reformulate::{deterministic_constraint, ChanceRow};
use crate::rng::task_rng;

/// Default modulus tolerance of [`WaveformSet::new`].
pub const MODULUS_TOL: f64 = 1e-6;

/// Constant-modulus waveforms of a common length `N`, each sample of modulus `1/sqrt(N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformSet {
    pub labels: Vec<String>,
    pub waveforms: Vec<CVec>,
}

impl WaveformSet {
    pub fn new(labels: Vec<String>, waveforms: Vec<CVec>) -> Result<Self> {
        Self::with_tolerance(labels, waveforms, MODULUS_TOL)
    }

    /// As [`WaveformSet::new`], accepting moduli within `tol` of `1/sqrt(N)`
    /// (printed waveforms are rounded to a few digits).
    pub fn with_tolerance(labels: Vec<String>, waveforms: Vec<CVec>, tol: f64) -> Result<Self> {
        if labels.len() != waveforms.len() {
            return Err(Error::LengthMismatch {
                expected: waveforms.len(),
                found: labels.len(),
            });
        }
        let set = WaveformSet { labels, waveforms };
        set.check(tol)?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.waveforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waveforms.is_empty()
    }

    /// Common sequence length (0 for an empty set).
    pub fn length(&self) -> usize {
        self.waveforms.first().map_or(0, CVec::len)
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let n = self.length();
        let expected = 1.0 / (n as f64).sqrt();
        for (index, w) in self.waveforms.iter().enumerate() {
            if w.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: w.len(),
                });
            }
            for (sample, x) in w.iter().enumerate() {
                let modulus = x.norm();
                if !((modulus - expected).abs() <= tol) {
                    return Err(Error::ModulusViolation {
                        index,
                        sample,
                        modulus,
                        expected,
                    });
                }
            }
        }
        Ok(())
    }

    /// Unit-modulus phase codes `exp(i phase) / sqrt(N)`.
    pub fn from_phases(labels: Vec<String>, phases: &[Vec<f64>]) -> Result<Self> {
        let waveforms = phases
            .iter()
            .map(|ph| {
                let s = 1.0 / (ph.len() as f64).sqrt();
                CVec(ph.iter().map(|&t| C64::from_polar(s, t)).collect())
            })
            .collect();
        Self::new(labels, waveforms)
    }
}

/// Matched-filter output at zero lag, `A_ij = T_i^H J_j`.
pub fn txjam_payoff(tx: &WaveformSet, jam: &WaveformSet) -> Result<CMat> {
    tx.check(f64::INFINITY)?;
    jam.check(f64::INFINITY)?;
    if tx.length() != jam.length() && !tx.is_empty() && !jam.is_empty() {
        return Err(Error::LengthMismatch {
            expected: tx.length(),
            found: jam.length(),
        });
    }
    let mut rows = Vec::with_capacity(tx.len());
    for t in &tx.waveforms {
        rows.push(
            jam.waveforms
                .iter()
                .map(|j| herm_inner(t, j))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.is_empty() {
        return Ok(CMat::zeros(0, jam.len()));
    }
    CMat::from_rows(rows)
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Tolerance that accepts the rounded published waveforms.
pub const PUBLISHED_MODULUS_TOL: f64 = 2e-3;

/// The four published length-6 waveforms `(T_1, T_2)` and `(J_1, J_2)`.
pub fn published_waveforms() -> (WaveformSet, WaveformSet) {
    let t1 = vec![
        c(0.408, 0.0),
        c(0.204, 0.353),
        c(-0.204, 0.353),
        c(-0.408, 0.0),
        c(-0.204, -0.353),
        c(0.204, -0.353),
    ];
    let t2 = vec![
        c(0.408, 0.0),
        c(0.0, 0.408),
        c(-0.408, 0.0),
        c(0.0, -0.408),
        c(0.288, 0.288),
        c(-0.288, -0.288),
    ];
    let j1 = vec![
        c(0.353, 0.204),
        c(-0.2041, 0.353),
        c(0.0, -0.408),
        c(0.204, 0.353),
        c(-0.204, -0.353),
        c(-0.408, 0.0),
    ];
    let j2 = vec![
        c(0.2887, -0.2887),
        c(0.2041, 0.3536),
        c(0.0, 0.4082),
        c(0.0, -0.4082),
        c(-0.4082, 0.0),
        c(0.353, 0.204),
    ];
    let tx = WaveformSet::with_tolerance(
        vec!["T1".into(), "T2".into()],
        vec![CVec(t1), CVec(t2)],
        PUBLISHED_MODULUS_TOL,
    )
    .expect("published transmitter waveforms");
    let jam = WaveformSet::with_tolerance(
        vec!["J1".into(), "J2".into()],
        vec![CVec(j1), CVec(j2)],
        PUBLISHED_MODULUS_TOL,
    )
    .expect("published jammer waveforms");
    (tx, jam)
}

/// The published 2x2 payoff as printed.
pub fn published_payoff() -> CMat {
    CMat::from_rows(vec![
        vec![c(0.0833, 0.0223), c(0.5122, -0.0122)],
        vec![c(0.1012, 0.2557), c(0.1500, -0.2069)],
    ])
    .expect("2x2")
}

/// Unconstrained game on `payoff` with the same norm cap for both players.
pub fn txjam_game(payoff: CMat, alpha: f64, mode: NormMode) -> GameSpec {
    let (n, m) = payoff.shape();
    GameSpec {
        payoff,
        player1: PlayerSpec::unconstrained(n, alpha, mode),
        player2: PlayerSpec::unconstrained(m, alpha, mode),
    }
}

/// Size of one player's side of a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideSize {
    /// Number of actions.
    pub actions: usize,
    /// Total number of rows.
    pub rows: usize,
    /// How many of the rows are chance rows.
    pub chance: usize,
}

impl SideSize {
    pub fn new(actions: usize, rows: usize, chance: usize) -> Self {
        SideSize {
            actions,
            rows,
            chance,
        }
    }
}

/// Parameters of [`gen_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecipe {
    pub player1: SideSize,
    pub player2: SideSize,
    pub model: ModelKind,
    pub p1: f64,
    pub p2: f64,
    pub alpha: f64,
    pub mode: NormMode,
    pub seed: u64,
}

/// Slack of every generated row at the uniform real strategy.
pub const GEN_MARGIN: f64 = 0.1;

/// Robust bounds are this multiple of the nominal composite covariance.
pub const GEN_BOUND_SCALE: f64 = 1.25;

/// Right-hand sides are placed for the larger of the row level and this one,
/// so that sweeps up to it stay strictly feasible.
pub const GEN_LEVEL_FLOOR: f64 = 0.95;

impl InstanceRecipe {
    pub fn new(player1: SideSize, player2: SideSize, model: ModelKind, p: f64, seed: u64) -> Self {
        InstanceRecipe {
            player1,
            player2,
            model,
            p1: p,
            p2: p,
            alpha: 1.0,
            mode: NormMode::Imag,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (player, s) in [(Player::One, self.player1), (Player::Two, self.player2)] {
            if s.actions == 0 {
                return Err(Error::Invalid(format!("{player}: no actions")));
            }
            if s.chance > s.rows {
                return Err(Error::Invalid(format!(
                    "{player}: {} chance rows exceed {} rows",
                    s.chance, s.rows
                )));
            }
        }
        StrategySetSpec::new(self.player1.actions, self.alpha, self.mode).validate(Player::One)?;
        StrategySetSpec::new(self.player2.actions, self.alpha, self.mode).validate(Player::Two)?;
        Ok(())
    }
}

fn uniform_c(rng: &mut ChaCha8Rng, half_width: f64) -> C64 {
    c(
        rng.random_range(-half_width..half_width),
        rng.random_range(-half_width..half_width),
    )
}

fn random_moments(rng: &mut ChaCha8Rng, n: usize) -> Result<ComplexMoments> {
    let mu = CVec((0..n).map(|_| uniform_c(rng, 1.0)).collect());
    let g = CMat::from_fn(n, n, |_, _| uniform_c(rng, 1.0));
    let gamma = g.adjoint().mul(&g)?.scale(c(1.0 / n as f64, 0.0));
    let herm = gamma.add(&gamma.adjoint())?.scale(c(0.5, 0.0));
    ComplexMoments::proper(mu, herm)
}

fn side_rows(rng: &mut ChaCha8Rng, player: Player, size: SideSize, r: &InstanceRecipe) -> Result<Vec<ConstraintRow>> {
    let n = size.actions;
    let uniform = CVec::from_real(&vec![1.0 / n as f64; n]);
    let x0 = embed_vec(&uniform);
    let (flip, p) = match player {
        Player::One => (1.0, r.p1),
        Player::Two => (-1.0, r.p2),
    };
    let mut rows = Vec::with_capacity(size.rows);
    for k in 0..size.rows {
        if k < size.chance {
            let moments = random_moments(rng, n)?;
            let bound = composite_from_complex(&moments)? * GEN_BOUND_SCALE;
            let model = r.model.build(|| bound);
            // Place the rhs on the `<=` form the reformulation sees.
            let le = if flip > 0.0 { moments.clone() } else { moments.negated() };
            let level = p.max(GEN_LEVEL_FLOOR);
            let probe = deterministic_constraint(&ChanceRow::new(le, model.clone(), 0.0, level)?)?;
            let rhs_le = -probe.slack_embedded(&x0) + GEN_MARGIN;
            rows.push(ConstraintRow::Chance {
                moments,
                model,
                rhs: flip * rhs_le,
                p,
            });
        } else {
            let coeffs = CVec((0..n).map(|_| uniform_c(rng, 1.0)).collect());
            let at = coeffs.dotu(&uniform)?.re;
            rows.push(ConstraintRow::Det {
                coeffs,
                rhs: at + flip * GEN_MARGIN,
            });
        }
    }
    Ok(rows)
}

/// Seeded random game: payoff entries with real and imaginary parts uniform
/// on `(-5, 5)`, deterministic rows with coefficients uniform on the unit
/// box, and proper chance rows (`J = 0`) with `Gamma = G^H G / n`. Every row
/// holds with slack [`GEN_MARGIN`] at the uniform real strategy.
pub fn gen_instance(r: &InstanceRecipe) -> Result<GameSpec> {
    r.validate()?;
    let (n, m) = (r.player1.actions, r.player2.actions);
    let mut rng = task_rng(r.seed, 1, 0);
    let payoff = CMat::from_fn(n, m, |_, _| uniform_c(&mut rng, 5.0));
    let rows1 = side_rows(&mut task_rng(r.seed, 2, 0), Player::One, r.player1, r)?;
    let rows2 = side_rows(&mut task_rng(r.seed, 3, 0), Player::Two, r.player2, r)?;
    let g = GameSpec {
        payoff,
        player1: PlayerSpec {
            set: StrategySetSpec::new(n, r.alpha, r.mode),
            rows: rows1,
        },
        player2: PlayerSpec {
            set: StrategySetSpec::new(m, r.alpha, r.mode),
            rows: rows2,
        },
    };
    g.validate()?;
    Ok(g)
}

/// `Re(u^H A v)`.
pub fn payoff_value(a: &CMat, u: &CVec, v: &CVec) -> Result<f64> {
    Ok(herm_inner(u, &a.mul_vec(v)?)?.re)
}
