//! Complex zero-sum games `max_u min_v Re(u^H A v)` over constrained complex
//! mixed strategies.
//!
//! A strategy `z` of dimension `n` satisfies `Re z >= 0`, `sum z = 1` (so the
//! imaginary parts sum to zero) and a norm cap, either on the whole vector
//! ([`NormMode::Total`]) or on `Im z` only ([`NormMode::Imag`]). Player 1
//! additionally satisfies rows `Re(B_i u) <= b_i`, player 2 rows
//! `Re(D_i v) >= d_i`, each either deterministic or required with
//! probability at least `p_i`.

mod certify;
mod programs;
mod solve;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::complex::{CMat, CVec};
use crate::error::{check_dim, Error, Player, Result};
use crate::moments::{AmbiguityModel, ComplexMoments};
use crate::reformulate::{deterministic_constraint, mean_vector, ChanceRow, DeterministicConstraint};

pub use certify::{best_response, certify_saddle, sample_strategy, CertificationReport, StrategySampler};
pub use programs::{build_dual, build_primal, slater_margin, SLATER_TOL};
pub use solve::{
    solve_game, solve_game_with, u_from_stationarity_duals, Equilibrium, SideMultipliers,
    SolveOptions, DEFAULT_GAP_FACTOR,
};

/// Default feasibility tolerance for strategy membership.
pub const FEAS_TOL: f64 = 1e-7;

/// Which part of the strategy the norm cap `alpha` bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// `||z|| <= alpha`; needs `alpha >= 1/sqrt(n)`.
    Total,
    /// `||Im z|| <= alpha`.
    #[default]
    Imag,
}

impl std::str::FromStr for NormMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "total" => Ok(NormMode::Total),
            "imag" => Ok(NormMode::Imag),
            _ => Err(Error::Invalid(format!("unknown norm mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySetSpec {
    pub dim: usize,
    pub alpha: f64,
    #[serde(default)]
    pub mode: NormMode,
}

impl StrategySetSpec {
    pub fn new(dim: usize, alpha: f64, mode: NormMode) -> Self {
        StrategySetSpec { dim, alpha, mode }
    }

    pub fn validate(&self, player: Player) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::EmptyStrategySet {
                player,
                reason: "dimension is zero".into(),
            });
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Invalid(format!(
                "{player}: alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        let floor = 1.0 / (self.dim as f64).sqrt();
        if self.mode == NormMode::Total && self.alpha < floor * (1.0 - 1e-12) {
            return Err(Error::EmptyStrategySet {
                player,
                reason: format!(
                    "total-norm bound {} is below 1/sqrt({}) = {floor}",
                    self.alpha, self.dim
                ),
            });
        }
        Ok(())
    }
}

/// One constraint row of a player's strategy set. For player 1 the row
/// reads `Re(coeffs . u) <= rhs`, for player 2 `Re(coeffs . v) >= rhs`;
/// chance rows require the inequality with probability at least `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintRow {
    Det {
        coeffs: CVec,
        rhs: f64,
    },
    Chance {
        moments: ComplexMoments,
        model: AmbiguityModel,
        rhs: f64,
        p: f64,
    },
}

impl ConstraintRow {
    pub fn is_chance(&self) -> bool {
        matches!(self, ConstraintRow::Chance { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerSpec {
    #[serde(flatten)]
    pub set: StrategySetSpec,
    #[serde(default)]
    pub rows: Vec<ConstraintRow>,
}

impl PlayerSpec {
    pub fn unconstrained(dim: usize, alpha: f64, mode: NormMode) -> Self {
        PlayerSpec {
            set: StrategySetSpec::new(dim, alpha, mode),
            rows: Vec::new(),
        }
    }

    pub fn chance_count(&self) -> usize {
        self.rows.iter().filter(|r| r.is_chance()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub payoff: CMat,
    pub player1: PlayerSpec,
    pub player2: PlayerSpec,
}

impl GameSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let g: GameSpec = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn player(&self, p: Player) -> &PlayerSpec {
        match p {
            Player::One => &self.player1,
            Player::Two => &self.player2,
        }
    }

    pub fn player_mut(&mut self, p: Player) -> &mut PlayerSpec {
        match p {
            Player::One => &mut self.player1,
            Player::Two => &mut self.player2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.payoff.shape();
        check_dim(n, self.player1.set.dim)?;
        check_dim(m, self.player2.set.dim)?;
        for player in [Player::One, Player::Two] {
            Side::new(player, self.player(player))?;
        }
        Ok(())
    }

    /// Sets the confidence level of every chance row of `player`.
    pub fn with_levels(&self, player: Player, p: f64) -> Self {
        let mut g = self.clone();
        for r in &mut g.player_mut(player).rows {
            if let ConstraintRow::Chance { p: level, .. } = r {
                *level = p;
            }
        }
        g
    }

    pub fn with_alpha(&self, alpha: f64, mode: Option<NormMode>) -> Self {
        let mut g = self.clone();
        for s in [&mut g.player1.set, &mut g.player2.set] {
            s.alpha = alpha;
            if let Some(m) = mode {
                s.mode = m;
            }
        }
        g
    }

    /// Chance rows of `player` in `P[Re(M z) <= m] >= p` form.
    pub fn chance_rows(&self, player: Player) -> Result<Vec<ChanceRow>> {
        Ok(Side::new(player, self.player(player))?.chance_rows)
    }
}

/// A player's set rewritten with every row as `a^T x + ... <= rhs` on `x = [Re z; Im z]`.
#[derive(Debug, Clone)]
pub(crate) struct Side {
    pub player: Player,
    pub set: StrategySetSpec,
    pub det: Vec<(DVector<f64>, f64)>,
    pub chance: Vec<DeterministicConstraint>,
    pub chance_rows: Vec<ChanceRow>,
    /// Position of each chance row in the original row list.
    pub chance_index: Vec<usize>,
}

impl Side {
    pub fn new(player: Player, spec: &PlayerSpec) -> Result<Self> {
        spec.set.validate(player)?;
        let n = spec.set.dim;
        let flip = match player {
            Player::One => 1.0,
            Player::Two => -1.0,
        };
        let mut side = Side {
            player,
            set: spec.set,
            det: Vec::new(),
            chance: Vec::new(),
            chance_rows: Vec::new(),
            chance_index: Vec::new(),
        };
        for (k, row) in spec.rows.iter().enumerate() {
            match row {
                ConstraintRow::Det { coeffs, rhs } => {
                    check_dim(n, coeffs.len())?;
                    if !rhs.is_finite() {
                        return Err(Error::Invalid(format!("{player}: row {k} has rhs {rhs}")));
                    }
                    side.det.push((mean_vector(coeffs) * flip, flip * rhs));
                }
                ConstraintRow::Chance {
                    moments,
                    model,
                    rhs,
                    p,
                } => {
                    check_dim(n, moments.dim())?;
                    let mom = if flip > 0.0 { moments.clone() } else { moments.negated() };
                    let cr = ChanceRow::new(mom, model.clone(), flip * rhs, *p)?;
                    side.chance.push(deterministic_constraint(&cr)?);
                    side.chance_rows.push(cr);
                    side.chance_index.push(k);
                }
            }
        }
        Ok(side)
    }

    pub fn dim(&self) -> usize {
        self.set.dim
    }
}

/// Result of a membership test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub feasible: bool,
    pub min_real: f64,
    pub sum_error: f64,
    pub norm: f64,
    pub bound: f64,
}

/// Tests `z` against the simplex-like part of the strategy set.
pub fn membership(z: &CVec, s: &StrategySetSpec, tol: f64) -> Result<MembershipReport> {
    check_dim(s.dim, z.len())?;
    let min_real = z.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    let sum = z.sum();
    let sum_error = (sum.re - 1.0).abs().max(sum.im.abs());
    let norm = match s.mode {
        NormMode::Total => z.norm(),
        NormMode::Imag => z.im().iter().map(|v| v * v).sum::<f64>().sqrt(),
    };
    Ok(MembershipReport {
        feasible: min_real >= -tol && sum_error <= tol && norm <= s.alpha + tol,
        min_real,
        sum_error,
        norm,
        bound: s.alpha,
    })
}

/// Smallest slack over all constraint rows of a player at `z` (negative when violated).
pub fn row_slack(g: &GameSpec, player: Player, z: &CVec) -> Result<f64> {
    let side = Side::new(player, g.player(player))?;
    side.row_slack(z)
}

impl Side {
    pub fn row_slack(&self, z: &CVec) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        let x = crate::complex::embed_vec(z);
        let mut worst = f64::INFINITY;
        for (a, rhs) in &self.det {
            worst = worst.min(rhs - a.dot(&x));
        }
        for c in &self.chance {
            worst = worst.min(c.slack_embedded(&x));
        }
        Ok(worst)
    }

    pub fn contains(&self, z: &CVec, tol: f64) -> Result<bool> {
        Ok(membership(z, &self.set, tol)?.feasible && self.row_slack(z)? >= -tol)
    }
}

/// Full feasibility of `z` for `player`, including constraint rows.
pub fn is_feasible(g: &GameSpec, player: Player, z: &CVec, tol: f64) -> Result<bool> {
    Side::new(player, g.player(player))?.contains(z, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::C64;

    #[test]
    fn membership_examples() {
        let s = StrategySetSpec::new(4, 1.0, NormMode::Total);
        let z = CVec::from_real(&[0.25; 4]);
        let r = membership(&z, &s, FEAS_TOL).unwrap();
        assert!(r.feasible);
        assert!((r.norm - 0.5).abs() < 1e-15);
        let s = StrategySetSpec::new(4, 0.4, NormMode::Total);
        assert!(!membership(&z, &s, FEAS_TOL).unwrap().feasible);

        let u = CVec(vec![C64::new(0.652, -0.326), C64::new(0.348, 0.326)]);
        let s = StrategySetSpec::new(2, 0.5, NormMode::Imag);
        let r = membership(&u, &s, FEAS_TOL).unwrap();
        assert!(r.feasible);
        assert!((r.norm - 0.461).abs() < 1e-3);
    }

    #[test]
    fn total_norm_floor() {
        let s = StrategySetSpec::new(2, 0.5, NormMode::Total);
        assert!(matches!(
            s.validate(Player::One),
            Err(Error::EmptyStrategySet { .. })
        ));
        assert!(StrategySetSpec::new(2, 0.5, NormMode::Imag).validate(Player::One).is_ok());
    }

    #[test]
    fn spec_json_roundtrip() {
        let g = GameSpec {
            payoff: CMat::identity(2),
            player1: PlayerSpec {
                set: StrategySetSpec::new(2, 1.0, NormMode::Total),
                rows: vec![ConstraintRow::Det {
                    coeffs: CVec::from_real(&[1.0, 0.0]),
                    rhs: 0.9,
                }],
            },
            player2: PlayerSpec::unconstrained(2, 0.5, NormMode::Imag),
        };
        let s = g.to_json().unwrap();
        assert!(s.contains("\"type\": \"det\""));
        assert_eq!(GameSpec::from_json(&s).unwrap(), g);
        let bad = s.replacen("\"dim\": 2", "\"dim\": 3", 1);
        assert!(GameSpec::from_json(&bad).is_err());
    }
}
