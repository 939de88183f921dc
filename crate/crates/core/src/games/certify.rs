use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::programs::add_own_constraints;
use super::solve::Equilibrium;
use super::{GameSpec, NormMode, Side};
use crate::complex::{embed_vec, herm_inner, unembed_vec, CVec, C64};
use crate::conic::{solve, ConicProgram, Sense, SolveStatus, DEFAULT_SOLVE_TOL};
use crate::error::{Error, Player, Result};
use crate::rng::task_rng;

/// Rejection attempts allowed per feasible sample.
pub const SAMPLE_BUDGET: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub samples: usize,
    pub tol: f64,
    pub value: f64,
    /// `max_u Re(u^H A v*) - value` over the sampled `u`.
    pub max_gain_player1: f64,
    /// `max_v value - Re(u*^H A v)` over the sampled `v`.
    pub max_gain_player2: f64,
    pub violations: usize,
    pub passed: bool,
}

/// Uniform-ish sampler of a player's strategy set by rejection.
#[derive(Debug, Clone)]
pub struct StrategySampler {
    side: Side,
}

impl StrategySampler {
    pub fn new(g: &GameSpec, player: Player) -> Result<Self> {
        Ok(StrategySampler {
            side: Side::new(player, g.player(player))?,
        })
    }

    fn candidate<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<CVec> {
        let n = self.side.dim();
        let t: f64 = rng.random();
        let mut dir: Vec<f64> = (0..n)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = dir.iter().sum();
        dir.iter_mut().for_each(|d| *d /= total);
        let re: Vec<f64> = dir
            .iter()
            .map(|d| (1.0 - t) / n as f64 + t * d)
            .collect();
        let alpha = self.side.set.alpha;
        let rmax = match self.side.set.mode {
            NormMode::Total => {
                let rest = alpha * alpha - re.iter().map(|v| v * v).sum::<f64>();
                if rest < 0.0 {
                    return None;
                }
                rest.sqrt()
            }
            NormMode::Imag => alpha,
        };
        let mut im: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mean = im.iter().sum::<f64>() / n as f64;
        im.iter_mut().for_each(|v| *v -= mean);
        let norm = im.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radius = rmax * rng.random::<f64>();
        if norm > 0.0 {
            im.iter_mut().for_each(|v| *v *= radius / norm);
        } else {
            im.iter_mut().for_each(|v| *v = 0.0);
        }
        CVec::from_parts(&re, &im).ok()
    }

    /// Draws one feasible strategy, or fails after [`SAMPLE_BUDGET`] rejections.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CVec> {
        for _ in 0..SAMPLE_BUDGET {
            if let Some(z) = self.candidate(rng) {
                if self.side.contains(&z, 1e-12)? {
                    return Ok(z);
                }
            }
        }
        Err(Error::SamplerStarvation {
            player: self.side.player,
            attempts: SAMPLE_BUDGET,
        })
    }
}

fn stream(p: Player) -> u64 {
    match p {
        Player::One => 11,
        Player::Two => 12,
    }
}

/// Sample `index` of the seeded sequence of feasible strategies of `player`.
pub fn sample_strategy(g: &GameSpec, player: Player, seed: u64, index: u64) -> Result<CVec> {
    let s = StrategySampler::new(g, player)?;
    s.sample(&mut task_rng(seed, stream(player), index))
}

/// Checks the saddle inequalities against `n_samples` feasible strategies per player.
pub fn certify_saddle(
    g: &GameSpec,
    e: &Equilibrium,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CertificationReport> {
    let s1 = StrategySampler::new(g, Player::One)?;
    let s2 = StrategySampler::new(g, Player::Two)?;
    let av = g.payoff.mul_vec(&e.v_star)?;
    let ahu = g.payoff.adjoint().mul_vec(&e.u_star)?;
    let gains: Vec<(f64, f64)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let u = s1.sample(&mut task_rng(seed, stream(Player::One), i))?;
            let v = s2.sample(&mut task_rng(seed, stream(Player::Two), i))?;
            let f1 = herm_inner(&u, &av)?.re;
            // Re(u*^H A v) = Re(v^H A^H u*).
            let f2 = herm_inner(&v, &ahu)?.re;
            Ok((f1 - e.value, e.value - f2))
        })
        .collect::<Result<_>>()?;
    let max1 = gains.iter().map(|g| g.0).fold(f64::NEG_INFINITY, f64::max);
    let max2 = gains.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
    let violations = gains
        .iter()
        .map(|&(a, b)| usize::from(a > tol) + usize::from(b > tol))
        .sum();
    Ok(CertificationReport {
        samples: n_samples,
        tol,
        value: e.value,
        max_gain_player1: max1,
        max_gain_player2: max2,
        violations,
        passed: violations == 0,
    })
}

/// Exact best response of `player` to the opponent's strategy `other`,
/// returned with the payoff `Re(u^H A v)` it attains.
pub fn best_response(g: &GameSpec, player: Player, other: &CVec) -> Result<(CVec, f64)> {
    g.validate()?;
    let side = Side::new(player, g.player(player))?;
    // Player 1 maximizes Re(u^H (A v)); player 2 maximizes Re(v^H (-A^H u)).
    let w = match player {
        Player::One => g.payoff.mul_vec(other)?,
        Player::Two => g.payoff.adjoint().mul_vec(other)?.scale(C64::new(-1.0, 0.0)),
    };
    let we = embed_vec(&w);
    let mut prog = ConicProgram::new(Sense::Max);
    let x = prog.add_vars("z", we.len());
    add_own_constraints(&mut prog, &side, &x, None);
    for (k, i) in x.clone().enumerate() {
        prog.add_objective(i, we[k]);
    }
    let s = solve(&prog, DEFAULT_SOLVE_TOL)?;
    if s.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!("{:?} in best response", s.status)));
    }
    let z = unembed_vec(&DVector::from_column_slice(&s.x[x]))?;
    let value = match player {
        Player::One => s.objective,
        Player::Two => -s.objective,
    };
    Ok((z, value))
}
