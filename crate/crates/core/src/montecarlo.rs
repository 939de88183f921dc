//! Empirical calibration of chance rows at an equilibrium, and sweeps over
//! the confidence level and the norm cap.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::CVec;
use crate::error::{Error, Player, Result};
use crate::games::{solve_game_with, Equilibrium, GameSpec, NormMode, Side, SolveOptions};
use crate::conic::ClarabelSolver;
use crate::moments::{projection_moments, ProjectionSampler, QuantileFamily};
use crate::rng::task_rng;

/// Successive value changes below this mark the saturation of an alpha sweep.
pub const SATURATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowCalibration {
    /// `p1.row<k>` or `p2.row<k>`, with `k` the position in the player's row list.
    pub constraint_id: String,
    pub player: Player,
    pub row: usize,
    /// `1 - p`.
    pub target: f64,
    pub mean_ratio: f64,
    pub std_ratio: f64,
    pub max_ratio: f64,
    /// Family the projection was drawn from.
    pub family: QuantileFamily,
    /// False when the row's model fixes no law and a nominal family was used;
    /// the target is then a conservative bound, not an exact rate.
    pub exact: bool,
}

/// Rate of scenarios in which at least one chance row of a player is violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnyViolation {
    pub player: Player,
    pub mean_ratio: f64,
    pub std_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub scenarios: usize,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<RowCalibration>,
    pub any_violated: Vec<AnyViolation>,
}

struct RowPlan {
    player: Player,
    row: usize,
    target: f64,
    mean: f64,
    std: f64,
    rhs: f64,
    family: QuantileFamily,
    exact: bool,
    sampler: ProjectionSampler,
}

fn plan_side(side: &Side, z: &CVec, nominal: Option<QuantileFamily>) -> Result<Vec<RowPlan>> {
    let mut plans = Vec::new();
    for (ci, row) in side.chance_rows.iter().enumerate() {
        let (family, exact) = match (row.model.sampling_family(), nominal) {
            (Some(f), _) => (f, true),
            (None, Some(f)) => (f, false),
            (None, None) => {
                return Err(Error::UnsampleableModel {
                    player: side.player,
                    row: side.chance_index[ci],
                })
            }
        };
        let (mean, var) = projection_moments(&row.moments, z)?;
        plans.push(RowPlan {
            player: side.player,
            row: side.chance_index[ci],
            target: 1.0 - row.p,
            mean,
            std: var.sqrt(),
            rhs: row.rhs,
            family,
            exact,
            sampler: ProjectionSampler::new(family)?,
        });
    }
    Ok(plans)
}

fn stream(p: Player) -> u64 {
    match p {
        Player::One => 21,
        Player::Two => 22,
    }
}

/// One trial of one player: per-row violation counts and the any-violated count.
fn run_trial(plans: &[RowPlan], scenarios: usize, seed: u64, player: Player, trial: u64) -> (Vec<usize>, usize) {
    let mut rng = task_rng(seed, stream(player), trial);
    let mut counts = vec![0usize; plans.len()];
    let mut any = 0;
    for _ in 0..scenarios {
        let mut hit = false;
        for (k, r) in plans.iter().enumerate() {
            // Rows are in `<=` form, so player 2's `>=` rows are already flipped.
            let x = r.mean + r.std * r.sampler.draw(&mut rng);
            if x > r.rhs {
                counts[k] += 1;
                hit = true;
            }
        }
        any += usize::from(hit);
    }
    (counts, any)
}

fn stats(ratios: &[f64]) -> (f64, f64, f64) {
    let t = ratios.len() as f64;
    if ratios.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mean = ratios.iter().sum::<f64>() / t;
    let std = if ratios.len() > 1 {
        (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (t - 1.0)).sqrt()
    } else {
        0.0
    };
    let max = ratios.iter().copied().fold(0.0, f64::max);
    (mean, std, max)
}

/// Violation rates of every chance row over `trials` trials of `scenarios`
/// draws. Rows whose model fixes no law are an error.
pub fn calibrate(g: &GameSpec, e: &Equilibrium, scenarios: usize, trials: usize, seed: u64) -> Result<CalibrationReport> {
    calibrate_with(g, e, scenarios, trials, seed, None)
}

/// As [`calibrate`], drawing rows of moment-only models from `nominal` with
/// their nominal moments.
pub fn calibrate_with(
    g: &GameSpec,
    e: &Equilibrium,
    scenarios: usize,
    trials: usize,
    seed: u64,
    nominal: Option<QuantileFamily>,
) -> Result<CalibrationReport> {
    g.validate()?;
    let mut rows = Vec::new();
    let mut any_violated = Vec::new();
    for (player, z) in [(Player::One, &e.u_star), (Player::Two, &e.v_star)] {
        let side = Side::new(player, g.player(player))?;
        let plans = plan_side(&side, z, nominal)?;
        if plans.is_empty() {
            continue;
        }
        let results: Vec<(Vec<usize>, usize)> = (0..trials as u64)
            .into_par_iter()
            .map(|t| run_trial(&plans, scenarios, seed, player, t))
            .collect();
        let denom = scenarios.max(1) as f64;
        for (k, r) in plans.iter().enumerate() {
            let ratios: Vec<f64> = results.iter().map(|(c, _)| c[k] as f64 / denom).collect();
            let (mean_ratio, std_ratio, max_ratio) = stats(&ratios);
            rows.push(RowCalibration {
                constraint_id: format!("{}.row{}", tag(r.player), r.row),
                player: r.player,
                row: r.row,
                target: r.target,
                mean_ratio,
                std_ratio,
                max_ratio,
                family: r.family,
                exact: r.exact,
            });
        }
        let ratios: Vec<f64> = results.iter().map(|(_, a)| *a as f64 / denom).collect();
        let (mean_ratio, std_ratio, max_ratio) = stats(&ratios);
        any_violated.push(AnyViolation {
            player,
            mean_ratio,
            std_ratio,
            max_ratio,
        });
    }
    Ok(CalibrationReport {
        scenarios,
        trials,
        seed,
        rows,
        any_violated,
    })
}

fn tag(p: Player) -> &'static str {
    match p {
        Player::One => "p1",
        Player::Two => "p2",
    }
}

/// Three binomial standard deviations of a violation rate estimated from `n` draws.
pub fn binomial_band(target: f64, n: usize) -> f64 {
    3.0 * (target * (1.0 - target) / n as f64).sqrt()
}

pub fn write_calibration_csv<W: Write>(r: &CalibrationReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["constraint_id", "target", "mean_ratio", "std_ratio", "max_ratio"])?;
    for row in &r.rows {
        out.write_record([
            row.constraint_id.clone(),
            row.target.to_string(),
            row.mean_ratio.to_string(),
            row.std_ratio.to_string(),
            row.max_ratio.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPRow {
    pub p: f64,
    pub value: Option<f64>,
    pub gap: Option<f64>,
    pub solve_time: f64,
    /// `ok` or the error kind.
    pub status: String,
}

/// Which players' levels a p-sweep moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    Both,
    Only(Player),
}

/// Solves the game once per level, setting `p1 = p2 = p`.
pub fn sweep_p(g: &GameSpec, grid: &[f64]) -> Vec<SweepPRow> {
    sweep_p_with(g, grid, SweepTarget::Both, SolveOptions::default())
}

pub fn sweep_p_with(g: &GameSpec, grid: &[f64], target: SweepTarget, opts: SolveOptions) -> Vec<SweepPRow> {
    grid.par_iter()
        .map(|&p| {
            let gp = match target {
                SweepTarget::Both => g.with_levels(Player::One, p).with_levels(Player::Two, p),
                SweepTarget::Only(pl) => g.with_levels(pl, p),
            };
            let t = Instant::now();
            let r = solve_game_with(&gp, &ClarabelSolver::default(), opts);
            let solve_time = t.elapsed().as_secs_f64();
            match r {
                Ok(e) => SweepPRow {
                    p,
                    value: Some(e.value),
                    gap: Some(e.duality_gap),
                    solve_time,
                    status: "ok".into(),
                },
                Err(err) => SweepPRow {
                    p,
                    value: None,
                    gap: None,
                    solve_time,
                    status: err.kind().into(),
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAlphaRow {
    pub alpha: f64,
    pub re_norm_u: Option<f64>,
    pub re_norm_v: Option<f64>,
    pub value: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweep {
    pub rows: Vec<SweepAlphaRow>,
    /// First index after which every successive value change is below
    /// [`SATURATION_TOL`]; `None` if the grid never settles.
    pub saturation_index: Option<usize>,
}

fn re_norm(z: &CVec) -> f64 {
    z.re().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves the game once per cap with every chance level set to `p` (rows
/// without chance constraints ignore it). `grid` must be ascending.
pub fn sweep_alpha(g: &GameSpec, grid: &[f64], p: f64) -> Result<AlphaSweep> {
    sweep_alpha_with(g, grid, p, None, SolveOptions::default())
}

pub fn sweep_alpha_with(
    g: &GameSpec,
    grid: &[f64],
    p: f64,
    mode: Option<NormMode>,
    opts: SolveOptions,
) -> Result<AlphaSweep> {
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Invalid("alpha grid must be ascending".into()));
    }
    let base = g.with_levels(Player::One, p).with_levels(Player::Two, p);
    let rows: Vec<SweepAlphaRow> = grid
        .par_iter()
        .map(|&alpha| {
            let ga = base.with_alpha(alpha, mode);
            match solve_game_with(&ga, &ClarabelSolver::default(), opts) {
                Ok(e) => SweepAlphaRow {
                    alpha,
                    re_norm_u: Some(re_norm(&e.u_star)),
                    re_norm_v: Some(re_norm(&e.v_star)),
                    value: Some(e.value),
                    status: "ok".into(),
                },
                Err(err) => SweepAlphaRow {
                    alpha,
                    re_norm_u: None,
                    re_norm_v: None,
                    value: None,
                    status: match err {
                        Error::EmptyStrategySet { .. } => "infeasible".into(),
                        other => other.kind().into(),
                    },
                },
            }
        })
        .collect();
    let saturation_index = saturation(&rows);
    Ok(AlphaSweep {
        rows,
        saturation_index,
    })
}

fn saturation(rows: &[SweepAlphaRow]) -> Option<usize> {
    let mut idx = None;
    for i in (0..rows.len().saturating_sub(1)).rev() {
        match (rows[i].value, rows[i + 1].value) {
            (Some(a), Some(b)) if (a - b).abs() < SATURATION_TOL => idx = Some(i),
            _ => break,
        }
    }
    idx
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_sweep_p_csv<W: Write>(rows: &[SweepPRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["p", "value", "gap", "solve_time", "status"])?;
    for r in rows {
        out.write_record([
            r.p.to_string(),
            opt(r.value),
            opt(r.gap),
            r.solve_time.to_string(),
            r.status.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_alpha_csv<W: Write>(s: &AlphaSweep, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["alpha", "re_norm_u", "re_norm_v", "value", "status", "saturated"])?;
    for (i, r) in s.rows.iter().enumerate() {
        let sat = s.saturation_index.is_some_and(|k| i >= k);
        out.write_record([
            r.alpha.to_string(),
            opt(r.re_norm_u),
            opt(r.re_norm_v),
            opt(r.value),
            r.status.clone(),
            sat.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
