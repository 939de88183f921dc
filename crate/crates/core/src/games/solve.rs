use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::certify::CertificationReport;
use super::programs::{check_slater, dual_program, prefix, primal_program, sides};
use super::{GameSpec, Side, FEAS_TOL};
use crate::complex::{herm_inner, serde_c64, unembed_vec, CVec, C64};
use crate::conic::{
    ClarabelSolver, ConicProgram, ConicSolution, ConicSolver, KktResiduals, SolveStatus,
    DEFAULT_SOLVE_TOL,
};
use crate::error::{Error, Result};

/// `solve_game` fails when `|primal - dual| > DEFAULT_GAP_FACTOR * (1 + |value|)`.
pub const DEFAULT_GAP_FACTOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub gap_factor: f64,
    /// Skip the strict-feasibility pre-check.
    pub skip_slater: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_SOLVE_TOL,
            gap_factor: DEFAULT_GAP_FACTOR,
            skip_slater: false,
        }
    }
}

/// Multipliers of one player's inner problem, in complex form where the
/// underlying vector is complex.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SideMultipliers {
    /// Deterministic rows.
    pub lambda_det: Vec<f64>,
    /// One per chance row.
    pub delta: Vec<f64>,
    /// Spread-cone multipliers per chance row (empty when the row has no spread term).
    pub lambda: Vec<CVec>,
    /// Mean-ellipsoid multipliers per chance row (empty unless unknown moments).
    pub eta: Vec<CVec>,
    /// Norm-cap multiplier.
    pub beta: CVec,
    /// Multiplier of `sum z = 1`; enters the objective through `Re(rho)`.
    #[serde(with = "serde_c64")]
    pub rho: C64,
    /// Multipliers of `Re z >= 0`.
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub u_star: CVec,
    pub v_star: CVec,
    /// Midpoint of the two program optima.
    pub value: f64,
    /// `u*^H A v*`.
    #[serde(with = "serde_c64")]
    pub value_complex: C64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub duality_gap: f64,
    pub player1: SideMultipliers,
    pub player2: SideMultipliers,
    pub primal_residuals: KktResiduals,
    pub dual_residuals: KktResiduals,
    pub u_feasible: bool,
    pub v_feasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certification: Option<CertificationReport>,
}

pub fn solve_game(g: &GameSpec) -> Result<Equilibrium> {
    solve_game_with(g, &ClarabelSolver::default(), SolveOptions::default())
}

fn require_optimal(s: &ConicSolution, what: &str) -> Result<()> {
    if s.status == SolveStatus::Optimal {
        Ok(())
    } else {
        Err(Error::Solver(format!(
            "{:?} in {what} program (backend status {}, residuals {:.2e}/{:.2e}/{:.2e})",
            s.status, s.solver_status, s.residuals.primal, s.residuals.dual, s.residuals.gap
        )))
    }
}

pub fn solve_game_with(
    g: &GameSpec,
    solver: &dyn ConicSolver,
    opts: SolveOptions,
) -> Result<Equilibrium> {
    let (s1, s2) = sides(g)?;
    if !opts.skip_slater {
        check_slater(&s1)?;
        check_slater(&s2)?;
    }
    let pp = primal_program(g, &s1, &s2);
    let dp = dual_program(g, &s1, &s2);
    let (ps, ds) = std::thread::scope(|scope| {
        let h = scope.spawn(|| solver.solve(&pp, opts.tol));
        let ds = solver.solve(&dp, opts.tol);
        (h.join().expect("primal solve panicked"), ds)
    });
    let (ps, ds) = (ps?, ds?);
    require_optimal(&ps, "primal")?;
    require_optimal(&ds, "dual")?;

    let primal_value = ps.objective;
    let dual_value = ds.objective;
    let value = 0.5 * (primal_value + dual_value);
    let gap = (primal_value - dual_value).abs();
    let allowed = opts.gap_factor * (1.0 + value.abs());
    if gap > allowed {
        return Err(Error::GapTooLarge { gap, allowed });
    }

    let u_star = strategy_block(&dp, &ds, "u")?;
    let v_star = strategy_block(&pp, &ps, "v")?;
    let value_complex = herm_inner(&u_star, &g.payoff.mul_vec(&v_star)?)?;
    let u_feasible = s1.contains(&u_star, FEAS_TOL)?;
    let v_feasible = s2.contains(&v_star, FEAS_TOL)?;

    Ok(Equilibrium {
        u_star,
        v_star,
        value,
        value_complex,
        primal_value,
        dual_value,
        duality_gap: gap,
        player1: side_multipliers(&pp, &ps, &s1)?,
        player2: side_multipliers(&dp, &ds, &s2)?,
        primal_residuals: ps.residuals,
        dual_residuals: ds.residuals,
        u_feasible,
        v_feasible,
        certification: None,
    })
}

fn strategy_block(p: &ConicProgram, s: &ConicSolution, name: &str) -> Result<CVec> {
    let x = s
        .var_values(p, name)
        .ok_or_else(|| Error::MalformedProgram(format!("missing variable block {name}")))?;
    unembed_vec(&DVector::from_column_slice(x))
}

/// Player 1's strategy read from the multipliers of the primal program's
/// stationarity rows (`u = -y`).
pub fn u_from_stationarity_duals(p: &ConicProgram, s: &ConicSolution) -> Result<CVec> {
    let y = s
        .block_dual(p, "p1.stationarity")
        .ok_or_else(|| Error::MalformedProgram("missing stationarity block".into()))?;
    unembed_vec(&DVector::from_iterator(y.len(), y.iter().map(|v| -v)))
}

fn side_multipliers(p: &ConicProgram, s: &ConicSolution, side: &Side) -> Result<SideMultipliers> {
    let tag = prefix(side.player);
    let get = |name: &str| s.var_values(p, name).map(<[f64]>::to_vec).unwrap_or_default();
    let complex = |name: &str| -> Result<CVec> {
        let v = get(name);
        if v.is_empty() {
            Ok(CVec::default())
        } else {
            unembed_vec(&DVector::from_vec(v))
        }
    };
    let n = side.dim();
    let beta_raw = get(&format!("{tag}.beta"));
    let beta = if beta_raw.len() == 2 * n {
        unembed_vec(&DVector::from_vec(beta_raw))?
    } else {
        CVec(beta_raw.iter().map(|&b| C64::new(0.0, b)).collect())
    };
    let rho = get(&format!("{tag}.rho"));
    let chance = side.chance.len();
    Ok(SideMultipliers {
        lambda_det: get(&format!("{tag}.lam_det")),
        delta: get(&format!("{tag}.delta")),
        lambda: (0..chance)
            .map(|i| complex(&format!("{tag}.lambda.{i}")))
            .collect::<Result<_>>()?,
        eta: (0..chance)
            .map(|i| complex(&format!("{tag}.eta.{i}")))
            .collect::<Result<_>>()?,
        beta,
        rho: C64::new(rho[0], -rho[1]),
        r: get(&format!("{tag}.r")),
    })
}
