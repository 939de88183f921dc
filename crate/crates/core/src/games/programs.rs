//! Conic programs of the game.
//!
//! For a side in `<=` form, the inner problem `max_{z in S} Re(z^H w)` has the
//! conic dual
//!
//! ```text
//! min  sum lam_k rhs_k + sum delta_i rhs_i + alpha ||beta|| + Re(rho)
//! s.t. w - sum lam_k a_k - sum delta_i a_i - sum F_t^T y_t - beta + [r; 0] - [rho_R 1; rho_I 1] = 0
//!      ||y_t|| <= coef_t delta_i,  lam, delta, r >= 0
//! ```
//!
//! over embedded vectors, where each chance row contributes one `y` per norm
//! term (`lambda` for the spread, `eta` for the mean ellipsoid). The primal
//! program pairs player 1's dual with `w = A v` and player 2's own set; the
//! dual program pairs player 2's dual with `w = -A^H u` and player 1's set.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::{GameSpec, NormMode, Side};
use crate::complex::embed_mat;
use crate::conic::{solve, ConicProgram, LinExpr, Sense, SolveStatus, DEFAULT_SOLVE_TOL};
use crate::error::{Error, Player, Result};
use crate::reformulate::TermKind;

/// Margin below which a strategy set is not considered strictly feasible.
pub const SLATER_TOL: f64 = 1e-8;

pub(crate) fn prefix(p: Player) -> &'static str {
    match p {
        Player::One => "p1",
        Player::Two => "p2",
    }
}

/// `rhs - a^T x`.
fn slack_expr(a: &DVector<f64>, x: &Range<usize>, rhs: f64) -> LinExpr {
    let mut e = LinExpr::constant(rhs);
    for (k, i) in x.clone().enumerate() {
        e.add_term(i, -a[k]);
    }
    e
}

fn mat_rows(f: &DMatrix<f64>, x: &Range<usize>) -> Vec<LinExpr> {
    (0..f.nrows())
        .map(|r| {
            let mut e = LinExpr::default();
            for (k, i) in x.clone().enumerate() {
                e.add_term(i, f[(r, k)]);
            }
            e
        })
        .collect()
}

/// Adds the strategy-set constraints of `side` on the embedded block `x`.
/// With `margin = Some(s)` every inequality must hold with slack `s`.
pub(crate) fn add_own_constraints(
    prog: &mut ConicProgram,
    side: &Side,
    x: &Range<usize>,
    margin: Option<usize>,
) {
    let tag = prefix(side.player);
    let n = side.dim();
    let shift = |e: LinExpr| match margin {
        Some(s) => e.term(s, -1.0),
        None => e,
    };
    let re = x.start..x.start + n;
    let im = x.start + n..x.end;

    prog.add_nonneg(
        &format!("{tag}.own.real_nonneg"),
        re.clone().map(|i| shift(LinExpr::var(i))).collect(),
    );
    let mut sum_re = LinExpr::constant(-1.0);
    let mut sum_im = LinExpr::default();
    for i in re.clone() {
        sum_re.add_term(i, 1.0);
    }
    for i in im.clone() {
        sum_im.add_term(i, 1.0);
    }
    prog.add_zero(&format!("{tag}.own.sum"), vec![sum_re, sum_im]);

    let alpha = side.set.alpha;
    match side.set.mode {
        NormMode::Total => prog.add_soc(
            &format!("{tag}.own.norm"),
            shift(LinExpr::constant(alpha)),
            x.clone().map(LinExpr::var).collect(),
        ),
        NormMode::Imag if alpha == 0.0 => prog.add_zero(
            &format!("{tag}.own.norm"),
            im.clone().map(LinExpr::var).collect(),
        ),
        NormMode::Imag => prog.add_soc(
            &format!("{tag}.own.norm"),
            shift(LinExpr::constant(alpha)),
            im.clone().map(LinExpr::var).collect(),
        ),
    }

    if !side.det.is_empty() {
        let rows = side
            .det
            .iter()
            .map(|(a, rhs)| shift(slack_expr(a, x, *rhs)))
            .collect();
        prog.add_nonneg(&format!("{tag}.own.det"), rows);
    }

    for (ci, c) in side.chance.iter().enumerate() {
        let mut head = shift(slack_expr(&c.a, x, c.rhs));
        match c.terms.as_slice() {
            [] => prog.add_nonneg(&format!("{tag}.own.chance.{ci}"), vec![head]),
            [t] => {
                let f = &t.factor * t.coef;
                prog.add_soc(&format!("{tag}.own.chance.{ci}"), head, mat_rows(&f, x));
            }
            terms => {
                let budget = prog.add_vars(&format!("{tag}.own.budget.{ci}"), terms.len());
                for (ti, t) in terms.iter().enumerate() {
                    let f = &t.factor * t.coef;
                    prog.add_soc(
                        &format!("{tag}.own.chance.{ci}.{ti}"),
                        LinExpr::var(budget.start + ti),
                        mat_rows(&f, x),
                    );
                    head.add_term(budget.start + ti, -1.0);
                }
                prog.add_nonneg(&format!("{tag}.own.chance.{ci}"), vec![head]);
            }
        }
    }
}

/// Adds the inner dual of `side` for the linear objective `w` (length `2n`).
/// Its objective is added to `prog` multiplied by `sign`.
pub(crate) fn add_inner_dual(prog: &mut ConicProgram, side: &Side, w: Vec<LinExpr>, sign: f64) {
    let tag = prefix(side.player);
    let n = side.dim();
    let mut stat = w;
    debug_assert_eq!(stat.len(), 2 * n);

    let lam_det = prog.add_vars(&format!("{tag}.lam_det"), side.det.len());
    for (k, (a, rhs)) in side.det.iter().enumerate() {
        let v = lam_det.start + k;
        prog.add_objective(v, sign * rhs);
        for (i, row) in stat.iter_mut().enumerate() {
            row.add_term(v, -a[i]);
        }
    }
    if !side.det.is_empty() {
        prog.add_nonneg(
            &format!("{tag}.lam_det.nonneg"),
            lam_det.clone().map(LinExpr::var).collect(),
        );
    }

    let delta = prog.add_vars(&format!("{tag}.delta"), side.chance.len());
    for (ci, c) in side.chance.iter().enumerate() {
        let d = delta.start + ci;
        prog.add_objective(d, sign * c.rhs);
        for (i, row) in stat.iter_mut().enumerate() {
            row.add_term(d, -c.a[i]);
        }
        for t in &c.terms {
            let name = match t.kind {
                TermKind::Spread => format!("{tag}.lambda.{ci}"),
                TermKind::MeanEllipsoid => format!("{tag}.eta.{ci}"),
            };
            let y = prog.add_vars(&name, t.factor.nrows());
            // F^T y enters the stationarity rows.
            for (i, row) in stat.iter_mut().enumerate() {
                for (r, yv) in y.clone().enumerate() {
                    row.add_term(yv, -t.factor[(r, i)]);
                }
            }
            prog.add_soc(
                &format!("{name}.cone"),
                LinExpr::default().term(d, t.coef),
                y.map(LinExpr::var).collect(),
            );
        }
    }
    if !side.chance.is_empty() {
        prog.add_nonneg(
            &format!("{tag}.delta.nonneg"),
            delta.clone().map(LinExpr::var).collect(),
        );
    }

    let r = prog.add_vars(&format!("{tag}.r"), n);
    for (i, rv) in r.clone().enumerate() {
        stat[i].add_term(rv, 1.0);
    }
    prog.add_nonneg(&format!("{tag}.r.nonneg"), r.map(LinExpr::var).collect());

    let rho = prog.add_vars(&format!("{tag}.rho"), 2);
    prog.add_objective(rho.start, sign);
    for (i, row) in stat.iter_mut().enumerate() {
        row.add_term(if i < n { rho.start } else { rho.start + 1 }, -1.0);
    }

    let alpha = side.set.alpha;
    let (beta_rows, capped) = match side.set.mode {
        NormMode::Total => (0..2 * n, true),
        NormMode::Imag => (n..2 * n, alpha > 0.0),
    };
    let beta = prog.add_vars(&format!("{tag}.beta"), beta_rows.len());
    for (k, i) in beta_rows.enumerate() {
        stat[i].add_term(beta.start + k, -1.0);
    }
    if capped {
        let s = prog.add_vars(&format!("{tag}.beta_norm"), 1).start;
        prog.add_objective(s, sign * alpha);
        prog.add_soc(
            &format!("{tag}.beta.cone"),
            LinExpr::var(s),
            beta.map(LinExpr::var).collect(),
        );
    }

    prog.add_zero(&format!("{tag}.stationarity"), stat);
}

pub(crate) fn primal_program(g: &GameSpec, s1: &Side, s2: &Side) -> ConicProgram {
    let e = embed_mat(&g.payoff);
    let mut prog = ConicProgram::new(Sense::Min);
    let v = prog.add_vars("v", 2 * s2.dim());
    add_own_constraints(&mut prog, s2, &v, None);
    let w = (0..e.nrows())
        .map(|i| {
            let mut row = LinExpr::default();
            for (k, j) in v.clone().enumerate() {
                row.add_term(j, e[(i, k)]);
            }
            row
        })
        .collect();
    add_inner_dual(&mut prog, s1, w, 1.0);
    prog
}

pub(crate) fn dual_program(g: &GameSpec, s1: &Side, s2: &Side) -> ConicProgram {
    let e = embed_mat(&g.payoff);
    let mut prog = ConicProgram::new(Sense::Max);
    let u = prog.add_vars("u", 2 * s1.dim());
    add_own_constraints(&mut prog, s1, &u, None);
    let w = (0..e.ncols())
        .map(|i| {
            let mut row = LinExpr::default();
            for (k, j) in u.clone().enumerate() {
                row.add_term(j, -e[(k, i)]);
            }
            row
        })
        .collect();
    add_inner_dual(&mut prog, s2, w, -1.0);
    prog
}

/// Largest `s <= 1` such that every inequality of the player's set holds with slack `s`.
pub fn slater_margin(g: &GameSpec, player: Player) -> Result<f64> {
    let side = Side::new(player, g.player(player))?;
    side_slater_margin(&side)
}

pub(crate) fn side_slater_margin(side: &Side) -> Result<f64> {
    let mut prog = ConicProgram::new(Sense::Max);
    let x = prog.add_vars("x", 2 * side.dim());
    let s = prog.add_vars("margin", 1).start;
    prog.add_objective(s, 1.0);
    prog.add_nonneg("margin.cap", vec![LinExpr::constant(1.0).term(s, -1.0)]);
    add_own_constraints(&mut prog, side, &x, Some(s));
    let sol = solve(&prog, DEFAULT_SOLVE_TOL)?;
    match sol.status {
        SolveStatus::Optimal => Ok(sol.x[s]),
        SolveStatus::Infeasible => Ok(f64::NEG_INFINITY),
        other => Err(Error::Solver(format!("{other:?} in strict-feasibility check"))),
    }
}

pub(crate) fn check_slater(side: &Side) -> Result<()> {
    let margin = side_slater_margin(side)?;
    if margin > SLATER_TOL {
        Ok(())
    } else {
        Err(Error::SlaterViolated {
            player: side.player,
            margin,
        })
    }
}

pub(crate) fn sides(g: &GameSpec) -> Result<(Side, Side)> {
    g.validate()?;
    Ok((
        Side::new(Player::One, &g.player1)?,
        Side::new(Player::Two, &g.player2)?,
    ))
}

/// Program whose optimum is the game value, minimizing over `v` and player 1's multipliers.
pub fn build_primal(g: &GameSpec) -> Result<ConicProgram> {
    let (s1, s2) = sides(g)?;
    check_slater(&s1)?;
    check_slater(&s2)?;
    Ok(primal_program(g, &s1, &s2))
}

/// Program whose optimum is the game value, maximizing over `u` and player 2's multipliers.
pub fn build_dual(g: &GameSpec) -> Result<ConicProgram> {
    let (s1, s2) = sides(g)?;
    check_slater(&s1)?;
    check_slater(&s2)?;
    Ok(dual_program(g, &s1, &s2))
}
