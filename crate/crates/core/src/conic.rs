//! Real second-order cone programs in the form
//!
//! ```text
//! minimize  c^T x   subject to  G_k x + h_k in K_k
//! ```
//!
//! with `K_k` a zero cone, a non-negative orthant or a second-order cone
//! `{(t, y) : ||y|| <= t}`. Maximization is stored by negating `c`.
//! The dual is `maximize -h^T y` subject to `G^T y = c`, `y in K*`.

use std::collections::BTreeMap;
use std::ops::Range;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default solve tolerance on the relative KKT residuals.
pub const DEFAULT_SOLVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Min,
    Max,
}

/// Affine expression `sum coef * x[index] + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(i: usize) -> Self {
        LinExpr {
            terms: vec![(i, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, i: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((i, coef));
        }
        self
    }

    pub fn add_term(&mut self, i: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((i, coef));
        }
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Zero,
    Nonneg,
    /// First row is `t`, the remaining rows are `y` with `||y|| <= t`.
    Soc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeBlock {
    pub name: String,
    pub kind: ConeKind,
    pub rows: Vec<LinExpr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub start: usize,
    pub len: usize,
}

impl VarBlock {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Program container. `c` is always the minimization objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub sense: Sense,
    pub c: Vec<f64>,
    pub blocks: Vec<ConeBlock>,
    pub vars: BTreeMap<String, VarBlock>,
}

impl ConicProgram {
    pub fn new(sense: Sense) -> Self {
        ConicProgram {
            sense,
            c: Vec::new(),
            blocks: Vec::new(),
            vars: BTreeMap::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    /// Appends a named block of `len` free variables.
    pub fn add_vars(&mut self, name: &str, len: usize) -> Range<usize> {
        let start = self.c.len();
        self.c.resize(start + len, 0.0);
        self.vars.insert(name.to_string(), VarBlock { start, len });
        start..start + len
    }

    pub fn var_range(&self, name: &str) -> Option<Range<usize>> {
        self.vars.get(name).map(VarBlock::range)
    }

    /// Adds `coef * x[i]` to the objective in the program's own sense.
    pub fn add_objective(&mut self, i: usize, coef: f64) {
        let s = match self.sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        self.c[i] += s * coef;
    }

    pub fn add_block(&mut self, name: &str, kind: ConeKind, rows: Vec<LinExpr>) {
        self.blocks.push(ConeBlock {
            name: name.to_string(),
            kind,
            rows,
        });
    }

    pub fn add_zero(&mut self, name: &str, rows: Vec<LinExpr>) {
        self.add_block(name, ConeKind::Zero, rows);
    }

    pub fn add_nonneg(&mut self, name: &str, rows: Vec<LinExpr>) {
        self.add_block(name, ConeKind::Nonneg, rows);
    }

    /// `||ys|| <= t`.
    pub fn add_soc(&mut self, name: &str, t: LinExpr, ys: Vec<LinExpr>) {
        let mut rows = Vec::with_capacity(ys.len() + 1);
        rows.push(t);
        rows.extend(ys);
        self.add_block(name, ConeKind::Soc, rows);
    }

    pub fn num_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.rows.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedProgram("non-finite objective".into()));
        }
        for (name, vb) in &self.vars {
            if vb.start + vb.len > n {
                return Err(Error::MalformedProgram(format!("variable block {name} out of range")));
            }
        }
        for b in &self.blocks {
            if b.kind == ConeKind::Soc && b.rows.is_empty() {
                return Err(Error::MalformedProgram(format!("empty cone block {}", b.name)));
            }
            for r in &b.rows {
                if !r.constant.is_finite() {
                    return Err(Error::MalformedProgram(format!("non-finite row in {}", b.name)));
                }
                for &(i, c) in &r.terms {
                    if i >= n {
                        return Err(Error::MalformedProgram(format!(
                            "block {} references variable {i} of {n}",
                            b.name
                        )));
                    }
                    if !c.is_finite() {
                        return Err(Error::MalformedProgram(format!(
                            "non-finite coefficient in {}",
                            b.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Objective value at `x` in the program's own sense.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let v: f64 = self.c.iter().zip(x).map(|(c, x)| c * x).sum();
        match self.sense {
            Sense::Min => v,
            Sense::Max => -v,
        }
    }

    /// Same program with variable `i` moved to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<ConicProgram> {
        let n = self.num_vars();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&j| j >= n || std::mem::replace(&mut seen[j], true)) {
            return Err(Error::Invalid("not a permutation of the variables".into()));
        }
        let mut c = vec![0.0; n];
        for i in 0..n {
            c[perm[i]] = self.c[i];
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| ConeBlock {
                name: b.name.clone(),
                kind: b.kind,
                rows: b
                    .rows
                    .iter()
                    .map(|r| LinExpr {
                        terms: r.terms.iter().map(|&(i, v)| (perm[i], v)).collect(),
                        constant: r.constant,
                    })
                    .collect(),
            })
            .collect();
        // Named blocks lose contiguity under a general permutation; keep the names only
        // for blocks that remain contiguous.
        let vars = self
            .vars
            .iter()
            .filter_map(|(k, vb)| {
                let mapped: Vec<usize> = vb.range().map(|i| perm[i]).collect();
                let start = *mapped.first()?;
                mapped
                    .iter()
                    .enumerate()
                    .all(|(o, &j)| j == start + o)
                    .then(|| (k.clone(), VarBlock { start, len: vb.len }))
            })
            .collect();
        Ok(ConicProgram {
            sense: self.sense,
            c,
            blocks,
            vars,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Relative KKT residuals, computed from the program data and the returned pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Multipliers per cone block, same order and lengths as the blocks.
    pub duals: Vec<Vec<f64>>,
    /// Objective in the program's own sense.
    pub objective: f64,
    /// Dual objective in the program's own sense.
    pub dual_objective: f64,
    pub residuals: KktResiduals,
    pub iterations: u32,
    pub solver_status: String,
}

impl ConicSolution {
    pub fn block_dual<'a>(&'a self, p: &ConicProgram, name: &str) -> Option<&'a [f64]> {
        p.blocks
            .iter()
            .position(|b| b.name == name)
            .map(|k| self.duals[k].as_slice())
    }

    pub fn var_values<'a>(&'a self, p: &ConicProgram, name: &str) -> Option<&'a [f64]> {
        p.var_range(name).map(|r| &self.x[r])
    }
}

fn inf_norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Independent recomputation of primal feasibility, dual feasibility and gap.
pub fn kkt_residuals(p: &ConicProgram, s: &ConicSolution) -> KktResiduals {
    let n = p.num_vars();
    let x = &s.x;
    let mut pviol: f64 = 0.0;
    let mut dviol: f64 = 0.0;
    let mut row_scale: f64 = 0.0;
    let mut gty = vec![0.0; n];
    let mut hty = 0.0;
    for (b, y) in p.blocks.iter().zip(&s.duals) {
        let vals: Vec<f64> = b.rows.iter().map(|r| r.eval(x)).collect();
        for r in &b.rows {
            row_scale = row_scale.max(r.constant.abs());
        }
        for (r, &yi) in b.rows.iter().zip(y) {
            for &(i, c) in &r.terms {
                gty[i] += c * yi;
            }
            hty += r.constant * yi;
        }
        match b.kind {
            ConeKind::Zero => pviol = pviol.max(inf_norm(vals.iter().copied())),
            ConeKind::Nonneg => {
                for (&v, &yi) in vals.iter().zip(y) {
                    pviol = pviol.max(-v);
                    dviol = dviol.max(-yi);
                }
            }
            ConeKind::Soc => {
                let t = vals[0];
                let r = vals[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                pviol = pviol.max(r - t);
                let yt = y[0];
                let yr = y[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                dviol = dviol.max(yr - yt);
            }
        }
    }
    let cnorm = inf_norm(p.c.iter().copied());
    let stat = inf_norm(gty.iter().zip(&p.c).map(|(g, c)| g - c));
    let gnorm = inf_norm(gty.iter().copied());
    let pobj: f64 = p.c.iter().zip(x).map(|(c, x)| c * x).sum();
    let dobj = -hty;
    KktResiduals {
        primal: pviol.max(0.0) / (1.0 + row_scale),
        dual: stat.max(dviol.max(0.0)) / (1.0 + cnorm.max(gnorm)),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs().min(dobj.abs())),
    }
}

/// Solver boundary.
pub trait ConicSolver: Sync {
    fn solve(&self, p: &ConicProgram, tol: f64) -> Result<ConicSolution>;
}

/// Interior-point backend built on the Clarabel solver.
#[derive(Debug, Clone)]
pub struct ClarabelSolver {
    pub max_iter: u32,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        ClarabelSolver { max_iter: 200 }
    }
}

impl ClarabelSolver {
    fn attempt(&self, p: &ConicProgram, inner_tol: f64, reg: f64) -> Result<(SolverStatus, Vec<f64>, Vec<f64>, u32)> {
        let n = p.num_vars();
        let m = p.num_rows();
        let mut ti = Vec::new();
        let mut tj = Vec::new();
        let mut tv = Vec::new();
        let mut b = Vec::with_capacity(m);
        let mut cones = Vec::with_capacity(p.blocks.len());
        let mut row = 0;
        for blk in &p.blocks {
            for r in &blk.rows {
                for &(i, c) in &r.terms {
                    ti.push(row);
                    tj.push(i);
                    tv.push(-c);
                }
                b.push(r.constant);
                row += 1;
            }
            let k = blk.rows.len();
            if k == 0 {
                continue;
            }
            cones.push(match blk.kind {
                ConeKind::Zero => SupportedConeT::ZeroConeT(k),
                ConeKind::Nonneg => SupportedConeT::NonnegativeConeT(k),
                ConeKind::Soc => SupportedConeT::SecondOrderConeT(k),
            });
        }
        let a = CscMatrix::new_from_triplets(m, n, ti, tj, tv);
        let pm = CscMatrix::<f64>::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_gap_abs(inner_tol)
            .tol_gap_rel(inner_tol)
            .tol_feas(inner_tol)
            .tol_ktratio(inner_tol.max(1e-10) * 1e2)
            .static_regularization_constant(reg)
            .build()
            .map_err(|e| Error::Solver(format!("settings: {e}")))?;
        let mut solver = DefaultSolver::new(&pm, &p.c, &a, &b, &cones, settings)
            .map_err(|e| Error::MalformedProgram(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        Ok((sol.status, sol.x.clone(), sol.z.clone(), sol.iterations))
    }
}

fn split_duals(p: &ConicProgram, z: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(p.blocks.len());
    let mut k = 0;
    for b in &p.blocks {
        out.push(z[k..k + b.rows.len()].to_vec());
        k += b.rows.len();
    }
    out
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, p: &ConicProgram, tol: f64) -> Result<ConicSolution> {
        p.validate()?;
        if !(tol > 0.0) {
            return Err(Error::Invalid(format!("solve tolerance must be > 0, got {tol}")));
        }
        let sign = match p.sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        let mut last = None;
        // Degenerate game programs can stall the factorization at the default
        // static regularization; retry with a stronger one before tightening.
        for (inner, reg) in [(tol / 10.0, 1e-8), (tol / 10.0, 1e-7), (tol / 10.0, 1e-6), (tol / 1e3, 1e-7)] {
            let (status, x, z, iters) = self.attempt(p, inner, reg)?;
            let duals = split_duals(p, &z);
            let mut s = ConicSolution {
                status: SolveStatus::NumericalFailure,
                objective: p.objective_at(&x),
                x,
                duals,
                dual_objective: 0.0,
                residuals: KktResiduals::default(),
                iterations: iters,
                solver_status: format!("{status:?}"),
            };
            let hty: f64 = p
                .blocks
                .iter()
                .flat_map(|b| b.rows.iter())
                .zip(&z)
                .map(|(r, y)| r.constant * y)
                .sum();
            s.dual_objective = -sign * hty;
            s.residuals = kkt_residuals(p, &s);
            match status {
                SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                    s.status = SolveStatus::Infeasible;
                    return Ok(s);
                }
                SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                    s.status = SolveStatus::Unbounded;
                    return Ok(s);
                }
                _ => {}
            }
            if s.residuals.max() <= tol && s.x.iter().all(|v| v.is_finite()) {
                s.status = SolveStatus::Optimal;
                return Ok(s);
            }
            last = Some(s);
        }
        Ok(last.expect("at least one attempt"))
    }
}

/// Solves with the default backend.
pub fn solve(p: &ConicProgram, tol: f64) -> Result<ConicSolution> {
    ClarabelSolver::default().solve(p, tol)
}
