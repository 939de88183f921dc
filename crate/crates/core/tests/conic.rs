use cczsg::conic::{kkt_residuals, solve, ConicProgram, LinExpr, Sense, SolveStatus};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

// Random bounded LP in three variables: min c.x, A x <= b, 0 <= x <= 5.
#[derive(Debug, Clone)]
struct Lp {
    c: [f64; 3],
    a: Vec<[f64; 3]>,
    b: Vec<f64>,
}

fn lp() -> impl Strategy<Value = Lp> {
    (
        prop::array::uniform3(-3.0..3.0f64),
        prop::collection::vec((prop::array::uniform3(-2.0..2.0f64), 0.5..4.0f64), 1..6),
    )
        .prop_map(|(c, rows)| Lp {
            c,
            a: rows.iter().map(|r| r.0).collect(),
            b: rows.iter().map(|r| r.1).collect(),
        })
}

impl Lp {
    fn all_rows(&self) -> Vec<([f64; 3], f64)> {
        let mut rows: Vec<_> = self.a.iter().copied().zip(self.b.iter().copied()).collect();
        for k in 0..3 {
            let mut e = [0.0; 3];
            e[k] = 1.0;
            rows.push((e, 5.0));
            e[k] = -1.0;
            rows.push((e, 0.0));
        }
        rows
    }

    fn program(&self, sense: Sense) -> ConicProgram {
        let mut p = ConicProgram::new(sense);
        let x = p.add_vars("x", 3);
        let s = if sense == Sense::Min { 1.0 } else { -1.0 };
        for k in 0..3 {
            p.add_objective(x.start + k, s * self.c[k]);
        }
        let rows = self
            .all_rows()
            .into_iter()
            .map(|(a, b)| {
                let mut e = LinExpr::constant(b);
                for k in 0..3 {
                    e.add_term(x.start + k, -a[k]);
                }
                e
            })
            .collect();
        p.add_nonneg("rows", rows);
        p
    }

    /// Vertex enumeration: the optimum of a bounded feasible LP sits at a vertex.
    fn oracle(&self) -> f64 {
        let rows = self.all_rows();
        let mut best = f64::INFINITY;
        let n = rows.len();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let m = Matrix3::from_rows(&[
                        Vector3::from(rows[i].0).transpose(),
                        Vector3::from(rows[j].0).transpose(),
                        Vector3::from(rows[k].0).transpose(),
                    ]);
                    let Some(inv) = m.try_inverse() else { continue };
                    let x = inv * Vector3::new(rows[i].1, rows[j].1, rows[k].1);
                    let ok = rows
                        .iter()
                        .all(|(a, b)| a[0] * x[0] + a[1] * x[1] + a[2] * x[2] <= b + 1e-9);
                    if ok {
                        best = best.min(self.c[0] * x[0] + self.c[1] * x[1] + self.c[2] * x[2]);
                    }
                }
            }
        }
        best
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_matches_vertex_enumeration(l in lp()) {
        let s = solve(&l.program(Sense::Min), 1e-8).unwrap();
        prop_assert_eq!(s.status, SolveStatus::Optimal);
        let v = l.oracle();
        prop_assert!((s.objective - v).abs() <= 1e-7 * (1.0 + v.abs()), "{} vs {}", s.objective, v);
        // Weak duality with a small gap.
        prop_assert!(s.dual_objective <= s.objective + 1e-7 * (1.0 + v.abs()));
        prop_assert!(kkt_residuals(&l.program(Sense::Min), &s).max() <= 1e-7);
    }

    #[test]
    fn max_sense_is_the_mirror(l in lp()) {
        let s = solve(&l.program(Sense::Max), 1e-8).unwrap();
        let v = l.oracle();
        prop_assert!((s.objective + v).abs() <= 1e-7 * (1.0 + v.abs()));
    }

    #[test]
    fn objective_scaling_scales_the_value(l in lp(), k in 0.01..100.0f64) {
        let v = solve(&l.program(Sense::Min), 1e-8).unwrap().objective;
        let mut scaled = l.clone();
        scaled.c = l.c.map(|c| c * k);
        let w = solve(&scaled.program(Sense::Min), 1e-8).unwrap().objective;
        prop_assert!((w - k * v).abs() <= 1e-6 * (1.0 + k * v.abs()));
    }

    #[test]
    fn permutation_leaves_the_value(l in lp(), perm in Just(vec![0usize, 1, 2]).prop_shuffle()) {
        let p = l.program(Sense::Min);
        let a = solve(&p, 1e-8).unwrap();
        let q = p.permuted(&perm).unwrap();
        let b = solve(&q, 1e-8).unwrap();
        prop_assert!((a.objective - b.objective).abs() <= 1e-7 * (1.0 + a.objective.abs()));
        for i in 0..3 {
            prop_assert!((q.c[perm[i]] - p.c[i]).abs() == 0.0);
        }
    }

    // min c.x s.t. ||x - a|| <= r has x = a - r c/|c| and value c.a - r|c|.
    #[test]
    fn ball_socp_has_closed_form(
        c in prop::collection::vec(-3.0..3.0f64, 1..8),
        shift in prop::collection::vec(-3.0..3.0f64, 8),
        r in 0.1..5.0f64,
    ) {
        let n = c.len();
        let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(cn > 1e-3);
        let mut p = ConicProgram::new(Sense::Min);
        let x = p.add_vars("x", n);
        for k in 0..n {
            p.add_objective(x.start + k, c[k]);
        }
        let ys = (0..n).map(|k| LinExpr::var(x.start + k).plus(-shift[k])).collect();
        p.add_soc("ball", LinExpr::constant(r), ys);
        let s = solve(&p, 1e-8).unwrap();
        let expected = c.iter().zip(&shift).map(|(a, b)| a * b).sum::<f64>() - r * cn;
        prop_assert!((s.objective - expected).abs() <= 1e-6 * (1.0 + expected.abs()));
        for k in 0..n {
            prop_assert!((s.x[k] - (shift[k] - r * c[k] / cn)).abs() <= 1e-5 * (1.0 + r));
        }
        prop_assert!(kkt_residuals(&p, &s).max() <= 10.0 * 1e-8);
    }
}

#[test]
fn perturbed_primal_shows_in_the_residual() {
    let mut p = ConicProgram::new(Sense::Min);
    let x = p.add_vars("x", 2);
    p.add_objective(x.start, 1.0);
    p.add_objective(x.start + 1, 1.0);
    p.add_zero("sum", vec![LinExpr::var(0).term(1, 1.0).plus(-1.0)]);
    p.add_nonneg("pos", vec![LinExpr::var(0), LinExpr::var(1)]);
    let mut s = solve(&p, 1e-8).unwrap();
    assert!(kkt_residuals(&p, &s).primal <= 1e-8);
    s.x[0] += 1e-3;
    let r = kkt_residuals(&p, &s);
    // Row scale is the largest constant, 1.
    assert!((r.primal - 1e-3 / 2.0).abs() < 1e-8, "{}", r.primal);
}
