mod common;

use cczsg::games::{solve_game, GameSpec, NormMode, PlayerSpec};
use cczsg::instances::{gen_instance, published_payoff, txjam_game, InstanceRecipe, SideSize};
use cczsg::moments::{AmbiguityModel, GaussianRowSampler, ModelKind, QuantileFamily};
use cczsg::montecarlo::{
    binomial_band, calibrate, calibrate_with, sweep_alpha, sweep_alpha_with, sweep_p,
    write_calibration_csv, write_sweep_alpha_csv, write_sweep_p_csv,
};
use cczsg::{CMat, Error};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn active_gaussian_row_hits_its_level() {
    let p = 0.95;
    for seed in 0..3 {
        let a = active_row_game(seed, 4, AmbiguityModel::gaussian(), p);
        let e = solve_game(&a.game).unwrap();
        let r = calibrate(&a.game, &e, 10_000, 10, seed).unwrap();
        assert_eq!(r.rows.len(), 1);
        let row = &r.rows[0];
        assert!((row.target - 0.05).abs() < 1e-12);
        assert!((row.mean_ratio - 0.05).abs() <= 0.007, "{row:?}");
        assert!(row.exact);

        // Second route: draw whole complex rows instead of the scalar projection.
        let s = GaussianRowSampler::new(&a.row.moments()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                let m = s.draw(&mut rng);
                m.dotu(&e.u_star).unwrap().re > a.rhs
            })
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.05).abs() <= binomial_band(0.05, n), "{rate}");
    }
}

#[test]
fn known_moments_row_is_conservative_under_gaussian_draws() {
    for &p in &[0.6, 0.8, 0.95] {
        let a = active_row_game(9, 3, AmbiguityModel::Known, p);
        let e = solve_game(&a.game).unwrap();
        assert!(matches!(calibrate(&a.game, &e, 10, 1, 0), Err(Error::UnsampleableModel { .. })));
        let r = calibrate_with(&a.game, &e, 10_000, 10, 3, Some(QuantileFamily::Gaussian)).unwrap();
        let row = &r.rows[0];
        assert!(!row.exact);
        assert!(row.max_ratio <= 1.0 - p + binomial_band(1.0 - p, 10_000), "{row:?}");
    }
}

#[test]
fn slack_row_violates_at_the_predicted_rate() {
    // Relax the active row: its violation rate drops to 1 - Phi((rhs' - mean) / sd).
    let p = 0.8;
    let mut a = active_row_game(4, 3, AmbiguityModel::gaussian(), p);
    let e = solve_game(&a.game).unwrap();
    let sd = a.row.variance(&e.u_star).sqrt();
    let new_rhs = a.rhs + 0.5 * sd;
    if let Some(cczsg::games::ConstraintRow::Chance { rhs, .. }) = a.game.player1.rows.first_mut() {
        *rhs = new_rhs;
    }
    let r = calibrate(&a.game, &e, 10_000, 10, 5).unwrap();
    let predicted = 1.0 - normal_cdf((new_rhs - a.row.mean(&e.u_star)) / sd);
    assert!(predicted < 1.0 - p);
    assert!((r.rows[0].mean_ratio - predicted).abs() <= binomial_band(predicted, 10_000));
}

#[test]
fn huge_slack_never_violates() {
    let mut a = active_row_game(2, 3, AmbiguityModel::gaussian(), 0.9);
    if let Some(cczsg::games::ConstraintRow::Chance { rhs, .. }) = a.game.player1.rows.first_mut() {
        *rhs += 1e3;
    }
    let e = solve_game(&a.game).unwrap();
    let r = calibrate(&a.game, &e, 1000, 10, 1).unwrap();
    assert_eq!(r.rows[0].max_ratio, 0.0);
}

#[test]
fn calibration_is_deterministic_and_csv_is_stable() {
    let g = gen_instance(&InstanceRecipe::new(SideSize::new(6, 3, 3), SideSize::new(5, 2, 2), ModelKind::Ces(QuantileFamily::StudentT { nu: 5.0 }), 0.8, 3)).unwrap();
    let e = solve_game(&g).unwrap();
    let a = calibrate(&g, &e, 500, 10, 42).unwrap();
    let b = calibrate(&g, &e, 500, 10, 42).unwrap();
    assert_eq!(a.rows.len(), 5);
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    write_calibration_csv(&a, &mut ca).unwrap();
    write_calibration_csv(&b, &mut cb).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("constraint_id,target,mean_ratio,std_ratio,max_ratio\n"));
    assert_eq!(text.lines().count(), 6);
    for r in &a.rows {
        assert!((0.0..=1.0).contains(&r.mean_ratio) && (0.0..=1.0).contains(&r.max_ratio));
    }
}

#[test]
fn sweeps_keep_grid_order_and_report_failures() {
    let g = gen_instance(&InstanceRecipe::new(SideSize::new(6, 2, 2), SideSize::new(5, 2, 2), ModelKind::Ces(QuantileFamily::Gaussian), 0.8, 6)).unwrap();
    assert!(sweep_p(&g, &[]).is_empty());
    let grid = [0.6, 0.7, 0.8, 0.95, 1.5];
    let rows = sweep_p(&g, &grid);
    assert_eq!(rows.iter().map(|r| r.p).collect::<Vec<_>>(), grid);
    assert!(rows[..4].iter().all(|r| r.status == "ok"));
    assert_ne!(rows[4].status, "ok");
    assert!(rows[4].value.is_none());
    let mut out = Vec::new();
    write_sweep_p_csv(&rows, &mut out).unwrap();
    assert!(String::from_utf8(out).unwrap().starts_with("p,value,gap,solve_time,status\n"));

    assert!(sweep_alpha(&g, &[1.0, 0.5], 0.8).is_err());
}

#[test]
fn alpha_below_the_total_norm_floor_is_infeasible() {
    let g = txjam_game(published_payoff(), 1.0, NormMode::Total);
    let s = sweep_alpha_with(&g, &[0.7, 0.71, 1.0], 0.9, Some(NormMode::Total), Default::default()).unwrap();
    assert_eq!(s.rows[0].status, "infeasible");
    assert_eq!(s.rows[1].status, "ok");
    let mut out = Vec::new();
    write_sweep_alpha_csv(&s, &mut out).unwrap();
    assert!(String::from_utf8(out).unwrap().starts_with("alpha,re_norm_u,re_norm_v,value,status,saturated\n"));
}

#[test]
fn unconstrained_total_mode_values_agree_past_saturation() {
    let payoff = CMat::from_fn(4, 3, |i, j| common::c((i * 3 + j) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0 - 1.0));
    let g = GameSpec {
        payoff,
        player1: PlayerSpec::unconstrained(4, 1.0, NormMode::Total),
        player2: PlayerSpec::unconstrained(3, 1.0, NormMode::Total),
    };
    let s = sweep_alpha_with(&g, &[1.0, 2.0, 4.0, 8.0], 0.9, Some(NormMode::Total), Default::default()).unwrap();
    let sat = s.saturation_index.unwrap();
    let v: Vec<f64> = s.rows[sat..].iter().map(|r| r.value.unwrap()).collect();
    for w in v.windows(2) {
        assert!((w[1] - w[0]).abs() < 1e-6);
    }
}
