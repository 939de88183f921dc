use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cczsg::conic::{ClarabelSolver, DEFAULT_SOLVE_TOL};
use cczsg::games::{certify_saddle, solve_game_with, Equilibrium, GameSpec, NormMode, SolveOptions};
use cczsg::instances::{
    gen_instance, published_waveforms, txjam_game, txjam_payoff, InstanceRecipe, SideSize, WaveformSet,
    MODULUS_TOL,
};
use cczsg::moments::{ModelKind, QuantileFamily};
use cczsg::montecarlo::{
    calibrate_with, sweep_alpha_with, sweep_p_with, write_calibration_csv, write_sweep_alpha_csv,
    write_sweep_p_csv, SweepTarget,
};
use cczsg::{Error, Player, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

const TOL_ENV: &str = "CCZSG_SOLVER_TOL";

#[derive(Parser)]
#[command(name = "cczsg", version, about = "Complex chance-constrained zero-sum games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a game and report the equilibrium.
    Solve(Opts),
    /// Solve a game and check the saddle inequalities on sampled strategies.
    Certify(Opts),
    /// Solve a game and estimate chance-row violation rates by Monte Carlo.
    Calibrate(Opts),
    /// Game value over a grid of confidence levels (CSV).
    SweepP(Opts),
    /// Equilibrium norms and value over a grid of norm caps (CSV).
    SweepAlpha(Opts),
    /// Build the transmitter-jammer game from waveforms (published ones by default).
    Txjam(Opts),
    /// Generate a seeded random game.
    Gen(Opts),
}

/// Every flag is optional; unset flags fall back to `--config`, then to defaults.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Opts {
    /// Input file (game JSON, or waveform JSON for txjam); stdin when absent or `-`.
    #[arg(long = "in")]
    #[serde(skip)]
    input: Option<PathBuf>,
    /// Output file; stdout when absent or `-`.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
    /// TOML file with defaults for any of the other flags.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Confidence level applied to every chance row.
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated confidence levels.
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    /// Player whose levels sweep-p moves: both, 1 or 2.
    #[arg(long)]
    player: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated ascending norm caps.
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    /// total or imag.
    #[arg(long)]
    mode: Option<String>,
    /// ces:<family>, known, unknown-cov or unknown-moments:<zeta>.
    #[arg(long)]
    model: Option<String>,
    /// Family for rows whose model fixes no law (calibrate).
    #[arg(long)]
    nominal: Option<String>,
    /// Scenarios per trial (calibrate) or sampled strategies (certify).
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Solver tolerance; defaults to $CCZSG_SOLVER_TOL, then 1e-8.
    #[arg(long)]
    tol: Option<f64>,
    /// Modulus tolerance for txjam waveforms.
    #[arg(long)]
    modulus_tol: Option<f64>,
    /// gen sizes: actions, rows and chance rows of each player.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    lc: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    qc: Option<usize>,
}

macro_rules! merge {
    ($a:ident, $b:ident; $($f:ident),*) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.take(); } )*
    };
}

impl Opts {
    fn with_config(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path)?;
        let mut file: Opts =
            toml::from_str(&text).map_err(|e| Error::Invalid(format!("config {}: {e}", path.display())))?;
        merge!(self, file; seed, p, p_grid, player, alpha, alpha_grid, mode, model, nominal,
               scenarios, trials, tol, modulus_tol, n, l, lc, m, q, qc);
        Ok(self)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn mode(&self) -> Result<Option<NormMode>> {
        self.mode.as_deref().map(str::parse).transpose()
    }

    fn tol(&self) -> Result<f64> {
        let tol = match self.tol {
            Some(t) => t,
            None => match std::env::var(TOL_ENV) {
                Ok(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("{TOL_ENV}={s} is not a number")))?,
                Err(_) => DEFAULT_SOLVE_TOL,
            },
        };
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
        }
        Ok(tol)
    }

    fn solve_opts(&self) -> Result<SolveOptions> {
        Ok(SolveOptions {
            tol: self.tol()?,
            ..SolveOptions::default()
        })
    }

    /// Reads the game as given; `sweep-alpha` applies the caps itself.
    fn raw_game(&self) -> Result<GameSpec> {
        GameSpec::from_json(&read_input(self.input.as_deref())?)
    }

    /// Reads the game and applies `--p`, `--alpha` and `--mode`.
    fn game(&self) -> Result<GameSpec> {
        let mut g = self.raw_game()?;
        if let Some(p) = self.p {
            g = g.with_levels(Player::One, p).with_levels(Player::Two, p);
        }
        let mode = self.mode()?;
        if let Some(a) = self.alpha {
            g = g.with_alpha(a, mode);
        } else if let Some(m) = mode {
            for s in [&mut g.player1.set, &mut g.player2.set] {
                s.mode = m;
            }
        }
        g.validate()?;
        Ok(g)
    }
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if p != Path::new("-") => Ok(fs::read_to_string(p)?),
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn to_stdout(out: Option<&Path>) -> bool {
    out.is_none_or(|p| p == Path::new("-"))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    if to_stdout(out) {
        let mut s = io::stdout().lock();
        s.write_all(bytes)?;
        s.flush()?;
    } else {
        fs::write(out.expect("checked"), bytes)?;
    }
    Ok(())
}

fn print_json(v: &serde_json::Value) {
    println!("{v}");
}

fn solve(g: &GameSpec, o: &Opts) -> Result<Equilibrium> {
    solve_game_with(g, &ClarabelSolver::default(), o.solve_opts()?)
}

fn summary(e: &Equilibrium) -> serde_json::Value {
    json!({
        "status": "ok",
        "value": e.value,
        "gap": e.duality_gap,
        "primal_value": e.primal_value,
        "dual_value": e.dual_value,
        "u_feasible": e.u_feasible,
        "v_feasible": e.v_feasible,
    })
}

fn cmd_solve(o: &Opts) -> Result<()> {
    let g = o.game()?;
    let e = solve(&g, o)?;
    if !to_stdout(o.out.as_deref()) {
        write_output(o.out.as_deref(), serde_json::to_string_pretty(&e)?.as_bytes())?;
    }
    print_json(&summary(&e));
    Ok(())
}

fn cmd_certify(o: &Opts) -> Result<()> {
    let g = o.game()?;
    let mut e = solve(&g, o)?;
    let samples = o.scenarios.unwrap_or(1000);
    let tol = 1e-6 * (1.0 + e.value.abs());
    let report = certify_saddle(&g, &e, samples, o.seed(), tol)?;
    let passed = report.passed;
    e.certification = Some(report.clone());
    if !to_stdout(o.out.as_deref()) {
        write_output(o.out.as_deref(), serde_json::to_string_pretty(&e)?.as_bytes())?;
    }
    let mut s = summary(&e);
    s["status"] = json!(if passed { "ok" } else { "certification_failed" });
    s["certification"] = serde_json::to_value(&report)?;
    print_json(&s);
    if passed {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "saddle check failed on {} of {} sampled strategies",
            report.violations, report.samples
        )))
    }
}

fn cmd_calibrate(o: &Opts) -> Result<()> {
    let g = o.game()?;
    let e = solve(&g, o)?;
    let nominal: QuantileFamily = o.nominal.as_deref().unwrap_or("gaussian").parse()?;
    let r = calibrate_with(
        &g,
        &e,
        o.scenarios.unwrap_or(100),
        o.trials.unwrap_or(10),
        o.seed(),
        Some(nominal),
    )?;
    let mut buf = Vec::new();
    write_calibration_csv(&r, &mut buf)?;
    write_output(o.out.as_deref(), &buf)?;
    if !to_stdout(o.out.as_deref()) {
        let mut s = summary(&e);
        s["calibration"] = serde_json::to_value(&r)?;
        print_json(&s);
    }
    Ok(())
}

fn cmd_sweep_p(o: &Opts) -> Result<()> {
    let g = o.game()?;
    let grid = o.p_grid.clone().unwrap_or_default();
    let target = match o.player.as_deref().unwrap_or("both") {
        "both" => SweepTarget::Both,
        "1" => SweepTarget::Only(Player::One),
        "2" => SweepTarget::Only(Player::Two),
        other => return Err(Error::Invalid(format!("player must be both, 1 or 2, got '{other}'"))),
    };
    let rows = sweep_p_with(&g, &grid, target, o.solve_opts()?);
    let mut buf = Vec::new();
    write_sweep_p_csv(&rows, &mut buf)?;
    write_output(o.out.as_deref(), &buf)?;
    if !to_stdout(o.out.as_deref()) {
        print_json(&json!({"status": "ok", "rows": rows}));
    }
    Ok(())
}

fn cmd_sweep_alpha(o: &Opts) -> Result<()> {
    let g = o.raw_game()?;
    let grid = o.alpha_grid.clone().unwrap_or_default();
    let p = o.p.unwrap_or(0.9);
    let s = sweep_alpha_with(&g, &grid, p, o.mode()?, o.solve_opts()?)?;
    let mut buf = Vec::new();
    write_sweep_alpha_csv(&s, &mut buf)?;
    write_output(o.out.as_deref(), &buf)?;
    if !to_stdout(o.out.as_deref()) {
        print_json(&json!({"status": "ok", "saturation_index": s.saturation_index, "rows": s.rows}));
    }
    Ok(())
}

#[derive(Deserialize)]
struct WaveformInput {
    tx: WaveformSet,
    jam: WaveformSet,
}

fn cmd_txjam(o: &Opts) -> Result<()> {
    let (tx, jam) = match &o.input {
        None => published_waveforms(),
        Some(path) => {
            let w: WaveformInput = serde_json::from_str(&read_input(Some(path))?)?;
            let tol = o.modulus_tol.unwrap_or(MODULUS_TOL);
            (
                WaveformSet::with_tolerance(w.tx.labels, w.tx.waveforms, tol)?,
                WaveformSet::with_tolerance(w.jam.labels, w.jam.waveforms, tol)?,
            )
        }
    };
    let a = txjam_payoff(&tx, &jam)?;
    let mode = o.mode()?.unwrap_or(NormMode::Imag);
    let g = txjam_game(a, o.alpha.unwrap_or(0.5), mode);
    g.validate()?;
    write_output(o.out.as_deref(), g.to_json()?.as_bytes())?;
    Ok(())
}

fn cmd_gen(o: &Opts) -> Result<()> {
    let model: ModelKind = o.model.as_deref().unwrap_or("ces:gaussian").parse()?;
    let p1 = SideSize::new(o.n.unwrap_or(10), o.l.unwrap_or(5), o.lc.unwrap_or(2));
    let p2 = SideSize::new(o.m.unwrap_or(10), o.q.unwrap_or(5), o.qc.unwrap_or(2));
    let mut r = InstanceRecipe::new(p1, p2, model, o.p.unwrap_or(0.9), o.seed());
    if let Some(a) = o.alpha {
        r.alpha = a;
    }
    if let Some(m) = o.mode()? {
        r.mode = m;
    }
    let g = gen_instance(&r)?;
    write_output(o.out.as_deref(), g.to_json()?.as_bytes())?;
    Ok(())
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Solve(o) => cmd_solve(&o.with_config()?),
        Command::Certify(o) => cmd_certify(&o.with_config()?),
        Command::Calibrate(o) => cmd_calibrate(&o.with_config()?),
        Command::SweepP(o) => cmd_sweep_p(&o.with_config()?),
        Command::SweepAlpha(o) => cmd_sweep_alpha(&o.with_config()?),
        Command::Txjam(o) => cmd_txjam(&o.with_config()?),
        Command::Gen(o) => cmd_gen(&o.with_config()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{body}");
            ExitCode::from(1)
        }
    }
}
