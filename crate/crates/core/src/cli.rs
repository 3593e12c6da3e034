// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Exit codes: 0 when the infidelity tolerance is met (or the command has no
//! tolerance), 2 when a run stops at the iteration cap or stagnates, 1 on any
//! error. A config that fails to load leaves no output behind.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Profile, RunConfig, SolverPlan};
use crate::error::{Error, Result};
use crate::gate_family::{build_family, GateFamily};
use crate::integrator::{simulate_open_loop, Hold};
use crate::io::{load_control, save_control};
use crate::lindblad::LindbladModel;
use crate::metrics::{fidelity, write_reports_csv};
use crate::models::adiabatic_control;
use crate::solver_clock::run_clock;
use crate::solver_fixed::{run, SolverRun, StopReason};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "LYAGATE_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "lyagate-out";

#[derive(Debug, Parser)]
#[command(name = "lyagate", version, about = "Monotonic gate synthesis for Lindblad systems")]
pub struct Cli {
    /// Worker threads for the per-member integrations.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// `full` lifts the size limit on models.
    #[arg(long, global = true, value_enum, default_value_t = ProfileArg::Desk)]
    pub profile: ProfileArg,
    /// Overrides the config's output directory.
    #[arg(long, short = 'o', global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Desk,
    Full,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Full => Profile::Full,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the solver described by a config file.
    Run { config: PathBuf },
    /// Open-loop infidelity of the adiabatic control over the `[sweep]` grid.
    SweepAdiabatic { config: PathBuf },
    /// Summarize a control CSV.
    Inspect { control: PathBuf },
}

/// Parses `args` (program name first), runs the command, returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Run { config } => cmd_run(config, cli.profile.into(), cli.output_dir.as_deref()),
        Command::SweepAdiabatic { config } => cmd_sweep_adiabatic(config, cli.profile.into(), cli.output_dir.as_deref()),
        Command::Inspect { control } => cmd_inspect(control),
    })
}

/// Flag, then config, then environment, then [`DEFAULT_OUTPUT_DIR`].
pub fn output_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output.dir {
        return p.clone();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUTPUT_DIR),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    stop: StopReason,
    iterations: usize,
    infidelity: f64,
    corrected_infidelity: Option<f64>,
    tf: f64,
    epsilon_num: f64,
    tf_stationarity: f64,
    wall_time_s: f64,
    rng_seed: u64,
    profile: Profile,
    config: &'a RunConfig,
}

/// Rough wall time of a run from one timed generator evaluation.
fn estimate_wall_time(model: &LindbladModel, family: &GateFamily, n_sim: usize, max_iters: usize) -> f64 {
    let rho = &family.all()[0].rho_init;
    let u = vec![0.0; model.n_controls()];
    let start = Instant::now();
    let reps = 3;
    for _ in 0..reps {
        let _ = model.generator_hermitian(1.0, &u, rho);
    }
    let per_eval = start.elapsed().as_secs_f64() / reps as f64;
    // four stages, backward and forward sweeps with feedback terms
    let per_step = per_eval * 4.0 * 3.0 * n_sim as f64 * family.n_active() as f64;
    per_step * max_iters as f64 / rayon::current_num_threads() as f64
}

pub fn cmd_run(config: &Path, profile: Profile, out_flag: Option<&Path>) -> Result<i32> {
    let cfg = RunConfig::load(config)?;
    let plan = cfg.plan(profile)?;
    let family = build_family(&plan.spec, cfg.metrics.diag_only)?;
    let resolved = cfg.resolved(profile, family.n_active())?;
    let dir = output_dir(out_flag, &cfg);

    if plan.storage_bytes > plan.budget_bytes {
        eprintln!(
            "warning: observable storage {:.0} MiB exceeds the {:.0} MiB budget; raise solver.checkpoint_stride",
            plan.storage_bytes as f64 / 1048576.0,
            plan.budget_bytes as f64 / 1048576.0
        );
    }
    let estimate = estimate_wall_time(&plan.model, &family, plan.solver.n_sim(), plan.solver.max_iters());
    if profile == Profile::Full {
        eprintln!(
            "profile full: dimension {}, {} members, estimated wall time {:.1} h",
            plan.model.dim(),
            family.n_active(),
            estimate / 3600.0
        );
    } else {
        log::info!("estimated wall time {estimate:.0} s");
    }

    create_dir(&dir)?;
    let start = Instant::now();
    let observer = |r: &crate::metrics::IterationReport| {
        log::info!(
            "step {} infidelity {:.6e} Tf {:.6} V(Tf) {:.6e}",
            r.ell,
            r.infidelity,
            r.tf,
            r.v_tf
        );
    };
    let result: SolverRun = match &plan.solver {
        SolverPlan::Fixed(c) => run(&plan.model, &family, &plan.seed, c, observer)?,
        SolverPlan::Clock(c) => run_clock(&plan.model, &family, &plan.seed, c, observer)?,
    };
    let wall = start.elapsed().as_secs_f64();

    let mut buf = Vec::new();
    write_reports_csv(&mut buf, &result.reports)?;
    write_file(&dir.join("iterations.csv"), &buf)?;
    save_control(&dir.join("final_control.csv"), &result.control)?;
    let summary = RunSummary {
        stop: result.stop,
        iterations: result.reports.len(),
        infidelity: result.infidelity,
        // without diag_only the solver already optimizes the full family
        corrected_infidelity: match (result.corrected_infidelity, cfg.metrics.diag_only) {
            (None, false) if cfg.metrics.corrected => Some(result.infidelity),
            (c, _) => c,
        },
        tf: result.control.grid().t_end(),
        epsilon_num: result.epsilon_num,
        tf_stationarity: result.tf_stationarity,
        wall_time_s: wall,
        rng_seed: resolved.seed.rng_seed,
        profile,
        config: &resolved,
    };
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    write_file(&dir.join("summary.json"), &json)?;
    eprintln!(
        "{:?} after {} steps: infidelity {:.6e}, Tf {}, output in {}",
        result.stop,
        result.reports.len(),
        result.infidelity,
        summary.tf,
        dir.display()
    );
    Ok(match result.stop {
        StopReason::Converged => 0,
        StopReason::IterationCap | StopReason::Stagnated => 2,
    })
}

/// One point of an adiabatic sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub tf: f64,
    /// Worst case over the members the solver would optimize.
    pub infidelity: f64,
    /// Worst case over the full family.
    pub corrected_infidelity: f64,
}

/// Open-loop infidelity of the constant adiabatic control at each gate time.
pub fn adiabatic_sweep(
    model: &LindbladModel,
    family: &GateFamily,
    alpha: f64,
    tfs: &[f64],
    n_sim: usize,
    hold: Hold,
) -> Result<Vec<SweepPoint>> {
    if tfs.is_empty() {
        return Err(Error::InvalidArgument("empty gate-time grid".into()));
    }
    tfs.iter()
        .map(|&tf| {
            let u = adiabatic_control(tf, alpha, n_sim)?;
            let infid: Vec<(bool, f64)> = family
                .all()
                .par_iter()
                .map(|m| {
                    let rho = simulate_open_loop(model, &u, &m.rho_init, hold)?;
                    let active = !family.diag_only() || m.sigma.is_diag();
                    Ok((active, 1.0 - fidelity(&m.phi, &rho)))
                })
                .collect::<Result<_>>()?;
            let worst = |active_only: bool| {
                infid
                    .iter()
                    .filter(|(a, _)| *a || !active_only)
                    .map(|(_, v)| *v)
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            Ok(SweepPoint {
                tf,
                infidelity: worst(true),
                corrected_infidelity: worst(false),
            })
        })
        .collect()
}

pub fn cmd_sweep_adiabatic(config: &Path, profile: Profile, out_flag: Option<&Path>) -> Result<i32> {
    let cfg = RunConfig::load(config)?;
    let sweep = cfg.sweep()?;
    cfg.check_profile(profile)?;
    let (model, spec) = cfg.build_model(profile)?;
    let family = build_family(&spec, cfg.metrics.diag_only)?;
    let dir = output_dir(out_flag, &cfg);
    let points = adiabatic_sweep(&model, &family, cfg.alpha(), &sweep.tf, sweep.n_sim, sweep.hold)?;

    create_dir(&dir)?;
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["Tf", "infidelity", "corrected_infidelity"])?;
    for p in &points {
        w.write_record([
            format!("{}", p.tf),
            format!("{:e}", p.infidelity),
            format!("{:e}", p.corrected_infidelity),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    if let Some(best) = points.iter().min_by(|a, b| a.infidelity.total_cmp(&b.infidelity)) {
        eprintln!("minimum infidelity {:.6e} at Tf {}", best.infidelity, best.tf);
    }
    Ok(0)
}

pub fn cmd_inspect(path: &Path) -> Result<i32> {
    let u = load_control(path)?;
    let grid = u.grid();
    println!("channels: {}", u.n_channels());
    println!(
        "grid: {} nodes on [{}, {}], step {:e}",
        grid.n_nodes(),
        grid.t_start(),
        grid.t_end(),
        grid.step()
    );
    for (k, area) in u.integrals().iter().enumerate() {
        let ch = u.channel(k);
        let min = ch.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ch.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("u_{}: min {min} max {max} integral {area}", k + 1);
    }
    Ok(0)
}
