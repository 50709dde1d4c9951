use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ctscp::config::RunConfig;
use ctscp::discretizer::dense_violation_audit;
use ctscp::montecarlo::{aggregate, run_batch};
use ctscp::report;
use ctscp::scp::landing::Y;
use ctscp::scp::{boundary_residual, max_relaxation_step, scp_solve, ScpWorkspace};
use ctscp::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_INVALID: u8 = 4;

#[derive(Parser)]
#[command(name = "ctscp", version, about = "Powered-descent guidance by sequential convex programming")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the configured landing once.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a batch of dispersed landings.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dump_trajectories: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => EXIT_IO,
            Error::Parse(_) => EXIT_USAGE,
            _ => EXIT_INVALID,
        };
        Failure { code, msg: e.to_string() }
    }
}

type Outcome = Result<u8, Failure>;

fn prepare_out(cfg: &RunConfig, out: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&dir).map_err(|e| Failure { code: EXIT_IO, msg: format!("{}: {e}", dir.display()) })?;
    cfg.save(dir.join("config.json"))?;
    Ok(dir)
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("json value serializes");
    fs::write(path, text + "\n").map_err(|e| Failure { code: EXIT_IO, msg: format!("{}: {e}", path.display()) })
}

fn solve(config: &Path, out: Option<PathBuf>) -> Outcome {
    let cfg = RunConfig::load(config)?;
    let dir = prepare_out(&cfg, out)?;
    let problem = cfg.landing.build()?;
    let mut ws = ScpWorkspace::new(&problem);
    let guess = cfg.landing.initial_guess();
    let res = match scp_solve(&problem, &cfg.scp, &guess, &mut ws) {
        Ok(r) => r,
        Err(e) => {
            write_json(&dir.join("diagnostics.json"), &serde_json::json!({ "converged": false, "error": e.to_string() }))?;
            eprintln!("solve failed: {e}");
            return Ok(EXIT_NOT_CONVERGED);
        }
    };
    let z = &res.iterate;
    let audit = dense_violation_audit(&problem.system, z, &problem.grid, cfg.montecarlo.audit_substeps)?;
    report::write_trajectory(&dir.join("trajectory.csv"), &problem.grid, z)?;
    report::write_dense_audit(&dir.join("dense_audit.csv"), &audit)?;
    report::write_history(&dir.join("history.csv"), &res.history)?;
    let m = |k: usize| z.x(k)[0];
    println!(
        "converged={} iterations={} defect_inf={:e} boundary_residual={:e} max_pointwise_g={:e} propellant={}",
        res.converged,
        res.iterations,
        res.defect_inf,
        boundary_residual(&problem, z),
        audit.max_pointwise_g,
        m(0) - m(z.n - 1),
    );
    if res.converged {
        return Ok(0);
    }
    write_json(
        &dir.join("diagnostics.json"),
        &serde_json::json!({
            "converged": false,
            "iterations": res.iterations,
            "defect_inf": res.defect_inf,
            "boundary_residual": boundary_residual(&problem, z),
            "max_relaxation_step": max_relaxation_step(Some(Y), z),
            "max_pointwise_g": audit.max_pointwise_g,
        }),
    )?;
    Ok(EXIT_NOT_CONVERGED)
}

fn montecarlo(
    config: &Path,
    runs: Option<usize>,
    workers: Option<usize>,
    seed: Option<u64>,
    dump: bool,
    out: Option<PathBuf>,
) -> Outcome {
    let mut cfg = RunConfig::load(config)?;
    if let Some(r) = runs {
        cfg.montecarlo.batch_size = r;
    }
    if let Some(w) = workers {
        cfg.montecarlo.workers = w;
    }
    if let Some(s) = seed {
        cfg.dispersion.seed = s;
    }
    cfg.montecarlo.dump_trajectories |= dump;
    cfg.validate()?;
    let dir = prepare_out(&cfg, out)?;
    let batch = run_batch(&cfg.landing, &cfg.dispersion, &cfg.scp, &cfg.montecarlo.batch_options())?;
    let records = batch.records();
    let summary = aggregate(&records, cfg.scp.max_iters, batch.wall_time.as_secs_f64(), batch.workers)?;
    report::write_runs(&dir.join("runs.csv"), &records)?;
    report::write_summary(&dir.join("summary.csv"), &summary)?;
    if cfg.montecarlo.dump_trajectories {
        let tdir = dir.join("trajectories");
        fs::create_dir_all(&tdir).map_err(|e| Failure { code: EXIT_IO, msg: format!("{}: {e}", tdir.display()) })?;
        let grid = ctscp::discretizer::Grid::uniform(cfg.landing.grid.n)?;
        for o in &batch.outcomes {
            if let Some(z) = &o.trajectory {
                report::write_trajectory(&tdir.join(format!("run_{:05}.csv", o.record.run_id)), &grid, z)?;
            }
        }
    }
    println!(
        "runs={} converged={} fraction={} workers={} wall_time={:.3}s",
        summary.batch_size, summary.converged, summary.converged_fraction, summary.workers, summary.wall_time
    );
    Ok(if summary.converged_fraction >= cfg.montecarlo.converged_floor { 0 } else { EXIT_NOT_CONVERGED })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let res = match cli.cmd {
        Cmd::Solve { config, out } => solve(&config, out),
        Cmd::Montecarlo { config, runs, workers, seed, dump_trajectories, out } => {
            montecarlo(&config, runs, workers, seed, dump_trajectories, out)
        }
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
