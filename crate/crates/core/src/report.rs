//! CSV outputs. Floats are written with Rust's shortest round-trip
//! formatting, so every value parses back to the identical `f64`.

use std::fs::File;
use std::path::Path;

use crate::discretizer::{DenseAudit, Grid, Trajectory};
use crate::error::{Error, Result};
use crate::montecarlo::{McRunRecord, McSummary};
use crate::scp::landing::S;
use crate::scp::IterationRecord;

pub const TRAJECTORY_HEADER: [&str; 25] = [
    "tau", "t", "m", "r1", "r2", "r3", "v1", "v2", "v3", "q0", "q1", "q2", "q3", "w1", "w2", "w3", "y", "thrust1",
    "thrust2", "thrust3", "torque1", "torque2", "torque3", "s", "node",
];

pub const RUNS_HEADER: [&str; 25] = [
    "run_id",
    "m0",
    "r0_1",
    "r0_2",
    "r0_3",
    "v0_1",
    "v0_2",
    "v0_3",
    "q0_0",
    "q0_1",
    "q0_2",
    "q0_3",
    "w0_1",
    "w0_2",
    "w0_3",
    "converged",
    "scp_iterations",
    "propellant_used",
    "final_time",
    "final_defect_inf",
    "boundary_residual",
    "max_relaxation_step",
    "max_pointwise_g",
    "error",
    "wall_time",
];

fn io<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(io(path))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per node: `tau, t, state, control, node`.
pub fn write_trajectory(path: &Path, grid: &Grid<f64>, z: &Trajectory<f64>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRAJECTORY_HEADER).map_err(io(path))?;
    let times = z.times(grid, S);
    for k in 0..z.n {
        let mut row = Vec::with_capacity(TRAJECTORY_HEADER.len());
        row.push(grid.nodes()[k].to_string());
        row.push(times[k].to_string());
        row.extend(z.x(k).iter().map(f64::to_string));
        row.extend(z.u(k).iter().map(f64::to_string));
        row.push(k.to_string());
        w.write_record(&row).map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn write_dense_audit(path: &Path, audit: &DenseAudit<f64>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["interval", "tau", "max_g"]).map_err(io(path))?;
    for s in &audit.samples {
        w.write_record([s.interval.to_string(), s.tau.to_string(), s.max_g.to_string()]).map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn write_history(path: &Path, history: &[IterationRecord<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "penalized_cost", "defect_inf", "step_inf", "pipg_iterations", "sigma"])
        .map_err(io(path))?;
    for h in history {
        w.write_record([
            h.iteration.to_string(),
            h.penalized_cost.to_string(),
            h.defect_inf.to_string(),
            h.step_inf.to_string(),
            h.pipg_iterations.to_string(),
            h.sigma.to_string(),
        ])
        .map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

/// `wall_time` is the last column so that it can be dropped when comparing
/// batches.
pub fn write_runs(path: &Path, records: &[McRunRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RUNS_HEADER).map_err(io(path))?;
    for r in records {
        let s = &r.initial_state;
        let mut row = vec![r.run_id.to_string(), s.m.to_string()];
        row.extend(s.r.iter().chain(&s.v).chain(&s.q).chain(&s.w).map(f64::to_string));
        row.extend([
            u8::from(r.converged).to_string(),
            r.scp_iterations.to_string(),
            r.propellant_used.to_string(),
            r.final_time.to_string(),
            r.final_defect_inf.to_string(),
            r.boundary_residual.to_string(),
            r.max_relaxation_step.to_string(),
            r.max_pointwise_g.to_string(),
            r.error.clone().unwrap_or_default(),
            r.wall_time.to_string(),
        ]);
        w.write_record(&row).map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

/// A single data row; one `iters_<k>` column per histogram bin.
pub fn write_summary(path: &Path, s: &McSummary) -> Result<()> {
    let mut w = writer(path)?;
    let mut header: Vec<String> = [
        "batch_size",
        "converged",
        "converged_fraction",
        "propellant_min",
        "propellant_mean",
        "propellant_max",
        "wall_time",
        "workers",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=s.iteration_histogram.len()).map(|k| format!("iters_{k}")));
    w.write_record(&header).map_err(io(path))?;
    let mut row = vec![
        s.batch_size.to_string(),
        s.converged.to_string(),
        s.converged_fraction.to_string(),
        opt(s.propellant_min),
        opt(s.propellant_mean),
        opt(s.propellant_max),
        s.wall_time.to_string(),
        s.workers.to_string(),
    ];
    row.extend(s.iteration_histogram.iter().map(usize::to_string));
    w.write_record(&row).map_err(io(path))?;
    w.flush().map_err(io(path))
}
