//! Batch solves over dispersed initial positions.
//!
//! Instances are generated up front, then a fixed pool of scoped worker
//! threads pulls run indices from a shared counter. Each worker owns one
//! solver workspace and reuses it for every run it takes. Records come back
//! ordered by `run_id`, and every field except `wall_time` depends only on
//! the inputs, never on the worker count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretizer::{dense_violation_audit, Trajectory, DEFAULT_AUDIT_SUBSTEPS};
use crate::error::{Error, Result};
use crate::rocket6dof::VehicleState;
use crate::scp::landing::{LandingSetup, LandingSystem, Y};
use crate::scp::{boundary_residual, max_relaxation_step, scp_solve, ScpProblem, ScpSettings, ScpWorkspace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Uniform {
    pub low: f64,
    pub high: f64,
}

impl Uniform {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        self.low + (self.high - self.low) * u
    }
}

/// Per-axis uniform draw of the initial position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSpec {
    pub position: [Uniform; 3],
    pub seed: u64,
}

impl Default for DispersionSpec {
    fn default() -> Self {
        let u = |low, high| Uniform { low, high };
        Self { position: [u(6.0, 9.0), u(3.0, 6.0), u(1.0, 2.0)], seed: 0 }
    }
}

impl DispersionSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, u) in self.position.iter().enumerate() {
            if !(u.low.is_finite() && u.high.is_finite()) {
                return Err(Error::validation(format!("dispersion.position[{i}]"), "bounds must be finite"));
            }
            if u.low > u.high {
                return Err(Error::validation(format!("dispersion.position[{i}]"), "low must not exceed high"));
            }
        }
        Ok(())
    }

    /// Generator for one run; the stream is selected by `run_id`.
    pub fn rng(&self, run_id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(run_id);
        rng
    }
}

/// The nominal setup with its initial position redrawn for `run_id`.
pub fn disperse(nominal: &LandingSetup<f64>, spec: &DispersionSpec, run_id: u64) -> LandingSetup<f64> {
    let mut rng = spec.rng(run_id);
    let mut out = nominal.clone();
    for (r, u) in out.initial.r.iter_mut().zip(&spec.position) {
        *r = u.sample(&mut rng);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRunRecord {
    pub run_id: u64,
    pub initial_state: VehicleState<f64>,
    pub converged: bool,
    pub scp_iterations: usize,
    /// `m(0) − m(t_f)`.
    pub propellant_used: f64,
    pub final_time: f64,
    pub final_defect_inf: f64,
    pub boundary_residual: f64,
    /// Largest node-to-node increase of the violation integrator.
    pub max_relaxation_step: f64,
    pub max_pointwise_g: f64,
    /// Seconds spent in the solve and audit.
    pub wall_time: f64,
    /// Set when the solve stopped on an error.
    pub error: Option<String>,
}

/// A record plus the trajectory it was computed from, when kept.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: McRunRecord,
    pub trajectory: Option<Trajectory<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOptions {
    pub batch_size: usize,
    pub workers: usize,
    pub audit_substeps: usize,
    pub keep_trajectories: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { batch_size: 256, workers: 1, audit_substeps: DEFAULT_AUDIT_SUBSTEPS, keep_trajectories: false }
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub outcomes: Vec<RunOutcome>,
    pub workers: usize,
    /// Wall time of the solve phase, excluding instance generation.
    pub wall_time: Duration,
}

impl Batch {
    pub fn records(&self) -> Vec<McRunRecord> {
        self.outcomes.iter().map(|o| o.record.clone()).collect()
    }
}

type Instance = (LandingSetup<f64>, ScpProblem<f64, LandingSystem<f64>>);

/// Solves one instance with `ws`, which is reset first, and audits the result.
pub fn run_one(
    run_id: u64,
    setup: &LandingSetup<f64>,
    problem: &ScpProblem<f64, LandingSystem<f64>>,
    settings: &ScpSettings,
    ws: &mut ScpWorkspace<f64, <LandingSystem<f64> as crate::ctcs::AugmentedSystem<f64>>::Scratch>,
    audit_substeps: usize,
    keep_trajectory: bool,
) -> RunOutcome {
    let start = Instant::now();
    ws.pipg.reset();
    let mut record = McRunRecord {
        run_id,
        initial_state: setup.initial,
        converged: false,
        scp_iterations: 0,
        propellant_used: f64::NAN,
        final_time: f64::NAN,
        final_defect_inf: f64::NAN,
        boundary_residual: f64::NAN,
        max_relaxation_step: f64::NAN,
        max_pointwise_g: f64::NAN,
        wall_time: 0.0,
        error: None,
    };
    let guess = setup.initial_guess();
    let mut trajectory = None;
    match scp_solve(problem, settings, &guess, ws) {
        Ok(res) => {
            let z = &res.iterate;
            record.converged = res.converged;
            record.scp_iterations = res.iterations;
            record.propellant_used = z.x(0)[0] - z.x(z.n - 1)[0];
            record.final_time = *z.times(&problem.grid, crate::scp::landing::S).last().unwrap_or(&f64::NAN);
            record.final_defect_inf = res.defect_inf;
            record.boundary_residual = boundary_residual(problem, z);
            record.max_relaxation_step = max_relaxation_step(Some(Y), z);
            match dense_violation_audit(&problem.system, z, &problem.grid, audit_substeps) {
                Ok(a) => record.max_pointwise_g = a.max_pointwise_g,
                Err(e) => {
                    record.converged = false;
                    record.error = Some(format!("audit: {e}"));
                }
            }
            if keep_trajectory {
                trajectory = Some(res.iterate);
            }
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record.wall_time = start.elapsed().as_secs_f64();
    RunOutcome { record, trajectory }
}

/// Disperses `opts.batch_size` instances and solves them on `opts.workers`
/// threads.
pub fn run_batch(
    nominal: &LandingSetup<f64>,
    spec: &DispersionSpec,
    settings: &ScpSettings,
    opts: &BatchOptions,
) -> Result<Batch> {
    if opts.batch_size == 0 {
        return Err(Error::validation("montecarlo.batch_size", "must be at least 1"));
    }
    if opts.workers == 0 {
        return Err(Error::validation("montecarlo.workers", "must be at least 1"));
    }
    if opts.audit_substeps == 0 {
        return Err(Error::validation("montecarlo.audit_substeps", "must be at least 1"));
    }
    spec.validate()?;
    settings.validate()?;
    let instances: Vec<Instance> = (0..opts.batch_size as u64)
        .map(|id| {
            let s = disperse(nominal, spec, id);
            let p = s.build()?;
            Ok((s, p))
        })
        .collect::<Result<_>>()?;

    let workers = opts.workers.min(instances.len());
    let next = AtomicUsize::new(0);
    let start = Instant::now();
    let mut outcomes: Vec<RunOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                let (instances, next) = (&instances, &next);
                scope.spawn(move || {
                    let mut ws = ScpWorkspace::new(&instances[0].1);
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some((setup, problem)) = instances.get(i) else { break };
                        done.push(run_one(
                            i as u64,
                            setup,
                            problem,
                            settings,
                            &mut ws,
                            opts.audit_substeps,
                            opts.keep_trajectories,
                        ));
                    }
                    done
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    let wall_time = start.elapsed();
    outcomes.sort_by_key(|o| o.record.run_id);
    Ok(Batch { outcomes, workers, wall_time })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub batch_size: usize,
    pub converged: usize,
    pub converged_fraction: f64,
    /// Entry `i` counts runs that stopped after `i + 1` iterations; runs that
    /// stopped before their first iteration fall in the first bin.
    pub iteration_histogram: Vec<usize>,
    /// Over converged runs only; `None` when nothing converged.
    pub propellant_min: Option<f64>,
    pub propellant_mean: Option<f64>,
    pub propellant_max: Option<f64>,
    pub wall_time: f64,
    pub workers: usize,
}

pub fn aggregate(records: &[McRunRecord], max_iters: usize, wall_time: f64, workers: usize) -> Result<McSummary> {
    if records.is_empty() {
        return Err(Error::Precondition("cannot aggregate an empty batch".into()));
    }
    if max_iters == 0 {
        return Err(Error::validation("scp.max_iters", "must be at least 1"));
    }
    let mut hist = vec![0; max_iters];
    for r in records {
        hist[r.scp_iterations.clamp(1, max_iters) - 1] += 1;
    }
    let prop: Vec<f64> = records.iter().filter(|r| r.converged).map(|r| r.propellant_used).collect();
    let converged = prop.len();
    let (min, mean, max) = if prop.is_empty() {
        (None, None, None)
    } else {
        let min = prop.iter().copied().fold(f64::INFINITY, f64::min);
        let max = prop.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (Some(min), Some(prop.iter().sum::<f64>() / converged as f64), Some(max))
    };
    Ok(McSummary {
        batch_size: records.len(),
        converged,
        converged_fraction: converged as f64 / records.len() as f64,
        iteration_histogram: hist,
        propellant_min: min,
        propellant_mean: mean,
        propellant_max: max,
        wall_time,
        workers,
    })
}
