//! Prox-linear sequential convex programming.
//!
//! Each iteration linearizes the dilated, violation-augmented dynamics about
//! the current iterate, scales the result into a [`ScaledSubproblem`], solves
//! it with warm-started [`pipg_custom`] and moves to the unscaled minimizer.

mod assemble;
pub mod landing;

pub use assemble::{assemble_subproblem, scale, unscale};
pub use crate::pipg::ScaledSubproblem;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ctcs::AugmentedSystem;
use crate::discretizer::{self, Grid, LinearizedBlocks, Propagator, Trajectory};
use crate::error::{Error, Result};
use crate::pipg::{pipg_custom, power_iteration_custom, PipgConfig, PipgWorkspace};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScpWeights<T> {
    pub w_cost: T,
    /// Proximal weight on the scaled variables.
    pub w_prox: T,
    /// ℓ1 exact-penalty weight on the scaled defects.
    pub w_ep: T,
    /// Allowed growth of the violation integrator per interval.
    pub epsilon_relax: T,
}

impl<T: Real> ScpWeights<T> {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("w_cost", self.w_cost),
            ("w_prox", self.w_prox),
            ("w_ep", self.w_ep),
            ("epsilon_relax", self.epsilon_relax),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::validation(format!("scp.weights.{k}"), "must be positive"));
            }
        }
        Ok(())
    }
}

/// Diagonal variable scaling with stored reciprocals.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPair<T> {
    pub px: Vec<T>,
    pub pu: Vec<T>,
    pub px_inv: Vec<T>,
    pub pu_inv: Vec<T>,
}

impl<T: Real> ScalingPair<T> {
    pub fn new(px: Vec<T>, pu: Vec<T>) -> Result<Self> {
        let s = Self {
            px_inv: px.iter().map(|&v| T::one() / v).collect(),
            pu_inv: pu.iter().map(|&v| T::one() / v).collect(),
            px,
            pu,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn identity(nx: usize, nu: usize) -> Self {
        Self::new(vec![T::one(); nx], vec![T::one(); nu]).expect("unit scaling is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.px.iter().chain(&self.pu).any(|&v| !(v > T::zero() && v.is_finite())) {
            return Err(Error::validation("scaling", "diagonals must be positive and finite"));
        }
        Ok(())
    }
}

/// Everything the driver needs about one optimal control problem.
#[derive(Debug, Clone)]
pub struct ScpProblem<T, S> {
    pub system: S,
    pub grid: Grid<T>,
    /// RK4 sub-steps per interval.
    pub steps: usize,
    /// `(component, value)` pairs fixed at the first and last node.
    pub fix_initial: Vec<(usize, T)>,
    pub fix_final: Vec<(usize, T)>,
    /// Node-wise control bounds; infinite entries are not imposed.
    pub u_min: Vec<T>,
    pub u_max: Vec<T>,
    pub e_cost: Vec<T>,
    pub weights: ScpWeights<T>,
    pub scaling: ScalingPair<T>,
    /// `(start, len)` state blocks renormalized to unit length after each update.
    pub unit_blocks: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScpSettings {
    pub max_iters: usize,
    /// Bound on the scaled defect ∞-norm.
    pub tol_feas: f64,
    /// Bound on the scaled step ∞-norm.
    pub tol_step: f64,
    pub pipg: PipgConfig,
    /// Seed of the fallback power-iteration start vector.
    pub seed: u64,
    /// Worker threads for the per-interval linearization.
    pub linearize_threads: usize,
}

impl Default for ScpSettings {
    fn default() -> Self {
        Self {
            max_iters: 25,
            tol_feas: 1e-6,
            tol_step: 1e-5,
            pipg: PipgConfig::default(),
            seed: 0,
            linearize_threads: 1,
        }
    }
}

impl ScpSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::validation("scp.max_iters", "must be at least 1"));
        }
        if !(self.tol_feas > 0.0) {
            return Err(Error::validation("scp.tol_feas", "must be positive"));
        }
        if !(self.tol_step > 0.0) {
            return Err(Error::validation("scp.tol_step", "must be positive"));
        }
        if self.linearize_threads == 0 {
            return Err(Error::validation("scp.linearize_threads", "must be at least 1"));
        }
        self.pipg.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    /// Penalized cost of the iterate the subproblem was built around.
    pub penalized_cost: T,
    /// Scaled defect ∞-norm of that iterate.
    pub defect_inf: T,
    /// Scaled ∞-norm of the step taken.
    pub step_inf: T,
    pub pipg_iterations: usize,
    pub sigma: T,
}

#[derive(Debug, Clone)]
pub struct ScpResult<T> {
    pub iterate: Trajectory<T>,
    /// Subproblems solved.
    pub iterations: usize,
    pub converged: bool,
    /// Scaled defect ∞-norm of the returned iterate.
    pub defect_inf: T,
    pub history: Vec<IterationRecord<T>>,
}

/// Buffers for one solve, sized once and reusable across solves of the same
/// dimensions.
pub struct ScpWorkspace<T, Sc> {
    prop: Propagator<T, Sc>,
    blocks: Vec<LinearizedBlocks<T>>,
    sub: ScaledSubproblem<T>,
    pub pipg: PipgWorkspace<T>,
    next: Trajectory<T>,
}

impl<T: Real, Sc> ScpWorkspace<T, Sc> {
    pub fn new<S: AugmentedSystem<T, Scratch = Sc>>(problem: &ScpProblem<T, S>) -> Self {
        let (n, nx, nu) = (problem.grid.len(), problem.system.nx(), problem.system.nu());
        let ny = usize::from(problem.system.y_index().is_some());
        Self {
            prop: Propagator::new(&problem.system),
            blocks: vec![LinearizedBlocks::zeros(nx, nu); n - 1],
            sub: ScaledSubproblem::zeros(n, nx, nu),
            pipg: PipgWorkspace::new(n, nx, nu, ny),
            next: Trajectory::zeros(n, nx, nu),
        }
    }
}

/// `w_cost x_Nᵀe_cost + w_ep Σ‖D(x_{k+1} − f_k(x_k, u_k, u_{k+1}))‖₁` with
/// `D = diag(defect_scale)`, defects propagated with `steps` RK4 sub-steps.
#[allow(clippy::too_many_arguments)]
pub fn penalized_cost<T: Real, S: AugmentedSystem<T>>(
    sys: &S,
    z: &Trajectory<T>,
    grid: &Grid<T>,
    steps: usize,
    weights: &ScpWeights<T>,
    e_cost: &[T],
    defect_scale: &[T],
    prop: &mut Propagator<T, S::Scratch>,
) -> Result<T> {
    let nx = z.nx;
    let mut d = vec![T::zero(); (z.n - 1) * nx];
    discretizer::defects(sys, z, grid, steps, prop, &mut d)?;
    let pen = d
        .iter()
        .enumerate()
        .fold(T::zero(), |a, (i, v)| a + (defect_scale[i % nx] * *v).abs());
    let last = z.x(z.n - 1);
    let cost = last.iter().zip(e_cost).fold(T::zero(), |a, (x, e)| a + *x * *e);
    Ok(weights.w_cost * cost + weights.w_ep * pen)
}

fn scaled_defect<T: Real>(blocks: &[LinearizedBlocks<T>], z: &Trajectory<T>, px_inv: &[T]) -> T {
    let mut m = T::zero();
    for (k, b) in blocks.iter().enumerate() {
        for (i, (e, x)) in b.x_end.iter().zip(z.x(k + 1)).enumerate() {
            m = m.max((px_inv[i] * (*e - *x)).abs());
        }
    }
    m
}

fn scaled_penalized<T: Real, S: AugmentedSystem<T>>(
    problem: &ScpProblem<T, S>,
    blocks: &[LinearizedBlocks<T>],
    z: &Trajectory<T>,
) -> T {
    let pxi = &problem.scaling.px_inv;
    let mut pen = T::zero();
    for (k, b) in blocks.iter().enumerate() {
        for (i, (e, x)) in b.x_end.iter().zip(z.x(k + 1)).enumerate() {
            pen += (pxi[i] * (*e - *x)).abs();
        }
    }
    let last = z.x(z.n - 1);
    let cost = (0..z.nx).fold(T::zero(), |a, i| a + pxi[i] * last[i] * problem.e_cost[i]);
    problem.weights.w_cost * cost + problem.weights.w_ep * pen
}

fn renormalize<T: Real>(z: &mut Trajectory<T>, blocks: &[(usize, usize)]) {
    for k in 0..z.n {
        let x = z.x_mut(k);
        for &(s, l) in blocks {
            let b = &mut x[s..s + l];
            let n = b.iter().fold(T::zero(), |a, v| a + *v * *v).sqrt();
            if n > T::zero() {
                b.iter_mut().for_each(|v| *v /= n);
            }
        }
    }
}

fn random_seed<T: Real>(ws: &mut PipgWorkspace<T>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in ws.x.iter_mut().chain(ws.u.iter_mut()) {
        *v = T::lit(rng.gen_range(-1.0..1.0));
    }
    let n = ws.x.iter().chain(&ws.u).fold(T::zero(), |a, v| a + *v * *v).sqrt();
    for v in ws.x.iter_mut().chain(ws.u.iter_mut()) {
        *v /= n;
    }
}

fn linearize<T: Real, S: AugmentedSystem<T>>(
    problem: &ScpProblem<T, S>,
    z: &Trajectory<T>,
    ws: &mut ScpWorkspace<T, S::Scratch>,
    threads: usize,
) -> Result<()> {
    if threads > 1 {
        discretizer::linearize_all_parallel(&problem.system, z, &problem.grid, problem.steps, threads, &mut ws.blocks)
    } else {
        discretizer::linearize_all(&problem.system, z, &problem.grid, problem.steps, &mut ws.prop, &mut ws.blocks)
    }
}

/// Runs prox-linear SCP from `initial`. The PIPG iterate in `ws` is used as
/// the warm start of the first subproblem; call `ws.pipg.reset()` for a cold
/// start.
pub fn scp_solve<T: Real, S: AugmentedSystem<T>>(
    problem: &ScpProblem<T, S>,
    settings: &ScpSettings,
    initial: &Trajectory<T>,
    ws: &mut ScpWorkspace<T, S::Scratch>,
) -> Result<ScpResult<T>> {
    settings.validate()?;
    problem.weights.validate()?;
    problem.scaling.validate()?;
    let (n, nx, nu) = (problem.grid.len(), problem.system.nx(), problem.system.nu());
    if initial.n != n || initial.nx != nx || initial.nu != nu {
        return Err(Error::dims("scp_solve", (initial.n, initial.nx), (n, nx)));
    }
    if !initial.is_finite() {
        return Err(Error::Precondition("initial guess is not finite".into()));
    }
    let tol_feas = T::lit(settings.tol_feas);
    let tol_step = T::lit(settings.tol_step);
    let sc = &problem.scaling;

    let mut z = initial.clone();
    let mut history = Vec::with_capacity(settings.max_iters);
    let mut last_step = T::infinity();
    let mut iterations = 0;
    loop {
        linearize(problem, &z, ws, settings.linearize_threads)?;
        let defect = scaled_defect(&ws.blocks, &z, &sc.px_inv);
        if iterations > 0 && defect <= tol_feas && last_step <= tol_step {
            return Ok(ScpResult { iterate: z, iterations, converged: true, defect_inf: defect, history });
        }
        if iterations == settings.max_iters {
            return Ok(ScpResult { iterate: z, iterations, converged: false, defect_inf: defect, history });
        }
        let cost = scaled_penalized(problem, &ws.blocks, &z);

        assemble_subproblem(problem, &z, &ws.blocks, &mut ws.sub)?;
        if ws.pipg.primal_is_zero() {
            random_seed(&mut ws.pipg, settings.seed);
            power_iteration_custom(&ws.sub, &mut ws.pipg, &settings.pipg)?;
            ws.pipg.reset();
        } else {
            power_iteration_custom(&ws.sub, &mut ws.pipg, &settings.pipg)?;
        }
        let out = pipg_custom(&ws.sub, &settings.pipg, &mut ws.pipg)?;

        unscale(sc, &z, &ws.pipg.x, &ws.pipg.u, &mut ws.next);
        renormalize(&mut ws.next, &problem.unit_blocks);
        if !ws.next.is_finite() {
            return Err(Error::SolverDiverged { iteration: out.iterations });
        }
        let mut step = T::zero();
        for (i, (a, b)) in ws.next.x.iter().zip(&z.x).enumerate() {
            step = step.max((sc.px_inv[i % nx] * (*a - *b)).abs());
        }
        for (i, (a, b)) in ws.next.u.iter().zip(&z.u).enumerate() {
            step = step.max((sc.pu_inv[i % nu] * (*a - *b)).abs());
        }
        std::mem::swap(&mut z, &mut ws.next);
        iterations += 1;
        last_step = step;
        history.push(IterationRecord {
            iteration: iterations,
            penalized_cost: cost,
            defect_inf: defect,
            step_inf: step,
            pipg_iterations: out.iterations,
            sigma: ws.pipg.sigma,
        });
    }
}

/// Largest absolute deviation of the fixed boundary components from their
/// targets.
pub fn boundary_residual<T: Real, S>(problem: &ScpProblem<T, S>, z: &Trajectory<T>) -> T {
    let (first, last) = (z.x(0), z.x(z.n - 1));
    let a = problem.fix_initial.iter().map(|&(i, v)| (first[i] - v).abs());
    let b = problem.fix_final.iter().map(|&(i, v)| (last[i] - v).abs());
    a.chain(b).fold(T::zero(), |m, v| m.max(v))
}

/// `max_k (y_{k+1} − y_k)` over the nodes, or zero without an integrator.
pub fn max_relaxation_step<T: Real>(y_index: Option<usize>, z: &Trajectory<T>) -> T {
    let Some(iy) = y_index else { return T::zero() };
    (0..z.n - 1).fold(T::neg_infinity(), |m, k| m.max(z.x(k + 1)[iy] - z.x(k)[iy]))
}

#[cfg(test)]
mod tests;
