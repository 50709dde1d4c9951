//! First-order-hold discretization by multiple shooting.
//!
//! Each interval `[τ_k, τ_{k+1}]` is integrated independently from the node
//! state, together with the sensitivities
//!
//! ```text
//!   Φ_x' = A Φ_x,          Φ_x(τ_k) = I
//!   Φ⁻'  = A Φ⁻ + B λ⁻,    Φ⁻(τ_k)  = 0
//!   Φ⁺'  = A Φ⁺ + B λ⁺,    Φ⁺(τ_k)  = 0
//! ```
//!
//! in a single stacked fixed-step RK4.

use std::thread;

use crate::ctcs::AugmentedSystem;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smallmat::{gemm, gemv_acc};

pub const DEFAULT_STEPS: usize = 16;
pub const DEFAULT_AUDIT_SUBSTEPS: usize = 64;

/// Normalized time grid on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    nodes: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation("grid.N", "must be at least 2"));
        }
        let last = T::lit((n - 1) as f64);
        let mut nodes: Vec<T> = (0..n).map(|k| T::lit(k as f64) / last).collect();
        nodes[n - 1] = T::one();
        Ok(Self { nodes })
    }

    pub fn new(nodes: Vec<T>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::validation("grid.N", "must be at least 2"));
        }
        if nodes[0] != T::zero() || nodes[nodes.len() - 1] != T::one() {
            return Err(Error::validation("grid.nodes", "must start at 0 and end at 1"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation("grid.nodes", "must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn interval(&self, k: usize) -> (T, T) {
        (self.nodes[k], self.nodes[k + 1])
    }
}

/// Node states and controls, row-major `N x nx` and `N x nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub n: usize,
    pub nx: usize,
    pub nu: usize,
    pub x: Vec<T>,
    pub u: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn zeros(n: usize, nx: usize, nu: usize) -> Self {
        Self {
            n,
            nx,
            nu,
            x: vec![T::zero(); n * nx],
            u: vec![T::zero(); n * nu],
        }
    }

    pub fn x(&self, k: usize) -> &[T] {
        &self.x[k * self.nx..(k + 1) * self.nx]
    }

    pub fn x_mut(&mut self, k: usize) -> &mut [T] {
        &mut self.x[k * self.nx..(k + 1) * self.nx]
    }

    pub fn u(&self, k: usize) -> &[T] {
        &self.u[k * self.nu..(k + 1) * self.nu]
    }

    pub fn u_mut(&mut self, k: usize) -> &mut [T] {
        &mut self.u[k * self.nu..(k + 1) * self.nu]
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.u).all(|v| v.is_finite())
    }

    /// `t_f = Σ (s_k + s_{k+1})/2 · Δτ_k` for FOH dilation in slot `s_index`.
    pub fn times(&self, grid: &Grid<T>, s_index: usize) -> Vec<T> {
        let half = T::lit(0.5);
        let mut t = vec![T::zero(); self.n];
        for k in 0..self.n - 1 {
            let (a, b) = grid.interval(k);
            t[k + 1] = t[k] + half * (self.u(k)[s_index] + self.u(k + 1)[s_index]) * (b - a);
        }
        t
    }
}

/// Linearized dynamics of one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedBlocks<T> {
    pub nx: usize,
    pub nu: usize,
    pub a: Vec<T>,
    pub bm: Vec<T>,
    pub bp: Vec<T>,
    pub w: Vec<T>,
    pub x_end: Vec<T>,
}

impl<T: Real> LinearizedBlocks<T> {
    pub fn zeros(nx: usize, nu: usize) -> Self {
        Self {
            nx,
            nu,
            a: vec![T::zero(); nx * nx],
            bm: vec![T::zero(); nx * nu],
            bp: vec![T::zero(); nx * nu],
            w: vec![T::zero(); nx],
            x_end: vec![T::zero(); nx],
        }
    }
}

/// FOH weights `(λ⁻, λ⁺)` at `tau`.
pub fn foh_weights<T: Real>(tau: T, tau_k: T, tau_k1: T) -> Result<(T, T)> {
    if !(tau_k < tau_k1) {
        return Err(Error::Precondition(format!("empty interval [{tau_k}, {tau_k1}]")));
    }
    if !(tau >= tau_k && tau <= tau_k1) {
        return Err(Error::Precondition(format!("tau {tau} outside [{tau_k}, {tau_k1}]")));
    }
    let d = tau_k1 - tau_k;
    Ok(((tau_k1 - tau) / d, (tau - tau_k) / d))
}

/// First-order-hold interpolation of two node controls.
pub fn foh_interp<T: Real>(u_k: &[T], u_k1: &[T], tau: T, tau_k: T, tau_k1: T, out: &mut [T]) -> Result<()> {
    if u_k.len() != u_k1.len() || out.len() != u_k.len() {
        return Err(Error::dims("foh_interp", (u_k.len(), 1), (u_k1.len(), 1)));
    }
    let (lm, lp) = foh_weights(tau, tau_k, tau_k1)?;
    for i in 0..out.len() {
        out[i] = if lp == T::zero() {
            u_k[i]
        } else if lm == T::zero() {
            u_k1[i]
        } else {
            lm * u_k[i] + lp * u_k1[i]
        };
    }
    Ok(())
}

#[inline]
fn blend<T: Real>(lm: T, lp: T, a: &[T], b: &[T], out: &mut [T]) {
    for i in 0..out.len() {
        out[i] = lm * a[i] + lp * b[i];
    }
}

/// Integration buffers for one worker.
pub struct Propagator<T, S> {
    nx: usize,
    nu: usize,
    scratch: S,
    z: Vec<T>,
    zt: Vec<T>,
    k: [Vec<T>; 4],
    a: Vec<T>,
    b: Vec<T>,
    u: Vec<T>,
    g: Vec<T>,
}

impl<T: Real, S> Propagator<T, S> {
    pub fn new<Sys: AugmentedSystem<T, Scratch = S>>(sys: &Sys) -> Self {
        let (nx, nu) = (sys.nx(), sys.nu());
        let nz = nx * (1 + nx + 2 * nu);
        let z = || vec![T::zero(); nz];
        Self {
            nx,
            nu,
            scratch: sys.scratch(),
            z: z(),
            zt: z(),
            k: [z(), z(), z(), z()],
            a: vec![T::zero(); nx * nx],
            b: vec![T::zero(); nx * nu],
            u: vec![T::zero(); nu],
            g: vec![T::zero(); sys.n_ineq()],
        }
    }
}

fn check_dims<T: Real>(nx: usize, nu: usize, xk: &[T], uk: &[T], uk1: &[T]) -> Result<()> {
    if xk.len() != nx || uk.len() != nu || uk1.len() != nu {
        return Err(Error::dims("propagate", (nx, nu), (xk.len(), uk.len())));
    }
    Ok(())
}

struct Interval<'a, T> {
    uk: &'a [T],
    uk1: &'a [T],
    t0: T,
    t1: T,
}

impl<T: Real> Interval<'_, T> {
    fn tau(&self, i: usize, steps: usize) -> T {
        if i == steps {
            self.t1
        } else {
            self.t0 + (self.t1 - self.t0) * T::lit(i as f64) / T::lit(steps as f64)
        }
    }

    fn weights(&self, tau: T) -> (T, T) {
        let d = self.t1 - self.t0;
        ((self.t1 - tau) / d, (tau - self.t0) / d)
    }
}

impl<T: Real, S> Propagator<T, S> {
    /// Stacked rate: state, `Φ_x`, `Φ⁻`, `Φ⁺`.
    fn stacked_rate<Sys>(&mut self, sys: &Sys, iv: &Interval<'_, T>, tau: T, which: usize) -> Result<()>
    where
        Sys: AugmentedSystem<T, Scratch = S>,
    {
        let (nx, nu) = (self.nx, self.nu);
        let (lm, lp) = iv.weights(tau);
        blend(lm, lp, iv.uk, iv.uk1, &mut self.u);
        let zin: &[T] = if which == 0 { &self.z } else { &self.zt };
        let dz = &mut self.k[which];
        let (x, phi) = zin.split_at(nx);
        sys.rate(x, &self.u, &mut dz[..nx], &mut self.scratch)?;
        sys.jacobians(x, &self.u, &mut self.a, &mut self.b, &mut self.scratch)?;
        let (phi_x, phi_u) = phi.split_at(nx * nx);
        let (phi_m, phi_p) = phi_u.split_at(nx * nu);
        let (d_x, d_u) = dz[nx..].split_at_mut(nx * nx);
        let (d_m, d_p) = d_u.split_at_mut(nx * nu);
        gemm(&self.a, phi_x, d_x, nx, nx, nx);
        gemm(&self.a, phi_m, d_m, nx, nx, nu);
        gemm(&self.a, phi_p, d_p, nx, nx, nu);
        for i in 0..nx * nu {
            d_m[i] += lm * self.b[i];
            d_p[i] += lp * self.b[i];
        }
        Ok(())
    }

    fn state_rate<Sys>(&mut self, sys: &Sys, iv: &Interval<'_, T>, tau: T, which: usize) -> Result<()>
    where
        Sys: AugmentedSystem<T, Scratch = S>,
    {
        let nx = self.nx;
        let (lm, lp) = iv.weights(tau);
        blend(lm, lp, iv.uk, iv.uk1, &mut self.u);
        let zin: &[T] = if which == 0 { &self.z[..nx] } else { &self.zt[..nx] };
        sys.rate(zin, &self.u, &mut self.k[which][..nx], &mut self.scratch)
    }

    /// One classical RK4 step over the first `len` entries of `z`.
    fn rk4_step<Sys, F>(&mut self, sys: &Sys, iv: &Interval<'_, T>, t: T, h: T, len: usize, rate: F) -> Result<()>
    where
        Sys: AugmentedSystem<T, Scratch = S>,
        F: Fn(&mut Self, &Sys, &Interval<'_, T>, T, usize) -> Result<()>,
    {
        let half = T::lit(0.5);
        let (two, six) = (T::lit(2.0), T::lit(6.0));
        rate(self, sys, iv, t, 0)?;
        for i in 0..len {
            self.zt[i] = self.z[i] + half * h * self.k[0][i];
        }
        rate(self, sys, iv, t + half * h, 1)?;
        for i in 0..len {
            self.zt[i] = self.z[i] + half * h * self.k[1][i];
        }
        rate(self, sys, iv, t + half * h, 2)?;
        for i in 0..len {
            self.zt[i] = self.z[i] + h * self.k[2][i];
        }
        rate(self, sys, iv, t + h, 3)?;
        for i in 0..len {
            self.z[i] += h / six * (self.k[0][i] + two * self.k[1][i] + two * self.k[2][i] + self.k[3][i]);
        }
        Ok(())
    }

    /// Integrates one interval with sensitivities and fills `out`.
    #[allow(clippy::too_many_arguments)]
    pub fn propagate_interval<Sys>(
        &mut self,
        sys: &Sys,
        xk: &[T],
        uk: &[T],
        uk1: &[T],
        interval: (T, T),
        steps: usize,
        out: &mut LinearizedBlocks<T>,
    ) -> Result<()>
    where
        Sys: AugmentedSystem<T, Scratch = S>,
    {
        let (nx, nu) = (self.nx, self.nu);
        check_dims(nx, nu, xk, uk, uk1)?;
        if steps == 0 {
            return Err(Error::Precondition("steps must be at least 1".into()));
        }
        let iv = Interval { uk, uk1, t0: interval.0, t1: interval.1 };
        if !(iv.t0 < iv.t1) {
            return Err(Error::Precondition(format!("empty interval [{}, {}]", iv.t0, iv.t1)));
        }
        self.z.iter_mut().for_each(|v| *v = T::zero());
        self.z[..nx].copy_from_slice(xk);
        for i in 0..nx {
            self.z[nx + i * nx + i] = T::one();
        }
        let len = self.z.len();
        for i in 0..steps {
            let t = iv.tau(i, steps);
            let h = iv.tau(i + 1, steps) - t;
            self.rk4_step(sys, &iv, t, h, len, Self::stacked_rate)?;
            if !self.z.iter().all(|v| v.is_finite()) {
                return Err(Error::Diverged { interval: 0 });
            }
        }
        let (x, phi) = self.z.split_at(nx);
        let (phi_x, phi_u) = phi.split_at(nx * nx);
        let (phi_m, phi_p) = phi_u.split_at(nx * nu);
        out.x_end.copy_from_slice(x);
        out.a.copy_from_slice(phi_x);
        out.bm.copy_from_slice(phi_m);
        out.bp.copy_from_slice(phi_p);
        // w = x_end - A x_k - B⁻ u_k - B⁺ u_{k+1}
        for v in out.w.iter_mut() {
            *v = T::zero();
        }
        gemv_acc(&out.a, nx, nx, xk, &mut out.w);
        gemv_acc(&out.bm, nx, nu, uk, &mut out.w);
        gemv_acc(&out.bp, nx, nu, uk1, &mut out.w);
        for i in 0..nx {
            out.w[i] = out.x_end[i] - out.w[i];
        }
        Ok(())
    }

    /// Integrates the state alone; calls `sample(τ, x, u)` at the start of
    /// the interval and after every sub-step.
    #[allow(clippy::too_many_arguments)]
    pub fn propagate_state<Sys, F>(
        &mut self,
        sys: &Sys,
        xk: &[T],
        uk: &[T],
        uk1: &[T],
        interval: (T, T),
        steps: usize,
        x_end: &mut [T],
        mut sample: F,
    ) -> Result<()>
    where
        Sys: AugmentedSystem<T, Scratch = S>,
        F: FnMut(T, &[T], &[T], &mut [T]),
    {
        let nx = self.nx;
        check_dims(nx, self.nu, xk, uk, uk1)?;
        if steps == 0 {
            return Err(Error::Precondition("steps must be at least 1".into()));
        }
        let iv = Interval { uk, uk1, t0: interval.0, t1: interval.1 };
        self.z[..nx].copy_from_slice(xk);
        let mut emit = |p: &mut Self, tau: T| {
            let (lm, lp) = iv.weights(tau);
            blend(lm, lp, iv.uk, iv.uk1, &mut p.u);
            sample(tau, &p.z[..nx], &p.u, &mut p.g);
        };
        emit(self, iv.t0);
        for i in 0..steps {
            let t = iv.tau(i, steps);
            let h = iv.tau(i + 1, steps) - t;
            self.rk4_step(sys, &iv, t, h, nx, Self::state_rate)?;
            if !self.z[..nx].iter().all(|v| v.is_finite()) {
                return Err(Error::Diverged { interval: 0 });
            }
            emit(self, iv.tau(i + 1, steps));
        }
        x_end.copy_from_slice(&self.z[..nx]);
        Ok(())
    }
}

fn tag(e: Error, k: usize) -> Error {
    match e {
        Error::Diverged { .. } => Error::Diverged { interval: k },
        e => e.on_interval(k),
    }
}

fn check_traj<T: Real, Sys: AugmentedSystem<T>>(sys: &Sys, z: &Trajectory<T>, grid: &Grid<T>) -> Result<()> {
    if z.nx != sys.nx() || z.nu != sys.nu() || z.n != grid.len() {
        return Err(Error::dims("trajectory", (z.n, z.nx), (grid.len(), sys.nx())));
    }
    Ok(())
}

/// Linearizes every interval about `z`. `blocks` must hold `N - 1` entries.
pub fn linearize_all<T: Real, Sys: AugmentedSystem<T>>(
    sys: &Sys,
    z: &Trajectory<T>,
    grid: &Grid<T>,
    steps: usize,
    prop: &mut Propagator<T, Sys::Scratch>,
    blocks: &mut [LinearizedBlocks<T>],
) -> Result<()> {
    check_traj(sys, z, grid)?;
    if blocks.len() != z.n - 1 {
        return Err(Error::dims("linearize_all", (blocks.len(), 1), (z.n - 1, 1)));
    }
    for (k, out) in blocks.iter_mut().enumerate() {
        prop.propagate_interval(sys, z.x(k), z.u(k), z.u(k + 1), grid.interval(k), steps, out)
            .map_err(|e| tag(e, k))?;
    }
    Ok(())
}

/// As [`linearize_all`], fanning contiguous chunks of intervals out to
/// `threads` scoped workers. Results are identical to the serial version.
pub fn linearize_all_parallel<T: Real, Sys: AugmentedSystem<T>>(
    sys: &Sys,
    z: &Trajectory<T>,
    grid: &Grid<T>,
    steps: usize,
    threads: usize,
    blocks: &mut [LinearizedBlocks<T>],
) -> Result<()> {
    check_traj(sys, z, grid)?;
    if blocks.len() != z.n - 1 {
        return Err(Error::dims("linearize_all", (blocks.len(), 1), (z.n - 1, 1)));
    }
    let chunk = blocks.len().div_ceil(threads.max(1));
    thread::scope(|s| {
        let handles: Vec<_> = blocks
            .chunks_mut(chunk)
            .enumerate()
            .map(|(c, part)| {
                s.spawn(move || -> Result<()> {
                    let mut prop = Propagator::new(sys);
                    for (i, out) in part.iter_mut().enumerate() {
                        let k = c * chunk + i;
                        prop.propagate_interval(sys, z.x(k), z.u(k), z.u(k + 1), grid.interval(k), steps, out)
                            .map_err(|e| tag(e, k))?;
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("linearization worker panicked"))
            .collect::<Result<Vec<()>>>()
            .map(|_| ())
    })
}

/// Propagated defects `x_end,k - x_{k+1}`, written into `defects` (`(N-1) x nx`).
pub fn defects<T: Real, Sys: AugmentedSystem<T>>(
    sys: &Sys,
    z: &Trajectory<T>,
    grid: &Grid<T>,
    steps: usize,
    prop: &mut Propagator<T, Sys::Scratch>,
    defects: &mut [T],
) -> Result<()> {
    check_traj(sys, z, grid)?;
    let nx = z.nx;
    for k in 0..z.n - 1 {
        let d = &mut defects[k * nx..(k + 1) * nx];
        prop.propagate_state(sys, z.x(k), z.u(k), z.u(k + 1), grid.interval(k), steps, d, |_, _, _, _| {})
            .map_err(|e| tag(e, k))?;
        for (di, xi) in d.iter_mut().zip(z.x(k + 1)) {
            *di -= *xi;
        }
    }
    Ok(())
}

/// Single-shooting rollout from `z.x(0)` under the node controls of `z`;
/// overwrites the states of nodes `1..N`.
pub fn single_shoot<T: Real, Sys: AugmentedSystem<T>>(
    sys: &Sys,
    z: &mut Trajectory<T>,
    grid: &Grid<T>,
    steps: usize,
    prop: &mut Propagator<T, Sys::Scratch>,
) -> Result<()> {
    check_traj(sys, z, grid)?;
    let nx = z.nx;
    let mut next = vec![T::zero(); nx];
    for k in 0..z.n - 1 {
        let (xk, uk, uk1) = (z.x(k).to_vec(), z.u(k).to_vec(), z.u(k + 1).to_vec());
        prop.propagate_state(sys, &xk, &uk, &uk1, grid.interval(k), steps, &mut next, |_, _, _, _| {})
            .map_err(|e| tag(e, k))?;
        z.x_mut(k + 1).copy_from_slice(&next);
    }
    Ok(())
}

/// One dense-audit sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditSample<T> {
    pub interval: usize,
    pub tau: T,
    pub max_g: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseAudit<T> {
    pub max_pointwise_g: T,
    /// Sum over intervals of the propagated `y` increase.
    pub total_y_increase: T,
    pub samples: Vec<AuditSample<T>>,
}

/// Re-propagates every interval from its node with `substeps` RK4 steps and
/// records the largest path-constraint value seen at any sample point.
pub fn dense_violation_audit<T: Real, Sys: AugmentedSystem<T>>(
    sys: &Sys,
    z: &Trajectory<T>,
    grid: &Grid<T>,
    substeps: usize,
) -> Result<DenseAudit<T>> {
    check_traj(sys, z, grid)?;
    let mut prop = Propagator::new(sys);
    let mut x_end = vec![T::zero(); z.nx];
    let mut samples = Vec::with_capacity((z.n - 1) * (substeps + 1));
    let mut max_g = T::neg_infinity();
    let mut dy = T::zero();
    for k in 0..z.n - 1 {
        prop.propagate_state(sys, z.x(k), z.u(k), z.u(k + 1), grid.interval(k), substeps, &mut x_end, |tau, x, u, g| {
            sys.path_ineq(x, u, g);
            let m = g.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            max_g = max_g.max(m);
            samples.push(AuditSample { interval: k, tau, max_g: m });
        })
        .map_err(|e| tag(e, k))?;
        if let Some(iy) = sys.y_index() {
            dy += x_end[iy] - z.x(k)[iy];
        }
    }
    Ok(DenseAudit {
        max_pointwise_g: max_g,
        total_y_increase: dy,
        samples,
    })
}
