//! The 6-DoF powered-descent landing problem.

use serde::{Deserialize, Serialize};

use super::{ScalingPair, ScpProblem, ScpWeights};
use crate::ctcs::Ctcs;
use crate::discretizer::{Grid, Trajectory, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::rocket6dof::{idx, rotate, Rocket6Dof, VehicleParams, VehicleState, N_CONTROL, N_STATE};
use crate::scalar::Real;

/// Index of the violation integrator in the augmented state.
pub const Y: usize = N_STATE;
/// Index of the dilation factor in the augmented control.
pub const S: usize = N_CONTROL;

pub type LandingSystem<T> = Ctcs<Rocket6Dof<T>>;

/// Terminal targets. Final mass is free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalState<T> {
    pub r: [T; 3],
    pub v: [T; 3],
    pub q: [T; 4],
    pub w: [T; 3],
}

/// Typical magnitude of each quantity; these become the scaling diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingRanges<T> {
    pub mass: T,
    pub position: T,
    pub velocity: T,
    pub quaternion: T,
    pub angular_rate: T,
    pub violation: T,
    pub thrust: T,
    pub torque: T,
    pub dilation: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Number of nodes.
    #[serde(rename = "N")]
    pub n: usize,
    /// RK4 sub-steps per interval.
    pub steps: usize,
}

/// A complete landing instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandingSetup<T> {
    pub vehicle: VehicleParams<T>,
    pub initial: VehicleState<T>,
    pub terminal: TerminalState<T>,
    pub grid: GridSpec,
    pub t_f_guess: T,
    pub s_min: T,
    pub s_max: T,
    pub weights: ScpWeights<T>,
    pub ranges: ScalingRanges<T>,
}

impl LandingSetup<f64> {
    /// The nominal landing used by the shipped configuration.
    pub fn nominal() -> Self {
        let vehicle = VehicleParams::nondimensional();
        Self {
            initial: VehicleState {
                m: 2.0,
                r: [7.5, 4.5, 1.5],
                v: [-1.0, -1.0, 0.0],
                q: [1.0, 0.0, 0.0, 0.0],
                w: [0.0; 3],
            },
            terminal: TerminalState { r: [0.0; 3], v: [0.0; 3], q: [1.0, 0.0, 0.0, 0.0], w: [0.0; 3] },
            grid: GridSpec { n: 20, steps: DEFAULT_STEPS },
            t_f_guess: 6.0,
            s_min: 1.0,
            s_max: 20.0,
            weights: ScpWeights { w_cost: 1e-3, w_prox: 3.0, w_ep: 50.0, epsilon_relax: 1e-5 },
            ranges: ScalingRanges {
                mass: 1.0,
                position: 8.0,
                velocity: vehicle.v_max,
                quaternion: 1.0,
                angular_rate: vehicle.omega_max,
                violation: 0.1,
                thrust: vehicle.t_max,
                torque: vehicle.gamma_max,
                dilation: 6.0,
            },
            vehicle,
        }
    }
}

impl<T: Real> LandingSetup<T> {
    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.weights.validate()?;
        if self.grid.n < 2 {
            return Err(Error::validation("grid.N", "must be at least 2"));
        }
        if self.grid.steps == 0 {
            return Err(Error::validation("grid.steps", "must be at least 1"));
        }
        if !(self.s_min > T::zero() && self.s_min < self.s_max && self.s_max.is_finite()) {
            return Err(Error::validation("landing.s_min", "need 0 < s_min < s_max"));
        }
        if !(self.t_f_guess >= self.s_min && self.t_f_guess <= self.s_max) {
            return Err(Error::validation("landing.t_f_guess", "must lie in [s_min, s_max]"));
        }
        if !(self.initial.m > self.vehicle.m_dry) {
            return Err(Error::validation("landing.initial.m", "must exceed vehicle.m_dry"));
        }
        let ok = |q: &[T; 4]| {
            let n = q.iter().fold(T::zero(), |a, v| a + *v * *v).sqrt();
            (n - T::one()).abs() <= T::lit(1e-6)
        };
        if !ok(&self.initial.q) {
            return Err(Error::validation("landing.initial.q", "must be a unit quaternion"));
        }
        if !ok(&self.terminal.q) {
            return Err(Error::validation("landing.terminal.q", "must be a unit quaternion"));
        }
        let r = &self.ranges;
        for (k, v) in [
            ("mass", r.mass),
            ("position", r.position),
            ("velocity", r.velocity),
            ("quaternion", r.quaternion),
            ("angular_rate", r.angular_rate),
            ("violation", r.violation),
            ("thrust", r.thrust),
            ("torque", r.torque),
            ("dilation", r.dilation),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::validation(format!("scaling.{k}"), "must be positive"));
            }
        }
        Ok(())
    }

    pub fn scaling(&self) -> Result<ScalingPair<T>> {
        let r = &self.ranges;
        let mut px = vec![T::zero(); N_STATE + 1];
        px[idx::M] = r.mass;
        px[idx::R..idx::R + 3].fill(r.position);
        px[idx::V..idx::V + 3].fill(r.velocity);
        px[idx::Q..idx::Q + 4].fill(r.quaternion);
        px[idx::W..idx::W + 3].fill(r.angular_rate);
        px[Y] = r.violation;
        let mut pu = vec![T::zero(); N_CONTROL + 1];
        pu[idx::THRUST..idx::THRUST + 3].fill(r.thrust);
        pu[idx::TORQUE..idx::TORQUE + 3].fill(r.torque);
        pu[S] = r.dilation;
        ScalingPair::new(px, pu)
    }

    pub fn build(&self) -> Result<ScpProblem<T, LandingSystem<T>>> {
        self.validate()?;
        let system = Ctcs::new(Rocket6Dof::new(self.vehicle.clone())?);
        let mut fix_initial: Vec<(usize, T)> = self.initial.to_array().iter().copied().enumerate().collect();
        fix_initial.push((Y, T::zero()));
        let t = &self.terminal;
        let mut fix_final = Vec::with_capacity(13);
        for (o, vals) in [(idx::R, &t.r[..]), (idx::V, &t.v[..]), (idx::Q, &t.q[..]), (idx::W, &t.w[..])] {
            fix_final.extend(vals.iter().enumerate().map(|(i, &v)| (o + i, v)));
        }
        let mut u_min = vec![T::neg_infinity(); N_CONTROL + 1];
        let mut u_max = vec![T::infinity(); N_CONTROL + 1];
        u_min[S] = self.s_min;
        u_max[S] = self.s_max;
        let mut e_cost = vec![T::zero(); N_STATE + 1];
        e_cost[idx::M] = -T::one();
        Ok(ScpProblem {
            system,
            grid: Grid::uniform(self.grid.n)?,
            steps: self.grid.steps,
            fix_initial,
            fix_final,
            u_min,
            u_max,
            e_cost,
            weights: self.weights,
            scaling: self.scaling()?,
            unit_blocks: vec![(idx::Q, 4)],
        })
    }

    /// Straight-line guess between the boundary values with a hover thrust.
    pub fn initial_guess(&self) -> Trajectory<T> {
        let n = self.grid.n;
        let mut z = Trajectory::zeros(n, N_STATE + 1, N_CONTROL + 1);
        let (a, b) = (&self.initial, &self.terminal);
        let g = self.vehicle.g_inertial;
        for k in 0..n {
            let f = if n > 1 { T::lit(k as f64 / (n - 1) as f64) } else { T::zero() };
            let lerp = |p: T, q: T| p + f * (q - p);
            let m = lerp(a.m, self.vehicle.m_dry);
            let q = slerp(&a.q, &b.q, f);
            let x = z.x_mut(k);
            x[idx::M] = m;
            for i in 0..3 {
                x[idx::R + i] = lerp(a.r[i], b.r[i]);
                x[idx::V + i] = lerp(a.v[i], b.v[i]);
                x[idx::W + i] = lerp(a.w[i], b.w[i]);
            }
            x[idx::Q..idx::Q + 4].copy_from_slice(&q);
            let conj = [q[0], -q[1], -q[2], -q[3]];
            let hover = [-m * g[0], -m * g[1], -m * g[2]];
            let tb = rotate(&conj, &hover);
            let u = z.u_mut(k);
            u[idx::THRUST..idx::THRUST + 3].copy_from_slice(&tb);
            u[S] = self.t_f_guess;
        }
        z
    }
}

/// Shortest-arc spherical interpolation between unit quaternions.
pub fn slerp<T: Real>(a: &[T; 4], b: &[T; 4], f: T) -> [T; 4] {
    let mut d = (0..4).fold(T::zero(), |s, i| s + a[i] * b[i]);
    let mut b = *b;
    if d < T::zero() {
        d = -d;
        b.iter_mut().for_each(|v| *v = -*v);
    }
    let (wa, wb) = if d > T::lit(0.9995) {
        (T::one() - f, f)
    } else {
        let th = d.min(T::one()).acos();
        let s = th.sin();
        (((T::one() - f) * th).sin() / s, (f * th).sin() / s)
    };
    let mut q = [T::zero(); 4];
    for i in 0..4 {
        q[i] = wa * a[i] + wb * b[i];
    }
    let n = q.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
    q.map(|v| v / n)
}
