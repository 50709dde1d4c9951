//! 6-DoF powered-descent vehicle: rigid body with a gimballed main engine
//! and an independent body torque.
//!
//! State `ξ = (m, r, v, q, ω)` (14), control `ζ = (T_B, γ_B)` (6).
//! Axis 1 of the inertial frame is vertical (up). Quaternions are
//! scalar-first Hamilton quaternions rotating body vectors into the inertial
//! frame, `v_I = q ⊗ v_B ⊗ q*`.
//!
//! Path inequalities, in order:
//!
//! | # | expression |
//! |---|------------|
//! | 1 | `m_dry - m` |
//! | 2 | `-e₁ᵀ r` |
//! | 3 | `‖v‖² - v_max²` |
//! | 4 | `4‖H_θ q‖² - (1 - cos θ_max)²` |
//! | 5 | `‖ω‖² - ω_max²` |
//! | 6 | `‖T‖ - e₁ᵀT sec δ_max` |
//! | 7 | `‖T‖ - T_max` |
//! | 8 | `T_min - ‖T‖` |
//! | 9 | `‖γ‖² - γ_max²` |

use serde::{Deserialize, Serialize};

use crate::ctcs::{Model, ModelJacobians};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smallmat::{cross3, inverse3};

pub const N_STATE: usize = 14;
pub const N_CONTROL: usize = 6;
pub const N_INEQ: usize = 9;

/// Offsets into the state vector.
pub mod idx {
    pub const M: usize = 0;
    pub const R: usize = 1;
    pub const V: usize = 4;
    pub const Q: usize = 7;
    pub const W: usize = 11;
    pub const THRUST: usize = 0;
    pub const TORQUE: usize = 3;
}

/// Minimum thrust norm at which Jacobians are evaluated.
const THRUST_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState<T> {
    pub m: T,
    pub r: [T; 3],
    pub v: [T; 3],
    pub q: [T; 4],
    pub w: [T; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleControl<T> {
    pub thrust_body: [T; 3],
    pub torque_body: [T; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams<T> {
    /// Mass flow per unit thrust.
    pub alpha_mdot: T,
    pub g_inertial: [T; 3],
    pub inertia: [[T; 3]; 3],
    /// Engine position relative to the center of mass, body frame.
    pub r_thrust: [T; 3],
    /// Tilt selector acting on the scalar-first quaternion.
    pub h_theta: [[T; 4]; 2],
    pub m_dry: T,
    pub v_max: T,
    pub theta_max: T,
    pub omega_max: T,
    pub delta_max: T,
    pub t_min: T,
    pub t_max: T,
    pub gamma_max: T,
}

impl<T: Real> VehicleState<T> {
    pub fn to_array(&self) -> [T; N_STATE] {
        let mut x = [T::zero(); N_STATE];
        x[idx::M] = self.m;
        x[idx::R..idx::R + 3].copy_from_slice(&self.r);
        x[idx::V..idx::V + 3].copy_from_slice(&self.v);
        x[idx::Q..idx::Q + 4].copy_from_slice(&self.q);
        x[idx::W..idx::W + 3].copy_from_slice(&self.w);
        x
    }

    pub fn from_slice(x: &[T]) -> Self {
        let a3 = |o: usize| [x[o], x[o + 1], x[o + 2]];
        Self {
            m: x[idx::M],
            r: a3(idx::R),
            v: a3(idx::V),
            q: [x[idx::Q], x[idx::Q + 1], x[idx::Q + 2], x[idx::Q + 3]],
            w: a3(idx::W),
        }
    }
}

impl<T: Real> VehicleControl<T> {
    pub fn to_array(&self) -> [T; N_CONTROL] {
        let t = &self.thrust_body;
        let g = &self.torque_body;
        [t[0], t[1], t[2], g[0], g[1], g[2]]
    }

    pub fn from_slice(u: &[T]) -> Self {
        Self {
            thrust_body: [u[0], u[1], u[2]],
            torque_body: [u[3], u[4], u[5]],
        }
    }
}

impl VehicleParams<f64> {
    /// Nondimensional parameter set shipped with the crate.
    ///
    /// These values are not taken from any published baseline. They are
    /// chosen so that the nominal landing converges with the shipped solver
    /// settings. Units: length, time and mass are all scaled to order one.
    pub fn nondimensional() -> Self {
        Self {
            alpha_mdot: 0.05,
            g_inertial: [-1.0, 0.0, 0.0],
            inertia: [[0.2, 0.0, 0.0], [0.0, 0.2, 0.0], [0.0, 0.0, 0.2]],
            r_thrust: [-0.25, 0.0, 0.0],
            h_theta: [[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
            m_dry: 1.0,
            v_max: 6.0,
            theta_max: 90f64.to_radians(),
            omega_max: 60f64.to_radians(),
            delta_max: 20f64.to_radians(),
            t_min: 1.0,
            t_max: 5.0,
            gamma_max: 0.5,
        }
    }
}

impl<T: Real> VehicleParams<T> {
    pub fn validate(&self) -> Result<()> {
        let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
        let pos = |key: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("vehicle.{key}"), "must be positive"))
            }
        };
        pos("alpha_mdot", self.alpha_mdot)?;
        pos("m_dry", self.m_dry)?;
        pos("v_max", self.v_max)?;
        pos("theta_max", self.theta_max)?;
        pos("omega_max", self.omega_max)?;
        pos("delta_max", self.delta_max)?;
        pos("t_min", self.t_min)?;
        pos("t_max", self.t_max)?;
        pos("gamma_max", self.gamma_max)?;
        if self.t_min >= self.t_max {
            return Err(Error::validation("vehicle.t_min", "must be smaller than vehicle.t_max"));
        }
        if self.delta_max >= half_pi {
            return Err(Error::validation("vehicle.delta_max", "must be below pi/2"));
        }
        let j = &self.inertia;
        for r in 0..3 {
            for c in 0..3 {
                if j[r][c] != j[c][r] {
                    return Err(Error::validation("vehicle.inertia", "must be symmetric"));
                }
            }
        }
        // leading principal minors
        let m1 = j[0][0];
        let m2 = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let m3 = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
            - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
            + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
        if !(m1 > T::zero() && m2 > T::zero() && m3 > T::zero()) {
            return Err(Error::validation("vehicle.inertia", "must be positive definite"));
        }
        Ok(())
    }
}

/// The vehicle model with its inertia inverse precomputed.
#[derive(Debug, Clone)]
pub struct Rocket6Dof<T> {
    params: VehicleParams<T>,
    j: [T; 9],
    j_inv: [T; 9],
    sec_delta: T,
    tilt_bound: T,
}

impl<T: Real> Rocket6Dof<T> {
    pub fn new(params: VehicleParams<T>) -> Result<Self> {
        params.validate()?;
        let j = flatten3(&params.inertia);
        let j_inv = inverse3(&j)?;
        let sec_delta = T::one() / params.delta_max.cos();
        let c = T::one() - params.theta_max.cos();
        Ok(Self {
            j,
            j_inv,
            sec_delta,
            tilt_bound: c * c,
            params,
        })
    }

    pub fn params(&self) -> &VehicleParams<T> {
        &self.params
    }

    pub fn eval_dynamics(&self, xi: &VehicleState<T>, zeta: &VehicleControl<T>) -> Result<VehicleState<T>> {
        let mut out = [T::zero(); N_STATE];
        self.dynamics(&xi.to_array(), &zeta.to_array(), &mut out)?;
        Ok(VehicleState::from_slice(&out))
    }

    pub fn eval_constraints(&self, xi: &VehicleState<T>, zeta: &VehicleControl<T>) -> [T; N_INEQ] {
        let mut g = [T::zero(); N_INEQ];
        self.ineq(&xi.to_array(), &zeta.to_array(), &mut g);
        g
    }
}

fn flatten3<T: Copy>(m: &[[T; 3]; 3]) -> [T; 9] {
    [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]]
}

#[inline(always)]
fn mul3<T: Real>(m: &[T; 9], v: &[T]) -> [T; 3] {
    [
        m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
        m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
        m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
    ]
}

#[inline(always)]
fn norm3<T: Real>(v: &[T]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `q ⊗ (0, t) ⊗ q*` for a (possibly non-unit) scalar-first quaternion.
#[inline(always)]
pub(crate) fn rotate<T: Real>(q: &[T], t: &[T]) -> [T; 3] {
    let two = T::lit(2.0);
    let (q0, qv) = (q[0], [q[1], q[2], q[3]]);
    let qq = qv[0] * qv[0] + qv[1] * qv[1] + qv[2] * qv[2];
    let qt = qv[0] * t[0] + qv[1] * t[1] + qv[2] * t[2];
    let c = cross3(&qv, t);
    let k = q0 * q0 - qq;
    [
        k * t[0] + two * qt * qv[0] + two * q0 * c[0],
        k * t[1] + two * qt * qv[1] + two * q0 * c[1],
        k * t[2] + two * qt * qv[2] + two * q0 * c[2],
    ]
}

/// `∂(q ⊗ t ⊗ q*)/∂q`, a 3x4 row-major block.
fn rotate_dq<T: Real>(q: &[T], t: &[T]) -> [[T; 4]; 3] {
    let two = T::lit(2.0);
    let (q0, qv) = (q[0], [q[1], q[2], q[3]]);
    let qt = qv[0] * t[0] + qv[1] * t[1] + qv[2] * t[2];
    let c = cross3(&qv, t);
    let mut d = [[T::zero(); 4]; 3];
    for i in 0..3 {
        d[i][0] = two * q0 * t[i] + two * c[i];
        for j in 0..3 {
            let delta = if i == j { qt } else { T::zero() };
            // -2 t qvᵀ + 2((qv·t) I + qv tᵀ) - 2 q0 [t]ₓ
            d[i][j + 1] = -two * t[i] * qv[j] + two * (delta + qv[i] * t[j]);
        }
    }
    // -2 q0 [t]ₓ
    d[0][2] += two * q0 * t[2];
    d[0][3] -= two * q0 * t[1];
    d[1][1] -= two * q0 * t[2];
    d[1][3] += two * q0 * t[0];
    d[2][1] += two * q0 * t[1];
    d[2][2] -= two * q0 * t[0];
    d
}

impl<T: Real> Model<T> for Rocket6Dof<T> {
    fn n_state(&self) -> usize {
        N_STATE
    }

    fn n_control(&self) -> usize {
        N_CONTROL
    }

    fn n_ineq(&self) -> usize {
        N_INEQ
    }

    fn dynamics(&self, xi: &[T], zeta: &[T], out: &mut [T]) -> Result<()> {
        let p = &self.params;
        let m = xi[idx::M];
        if !(m > T::zero()) {
            return Err(Error::Domain(format!("mass must be positive, got {m}")));
        }
        let half = T::lit(0.5);
        let v = &xi[idx::V..idx::V + 3];
        let q = &xi[idx::Q..idx::Q + 4];
        let w = &xi[idx::W..idx::W + 3];
        let t = &zeta[idx::THRUST..idx::THRUST + 3];
        let gam = &zeta[idx::TORQUE..idx::TORQUE + 3];

        out[idx::M] = -p.alpha_mdot * norm3(t);
        out[idx::R..idx::R + 3].copy_from_slice(v);
        let ti = rotate(q, t);
        for i in 0..3 {
            out[idx::V + i] = ti[i] / m + p.g_inertial[i];
        }
        // ½ Ω(ω) q
        out[idx::Q] = half * (-w[0] * q[1] - w[1] * q[2] - w[2] * q[3]);
        out[idx::Q + 1] = half * (w[0] * q[0] + w[2] * q[2] - w[1] * q[3]);
        out[idx::Q + 2] = half * (w[1] * q[0] - w[2] * q[1] + w[0] * q[3]);
        out[idx::Q + 3] = half * (w[2] * q[0] + w[1] * q[1] - w[0] * q[2]);
        let rt = cross3(&p.r_thrust, t);
        let jw = mul3(&self.j, w);
        let wjw = cross3(w, &jw);
        let net = [rt[0] - wjw[0] + gam[0], rt[1] - wjw[1] + gam[1], rt[2] - wjw[2] + gam[2]];
        let wdot = mul3(&self.j_inv, &net);
        out[idx::W..idx::W + 3].copy_from_slice(&wdot);
        Ok(())
    }

    fn ineq(&self, xi: &[T], zeta: &[T], g: &mut [T]) {
        let p = &self.params;
        let four = T::lit(4.0);
        let v = &xi[idx::V..idx::V + 3];
        let q = &xi[idx::Q..idx::Q + 4];
        let w = &xi[idx::W..idx::W + 3];
        let t = &zeta[idx::THRUST..idx::THRUST + 3];
        let gam = &zeta[idx::TORQUE..idx::TORQUE + 3];
        let tn = norm3(t);
        let hq = tilt_project(&p.h_theta, q);

        g[0] = p.m_dry - xi[idx::M];
        g[1] = -xi[idx::R];
        g[2] = sq3(v) - p.v_max * p.v_max;
        g[3] = four * (hq[0] * hq[0] + hq[1] * hq[1]) - self.tilt_bound;
        g[4] = sq3(w) - p.omega_max * p.omega_max;
        g[5] = tn - t[0] * self.sec_delta;
        g[6] = tn - p.t_max;
        g[7] = p.t_min - tn;
        g[8] = sq3(gam) - p.gamma_max * p.gamma_max;
    }

    fn jacobians(&self, xi: &[T], zeta: &[T], jac: &mut ModelJacobians<T>) -> Result<()> {
        let p = &self.params;
        let (nx, nz) = (N_STATE, N_CONTROL);
        let m = xi[idx::M];
        if !(m > T::zero()) {
            return Err(Error::Domain(format!("mass must be positive, got {m}")));
        }
        let t = &zeta[idx::THRUST..idx::THRUST + 3];
        let tn = norm3(t);
        if !(tn >= T::lit(THRUST_FLOOR)) {
            return Err(Error::SingularPoint(format!("thrust norm {tn} below {THRUST_FLOOR:e}")));
        }
        let (half, two, eight) = (T::lit(0.5), T::lit(2.0), T::lit(8.0));
        let v = &xi[idx::V..idx::V + 3];
        let q = &xi[idx::Q..idx::Q + 4];
        let w = &xi[idx::W..idx::W + 3];
        let gam = &zeta[idx::TORQUE..idx::TORQUE + 3];
        let that = [t[0] / tn, t[1] / tn, t[2] / tn];
        let inv_m = T::one() / m;

        for b in [&mut jac.f_xi, &mut jac.f_zeta, &mut jac.g_xi, &mut jac.g_zeta] {
            b.iter_mut().for_each(|e| *e = T::zero());
        }
        let fx = &mut jac.f_xi;
        let fz = &mut jac.f_zeta;

        // mass
        for j in 0..3 {
            fz[idx::M * nz + idx::THRUST + j] = -p.alpha_mdot * that[j];
        }
        // position
        for i in 0..3 {
            fx[(idx::R + i) * nx + idx::V + i] = T::one();
        }
        // velocity
        let ti = rotate(q, t);
        let dq = rotate_dq(q, t);
        for i in 0..3 {
            let row = (idx::V + i) * nx;
            fx[row + idx::M] = -ti[i] * inv_m * inv_m;
            for j in 0..4 {
                fx[row + idx::Q + j] = dq[i][j] * inv_m;
            }
        }
        for j in 0..3 {
            let mut e = [T::zero(); 3];
            e[j] = T::one();
            let col = rotate(q, &e);
            for i in 0..3 {
                fz[(idx::V + i) * nz + idx::THRUST + j] = col[i] * inv_m;
            }
        }
        // attitude: ½Ω(ω) and ½Ξ(q)
        let omega = [
            [T::zero(), -w[0], -w[1], -w[2]],
            [w[0], T::zero(), w[2], -w[1]],
            [w[1], -w[2], T::zero(), w[0]],
            [w[2], w[1], -w[0], T::zero()],
        ];
        let xi_q = [
            [-q[1], -q[2], -q[3]],
            [q[0], -q[3], q[2]],
            [q[3], q[0], -q[1]],
            [-q[2], q[1], q[0]],
        ];
        for i in 0..4 {
            let row = (idx::Q + i) * nx;
            for j in 0..4 {
                fx[row + idx::Q + j] = half * omega[i][j];
            }
            for j in 0..3 {
                fx[row + idx::W + j] = half * xi_q[i][j];
            }
        }
        // angular rate: J⁻¹(-[ω]ₓJ + [Jω]ₓ) and J⁻¹[r_T]ₓ, J⁻¹
        let jw = mul3(&self.j, w);
        let wx = skew(w);
        let jwx = skew(&jw);
        let rx = skew(&p.r_thrust);
        let mut inner = [T::zero(); 9];
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = jwx[r * 3 + c];
                for k in 0..3 {
                    acc -= wx[r * 3 + k] * self.j[k * 3 + c];
                }
                inner[r * 3 + c] = acc;
            }
        }
        for r in 0..3 {
            let row = idx::W + r;
            for c in 0..3 {
                let (mut dw, mut dt) = (T::zero(), T::zero());
                for k in 0..3 {
                    dw += self.j_inv[r * 3 + k] * inner[k * 3 + c];
                    dt += self.j_inv[r * 3 + k] * rx[k * 3 + c];
                }
                fx[row * nx + idx::W + c] = dw;
                fz[row * nz + idx::THRUST + c] = dt;
                fz[row * nz + idx::TORQUE + c] = self.j_inv[r * 3 + c];
            }
        }

        // path constraints
        let gx = &mut jac.g_xi;
        let gz = &mut jac.g_zeta;
        gx[idx::M] = -T::one();
        gx[nx + idx::R] = -T::one();
        let hq = tilt_project(&p.h_theta, q);
        for j in 0..3 {
            gx[2 * nx + idx::V + j] = two * v[j];
            gx[4 * nx + idx::W + j] = two * w[j];
            gz[5 * nz + idx::THRUST + j] = that[j];
            gz[6 * nz + idx::THRUST + j] = that[j];
            gz[7 * nz + idx::THRUST + j] = -that[j];
            gz[8 * nz + idx::TORQUE + j] = two * gam[j];
        }
        gz[5 * nz + idx::THRUST] -= self.sec_delta;
        for j in 0..4 {
            gx[3 * nx + idx::Q + j] = eight * (p.h_theta[0][j] * hq[0] + p.h_theta[1][j] * hq[1]);
        }
        Ok(())
    }
}

#[inline(always)]
fn sq3<T: Real>(v: &[T]) -> T {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

#[inline(always)]
fn tilt_project<T: Real>(h: &[[T; 4]; 2], q: &[T]) -> [T; 2] {
    let row = |r: &[T; 4]| r[0] * q[0] + r[1] * q[1] + r[2] * q[2] + r[3] * q[3];
    [row(&h[0]), row(&h[1])]
}

fn skew<T: Real>(v: &[T]) -> [T; 9] {
    let z = T::zero();
    [z, -v[2], v[1], v[2], z, -v[0], -v[1], v[0], z]
}
