use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smallmat::{gemv_acc, gemv_t_acc, norm2_sq};

use super::subproblem::ScaledSubproblem;
use super::workspace::PipgWorkspace;
use super::PipgConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate<T> {
    /// Converged estimate of `λ_max(KᵀK)` before buffering.
    pub raw: T,
    /// `(1 + eps_buff) · raw`.
    pub buffered: T,
    pub iterations: usize,
}

/// `(φ, θ) = K(x, u, μ⁺, μ⁻) / s` with `K` the stacked equality and
/// relaxation operator.
#[allow(clippy::too_many_arguments)]
pub(crate) fn apply_k<T: Real>(
    sub: &ScaledSubproblem<T>,
    x: &[T],
    u: &[T],
    mup: &[T],
    mum: &[T],
    inv_s: T,
    phi: &mut [T],
    theta: &mut [T],
) {
    let (nx, nu) = (sub.nx, sub.nu);
    for k in 0..sub.intervals() {
        let p = &mut phi[k * nx..(k + 1) * nx];
        p.iter_mut().for_each(|v| *v = T::zero());
        gemv_acc(sub.a_minus(k), nx, nx, &x[k * nx..(k + 1) * nx], p);
        gemv_acc(sub.b_minus(k), nx, nu, &u[k * nu..(k + 1) * nu], p);
        gemv_acc(sub.b_plus(k), nx, nu, &u[(k + 1) * nu..(k + 2) * nu], p);
        for i in 0..nx {
            let j = k * nx + i;
            p[i] = (p[i] - x[j + nx] + mup[j] - mum[j]) * inv_s;
        }
        if let Some(iy) = sub.y_index {
            theta[k] = (x[(k + 1) * nx + iy] - x[k * nx + iy]) * inv_s;
        }
    }
}

/// `(x, u, μ⁺, μ⁻) = Kᵀ(φ, θ)`.
pub(crate) fn apply_kt<T: Real>(
    sub: &ScaledSubproblem<T>,
    phi: &[T],
    theta: &[T],
    x: &mut [T],
    u: &mut [T],
    mup: &mut [T],
    mum: &mut [T],
) {
    let (nx, nu) = (sub.nx, sub.nu);
    x.iter_mut().chain(u.iter_mut()).for_each(|v| *v = T::zero());
    for k in 0..sub.intervals() {
        let p = &phi[k * nx..(k + 1) * nx];
        gemv_t_acc(sub.a_minus(k), nx, nx, p, &mut x[k * nx..(k + 1) * nx]);
        gemv_t_acc(sub.b_minus(k), nx, nu, p, &mut u[k * nu..(k + 1) * nu]);
        gemv_t_acc(sub.b_plus(k), nx, nu, p, &mut u[(k + 1) * nu..(k + 2) * nu]);
        for i in 0..nx {
            x[(k + 1) * nx + i] -= p[i];
            mup[k * nx + i] = p[i];
            mum[k * nx + i] = -p[i];
        }
        if let Some(iy) = sub.y_index {
            x[k * nx + iy] -= theta[k];
            x[(k + 1) * nx + iy] += theta[k];
        }
    }
}

/// Estimates `λ_max(KᵀK)` by power iteration seeded from the primal part of
/// `ws`, writes the buffered value to `ws.sigma` and returns both values.
///
/// Only the extrapolated buffers of `ws` are used as scratch; the primal and
/// dual iterates are left untouched.
pub fn power_iteration_custom<T: Real>(
    sub: &ScaledSubproblem<T>,
    ws: &mut PipgWorkspace<T>,
    cfg: &PipgConfig,
) -> Result<PowerEstimate<T>> {
    sub.validate()?;
    ws.check_shape(sub)?;
    if ws.primal_is_zero() {
        return Err(Error::Precondition("power iteration seed is all zero".into()));
    }
    let (eps_abs, eps_rel) = (T::lit(cfg.power_eps_abs), T::lit(cfg.power_eps_rel));
    ws.xt.copy_from_slice(&ws.x);
    ws.ut.copy_from_slice(&ws.u);
    ws.nu_plus.copy_from_slice(&ws.mu_plus);
    ws.nu_minus.copy_from_slice(&ws.mu_minus);
    let norm = |ws: &PipgWorkspace<T>| {
        (norm2_sq(&ws.xt) + norm2_sq(&ws.ut) + norm2_sq(&ws.nu_plus) + norm2_sq(&ws.nu_minus)).sqrt()
    };
    let mut sigma = norm(ws);
    let mut star = sigma;
    let mut iterations = 0;
    for j in 1..=cfg.power_j_max {
        iterations = j;
        let inv = T::one() / sigma;
        apply_k(sub, &ws.xt, &ws.ut, &ws.nu_plus, &ws.nu_minus, inv, &mut ws.vphi, &mut ws.vtheta);
        apply_kt(sub, &ws.vphi, &ws.vtheta, &mut ws.xt, &mut ws.ut, &mut ws.nu_plus, &mut ws.nu_minus);
        star = norm(ws);
        if !star.is_finite() {
            return Err(Error::SolverDiverged { iteration: j });
        }
        if star == T::zero() {
            return Err(Error::Precondition("power iteration seed lies in the null space".into()));
        }
        if (star - sigma).abs() <= eps_abs + eps_rel * star.max(sigma) {
            break;
        }
        sigma = star;
    }
    let buffered = (T::one() + T::lit(cfg.eps_buff)) * star;
    ws.sigma = buffered;
    Ok(PowerEstimate {
        raw: star,
        buffered,
        iterations,
    })
}
