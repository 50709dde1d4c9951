use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smallmat::{gemv_acc, gemv_t_acc};

use super::stopping::{stopping_custom, IterateView};
use super::subproblem::ScaledSubproblem;
use super::workspace::PipgWorkspace;
use super::PipgConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipgOutcome<T> {
    pub iterations: usize,
    /// True when the stopping test fired before `j_max`.
    pub terminated: bool,
    pub alpha: T,
    pub beta: T,
}

/// `α = 2 / (λ + √(λ² + 4ωσ))` and `β = ωα`.
pub fn step_sizes<T: Real>(lambda: T, omega: T, sigma: T) -> (T, T) {
    let four = T::lit(4.0);
    let alpha = (T::one() + T::one()) / (lambda + (lambda * lambda + four * omega * sigma).sqrt());
    (alpha, omega * alpha)
}

#[inline]
fn clamp<T: Real>(v: T, lo: T, hi: T) -> T {
    lo.max(hi.min(v))
}

fn view<'a, T>(
    x: &'a [T],
    u: &'a [T],
    mu_plus: &'a [T],
    mu_minus: &'a [T],
    phi: &'a [T],
    theta: &'a [T],
) -> IterateView<'a, T> {
    IterateView { x, u, mu_plus, mu_minus, phi, theta }
}

fn snapshot<T: Real>(ws: &mut PipgWorkspace<T>) {
    ws.prev.x.copy_from_slice(&ws.x);
    ws.prev.u.copy_from_slice(&ws.u);
    ws.prev.mu_plus.copy_from_slice(&ws.mu_plus);
    ws.prev.mu_minus.copy_from_slice(&ws.mu_minus);
    ws.prev.phi.copy_from_slice(&ws.phi);
    ws.prev.theta.copy_from_slice(&ws.theta);
}

fn all_finite<T: Real>(ws: &PipgWorkspace<T>) -> bool {
    [&ws.x, &ws.u, &ws.mu_plus, &ws.mu_minus, &ws.phi, &ws.theta]
        .iter()
        .all(|v| v.iter().all(|e| e.is_finite()))
}

/// Customized PIPG. Warm-starts from the primal-dual iterate stored in `ws`
/// and leaves the final iterate there. `ws.sigma` must hold the buffered
/// spectral estimate.
pub fn pipg_custom<T: Real>(sub: &ScaledSubproblem<T>, cfg: &PipgConfig, ws: &mut PipgWorkspace<T>) -> Result<PipgOutcome<T>> {
    sub.validate()?;
    ws.check_shape(sub)?;
    if !(ws.sigma > T::zero() && ws.sigma.is_finite()) {
        return Err(Error::Precondition("spectral estimate not set; run power iteration first".into()));
    }
    let (n, nx, nu) = (sub.n, sub.nx, sub.nu);
    let m = n - 1;
    let (w_prox, w_ep, w_cost) = (sub.w_prox, sub.w_ep, sub.w_cost);
    let (alpha, beta) = step_sizes(w_prox, T::lit(cfg.omega), ws.sigma);
    let rho = T::lit(cfg.rho);
    let one_m_rho = T::one() - rho;
    let two = T::lit(2.0);
    let (eps_abs, eps_rel) = (T::lit(cfg.eps_abs), T::lit(cfg.eps_rel));

    ws.xt.copy_from_slice(&ws.x);
    ws.ut.copy_from_slice(&ws.u);
    ws.nu_plus.copy_from_slice(&ws.mu_plus);
    ws.nu_minus.copy_from_slice(&ws.mu_minus);
    ws.vphi.copy_from_slice(&ws.phi);
    ws.vtheta.copy_from_slice(&ws.theta);
    snapshot(ws);

    let mut iterations = 0;
    let mut terminated = false;
    for j in 1..=cfg.j_max {
        iterations = j;

        // projected gradient step on the states
        for k in 0..n {
            let (lo, hi) = (k * nx, (k + 1) * nx);
            let (xk, xt) = (&mut ws.x[lo..hi], &ws.xt[lo..hi]);
            for i in 0..nx {
                xk[i] = w_prox * xt[i];
            }
            if k < m {
                gemv_t_acc(sub.a_minus(k), nx, nx, &ws.vphi[lo..hi], xk);
                if let Some(iy) = sub.y_index {
                    xk[iy] -= ws.vtheta[k];
                }
            }
            if k > 0 {
                let prev = &ws.vphi[lo - nx..lo];
                for i in 0..nx {
                    xk[i] -= prev[i];
                }
                if let Some(iy) = sub.y_index {
                    xk[iy] += ws.vtheta[k - 1];
                }
            }
            if k == m {
                for i in 0..nx {
                    xk[i] += w_cost * sub.e_cost[i];
                }
            }
            for i in 0..nx {
                xk[i] = xt[i] - alpha * xk[i];
            }
        }
        for &(i, v) in &sub.fix_initial {
            ws.x[i] = v;
        }
        for &(i, v) in &sub.fix_final {
            ws.x[m * nx + i] = v;
        }

        // controls
        for k in 0..n {
            let (lo, hi) = (k * nu, (k + 1) * nu);
            let (uk, ut) = (&mut ws.u[lo..hi], &ws.ut[lo..hi]);
            for i in 0..nu {
                uk[i] = w_prox * ut[i];
            }
            if k < m {
                gemv_t_acc(sub.b_minus(k), nx, nu, &ws.vphi[k * nx..(k + 1) * nx], uk);
            }
            if k > 0 {
                gemv_t_acc(sub.b_plus(k - 1), nx, nu, &ws.vphi[(k - 1) * nx..k * nx], uk);
            }
            for i in 0..nu {
                uk[i] = clamp(ut[i] - alpha * uk[i], sub.u_min[lo + i], sub.u_max[lo + i]);
            }
        }

        // virtual controls
        for i in 0..m * nx {
            let p = ws.vphi[i];
            ws.mu_plus[i] = (ws.nu_plus[i] - alpha * (w_ep + p)).max(T::zero());
            ws.mu_minus[i] = (ws.nu_minus[i] - alpha * (w_ep - p)).max(T::zero());
        }

        // dual PI feedback on 2z - z̃
        for i in 0..n * nx {
            ws.ex[i] = two * ws.x[i] - ws.xt[i];
        }
        for i in 0..n * nu {
            ws.eu[i] = two * ws.u[i] - ws.ut[i];
        }
        for k in 0..m {
            let (lo, hi) = (k * nx, (k + 1) * nx);
            let r = &mut ws.phi[lo..hi];
            r.iter_mut().for_each(|v| *v = T::zero());
            gemv_acc(sub.a_minus(k), nx, nx, &ws.ex[lo..hi], r);
            gemv_acc(sub.b_minus(k), nx, nu, &ws.eu[k * nu..(k + 1) * nu], r);
            gemv_acc(sub.b_plus(k), nx, nu, &ws.eu[(k + 1) * nu..(k + 2) * nu], r);
            let w = sub.w_hat(k);
            for i in 0..nx {
                let g = lo + i;
                let mp = two * ws.mu_plus[g] - ws.nu_plus[g];
                let mm = two * ws.mu_minus[g] - ws.nu_minus[g];
                r[i] = ws.vphi[g] + beta * (r[i] - ws.ex[hi + i] + mp - mm + w[i]);
            }
            if let Some(iy) = sub.y_index {
                let d = ws.ex[hi + iy] - ws.ex[lo + iy] - sub.eps_hat[k];
                ws.theta[k] = (ws.vtheta[k] + beta * d).max(T::zero());
            }
        }

        // extrapolation
        let pairs: [(&mut Vec<T>, &Vec<T>); 6] = [
            (&mut ws.xt, &ws.x),
            (&mut ws.ut, &ws.u),
            (&mut ws.nu_plus, &ws.mu_plus),
            (&mut ws.nu_minus, &ws.mu_minus),
            (&mut ws.vphi, &ws.phi),
            (&mut ws.vtheta, &ws.theta),
        ];
        for (t, h) in pairs {
            for (a, &b) in t.iter_mut().zip(h.iter()) {
                *a = one_m_rho * *a + rho * b;
            }
        }

        if j % cfg.j_check == 0 {
            if !all_finite(ws) {
                return Err(Error::SolverDiverged { iteration: j });
            }
            let cur = view(&ws.x, &ws.u, &ws.mu_plus, &ws.mu_minus, &ws.phi, &ws.theta);
            let p = &ws.prev;
            let prev = view(&p.x, &p.u, &p.mu_plus, &p.mu_minus, &p.phi, &p.theta);
            if stopping_custom(&cur, &prev, eps_abs, eps_rel) {
                terminated = true;
                break;
            }
        }
        if (j + 1) % cfg.j_check == 0 {
            snapshot(ws);
        }
    }
    if !all_finite(ws) {
        return Err(Error::SolverDiverged { iteration: iterations });
    }
    Ok(PipgOutcome { iterations, terminated, alpha, beta })
}
