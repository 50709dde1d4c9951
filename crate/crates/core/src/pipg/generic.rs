use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smallmat::{gemv, gemv_t, norm_inf};

use super::custom::{step_sizes, PipgOutcome};
use super::subproblem::ScaledSubproblem;
use super::workspace::PipgWorkspace;
use super::PipgConfig;

/// Per-coordinate projection defining the set `D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection<T> {
    Free,
    Fixed(T),
    Box(T, T),
    NonNeg,
}

impl<T: Real> Projection<T> {
    #[inline]
    pub fn apply(&self, v: T) -> T {
        match *self {
            Projection::Free => v,
            Projection::Fixed(c) => c,
            Projection::Box(lo, hi) => lo.max(hi.min(v)),
            Projection::NonNeg => v.max(T::zero()),
        }
    }
}

/// `minimize ½zᵀPz + pᵀz  s.t.  Gz = g,  Hz ≤ h,  z ∈ D` with diagonal `P`
/// and dense row-major `G`, `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericQP<T> {
    pub dim: usize,
    pub p_diag: Vec<T>,
    pub p: Vec<T>,
    pub g_rows: usize,
    pub g_mat: Vec<T>,
    pub g_rhs: Vec<T>,
    pub h_rows: usize,
    pub h_mat: Vec<T>,
    pub h_rhs: Vec<T>,
    pub proj: Vec<Projection<T>>,
}

/// Primal-dual iterate of the generic solver and its extrapolated copy.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericState<T> {
    pub z: Vec<T>,
    pub eta: Vec<T>,
    pub chi: Vec<T>,
    pub zeta_t: Vec<T>,
    pub eta_t: Vec<T>,
    pub chi_t: Vec<T>,
}

impl<T: Real> GenericQP<T> {
    /// Materializes the block subproblem with `z = (x̂_1..x̂_N, û_1..û_N, μ⁺, μ⁻)`.
    pub fn from_subproblem(sub: &ScaledSubproblem<T>) -> Result<Self> {
        sub.validate()?;
        let (n, nx, nu) = (sub.n, sub.nx, sub.nu);
        let m = n - 1;
        let (ox, ou, op, om) = Self::offsets(sub);
        let dim = om + m * nx;

        let mut p_diag = vec![T::zero(); dim];
        p_diag[..ou + n * nu].iter_mut().for_each(|v| *v = sub.w_prox);
        let mut p = vec![T::zero(); dim];
        for i in 0..nx {
            p[ox + m * nx + i] = sub.w_cost * sub.e_cost[i];
        }
        p[op..].iter_mut().for_each(|v| *v = sub.w_ep);

        let g_rows = m * nx;
        let mut g_mat = vec![T::zero(); g_rows * dim];
        let mut g_rhs = vec![T::zero(); g_rows];
        for k in 0..m {
            let (a, bm, bp) = (sub.a_minus(k), sub.b_minus(k), sub.b_plus(k));
            for i in 0..nx {
                let r = k * nx + i;
                let row = &mut g_mat[r * dim..(r + 1) * dim];
                for c in 0..nx {
                    row[ox + k * nx + c] = a[i * nx + c];
                }
                row[ox + (k + 1) * nx + i] = -T::one();
                for c in 0..nu {
                    row[ou + k * nu + c] = bm[i * nu + c];
                    row[ou + (k + 1) * nu + c] = bp[i * nu + c];
                }
                row[op + k * nx + i] = T::one();
                row[om + k * nx + i] = -T::one();
                g_rhs[r] = -sub.w_hat(k)[i];
            }
        }

        let h_rows = m * sub.ny();
        let mut h_mat = vec![T::zero(); h_rows * dim];
        let mut h_rhs = vec![T::zero(); h_rows];
        if let Some(iy) = sub.y_index {
            for k in 0..m {
                h_mat[k * dim + ox + k * nx + iy] = -T::one();
                h_mat[k * dim + ox + (k + 1) * nx + iy] = T::one();
                h_rhs[k] = sub.eps_hat[k];
            }
        }

        let mut proj = vec![Projection::Free; dim];
        for &(i, v) in &sub.fix_initial {
            proj[ox + i] = Projection::Fixed(v);
        }
        for &(i, v) in &sub.fix_final {
            proj[ox + m * nx + i] = Projection::Fixed(v);
        }
        for i in 0..n * nu {
            let (lo, hi) = (sub.u_min[i], sub.u_max[i]);
            if lo.is_finite() || hi.is_finite() {
                proj[ou + i] = Projection::Box(lo, hi);
            }
        }
        proj[op..].iter_mut().for_each(|v| *v = Projection::NonNeg);

        Ok(Self {
            dim,
            p_diag,
            p,
            g_rows,
            g_mat,
            g_rhs,
            h_rows,
            h_mat,
            h_rhs,
            proj,
        })
    }

    /// Offsets of the `x`, `u`, `μ⁺`, `μ⁻` blocks inside `z`.
    pub fn offsets(sub: &ScaledSubproblem<T>) -> (usize, usize, usize, usize) {
        let (n, nx, nu) = (sub.n, sub.nx, sub.nu);
        let ou = n * nx;
        let op = ou + n * nu;
        (0, ou, op, op + (n - 1) * nx)
    }

    /// Largest eigenvalue of `P`.
    pub fn lambda(&self) -> T {
        self.p_diag.iter().fold(T::zero(), |a, &b| a.max(b))
    }

    /// The stacked operator `[G; H]` row-major, `(g_rows + h_rows) x dim`.
    pub fn stacked(&self) -> Vec<T> {
        let mut k = self.g_mat.clone();
        k.extend_from_slice(&self.h_mat);
        k
    }
}

impl<T: Real> GenericState<T> {
    pub fn zeros(qp: &GenericQP<T>) -> Self {
        let z = |n| vec![T::zero(); n];
        Self {
            z: z(qp.dim),
            eta: z(qp.g_rows),
            chi: z(qp.h_rows),
            zeta_t: z(qp.dim),
            eta_t: z(qp.g_rows),
            chi_t: z(qp.h_rows),
        }
    }

    /// Packs a block workspace into the generic layout.
    pub fn from_workspace(sub: &ScaledSubproblem<T>, ws: &PipgWorkspace<T>) -> Self {
        let mut z = ws.x.clone();
        z.extend_from_slice(&ws.u);
        z.extend_from_slice(&ws.mu_plus);
        z.extend_from_slice(&ws.mu_minus);
        let theta = if sub.y_index.is_some() { ws.theta.clone() } else { Vec::new() };
        Self {
            zeta_t: z.clone(),
            eta_t: ws.phi.clone(),
            chi_t: theta.clone(),
            z,
            eta: ws.phi.clone(),
            chi: theta,
        }
    }
}

/// Textbook PIPG with extrapolation on an explicit QP. Starts from the
/// current `state` (the extrapolated copies are reset to it).
pub fn pipg_generic<T: Real>(
    qp: &GenericQP<T>,
    cfg: &PipgConfig,
    sigma: T,
    state: &mut GenericState<T>,
) -> Result<PipgOutcome<T>> {
    let (dim, mg, mh) = (qp.dim, qp.g_rows, qp.h_rows);
    if state.z.len() != dim || state.eta.len() != mg || state.chi.len() != mh {
        return Err(Error::dims("pipg_generic", (dim, mg + mh), (state.z.len(), state.eta.len() + state.chi.len())));
    }
    let (alpha, beta) = step_sizes(qp.lambda(), T::lit(cfg.omega), sigma);
    let rho = T::lit(cfg.rho);
    let two = T::lit(2.0);
    let (eps_abs, eps_rel) = (T::lit(cfg.eps_abs), T::lit(cfg.eps_rel));

    state.zeta_t.copy_from_slice(&state.z);
    state.eta_t.copy_from_slice(&state.eta);
    state.chi_t.copy_from_slice(&state.chi);
    let mut grad = vec![T::zero(); dim];
    let mut tmp = vec![T::zero(); dim];
    let mut ext = vec![T::zero(); dim];
    let mut rg = vec![T::zero(); mg];
    let mut rh = vec![T::zero(); mh];
    let (mut prev_z, mut prev_eta, mut prev_chi) = (state.z.clone(), state.eta.clone(), state.chi.clone());

    let mut iterations = 0;
    let mut terminated = false;
    for j in 1..=cfg.j_max {
        iterations = j;
        gemv_t(&qp.g_mat, mg, dim, &state.eta_t, &mut grad);
        gemv_t(&qp.h_mat, mh, dim, &state.chi_t, &mut tmp);
        for i in 0..dim {
            let g = qp.p_diag[i] * state.zeta_t[i] + qp.p[i] + grad[i] + tmp[i];
            state.z[i] = qp.proj[i].apply(state.zeta_t[i] - alpha * g);
            ext[i] = two * state.z[i] - state.zeta_t[i];
        }
        gemv(&qp.g_mat, mg, dim, &ext, &mut rg);
        gemv(&qp.h_mat, mh, dim, &ext, &mut rh);
        for i in 0..mg {
            state.eta[i] = state.eta_t[i] + beta * (rg[i] - qp.g_rhs[i]);
        }
        for i in 0..mh {
            state.chi[i] = (state.chi_t[i] + beta * (rh[i] - qp.h_rhs[i])).max(T::zero());
        }
        for (t, h) in [
            (&mut state.zeta_t, &state.z),
            (&mut state.eta_t, &state.eta),
            (&mut state.chi_t, &state.chi),
        ] {
            for (a, &b) in t.iter_mut().zip(h.iter()) {
                *a = (T::one() - rho) * *a + rho * b;
            }
        }

        if j % cfg.j_check == 0 {
            let finite = state.z.iter().chain(&state.eta).chain(&state.chi).all(|v| v.is_finite());
            if !finite {
                return Err(Error::SolverDiverged { iteration: j });
            }
            let dz = state.z.iter().zip(&prev_z).fold(T::zero(), |a, (p, q)| a.max((*p - *q).abs()));
            let dr = state
                .eta
                .iter()
                .zip(&prev_eta)
                .chain(state.chi.iter().zip(&prev_chi))
                .fold(T::zero(), |a, (p, q)| a.max((*p - *q).abs()));
            let zs = norm_inf(&state.z).max(norm_inf(&prev_z));
            let rs = norm_inf(&state.eta).max(norm_inf(&state.chi)).max(norm_inf(&prev_eta)).max(norm_inf(&prev_chi));
            if dz <= eps_abs + eps_rel * zs && dr <= eps_abs + eps_rel * rs {
                terminated = true;
                break;
            }
        }
        if (j + 1) % cfg.j_check == 0 {
            prev_z.copy_from_slice(&state.z);
            prev_eta.copy_from_slice(&state.eta);
            prev_chi.copy_from_slice(&state.chi);
        }
    }
    if !state.z.iter().chain(&state.eta).chain(&state.chi).all(|v| v.is_finite()) {
        return Err(Error::SolverDiverged { iteration: iterations });
    }
    Ok(PipgOutcome { iterations, terminated, alpha, beta })
}
