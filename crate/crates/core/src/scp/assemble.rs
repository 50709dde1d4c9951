use crate::discretizer::{LinearizedBlocks, Trajectory};
use crate::error::{Error, Result};
use crate::pipg::ScaledSubproblem;
use crate::scalar::Real;

use super::{ScalingPair, ScpProblem};
use crate::ctcs::AugmentedSystem;

/// Fills `out` with the scaled subproblem about `zbar`.
pub fn assemble_subproblem<T: Real, S: AugmentedSystem<T>>(
    problem: &ScpProblem<T, S>,
    zbar: &Trajectory<T>,
    blocks: &[LinearizedBlocks<T>],
    out: &mut ScaledSubproblem<T>,
) -> Result<()> {
    let sc = &problem.scaling;
    sc.validate()?;
    let (n, nx, nu) = (zbar.n, zbar.nx, zbar.nu);
    if blocks.len() != n - 1 || out.n != n || out.nx != nx || out.nu != nu {
        return Err(Error::dims("assemble_subproblem", (blocks.len(), nx), (n - 1, out.nx)));
    }
    let (px, pxi, pu, pui) = (&sc.px, &sc.px_inv, &sc.pu, &sc.pu_inv);
    let w = &problem.weights;

    for (k, blk) in blocks.iter().enumerate() {
        let a = &mut out.a_minus[k * nx * nx..(k + 1) * nx * nx];
        for i in 0..nx {
            for j in 0..nx {
                a[i * nx + j] = pxi[i] * blk.a[i * nx + j] * px[j];
            }
        }
        let bm = &mut out.b_minus[k * nx * nu..(k + 1) * nx * nu];
        let bp = &mut out.b_plus[k * nx * nu..(k + 1) * nx * nu];
        for i in 0..nx {
            for j in 0..nu {
                bm[i * nu + j] = pxi[i] * blk.bm[i * nu + j] * pu[j];
                bp[i * nu + j] = pxi[i] * blk.bp[i * nu + j] * pu[j];
            }
        }
        let xn = zbar.x(k + 1);
        for i in 0..nx {
            out.w_hat[k * nx + i] = pxi[i] * (blk.x_end[i] - xn[i]);
        }
    }

    out.y_index = problem.system.y_index();
    if let Some(iy) = out.y_index {
        for k in 0..n - 1 {
            out.eps_hat[k] = w.epsilon_relax * pxi[iy] - pxi[iy] * (zbar.x(k + 1)[iy] - zbar.x(k)[iy]);
        }
    }

    for k in 0..n {
        let ub = zbar.u(k);
        for j in 0..nu {
            let i = k * nu + j;
            out.u_min[i] = scaled_bound(problem.u_min[j], ub[j], pui[j]);
            out.u_max[i] = scaled_bound(problem.u_max[j], ub[j], pui[j]);
        }
    }

    out.fix_initial.clear();
    let x1 = zbar.x(0);
    for &(i, v) in &problem.fix_initial {
        out.fix_initial.push((i, pxi[i] * (v - x1[i])));
    }
    out.fix_final.clear();
    let xn = zbar.x(n - 1);
    for &(i, v) in &problem.fix_final {
        out.fix_final.push((i, pxi[i] * (v - xn[i])));
    }

    out.e_cost.copy_from_slice(&problem.e_cost);
    out.w_cost = w.w_cost;
    out.w_prox = w.w_prox;
    out.w_ep = w.w_ep;
    Ok(())
}

#[inline]
fn scaled_bound<T: Real>(bound: T, ubar: T, inv: T) -> T {
    if bound.is_finite() {
        inv * (bound - ubar)
    } else {
        bound
    }
}

/// `x = Px x̂ + x̄`, `u = Pu û + ū`.
pub fn unscale<T: Real>(sc: &ScalingPair<T>, zbar: &Trajectory<T>, xhat: &[T], uhat: &[T], out: &mut Trajectory<T>) {
    let (nx, nu) = (zbar.nx, zbar.nu);
    for (i, (o, (&xb, &xh))) in out.x.iter_mut().zip(zbar.x.iter().zip(xhat)).enumerate() {
        *o = sc.px[i % nx] * xh + xb;
    }
    for (i, (o, (&ub, &uh))) in out.u.iter_mut().zip(zbar.u.iter().zip(uhat)).enumerate() {
        *o = sc.pu[i % nu] * uh + ub;
    }
}

/// `x̂ = Px⁻¹(x − x̄)`, `û = Pu⁻¹(u − ū)`.
pub fn scale<T: Real>(sc: &ScalingPair<T>, zbar: &Trajectory<T>, z: &Trajectory<T>, xhat: &mut [T], uhat: &mut [T]) {
    let (nx, nu) = (zbar.nx, zbar.nu);
    for (i, h) in xhat.iter_mut().enumerate() {
        *h = sc.px_inv[i % nx] * (z.x[i] - zbar.x[i]);
    }
    for (i, h) in uhat.iter_mut().enumerate() {
        *h = sc.pu_inv[i % nu] * (z.u[i] - zbar.u[i]);
    }
}
