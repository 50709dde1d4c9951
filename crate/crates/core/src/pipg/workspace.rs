use crate::error::{Error, Result};
use crate::scalar::Real;

use super::subproblem::ScaledSubproblem;

/// Primal-dual iterates, their extrapolated copies and the spectral
/// estimate. Sized once for `(N, nx, nu, ny)` and reused across solves.
#[derive(Debug, Clone, PartialEq)]
pub struct PipgWorkspace<T> {
    pub n: usize,
    pub nx: usize,
    pub nu: usize,
    pub ny: usize,

    pub x: Vec<T>,
    pub u: Vec<T>,
    pub mu_plus: Vec<T>,
    pub mu_minus: Vec<T>,
    pub phi: Vec<T>,
    pub theta: Vec<T>,

    pub(crate) xt: Vec<T>,
    pub(crate) ut: Vec<T>,
    pub(crate) nu_plus: Vec<T>,
    pub(crate) nu_minus: Vec<T>,
    pub(crate) vphi: Vec<T>,
    pub(crate) vtheta: Vec<T>,

    pub(crate) ex: Vec<T>,
    pub(crate) eu: Vec<T>,
    pub(crate) prev: Snapshot<T>,
    /// Buffered squared spectral-norm estimate of the constraint operator.
    pub sigma: T,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Snapshot<T> {
    pub x: Vec<T>,
    pub u: Vec<T>,
    pub mu_plus: Vec<T>,
    pub mu_minus: Vec<T>,
    pub phi: Vec<T>,
    pub theta: Vec<T>,
}

impl<T: Real> Snapshot<T> {
    fn zeros(n: usize, nx: usize, nu: usize, ny: usize) -> Self {
        let m = n - 1;
        let z = |len| vec![T::zero(); len];
        Self {
            x: z(n * nx),
            u: z(n * nu),
            mu_plus: z(m * nx),
            mu_minus: z(m * nx),
            phi: z(m * nx),
            theta: z(m * ny),
        }
    }
}

impl<T: Real> PipgWorkspace<T> {
    pub fn new(n: usize, nx: usize, nu: usize, ny: usize) -> Self {
        assert!(n >= 2, "PIPG workspace needs at least two nodes");
        let s = Snapshot::zeros(n, nx, nu, ny);
        Self {
            n,
            nx,
            nu,
            ny,
            x: s.x.clone(),
            u: s.u.clone(),
            mu_plus: s.mu_plus.clone(),
            mu_minus: s.mu_minus.clone(),
            phi: s.phi.clone(),
            theta: s.theta.clone(),
            xt: s.x.clone(),
            ut: s.u.clone(),
            nu_plus: s.mu_plus.clone(),
            nu_minus: s.mu_minus.clone(),
            vphi: s.phi.clone(),
            vtheta: s.theta.clone(),
            ex: s.x.clone(),
            eu: s.u.clone(),
            prev: s,
            sigma: T::zero(),
        }
    }

    pub fn for_subproblem(sub: &ScaledSubproblem<T>) -> Self {
        Self::new(sub.n, sub.nx, sub.nu, sub.ny())
    }

    pub fn check_shape(&self, sub: &ScaledSubproblem<T>) -> Result<()> {
        if (self.n, self.nx, self.nu, self.ny) != (sub.n, sub.nx, sub.nu, sub.ny()) {
            return Err(Error::DimensionMismatch {
                op: "pipg workspace",
                lhs: format!("N={} nx={} nu={} ny={}", self.n, self.nx, self.nu, self.ny),
                rhs: format!("N={} nx={} nu={} ny={}", sub.n, sub.nx, sub.nu, sub.ny()),
            });
        }
        Ok(())
    }

    /// Zeros every primal and dual variable; keeps `sigma`.
    pub fn reset(&mut self) {
        for v in [
            &mut self.x,
            &mut self.u,
            &mut self.mu_plus,
            &mut self.mu_minus,
            &mut self.phi,
            &mut self.theta,
        ] {
            v.iter_mut().for_each(|e| *e = T::zero());
        }
    }

    pub fn primal_is_zero(&self) -> bool {
        self.x
            .iter()
            .chain(&self.u)
            .chain(&self.mu_plus)
            .chain(&self.mu_minus)
            .all(|&v| v == T::zero())
    }

    pub fn x(&self, k: usize) -> &[T] {
        &self.x[k * self.nx..(k + 1) * self.nx]
    }

    pub fn u(&self, k: usize) -> &[T] {
        &self.u[k * self.nu..(k + 1) * self.nu]
    }
}
