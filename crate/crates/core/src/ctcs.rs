//! Time dilation and constraint-violation augmentation.
//!
//! A [`Model`] supplies `F`, `g`, `h` and their Jacobians. [`Ctcs`] turns it
//! into the fixed-final-time system on `τ ∈ [0, 1]`
//!
//! ```text
//!   x = (ξ, y),  u = (ζ, s)
//!   x' = s · ( F(ξ, ζ),  1ᵀ|g(ξ, ζ)|₊² + 1ᵀ h(ξ, ζ)² )
//! ```
//!
//! where `y` integrates squared path-constraint violation. Bounding the
//! growth of `y` between nodes bounds violation between nodes.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smallmat::{dot, gemv_t_acc};

/// Row-major Jacobian storage for a [`Model`]. Empty buffers when `n_h = 0`.
#[derive(Debug, Clone)]
pub struct ModelJacobians<T> {
    pub f_xi: Vec<T>,
    pub f_zeta: Vec<T>,
    pub g_xi: Vec<T>,
    pub g_zeta: Vec<T>,
    pub h_xi: Vec<T>,
    pub h_zeta: Vec<T>,
}

impl<T: Real> ModelJacobians<T> {
    pub fn zeros(n_xi: usize, n_zeta: usize, n_g: usize, n_h: usize) -> Self {
        let z = |n| vec![T::zero(); n];
        Self {
            f_xi: z(n_xi * n_xi),
            f_zeta: z(n_xi * n_zeta),
            g_xi: z(n_g * n_xi),
            g_zeta: z(n_g * n_zeta),
            h_xi: z(n_h * n_xi),
            h_zeta: z(n_h * n_zeta),
        }
    }

    pub fn for_model<M: Model<T> + ?Sized>(m: &M) -> Self {
        Self::zeros(m.n_state(), m.n_control(), m.n_ineq(), m.n_eq())
    }
}

/// Continuous-time model hooks: dynamics `F`, path inequalities `g ≤ 0`,
/// path equalities `h = 0`, and their analytic Jacobians.
pub trait Model<T: Real>: Send + Sync {
    fn n_state(&self) -> usize;
    fn n_control(&self) -> usize;
    fn n_ineq(&self) -> usize;
    fn n_eq(&self) -> usize {
        0
    }

    fn dynamics(&self, xi: &[T], zeta: &[T], out: &mut [T]) -> Result<()>;

    fn ineq(&self, xi: &[T], zeta: &[T], out: &mut [T]);

    fn eq(&self, _xi: &[T], _zeta: &[T], _out: &mut [T]) {}

    /// Every buffer in `jac` is fully overwritten.
    fn jacobians(&self, xi: &[T], zeta: &[T], jac: &mut ModelJacobians<T>) -> Result<()>;
}

/// A system `x' = f(x, u)` on the normalized interval, with Jacobians.
///
/// This is what the discretizer integrates. `Scratch` holds the buffers a
/// single evaluation needs so that callers can keep one per worker.
pub trait AugmentedSystem<T: Real>: Send + Sync {
    type Scratch: Send;

    fn nx(&self) -> usize;
    fn nu(&self) -> usize;
    fn n_ineq(&self) -> usize;

    /// Index of the violation integrator inside `x`, if the system has one.
    fn y_index(&self) -> Option<usize>;

    fn scratch(&self) -> Self::Scratch;

    fn rate(&self, x: &[T], u: &[T], out: &mut [T], scratch: &mut Self::Scratch) -> Result<()>;

    /// Writes `A = ∂f/∂x` (`nx x nx`) and `B = ∂f/∂u` (`nx x nu`).
    fn jacobians(
        &self,
        x: &[T],
        u: &[T],
        a: &mut [T],
        b: &mut [T],
        scratch: &mut Self::Scratch,
    ) -> Result<()>;

    /// Raw path-inequality values at `(x, u)`; used by the dense audit.
    fn path_ineq(&self, x: &[T], u: &[T], out: &mut [T]);
}

/// Dilated, violation-augmented wrapper around a [`Model`].
#[derive(Debug, Clone)]
pub struct Ctcs<M> {
    model: M,
}

pub struct CtcsScratch<T> {
    f: Vec<T>,
    g: Vec<T>,
    h: Vec<T>,
    jac: ModelJacobians<T>,
}

impl<M> Ctcs<M> {
    pub fn new(model: M) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &M {
        &self.model
    }
}

/// `1ᵀ|g|₊² + 1ᵀh²`.
#[inline]
pub fn violation_rate<T: Real>(g: &[T], h: &[T]) -> T {
    let pos = g.iter().fold(T::zero(), |a, &v| {
        let p = v.max(T::zero());
        a + p * p
    });
    pos + h.iter().fold(T::zero(), |a, &v| a + v * v)
}

fn check_dilation<T: Real>(s: T) -> Result<()> {
    if s > T::zero() {
        Ok(())
    } else {
        Err(Error::Domain(format!("dilation factor must be positive, got {s}")))
    }
}

impl<T: Real, M: Model<T>> AugmentedSystem<T> for Ctcs<M> {
    type Scratch = CtcsScratch<T>;

    fn nx(&self) -> usize {
        self.model.n_state() + 1
    }

    fn nu(&self) -> usize {
        self.model.n_control() + 1
    }

    fn n_ineq(&self) -> usize {
        self.model.n_ineq()
    }

    fn y_index(&self) -> Option<usize> {
        Some(self.model.n_state())
    }

    fn scratch(&self) -> CtcsScratch<T> {
        CtcsScratch {
            f: vec![T::zero(); self.model.n_state()],
            g: vec![T::zero(); self.model.n_ineq()],
            h: vec![T::zero(); self.model.n_eq()],
            jac: ModelJacobians::for_model(&self.model),
        }
    }

    fn rate(&self, x: &[T], u: &[T], out: &mut [T], sc: &mut CtcsScratch<T>) -> Result<()> {
        let nxi = self.model.n_state();
        let nzeta = self.model.n_control();
        let s = u[nzeta];
        check_dilation(s)?;
        let (xi, zeta) = (&x[..nxi], &u[..nzeta]);
        self.model.dynamics(xi, zeta, &mut out[..nxi])?;
        self.model.ineq(xi, zeta, &mut sc.g);
        self.model.eq(xi, zeta, &mut sc.h);
        out[nxi] = violation_rate(&sc.g, &sc.h);
        for v in out.iter_mut() {
            *v *= s;
        }
        Ok(())
    }

    fn jacobians(
        &self,
        x: &[T],
        u: &[T],
        a: &mut [T],
        b: &mut [T],
        sc: &mut CtcsScratch<T>,
    ) -> Result<()> {
        let nxi = self.model.n_state();
        let nzeta = self.model.n_control();
        let (ng, nh) = (self.model.n_ineq(), self.model.n_eq());
        let (nx, nu) = (nxi + 1, nzeta + 1);
        let s = u[nzeta];
        check_dilation(s)?;
        let (xi, zeta) = (&x[..nxi], &u[..nzeta]);

        self.model.jacobians(xi, zeta, &mut sc.jac)?;
        self.model.ineq(xi, zeta, &mut sc.g);
        self.model.eq(xi, zeta, &mut sc.h);
        // one-sided derivative at the kink: max{0, g} is zero there
        for gi in sc.g.iter_mut() {
            *gi = gi.max(T::zero());
        }
        let jac = &sc.jac;

        a.iter_mut().for_each(|v| *v = T::zero());
        b.iter_mut().for_each(|v| *v = T::zero());
        for r in 0..nxi {
            for c in 0..nxi {
                a[r * nx + c] = s * jac.f_xi[r * nxi + c];
            }
            for c in 0..nzeta {
                b[r * nu + c] = s * jac.f_zeta[r * nzeta + c];
            }
        }

        // y-row: 2s(|g|₊ᵀ ∂g + hᵀ ∂h)
        let two_s = (T::one() + T::one()) * s;
        {
            let arow = &mut a[nxi * nx..nxi * nx + nxi];
            gemv_t_acc(&jac.g_xi, ng, nxi, &sc.g, arow);
            gemv_t_acc(&jac.h_xi, nh, nxi, &sc.h, arow);
            arow.iter_mut().for_each(|v| *v *= two_s);
        }
        {
            let brow = &mut b[nxi * nu..nxi * nu + nzeta];
            gemv_t_acc(&jac.g_zeta, ng, nzeta, &sc.g, brow);
            gemv_t_acc(&jac.h_zeta, nh, nzeta, &sc.h, brow);
            brow.iter_mut().for_each(|v| *v *= two_s);
        }

        // s-column: the undilated rate
        self.model.dynamics(xi, zeta, &mut sc.f)?;
        for r in 0..nxi {
            b[r * nu + nzeta] = sc.f[r];
        }
        b[nxi * nu + nzeta] = dot(&sc.g, &sc.g) + dot(&sc.h, &sc.h);
        Ok(())
    }

    fn path_ineq(&self, x: &[T], u: &[T], out: &mut [T]) {
        let nxi = self.model.n_state();
        let nzeta = self.model.n_control();
        self.model.ineq(&x[..nxi], &u[..nzeta], out);
    }
}

#[cfg(test)]
pub(crate) mod test_models {
    use super::*;

    /// Scalar LTI model `ξ' = aξ + bζ` with one inequality `g = ξ - limit`.
    #[derive(Debug, Clone)]
    pub struct ScalarLti {
        pub a: f64,
        pub b: f64,
        pub limit: f64,
    }

    impl Model<f64> for ScalarLti {
        fn n_state(&self) -> usize {
            1
        }
        fn n_control(&self) -> usize {
            1
        }
        fn n_ineq(&self) -> usize {
            1
        }
        fn dynamics(&self, xi: &[f64], zeta: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = self.a * xi[0] + self.b * zeta[0];
            Ok(())
        }
        fn ineq(&self, xi: &[f64], _zeta: &[f64], out: &mut [f64]) {
            out[0] = xi[0] - self.limit;
        }
        fn jacobians(&self, _xi: &[f64], _zeta: &[f64], jac: &mut ModelJacobians<f64>) -> Result<()> {
            jac.f_xi[0] = self.a;
            jac.f_zeta[0] = self.b;
            jac.g_xi[0] = 1.0;
            jac.g_zeta[0] = 0.0;
            Ok(())
        }
    }

    /// `r' = v, v' = ζ` with a constraint that is never active.
    #[derive(Debug, Clone)]
    pub struct DoubleIntegrator;

    impl Model<f64> for DoubleIntegrator {
        fn n_state(&self) -> usize {
            2
        }
        fn n_control(&self) -> usize {
            1
        }
        fn n_ineq(&self) -> usize {
            1
        }
        fn dynamics(&self, xi: &[f64], zeta: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = xi[1];
            out[1] = zeta[0];
            Ok(())
        }
        fn ineq(&self, _xi: &[f64], _zeta: &[f64], out: &mut [f64]) {
            out[0] = -1.0;
        }
        fn jacobians(&self, _xi: &[f64], _zeta: &[f64], j: &mut ModelJacobians<f64>) -> Result<()> {
            j.f_xi.copy_from_slice(&[0.0, 1.0, 0.0, 0.0]);
            j.f_zeta.copy_from_slice(&[0.0, 1.0]);
            j.g_xi.copy_from_slice(&[0.0, 0.0]);
            j.g_zeta.copy_from_slice(&[0.0]);
            Ok(())
        }
    }

    /// Nonlinear toy with both inequality and equality constraints.
    #[derive(Debug, Clone)]
    pub struct Toy;

    impl Model<f64> for Toy {
        fn n_state(&self) -> usize {
            2
        }
        fn n_control(&self) -> usize {
            1
        }
        fn n_ineq(&self) -> usize {
            2
        }
        fn n_eq(&self) -> usize {
            1
        }
        fn dynamics(&self, xi: &[f64], zeta: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = xi[1] * xi[0].cos();
            out[1] = zeta[0] * zeta[0] - xi[0] * xi[1];
            Ok(())
        }
        fn ineq(&self, xi: &[f64], zeta: &[f64], out: &mut [f64]) {
            out[0] = xi[0] * xi[0] + zeta[0] - 1.0;
            out[1] = xi[1] - 0.5;
        }
        fn eq(&self, xi: &[f64], zeta: &[f64], out: &mut [f64]) {
            out[0] = xi[0] * zeta[0] - 0.1;
        }
        fn jacobians(&self, xi: &[f64], zeta: &[f64], j: &mut ModelJacobians<f64>) -> Result<()> {
            j.f_xi.copy_from_slice(&[-xi[1] * xi[0].sin(), xi[0].cos(), -xi[1], -xi[0]]);
            j.f_zeta.copy_from_slice(&[0.0, 2.0 * zeta[0]]);
            j.g_xi.copy_from_slice(&[2.0 * xi[0], 0.0, 0.0, 1.0]);
            j.g_zeta.copy_from_slice(&[1.0, 0.0]);
            j.h_xi.copy_from_slice(&[zeta[0], 0.0]);
            j.h_zeta.copy_from_slice(&[xi[0]]);
            Ok(())
        }
    }
}
