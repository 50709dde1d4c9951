use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scaled prox-linear subproblem in per-interval block form.
///
/// ```text
/// minimize   w_cost x̂_Nᵀe_cost + w_prox/2 Σ(‖x̂_k‖² + ‖û_k‖²) + w_ep Σ 1ᵀ(μ⁺_k + μ⁻_k)
/// subject to Â⁻_k x̂_k + Â⁺_k x̂_{k+1} + B̂⁻_k û_k + B̂⁺_k û_{k+1} + μ⁺_k − μ⁻_k + ŵ_k = 0
///            E_y(x̂_{k+1} − x̂_k) ≤ ε̂_k
///            μ± ≥ 0,  û_min ≤ û_k ≤ û_max,  boundary rows of x̂_1, x̂_N fixed
/// ```
///
/// `Â⁺_k = −I` for every interval and is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSubproblem<T> {
    pub n: usize,
    pub nx: usize,
    pub nu: usize,
    /// `(N−1)` blocks of `nx x nx`.
    pub a_minus: Vec<T>,
    /// `(N−1)` blocks of `nx x nu`.
    pub b_minus: Vec<T>,
    pub b_plus: Vec<T>,
    /// `(N−1) x nx`.
    pub w_hat: Vec<T>,
    /// State component selected by `E_y`; `None` drops the relaxation rows.
    pub y_index: Option<usize>,
    /// `N−1` entries (ignored without `y_index`).
    pub eps_hat: Vec<T>,
    /// `N x nu`; infinite entries are unconstrained.
    pub u_min: Vec<T>,
    pub u_max: Vec<T>,
    /// `(component, value)` rows of `x̂_1` and `x̂_N` assigned directly.
    pub fix_initial: Vec<(usize, T)>,
    pub fix_final: Vec<(usize, T)>,
    pub e_cost: Vec<T>,
    pub w_cost: T,
    pub w_prox: T,
    pub w_ep: T,
}

impl<T: Real> ScaledSubproblem<T> {
    /// All-zero blocks, unbounded controls, no boundary rows.
    pub fn zeros(n: usize, nx: usize, nu: usize) -> Self {
        let m = n.saturating_sub(1);
        let z = |len| vec![T::zero(); len];
        Self {
            n,
            nx,
            nu,
            a_minus: z(m * nx * nx),
            b_minus: z(m * nx * nu),
            b_plus: z(m * nx * nu),
            w_hat: z(m * nx),
            y_index: None,
            eps_hat: z(m),
            u_min: vec![T::neg_infinity(); n * nu],
            u_max: vec![T::infinity(); n * nu],
            fix_initial: Vec::new(),
            fix_final: Vec::new(),
            e_cost: z(nx),
            w_cost: T::zero(),
            w_prox: T::one(),
            w_ep: T::one(),
        }
    }

    pub fn intervals(&self) -> usize {
        self.n - 1
    }

    /// Number of relaxation rows per interval (0 or 1).
    pub fn ny(&self) -> usize {
        usize::from(self.y_index.is_some())
    }

    pub fn a_minus(&self, k: usize) -> &[T] {
        let s = self.nx * self.nx;
        &self.a_minus[k * s..(k + 1) * s]
    }

    pub fn b_minus(&self, k: usize) -> &[T] {
        let s = self.nx * self.nu;
        &self.b_minus[k * s..(k + 1) * s]
    }

    pub fn b_plus(&self, k: usize) -> &[T] {
        let s = self.nx * self.nu;
        &self.b_plus[k * s..(k + 1) * s]
    }

    pub fn w_hat(&self, k: usize) -> &[T] {
        &self.w_hat[k * self.nx..(k + 1) * self.nx]
    }

    pub fn validate(&self) -> Result<()> {
        let (n, nx, nu) = (self.n, self.nx, self.nu);
        if n < 2 || nx == 0 || nu == 0 {
            return Err(Error::Precondition(format!("degenerate subproblem N={n} nx={nx} nu={nu}")));
        }
        let m = n - 1;
        let checks = [
            ("a_minus", self.a_minus.len(), m * nx * nx),
            ("b_minus", self.b_minus.len(), m * nx * nu),
            ("b_plus", self.b_plus.len(), m * nx * nu),
            ("w_hat", self.w_hat.len(), m * nx),
            ("eps_hat", self.eps_hat.len(), m),
            ("u_min", self.u_min.len(), n * nu),
            ("u_max", self.u_max.len(), n * nu),
            ("e_cost", self.e_cost.len(), nx),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::dims(name, (got, 1), (want, 1)));
            }
        }
        if self.y_index.is_some_and(|i| i >= nx) {
            return Err(Error::Precondition("y_index out of range".into()));
        }
        if self.fix_initial.iter().chain(&self.fix_final).any(|&(i, _)| i >= nx) {
            return Err(Error::Precondition("boundary row out of range".into()));
        }
        if self.u_min.iter().zip(&self.u_max).any(|(lo, hi)| lo > hi) {
            return Err(Error::Precondition("control lower bound exceeds upper bound".into()));
        }
        if !(self.w_prox > T::zero()) {
            return Err(Error::Precondition("w_prox must be positive".into()));
        }
        Ok(())
    }
}
