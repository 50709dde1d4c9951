use crate::scalar::Real;
use crate::smallmat::{diff_norm_inf, norm_inf};

/// Borrowed primal-dual iterate.
#[derive(Debug, Clone, Copy)]
pub struct IterateView<'a, T> {
    pub x: &'a [T],
    pub u: &'a [T],
    pub mu_plus: &'a [T],
    pub mu_minus: &'a [T],
    pub phi: &'a [T],
    pub theta: &'a [T],
}

impl<'a, T: Real> IterateView<'a, T> {
    fn primal(&self) -> [&'a [T]; 4] {
        [self.x, self.u, self.mu_plus, self.mu_minus]
    }

    fn dual(&self) -> [&'a [T]; 2] {
        [self.phi, self.theta]
    }
}

fn max_norm<T: Real>(parts: &[&[T]]) -> T {
    parts.iter().fold(T::zero(), |a, p| a.max(norm_inf(p)))
}

fn max_change<T: Real>(a: &[&[T]], b: &[&[T]]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (p, q)| acc.max(diff_norm_inf(p, q)))
}

/// True when both the primal and the dual ∞-norm changes are within
/// `eps_abs + eps_rel · max(‖current‖∞, ‖previous‖∞)`.
pub fn stopping_custom<T: Real>(cur: &IterateView<'_, T>, prev: &IterateView<'_, T>, eps_abs: T, eps_rel: T) -> bool {
    let (zc, zp) = (cur.primal(), prev.primal());
    let z_tol = eps_abs + eps_rel * max_norm(&zc).max(max_norm(&zp));
    let (rc, rp) = (cur.dual(), prev.dual());
    let r_tol = eps_abs + eps_rel * max_norm(&rc).max(max_norm(&rp));
    max_change(&zc, &zp) <= z_tol && max_change(&rc, &rp) <= r_tol
}
