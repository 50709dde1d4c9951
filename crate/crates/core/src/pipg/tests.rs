use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_sub(rng: &mut ChaCha8Rng, n: usize, nx: usize, nu: usize) -> ScaledSubproblem<f64> {
    let mut s = ScaledSubproblem::zeros(n, nx, nu);
    let mut fill = |v: &mut Vec<f64>, scale: f64| v.iter_mut().for_each(|e| *e = scale * rng.gen_range(-1.0..1.0));
    fill(&mut s.a_minus, 1.0);
    fill(&mut s.b_minus, 0.5);
    fill(&mut s.b_plus, 0.5);
    fill(&mut s.w_hat, 0.3);
    fill(&mut s.e_cost, 1.0);
    s.y_index = Some(nx - 1);
    s.eps_hat.iter_mut().for_each(|e| *e = rng.gen_range(0.0..0.1));
    for k in 0..n {
        s.u_min[k * nu + nu - 1] = -0.2;
        s.u_max[k * nu + nu - 1] = 0.3;
    }
    s.fix_initial = vec![(0, 0.1)];
    s.fix_final = vec![(0, -0.05)];
    s.w_cost = 0.5;
    s.w_prox = 1.0;
    s.w_ep = 2.0;
    s
}

fn seed_ws(sub: &ScaledSubproblem<f64>) -> PipgWorkspace<f64> {
    let mut ws = PipgWorkspace::for_subproblem(sub);
    ws.x.iter_mut().enumerate().for_each(|(i, v)| *v = 1.0 + 0.1 * i as f64);
    ws
}

fn cfg() -> PipgConfig {
    PipgConfig {
        power_j_max: 5000,
        power_eps_abs: 0.0,
        power_eps_rel: 1e-12,
        ..PipgConfig::default()
    }
}

#[test]
fn default_config_is_valid() {
    PipgConfig::default().validate().unwrap();
    let bad = PipgConfig { j_check: 0, ..PipgConfig::default() };
    assert!(matches!(bad.validate(), Err(Error::Validation { key, .. }) if key == "pipg.j_check"));
    let bad = PipgConfig { rho: 2.5, ..PipgConfig::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn step_size_closed_form() {
    for &(l, w, s) in &[(1.0f64, 1.0f64, 3.0f64), (0.1, 2.5, 40.0), (5.0, 0.3, 1e-3)] {
        let (a, b) = step_sizes(l, w, s);
        assert_eq!(a, 2.0 / (l + (l * l + 4.0 * w * s).sqrt()));
        assert_eq!(b, w * a);
        assert!((w * s * a * a + l * a - 1.0).abs() < 1e-14);
    }
}

#[test]
fn power_iteration_two_row_example() {
    let a = 0.7;
    let mut sub = ScaledSubproblem::zeros(2, 1, 1);
    sub.a_minus[0] = a;
    sub.y_index = Some(0);
    let mut ws = seed_ws(&sub);
    ws.u[0] = 0.3;
    let est = power_iteration_custom(&sub, &mut ws, &cfg()).unwrap();
    // Gram of the rows [a, -1, 0, 0, 1, -1] and [-1, 1, 0, 0, 0, 0]
    let (p, q, r) = (a * a + 3.0, -a - 1.0, 2.0);
    let lmax = 0.5 * (p + r) + (0.25 * (p - r) * (p - r) + q * q).sqrt();
    assert!((est.raw - lmax).abs() <= 1e-9 * lmax);
    assert!(est.buffered > est.raw);
    assert_eq!(ws.sigma, est.buffered);
}

#[test]
fn power_iteration_selection_block() {
    // only Â⁺ = −I and the virtual controls [I, −I]: K Kᵀ = 3I
    let sub = ScaledSubproblem::zeros(4, 3, 2);
    let mut ws = seed_ws(&sub);
    let c = cfg();
    let est = power_iteration_custom(&sub, &mut ws, &c).unwrap();
    assert!((est.raw - 3.0).abs() <= 1e-9);
    assert!((est.buffered - 3.0 * (1.0 + c.eps_buff)).abs() <= 1e-9);
}

#[test]
fn power_iteration_rejects_zero_seed() {
    let sub = ScaledSubproblem::<f64>::zeros(3, 2, 1);
    let mut ws = PipgWorkspace::for_subproblem(&sub);
    assert!(matches!(power_iteration_custom(&sub, &mut ws, &cfg()), Err(Error::Precondition(_))));
}

#[test]
fn power_iteration_leaves_iterates_untouched() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sub = random_sub(&mut rng, 4, 3, 2);
    let mut ws = seed_ws(&sub);
    let before = ws.clone();
    power_iteration_custom(&sub, &mut ws, &cfg()).unwrap();
    assert_eq!(before.x, ws.x);
    assert_eq!(before.phi, ws.phi);
}

#[test]
fn origin_is_the_minimizer_of_an_empty_problem() {
    let mut sub = ScaledSubproblem::zeros(3, 2, 2);
    sub.y_index = Some(1);
    sub.eps_hat.iter_mut().for_each(|e| *e = 10.0);
    let mut ws = seed_ws(&sub);
    power_iteration_custom(&sub, &mut ws, &cfg()).unwrap();
    ws.reset();
    let c = PipgConfig { j_max: 5000, eps_abs: 1e-12, eps_rel: 0.0, ..cfg() };
    let out = pipg_custom(&sub, &c, &mut ws).unwrap();
    assert!(out.terminated);
    for v in ws.x.iter().chain(&ws.u).chain(&ws.mu_plus).chain(&ws.mu_minus) {
        assert!(v.abs() <= 1e-12);
    }
}

#[test]
fn projections_hold_after_every_iteration_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sub = random_sub(&mut rng, 5, 4, 3);
    for j_max in [1, 2, 3, 7, 25, 100] {
        let mut ws = seed_ws(&sub);
        power_iteration_custom(&sub, &mut ws, &cfg()).unwrap();
        ws.reset();
        let c = PipgConfig { j_max, j_check: 1000, ..cfg() };
        pipg_custom(&sub, &c, &mut ws).unwrap();
        assert!(ws.mu_plus.iter().chain(&ws.mu_minus).chain(&ws.theta).all(|&v| v >= 0.0));
        assert_eq!(ws.x[0], 0.1);
        assert_eq!(ws.x[4 * 4], -0.05);
        for k in 0..5 {
            let s = ws.u[k * 3 + 2];
            assert!((-0.2..=0.3).contains(&s));
        }
    }
}

#[test]
fn custom_and_generic_iterates_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let n = rng.gen_range(2..=5);
        let nx = rng.gen_range(1..=4);
        let nu = rng.gen_range(1..=3);
        let sub = random_sub(&mut rng, n, nx, nu);
        let qp = GenericQP::from_subproblem(&sub).unwrap();
        let mut ws = seed_ws(&sub);
        let sigma = power_iteration_custom(&sub, &mut ws, &cfg()).unwrap().buffered;
        ws.reset();
        for iters in [1, 10, 100] {
            let c = PipgConfig { j_max: iters, j_check: usize::MAX, ..cfg() };
            let mut w = ws.clone();
            pipg_custom(&sub, &c, &mut w).unwrap();
            let mut st = GenericState::from_workspace(&sub, &ws);
            pipg_generic(&qp, &c, sigma, &mut st).unwrap();
            let packed = GenericState::from_workspace(&sub, &w);
            let d = packed.z.iter().zip(&st.z).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
            assert!(d <= 1e-10, "iteration {iters}: {d}");
        }
    }
}

#[test]
fn warm_start_at_solution_stops_at_first_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sub = random_sub(&mut rng, 4, 3, 2);
    let mut ws = seed_ws(&sub);
    power_iteration_custom(&sub, &mut ws, &cfg()).unwrap();
    ws.reset();
    let tight = PipgConfig { j_max: 200_000, eps_abs: 1e-13, eps_rel: 0.0, ..cfg() };
    assert!(pipg_custom(&sub, &tight, &mut ws).unwrap().terminated);
    let solved = ws.clone();
    let c = PipgConfig { eps_abs: 1e-9, eps_rel: 0.0, ..cfg() };
    let out = pipg_custom(&sub, &c, &mut ws).unwrap();
    assert!(out.terminated);
    assert_eq!(out.iterations, c.j_check);
    let d = ws.x.iter().zip(&solved.x).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
    assert!(d <= 1e-9);
}

#[test]
fn box_only_qp_is_a_clamp() {
    let c = [-2.0f64, 0.3, 5.0, 0.7];
    let qp = GenericQP {
        dim: 4,
        p_diag: vec![1.0; 4],
        p: c.iter().map(|v| -v).collect(),
        g_rows: 0,
        g_mat: vec![],
        g_rhs: vec![],
        h_rows: 0,
        h_mat: vec![],
        h_rhs: vec![],
        proj: vec![
            Projection::Box(-1.0, 1.0),
            Projection::Box(-1.0, 1.0),
            Projection::NonNeg,
            Projection::Fixed(0.25),
        ],
    };
    let mut st = GenericState::zeros(&qp);
    let c2 = PipgConfig { j_max: 10_000, eps_abs: 1e-14, eps_rel: 0.0, ..cfg() };
    pipg_generic(&qp, &c2, 1.0, &mut st).unwrap();
    let expect = [-1.0f64, 0.3, 5.0, 0.25];
    for (z, e) in st.z.iter().zip(expect) {
        assert!((z - e).abs() < 1e-10, "{z} vs {e}");
    }
}

#[test]
fn divergent_iterate_is_reported() {
    let mut sub = ScaledSubproblem::zeros(2, 1, 1);
    sub.w_hat[0] = f64::NAN;
    let mut ws = seed_ws(&sub);
    ws.sigma = 1.0;
    let c = PipgConfig { j_check: 5, ..cfg() };
    assert!(matches!(pipg_custom(&sub, &c, &mut ws), Err(Error::SolverDiverged { iteration: 5 })));
}

#[test]
fn missing_sigma_is_a_precondition_error() {
    let sub = ScaledSubproblem::<f64>::zeros(2, 1, 1);
    let mut ws = PipgWorkspace::for_subproblem(&sub);
    assert!(matches!(pipg_custom(&sub, &cfg(), &mut ws), Err(Error::Precondition(_))));
}

#[test]
fn single_precision_solve() {
    let mut sub = ScaledSubproblem::<f32>::zeros(3, 2, 1);
    sub.w_hat.iter_mut().for_each(|v| *v = 0.1);
    let mut ws = PipgWorkspace::for_subproblem(&sub);
    ws.x[2] = 1.0;
    power_iteration_custom(&sub, &mut ws, &cfg()).unwrap();
    ws.reset();
    let c = PipgConfig { eps_abs: 1e-6, eps_rel: 1e-5, ..cfg() };
    pipg_custom(&sub, &c, &mut ws).unwrap();
    assert!(ws.x.iter().all(|v| v.is_finite()));
}

mod props {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn iterates_stay_in_the_projection_set(
            seed in any::<u64>(),
            n in 2usize..6,
            nx in 1usize..5,
            nu in 1usize..4,
            j_max in 1usize..60,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sub = random_sub(&mut rng, n, nx, nu);
            let mut ws = seed_ws(&sub);
            power_iteration_custom(&sub, &mut ws, &cfg()).unwrap();
            ws.reset();
            pipg_custom(&sub, &PipgConfig { j_max, j_check: usize::MAX, ..cfg() }, &mut ws).unwrap();
            prop_assert!(ws.mu_plus.iter().chain(&ws.mu_minus).chain(&ws.theta).all(|&v| v >= 0.0));
            prop_assert_eq!(ws.x[0], 0.1);
            prop_assert_eq!(ws.x[(n - 1) * nx], -0.05);
            for k in 0..n {
                prop_assert!((-0.2..=0.3).contains(&ws.u[k * nu + nu - 1]));
            }
        }

        #[test]
        fn projection_is_idempotent(v in -1e3f64..1e3, a in -10.0f64..10.0, w in 0.0f64..10.0) {
            for p in [Projection::Free, Projection::Fixed(a), Projection::Box(a, a + w), Projection::NonNeg] {
                let once = p.apply(v);
                prop_assert_eq!(p.apply(once), once);
            }
        }
    }
}
