use super::landing::{LandingSetup, S, Y};
use super::*;
use crate::ctcs::test_models::DoubleIntegrator;
use crate::ctcs::Ctcs;
use crate::discretizer::single_shoot;
use crate::rocket6dof::idx;

type Di = Ctcs<DoubleIntegrator>;

const DI_STEPS: usize = 4;

/// State `(r, v, y)`, control `(a, s)`; a rollout, so every defect vanishes.
fn di_trajectory(n: usize, s: f64) -> Trajectory<f64> {
    let sys = Ctcs::new(DoubleIntegrator);
    let grid = Grid::uniform(n).unwrap();
    let mut z = Trajectory::zeros(n, 3, 2);
    z.x_mut(0).copy_from_slice(&[0.0, 1.0, 0.0]);
    for k in 0..n {
        let a = 0.3 * (k as f64).sin();
        z.u_mut(k).copy_from_slice(&[a, s]);
    }
    let mut prop = Propagator::new(&sys);
    single_shoot(&sys, &mut z, &grid, DI_STEPS, &mut prop).unwrap();
    z
}

fn di_problem(z: &Trajectory<f64>, scaling: ScalingPair<f64>) -> ScpProblem<f64, Di> {
    let (first, last) = (z.x(0), z.x(z.n - 1));
    let s = z.u(0)[1];
    ScpProblem {
        system: Ctcs::new(DoubleIntegrator),
        grid: Grid::uniform(z.n).unwrap(),
        steps: DI_STEPS,
        fix_initial: (0..3).map(|i| (i, first[i])).collect(),
        fix_final: (0..2).map(|i| (i, last[i])).collect(),
        u_min: vec![f64::NEG_INFINITY, s],
        u_max: vec![f64::INFINITY, s],
        e_cost: vec![0.0; 3],
        weights: ScpWeights { w_cost: 1.0, w_prox: 1.0, w_ep: 10.0, epsilon_relax: 1e-4 },
        scaling,
        unit_blocks: vec![],
    }
}

fn blocks_for(problem: &ScpProblem<f64, Di>, z: &Trajectory<f64>) -> Vec<LinearizedBlocks<f64>> {
    let mut blocks = vec![LinearizedBlocks::zeros(3, 2); z.n - 1];
    let mut prop = Propagator::new(&problem.system);
    discretizer::linearize_all(&problem.system, z, &problem.grid, problem.steps, &mut prop, &mut blocks).unwrap();
    blocks
}

fn assembled(problem: &ScpProblem<f64, Di>, z: &Trajectory<f64>) -> (Vec<LinearizedBlocks<f64>>, ScaledSubproblem<f64>) {
    let blocks = blocks_for(problem, z);
    let mut sub = ScaledSubproblem::zeros(z.n, 3, 2);
    assemble_subproblem(problem, z, &blocks, &mut sub).unwrap();
    (blocks, sub)
}

#[test]
fn feasible_reference_has_zero_scaled_defect() {
    let z = di_trajectory(6, 2.0);
    let p = di_problem(&z, ScalingPair::new(vec![3.0, 0.5, 0.1], vec![2.0, 4.0]).unwrap());
    let (_, sub) = assembled(&p, &z);
    assert!(sub.w_hat.iter().all(|v| *v == 0.0));
    assert!(sub.fix_initial.iter().chain(&sub.fix_final).all(|(_, v)| *v == 0.0));
}

#[test]
fn power_of_two_scaling_keeps_state_blocks_exact() {
    let z = di_trajectory(5, 1.5);
    let p = di_problem(&z, ScalingPair::new(vec![2.0; 3], vec![1.0; 2]).unwrap());
    let (blocks, sub) = assembled(&p, &z);
    for (k, b) in blocks.iter().enumerate() {
        assert_eq!(&sub.a_minus[k * 9..(k + 1) * 9], &b.a[..]);
        for i in 0..6 {
            assert_eq!(sub.b_minus[k * 6 + i], 0.5 * b.bm[i]);
        }
    }
}

#[test]
fn flat_integrator_gives_scaled_epsilon() {
    let z = di_trajectory(5, 1.0);
    let p = di_problem(&z, ScalingPair::new(vec![1.0, 1.0, 0.25], vec![1.0; 2]).unwrap());
    let (_, sub) = assembled(&p, &z);
    assert_eq!(sub.y_index, Some(2));
    for e in &sub.eps_hat {
        assert_eq!(*e, 1e-4 * 4.0);
    }
}

#[test]
fn control_bounds_are_shifted_and_scaled() {
    let z = di_trajectory(4, 2.0);
    let mut p = di_problem(&z, ScalingPair::new(vec![1.0; 3], vec![1.0, 4.0]).unwrap());
    p.u_min[1] = 1.0;
    p.u_max[1] = 6.0;
    let (_, sub) = assembled(&p, &z);
    for k in 0..z.n {
        assert_eq!(sub.u_min[k * 2], f64::NEG_INFINITY);
        assert_eq!(sub.u_min[k * 2 + 1], -0.25);
        assert_eq!(sub.u_max[k * 2 + 1], 1.0);
    }
}

#[test]
fn assemble_rejects_wrong_block_count() {
    let z = di_trajectory(4, 1.0);
    let p = di_problem(&z, ScalingPair::identity(3, 2));
    let mut sub = ScaledSubproblem::zeros(4, 3, 2);
    let blocks = vec![LinearizedBlocks::zeros(3, 2); 2];
    assert!(assemble_subproblem(&p, &z, &blocks, &mut sub).is_err());
}

#[test]
fn scale_unscale_round_trip() {
    let zbar = di_trajectory(5, 1.0);
    let mut z = zbar.clone();
    for (i, v) in z.x.iter_mut().enumerate() {
        *v += 0.1 * i as f64 - 0.7;
    }
    for (i, v) in z.u.iter_mut().enumerate() {
        *v -= 0.05 * i as f64;
    }
    let sc = ScalingPair::new(vec![3.0, 0.2, 7.0], vec![0.5, 9.0]).unwrap();
    let mut xh = vec![0.0; z.x.len()];
    let mut uh = vec![0.0; z.u.len()];
    scale(&sc, &zbar, &z, &mut xh, &mut uh);
    let mut back = Trajectory::zeros(5, 3, 2);
    unscale(&sc, &zbar, &xh, &uh, &mut back);
    for (a, b) in back.x.iter().chain(&back.u).zip(z.x.iter().chain(&z.u)) {
        assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
    }
}

#[test]
fn scaling_rejects_nonpositive_entries() {
    assert!(ScalingPair::new(vec![1.0, 0.0], vec![1.0]).is_err());
    assert!(ScalingPair::new(vec![1.0], vec![f64::INFINITY]).is_err());
}

#[test]
fn penalized_cost_of_feasible_trajectory_is_the_cost() {
    let z = di_trajectory(6, 2.0);
    let mut p = di_problem(&z, ScalingPair::identity(3, 2));
    p.e_cost = vec![1.0, -2.0, 0.0];
    let mut prop = Propagator::new(&p.system);
    let c = penalized_cost(&p.system, &z, &p.grid, p.steps, &p.weights, &p.e_cost, &[1.0; 3], &mut prop).unwrap();
    let last = z.x(z.n - 1);
    assert!((c - (last[0] - 2.0 * last[1])).abs() <= 1e-12);
}

#[test]
fn penalized_cost_is_affine_in_penalty_weight() {
    let mut z = di_trajectory(6, 2.0);
    z.x_mut(3)[0] += 0.2;
    z.x_mut(4)[1] -= 0.1;
    let p = di_problem(&z, ScalingPair::identity(3, 2));
    let mut prop = Propagator::new(&p.system);
    let mut at = |w_ep: f64| {
        let w = ScpWeights { w_ep, ..p.weights };
        penalized_cost(&p.system, &z, &p.grid, p.steps, &w, &p.e_cost, &[1.0; 3], &mut prop).unwrap()
    };
    let (c1, c2, c3) = (at(1.0), at(2.0), at(3.0));
    assert!(c1 > 0.0);
    assert!(((c3 - c2) - (c2 - c1)).abs() <= 1e-12);
}

#[test]
fn penalized_cost_lipschitz_in_a_node_state() {
    let z = di_trajectory(5, 1.0);
    let p = di_problem(&z, ScalingPair::identity(3, 2));
    let mut prop = Propagator::new(&p.system);
    let base = penalized_cost(&p.system, &z, &p.grid, p.steps, &p.weights, &p.e_cost, &[1.0; 3], &mut prop).unwrap();
    // Moving x_k by δ changes defect k−1 by δ and defect k by at most ‖A_k‖₁ δ.
    let blocks = blocks_for(&p, &z);
    let a_norm = (0..3).map(|j| (0..3).map(|i| blocks[2].a[i * 3 + j].abs()).sum::<f64>()).fold(0.0, f64::max);
    let delta = 1e-3;
    let mut moved = z.clone();
    moved.x_mut(2)[1] += delta;
    let c = penalized_cost(&p.system, &moved, &p.grid, p.steps, &p.weights, &p.e_cost, &[1.0; 3], &mut prop).unwrap();
    assert!((c - base).abs() <= p.weights.w_ep * (1.0 + a_norm) * delta * (1.0 + 1e-9));
}

#[test]
fn feasible_start_is_a_fixed_point() {
    let z = di_trajectory(6, 2.0);
    let p = di_problem(&z, ScalingPair::identity(3, 2));
    let mut ws = ScpWorkspace::new(&p);
    let res = scp_solve(&p, &ScpSettings::default(), &z, &mut ws).unwrap();
    assert!(res.converged);
    assert!(res.iterations <= 2, "{} iterations", res.iterations);
    for (a, b) in res.iterate.x.iter().zip(&z.x) {
        assert!((a - b).abs() <= 1e-6);
    }
}

#[test]
fn rejects_mismatched_initial_guess() {
    let z = di_trajectory(6, 2.0);
    let p = di_problem(&z, ScalingPair::identity(3, 2));
    let mut ws = ScpWorkspace::new(&p);
    let short = di_trajectory(5, 2.0);
    assert!(matches!(scp_solve(&p, &ScpSettings::default(), &short, &mut ws), Err(Error::DimensionMismatch { .. })));
    let mut bad = z.clone();
    bad.x[4] = f64::NAN;
    assert!(matches!(scp_solve(&p, &ScpSettings::default(), &bad, &mut ws), Err(Error::Precondition(_))));
}

#[test]
fn iteration_cap_is_respected() {
    let setup = LandingSetup::nominal();
    let p = setup.build().unwrap();
    let mut ws = ScpWorkspace::new(&p);
    let settings = ScpSettings { max_iters: 3, ..ScpSettings::default() };
    let res = scp_solve(&p, &settings, &setup.initial_guess(), &mut ws).unwrap();
    assert!(!res.converged);
    assert_eq!(res.iterations, 3);
    assert_eq!(res.history.len(), 3);
}

#[test]
fn initial_guess_matches_boundary_values() {
    let setup = LandingSetup::nominal();
    let z = setup.initial_guess();
    assert_eq!(z.x(0)[..Y], setup.initial.to_array()[..]);
    let last = z.x(z.n - 1);
    assert_eq!(last[idx::M], setup.vehicle.m_dry);
    let t = &setup.terminal;
    for i in 0..3 {
        assert!((last[idx::R + i] - t.r[i]).abs() < 1e-15);
        assert!((last[idx::V + i] - t.v[i]).abs() < 1e-15);
        assert!((last[idx::W + i] - t.w[i]).abs() < 1e-15);
    }
    for i in 0..4 {
        assert!((last[idx::Q + i] - t.q[i]).abs() < 1e-12);
    }
    let g = setup.vehicle.g_inertial.iter().map(|v| v * v).sum::<f64>().sqrt();
    for k in 0..z.n {
        let x = z.x(k);
        let u = z.u(k);
        let thrust = u[idx::THRUST..idx::THRUST + 3].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((thrust - x[idx::M] * g).abs() <= 1e-12);
        assert!(thrust >= setup.vehicle.t_min);
        assert_eq!(u[S], setup.t_f_guess);
        assert_eq!(x[Y], 0.0);
    }
}

#[test]
fn slerp_endpoints_and_norm() {
    let a = [1.0, 0.0, 0.0, 0.0];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let b = [h, 0.0, h, 0.0];
    assert_eq!(landing::slerp(&a, &b, 0.0), a);
    let end = landing::slerp(&a, &b, 1.0);
    for i in 0..4 {
        assert!((end[i] - b[i]).abs() < 1e-15);
    }
    let mid = landing::slerp(&a, &b, 0.5);
    let angle = (2.0 * mid[0].acos()).to_degrees();
    assert!((angle - 45.0).abs() < 1e-10);
}

#[test]
fn setup_validation_names_keys() {
    let key = |s: LandingSetup<f64>| match s.validate() {
        Err(Error::Validation { key, .. }) => key,
        other => panic!("{other:?}"),
    };
    let mut s = LandingSetup::nominal();
    s.initial.m = s.vehicle.m_dry;
    assert_eq!(key(s), "landing.initial.m");
    let mut s = LandingSetup::nominal();
    s.terminal.q = [1.0, 1.0, 0.0, 0.0];
    assert_eq!(key(s), "landing.terminal.q");
    let mut s = LandingSetup::nominal();
    s.t_f_guess = 30.0;
    assert_eq!(key(s), "landing.t_f_guess");
    let mut s = LandingSetup::nominal();
    s.ranges.torque = 0.0;
    assert_eq!(key(s), "scaling.torque");
}

#[test]
fn nominal_landing_converges() {
    let setup = LandingSetup::nominal();
    let p = setup.build().unwrap();
    let mut ws = ScpWorkspace::new(&p);
    let res = scp_solve(&p, &ScpSettings::default(), &setup.initial_guess(), &mut ws).unwrap();
    assert!(res.converged);
    assert!(res.iterations <= 25);
    assert!(res.defect_inf <= 1e-6);
    assert!(boundary_residual(&p, &res.iterate) <= 1e-6);
    assert!(max_relaxation_step(Some(Y), &res.iterate) <= setup.weights.epsilon_relax + 1e-9);
    for k in 0..res.iterate.n {
        let q = &res.iterate.x(k)[idx::Q..idx::Q + 4];
        assert!((q.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let costs: Vec<f64> = res.history.iter().map(|h| h.penalized_cost).collect();
    assert!(costs.last().unwrap() < &costs[0]);
}

#[test]
fn parallel_linearization_matches_serial() {
    let setup = LandingSetup::nominal();
    let p = setup.build().unwrap();
    let settings = ScpSettings { max_iters: 4, ..ScpSettings::default() };
    let mut ws = ScpWorkspace::new(&p);
    let a = scp_solve(&p, &settings, &setup.initial_guess(), &mut ws).unwrap();
    let mut ws = ScpWorkspace::new(&p);
    let par = ScpSettings { linearize_threads: 3, ..settings };
    let b = scp_solve(&p, &par, &setup.initial_guess(), &mut ws).unwrap();
    assert_eq!(a.iterate.x, b.iterate.x);
    assert_eq!(a.iterate.u, b.iterate.u);
}

mod props {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn scaling_round_trip(
            px in proptest::collection::vec(1e-3f64..1e3, 3),
            pu in proptest::collection::vec(1e-3f64..1e3, 2),
            dx in proptest::collection::vec(-50.0f64..50.0, 15),
            du in proptest::collection::vec(-50.0f64..50.0, 10),
        ) {
            let zbar = di_trajectory(5, 1.0);
            let mut z = zbar.clone();
            z.x.iter_mut().zip(&dx).for_each(|(v, d)| *v += d);
            z.u.iter_mut().zip(&du).for_each(|(v, d)| *v += d);
            let sc = ScalingPair::new(px, pu).unwrap();
            let mut xh = vec![0.0; z.x.len()];
            let mut uh = vec![0.0; z.u.len()];
            scale(&sc, &zbar, &z, &mut xh, &mut uh);
            let mut back = Trajectory::zeros(5, 3, 2);
            unscale(&sc, &zbar, &xh, &uh, &mut back);
            for (a, b) in back.x.iter().chain(&back.u).zip(z.x.iter().chain(&z.u)) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
