mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use zbuscert::certificate::{
    certify_system, condition_values, solve_region, ConditionCoefficients,
};
use zbuscert::loads::{LoadSet, Zip};
use zbuscert::reference::{three_node, two_node, ThreeNodeParams, TwoNodeParams};
use zbuscert::solver::{
    membership_in_ball, solve, InitialVoltage, LambdaChoice, SolveConfig, SolveStatus, ZBusMap,
};
use zbuscert::system::SystemMatrices;

#[test]
fn scaled_and_unscaled_trajectories_agree() {
    let mut r = rng(5);
    for seed in 0..50 {
        let inst = random_instance(seed, 0.5);
        let lam: Vec<_> = (0..inst.system.dim())
            .map(|_| {
                num_complex::Complex64::from_polar(r.gen_range(0.5..2.0), r.gen_range(-3.0..3.0))
            })
            .collect();
        let map = ZBusMap::new(&inst.network, &inst.system, &inst.loads);
        let mut v = inst.network.flat_voltage();
        let mut u: Vec<_> = v.iter().zip(&lam).map(|(a, l)| a / l).collect();
        for _ in 0..10 {
            v = map.apply(&v).unwrap();
            u = map.apply_scaled(&u, &lam).unwrap();
            let back: Vec<_> = u.iter().zip(&lam).map(|(a, l)| a * l).collect();
            assert!(max_diff(&v, &back) <= 1e-12, "seed {seed}");
        }
    }
}

#[test]
fn delta_free_results_ignore_rho_sentinel() {
    for seed in 0..30 {
        let inst = random_instance(seed, 0.0);
        let (_, mut q) = quantities(&inst, &inst.loads);
        let k_inf = ConditionCoefficients::from_quantities(&q);
        q.rho_min = 1.0;
        let k_one = ConditionCoefficients::from_quantities(&q);
        assert_eq!(k_inf, k_one);
        assert_eq!(solve_region(&k_inf, 20), solve_region(&k_one, 20));
    }
}

#[test]
fn doubling_wye_power_doubles_its_coefficients() {
    for seed in 0..30 {
        let inst = random_instance(seed, 0.3);
        let mut doubled = LoadSet::new();
        for (n, p, z) in inst.loads.wye_entries() {
            doubled
                .add_wye(
                    &inst.network,
                    &inst.network.node(n).id,
                    p,
                    Zip::new(z.s * 2.0, z.i, z.y),
                )
                .unwrap();
        }
        for (n, pair, z) in inst.loads.delta_entries() {
            doubled
                .add_delta(
                    &inst.network,
                    &inst.network.node(n).id,
                    (pair.first(), pair.second()),
                    z,
                )
                .unwrap();
        }
        let k1 = ConditionCoefficients::from_quantities(&quantities(&inst, &inst.loads).1);
        let k2 = ConditionCoefficients::from_quantities(&quantities(&inst, &doubled).1);
        assert!((k2.a_y - 2.0 * k1.a_y).abs() <= 1e-15 * k1.a_y.max(1.0));
        assert!((k2.c_y - 2.0 * k1.c_y).abs() <= 1e-15 * k1.c_y.max(1.0));
        assert_eq!(k1.a_d, k2.a_d);
    }
}

#[test]
fn random_certificate_endpoints_are_tight() {
    for seed in 0..40 {
        let inst = random_instance(seed, 0.5);
        let res = certify_system(
            &inst.network,
            &inst.system,
            &inst.loads,
            &LambdaChoice::DiagW,
            5,
        )
        .unwrap();
        if !res.feasible {
            continue;
        }
        let (lo, hi) = (res.r_min.unwrap(), res.r_max.unwrap());
        assert!(lo > 0.0 && lo <= hi);
        let k = &res.coefficients;
        assert!(condition_values(k, lo + 1e-8).all_hold(), "seed {seed}");
        assert!(condition_values(k, hi - 1e-8).all_hold(), "seed {seed}");
        assert!(!condition_values(k, lo - 1e-6).all_hold() || lo - 1e-6 <= 0.0);
        assert!(!condition_values(k, hi + 1e-6).all_hold());
        let mut prev = 0.0;
        for &(_, a) in &res.alpha_curve {
            assert!(a >= prev);
            prev = a;
        }
    }
}

#[test]
fn impedance_only_loads_converge_to_no_load_voltage() {
    for seed in 0..20 {
        let inst = random_instance(seed, 0.5);
        let mut z_only = LoadSet::new();
        for (n, p, z) in inst.loads.wye_entries() {
            z_only
                .add_wye(
                    &inst.network,
                    &inst.network.node(n).id,
                    p,
                    Zip::new(c(0.0, 0.0), c(0.0, 0.0), z.y),
                )
                .unwrap();
        }
        let sys = SystemMatrices::new(&inst.network, &z_only).unwrap();
        let trace = solve(&inst.network, &sys, &z_only, &SolveConfig::default()).unwrap();
        assert_eq!(trace.status, SolveStatus::Converged);
        assert_eq!(trace.iterations(), 1);
        assert!(max_diff(trace.solution.as_ref().unwrap(), &sys.w) <= 1e-15);
        let lhs = sys.bus.network_injection(&sys.w, &sys.v_s);
        let rhs: Vec<_> = matvec(&sys.y_l, &sys.w).into_iter().map(|x| -x).collect();
        assert!(max_diff(&lhs, &rhs) <= 1e-9);
    }
}

#[test]
fn converged_random_solves_balance() {
    for seed in 0..100 {
        let inst = random_instance(seed, 0.5);
        let trace = solve(
            &inst.network,
            &inst.system,
            &inst.loads,
            &SolveConfig::default(),
        )
        .unwrap();
        if trace.status == SolveStatus::Converged {
            assert!(trace.residual.unwrap() <= 1e-6);
        }
    }
}

#[test]
fn three_node_flat_start_is_certified_and_monotone() {
    let (net, loads) = three_node(&ThreeNodeParams { theta: 0.10 }).unwrap();
    let sys = SystemMatrices::new(&net, &loads).unwrap();
    let cert = certify_system(&net, &sys, &loads, &LambdaChoice::Identity, 10).unwrap();
    let ones = vec![c(1.0, 0.0); 6];
    assert!(membership_in_ball(
        &net.flat_voltage(),
        &sys.w,
        &ones,
        cert.r_min.unwrap()
    ));
    let cfg = SolveConfig {
        initial: InitialVoltage::Flat,
        ..SolveConfig::default()
    };
    let trace = solve(&net, &sys, &loads, &cfg).unwrap();
    assert_eq!(trace.status, SolveStatus::Converged);
    assert!(trace.diffs.windows(2).all(|d| d[1] < d[0]));
    let sol = trace.solution.unwrap();
    assert!(membership_in_ball(&sol, &sys.w, &ones, cert.r_min.unwrap()));
}

#[test]
fn two_node_from_half_slack_hits_analytic_root() {
    let params = TwoNodeParams::with_s_l(-0.25);
    let (net, loads) = two_node(&params).unwrap();
    let sys = SystemMatrices::new(&net, &loads).unwrap();
    let v0: Vec<_> = net.slack_voltage().iter().map(|v| v * 0.5).collect();
    let cfg = SolveConfig {
        initial: InitialVoltage::Custom(v0),
        ..SolveConfig::default()
    };
    let trace = solve(&net, &sys, &loads, &cfg).unwrap();
    assert_eq!(trace.status, SolveStatus::Converged);
    assert!((trace.solution.unwrap()[0].norm() - 0.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn two_node_solver_matches_quadratic(y_t in 1.0f64..3.0, y_l in 0.0f64..1.0, i_l in 0.0f64..0.5, s_l in -0.2f64..0.2) {
        let params = TwoNodeParams { y_t, y_l, i_l, s_l };
        let (net, loads) = two_node(&params).unwrap();
        let sys = SystemMatrices::new(&net, &loads).unwrap();
        let trace = solve(&net, &sys, &loads, &SolveConfig::default()).unwrap();
        if let (SolveStatus::Converged, Some((hi, lo))) = (trace.status, params.analytic_roots()) {
            let va = trace.solution.unwrap()[0];
            if va.re > 0.0 && va.im.abs() < 1e-12 {
                prop_assert!((va.re - hi).abs() < 1e-8 || (va.re - lo).abs() < 1e-8, "{va} vs {hi}, {lo}");
            }
        }
    }
}
