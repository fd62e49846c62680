use hydrarm_core::dynamics::{inverse_dynamics, regressor, LinkInertialSet, LinkParams};
use hydrarm_core::excitation::{n_free_per_joint, trajectory_from_free, BoundaryMode, DEFAULT_OMEGA_F};
use hydrarm_core::friction::{batch_ls, build_sample, run_rls, ParamLayout, RegressionSample, RlsState};
use hydrarm_core::hydraulic::{CylinderParams, CylinderRecord};
use hydrarm_core::model::{JointState, RobotModel};
use hydrarm_core::pipeline::rsd;
use hydrarm_core::reduction::{base_regressor, project_params, reduce_model, ReductionOptions};
use hydrarm_core::stribeck::FrictionParams;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use std::sync::OnceLock;

fn mapping() -> &'static hydrarm_core::reduction::BaseParamMapping {
    static M: OnceLock<hydrarm_core::reduction::BaseParamMapping> = OnceLock::new();
    M.get_or_init(|| reduce_model(&RobotModel::default_arm(), &ReductionOptions::default()).unwrap())
}

fn state() -> impl Strategy<Value = JointState> {
    (
        prop::collection::vec(-1.5f64..1.5, 6),
        prop::collection::vec(-1.0f64..1.0, 6),
        prop::collection::vec(-2.0f64..2.0, 6),
    )
        .prop_map(|(q, dq, ddq)| JointState::from_slices(0.0, &q, &dq, &ddq))
}

fn link() -> impl Strategy<Value = LinkParams> {
    (
        0.5f64..20.0,
        prop::array::uniform3(-0.3f64..0.3),
        prop::array::uniform3(0.01f64..1.0),
        prop::array::uniform3(0.0f64..20.0),
    )
        .prop_map(|(m, c, d, f)| {
            LinkParams::from_com(
                m,
                Vector3::from(c),
                Matrix3::from_diagonal(&Vector3::from(d)),
                FrictionParams::new(f[0], f[1], f[2]),
            )
        })
}

fn params() -> impl Strategy<Value = LinkInertialSet> {
    prop::collection::vec(link(), 6).prop_map(|links| LinkInertialSet { links })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regressor_is_linear_in_parameters(s in state(), p in params()) {
        let model = RobotModel::default_arm();
        let tau = inverse_dynamics(&model, &p, &s);
        let lin = regressor(&model, &s) * p.to_vector();
        prop_assert!((&tau - &lin).amax() <= 1e-9 * tau.amax().max(1.0));
    }

    #[test]
    fn base_prediction_matches_full(s in state(), p in params()) {
        let model = RobotModel::default_arm();
        let mut inertial = p.clone();
        for l in &mut inertial.links {
            l.friction = FrictionParams::ZERO;
        }
        let full = inverse_dynamics(&model, &inertial, &s);
        let base = base_regressor(&model, mapping(), &s) * project_params(mapping(), &inertial);
        prop_assert!((&full - &base).amax() <= 1e-8 * full.amax().max(1.0));
    }

    #[test]
    fn eliminated_coefficients_meet_boundaries(
        z in prop::collection::vec(-0.3f64..0.3, 6 * n_free_per_joint(3, BoundaryMode::StartAtOffset)),
        zs in prop::collection::vec(-0.3f64..0.3, 6 * n_free_per_joint(4, BoundaryMode::ZeroStart)),
    ) {
        let a = trajectory_from_free(&z, 6, 3, DEFAULT_OMEGA_F, BoundaryMode::StartAtOffset).unwrap();
        let b = trajectory_from_free(&zs, 6, 4, DEFAULT_OMEGA_F, BoundaryMode::ZeroStart).unwrap();
        for traj in [&a, &b] {
            let s0 = traj.eval(0.0);
            let s1 = traj.eval(traj.period());
            prop_assert!(s0.dq.amax() < 1e-12 && s0.ddq.amax() < 1e-12);
            prop_assert!(s1.dq.amax() < 1e-9 && s1.ddq.amax() < 1e-9);
            prop_assert!((&s0.q - &s1.q).amax() < 1e-9);
        }
        prop_assert!(b.eval(0.0).q.amax() < 1e-12);
    }

    #[test]
    fn rls_converges_to_batch(
        theta in prop::array::uniform4(-5.0f64..5.0),
        seed in 0u64..1000,
    ) {
        // noiseless data from a known θ; RLS with a diffuse prior should reach the batch answer
        let layout = ParamLayout::FixedMass { mass: 2.0 };
        let samples: Vec<RegressionSample> = (0..400)
            .map(|k| {
                let t = k as f64 * 0.05 + seed as f64;
                let l = [0.3 * (1.3 * t).cos(), (0.7 * t).sin(), (0.9 * t).cos().signum(), 0.8 * (0.9 * t).cos(), (0.8 * (0.9 * t).cos()).cbrt()];
                let y = 2.0 * l[0] + theta[0] * l[1] + theta[1] * l[2] + theta[2] * l[3] + theta[3] * l[4];
                RegressionSample { y, lambda: l }
            })
            .collect();
        let batch = batch_ls(&samples, &layout).unwrap();
        let rls = run_rls(&samples, &layout, RlsState::new(4, 1e6)).unwrap();
        for k in 0..4 {
            prop_assert!((batch.theta_hat[k] - theta[k]).abs() < 1e-8);
            prop_assert!((rls.state.alpha_hat[k] - theta[k]).abs() < 1e-4, "{} vs {}", rls.state.alpha_hat[k], theta[k]);
        }
        prop_assert!(rls.trace_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn plant_output_is_exact_for_noiseless_records(
        x in -6.0f64..6.0, dx in -0.5f64..0.5, ddx in -0.1f64..0.1, j in 0usize..6,
    ) {
        let p = CylinderParams::for_joint(j);
        let f = p.required_force(x, dx, ddx);
        let p1 = (f + 1e5 * p.a2) / p.a1;
        let rec = CylinderRecord { t: 0.0, x, dx, ddx, p1, p2: 1e5, f: 0.0 };
        let s = build_sample(&rec, p.a1, p.a2, p.c);
        let fric = match p.friction {
            hydrarm_core::hydraulic::FrictionModel::Linearized(fp) => fp,
            _ => unreachable!(),
        };
        let model = p.m * s.lambda[0] + p.k * s.lambda[1] + fric.f_c * s.lambda[2] + fric.f_v * s.lambda[3] + fric.f_s * s.lambda[4];
        prop_assert!((s.y - model).abs() <= 1e-9 * f.abs().max(1.0));
    }

    #[test]
    fn rsd_is_scale_invariant(v in prop::collection::vec(0.1f64..10.0, 2..50), k in 0.01f64..100.0) {
        let m: Vec<f64> = v.iter().enumerate().map(|(i, x)| x + 0.1 * (i as f64).sin()).collect();
        let a = rsd(&v, &m).unwrap();
        let vs: Vec<f64> = v.iter().map(|x| x * k).collect();
        let ms: Vec<f64> = m.iter().map(|x| x * k).collect();
        prop_assert!((rsd(&vs, &ms).unwrap() - a).abs() <= 1e-12 * a.max(1e-3));
    }
}
