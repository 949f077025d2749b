use std::f64::consts::PI;

use proptest::prelude::*;
use spinqudit::dynamics::{
    ensemble_average, evolve_lindblad, CoherenceTimes, DensityMatrix, DephasingModel, EnsembleConfig, HardwareConfig,
    IntegratorConfig, PulseSchedule, RwaEvolver, ScheduleBuilder,
};
use spinqudit::linalg::{c, level_rotation, unitary_propagator, CMatrix, C64};
use spinqudit::spin::{SpinSystem, SpinSystemParams};

fn system() -> SpinSystem {
    SpinSystem::new(SpinSystemParams::default()).unwrap()
}

fn single(hw: &HardwareConfig, eta: usize, theta: f64) -> PulseSchedule {
    let mut b = ScheduleBuilder::new(hw);
    b.rotation(eta, theta, 0.0).unwrap();
    b.build()
}

#[test]
fn rwa_agrees_with_lab_frame_for_pi_and_half_pi() {
    let sys = system();
    let q = sys.levels.computational;
    let deph = DephasingModel::none(12);
    let rwa = RwaEvolver::new(&sys, &deph).unwrap();
    for b1 in [1e-4, 5e-4] {
        let hw = HardwareConfig::nominal(&sys, b1).unwrap();
        for eta in 1..=3 {
            for theta in [PI, PI / 2.0] {
                let sched = single(&hw, eta, theta);
                let rho = DensityMatrix::pure(12, q[eta - 1]);
                let a = rwa.evolve(&rho, &sched).unwrap();
                let traj = evolve_lindblad(&sys, &rho, &sched, &deph, &[], &IntegratorConfig::default()).unwrap();
                let b = traj.last().unwrap();
                let worst = q
                    .iter()
                    .map(|&k| (a.population(k) - b.population(k)).abs())
                    .fold(0.0, f64::max);
                assert!(worst < 1e-2, "f{eta} θ={theta} B1={b1}: {worst}");
                assert!((b.trace() - c(1.0)).norm() < 1e-9);
                assert!(b.hermiticity_error() < 1e-10);
            }
        }
    }
}

fn random_hermitian(n: usize, seed: &[f64]) -> CMatrix {
    let mut h = CMatrix::zeros(n, n);
    let mut it = seed.iter().cycle();
    for j in 0..n {
        for k in j..n {
            let re = *it.next().unwrap();
            let im = if j == k { 0.0 } else { *it.next().unwrap() };
            h[(j, k)] = C64::new(re, im);
            h[(k, j)] = C64::new(re, -im);
        }
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn integrator_matches_propagator_oracle(
        seed in prop::collection::vec(-2.0f64..2.0, 30),
        t in 0.05f64..1.0,
        start in 0usize..6,
    ) {
        let h = random_hermitian(6, &seed);
        let rho0 = DensityMatrix::pure(6, start).matrix;
        let deph = DephasingModel::none(6);
        // default tolerances leave ~1e-8 of global error; tighten for the oracle
        let cfg = IntegratorConfig { rtol: 1e-10, atol: 1e-12, ..IntegratorConfig::default() };
        let out = spinqudit::dynamics::evolve_static(&h, &rho0, &deph, t, &cfg).unwrap();
        let u = unitary_propagator(&h, t);
        let expect = &u * &rho0 * u.adjoint();
        let err = (out - expect).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err < 1e-8, "Frobenius error {err}");
    }

    #[test]
    fn rwa_sequence_equals_product_of_rotations(
        angles in prop::collection::vec((1usize..=3, 0.1f64..6.0, -3.0f64..3.0), 1..6),
    ) {
        let sys = system();
        let q = sys.levels.computational;
        let deph = DephasingModel::none(12);
        let rwa = RwaEvolver::new(&sys, &deph).unwrap();
        let hw = HardwareConfig::nominal(&sys, 5e-4).unwrap();
        let mut b = ScheduleBuilder::new(&hw);
        let mut u = CMatrix::identity(12, 12);
        for &(eta, theta, phi) in &angles {
            b.rotation(eta, theta, phi).unwrap();
            u = level_rotation(12, q[eta - 1], q[eta], theta, phi) * u;
        }
        let rho = sys.thermal_state().unwrap();
        let out = rwa.evolve(&rho, &b.build()).unwrap();
        let expect = &u * &rho.matrix * u.adjoint();
        let err = (&out.matrix - expect).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-8, "{err}");
        prop_assert!((out.trace() - c(1.0)).norm() < 1e-9);
        prop_assert!(out.hermiticity_error() < 1e-10);
    }

    #[test]
    fn rwa_with_dephasing_stays_physical(
        angles in prop::collection::vec((1usize..=3, 0.1f64..6.0, -3.0f64..3.0, 0.0f64..2.0), 1..6),
        t1 in prop::option::of(5.0f64..300.0),
    ) {
        let sys = system();
        let times = CoherenceTimes { t1_enabled: t1.is_some(), t1_us: t1.unwrap_or(200.0), ..CoherenceTimes::default() };
        let deph = DephasingModel::from_times(&sys, &times).unwrap();
        let rwa = RwaEvolver::new(&sys, &deph).unwrap();
        let hw = HardwareConfig::nominal(&sys, 2e-4).unwrap();
        let mut b = ScheduleBuilder::new(&hw);
        for &(eta, theta, phi, wait) in &angles {
            b.rotation(eta, theta, phi).unwrap();
            b.delay(wait).unwrap();
        }
        let q = sys.levels.computational;
        let mut rho = DensityMatrix::pure(12, q[0]);
        rho.time_us = 3.0;
        let out = rwa.evolve(&rho, &b.build()).unwrap();
        prop_assert!((out.trace() - c(1.0)).norm() < 1e-9);
        prop_assert!(out.hermiticity_error() < 1e-10);
        prop_assert!(out.min_eigenvalue() > -1e-6);
    }
}

#[test]
fn lab_trajectory_preserves_trace_and_positivity_with_default_rates() {
    let sys = system();
    let deph = DephasingModel::from_times(&sys, &CoherenceTimes::default()).unwrap();
    let hw = HardwareConfig::nominal(&sys, 5e-4).unwrap();
    let mut b = ScheduleBuilder::new(&hw);
    b.rotation(2, PI / 2.0, 0.3).unwrap();
    b.delay(0.2).unwrap();
    let sched = b.build();
    let samples: Vec<f64> = (0..10).map(|k| k as f64 * sched.end_us / 10.0).collect();
    let rho = sys.thermal_state().unwrap();
    let traj = evolve_lindblad(&sys, &rho, &sched, &deph, &samples, &IntegratorConfig::default()).unwrap();
    assert_eq!(traj.states.len(), 11);
    for s in &traj.states {
        assert!((s.trace() - c(1.0)).norm() < 1e-9);
        assert!(s.hermiticity_error() < 1e-10);
        assert!(s.min_eigenvalue() > -1e-6);
    }
}

#[test]
fn dephasing_only_leaves_populations_exactly() {
    let sys = system();
    let deph = DephasingModel::from_times(&sys, &CoherenceTimes::default()).unwrap();
    let rwa = RwaEvolver::new(&sys, &deph).unwrap();
    let hw = HardwareConfig::nominal(&sys, 5e-4).unwrap();
    let prepared = rwa
        .evolve(&sys.thermal_state().unwrap(), &single(&hw, 1, PI / 2.0))
        .unwrap();
    let waited = rwa.free_decay(&prepared, 3.0).unwrap();
    assert_eq!(waited.populations(), prepared.populations());
    let via_schedule = rwa
        .evolve(
            &prepared,
            &PulseSchedule {
                end_us: 3.0,
                ..Default::default()
            },
        )
        .unwrap();
    assert_eq!(via_schedule.populations(), prepared.populations());
}

#[test]
fn ensemble_nutation_follows_gaussian_envelope() {
    let sys = system();
    let q = sys.levels.computational;
    let deph = DephasingModel::none(12);
    let rwa = RwaEvolver::new(&sys, &deph).unwrap();
    let hw = HardwareConfig::nominal(&sys, 5e-4).unwrap();
    let sigma = 0.03;
    let cfg = EnsembleConfig {
        sigma_rel: sigma,
        samples: 4000,
        seed: 11,
    };
    let thetas: Vec<f64> = (1..=8).map(|k| k as f64 * 6.0 * PI).collect();
    let rho = DensityMatrix::pure(12, q[0]);
    let curve: Vec<f64> = ensemble_average(&cfg, |scale| {
        thetas
            .iter()
            .map(|&th| {
                let s = single(&hw, 1, th).scaled_amplitudes(scale);
                rwa.evolve(&rho, &s).map(|r| r.population(q[0]) - r.population(q[1]))
            })
            .collect()
    })
    .unwrap();
    for (th, v) in thetas.iter().zip(&curve) {
        let envelope = (-(th * sigma).powi(2) / 2.0).exp();
        assert!(
            (v - envelope).abs() < 0.1 * envelope + 0.02,
            "θ={th}: {v} vs {envelope}"
        );
    }
    assert!(curve.last().unwrap() < &0.3);

    let states = ensemble_average(&cfg, |scale| {
        rwa.evolve(&rho, &single(&hw, 1, PI).scaled_amplitudes(scale))
    })
    .unwrap();
    assert!((states.trace() - c(1.0)).norm() < 1e-9);
}
