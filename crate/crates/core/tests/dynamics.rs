use piston_core::analysis::ensemble_stats;
use piston_core::sim::{run_ensemble, step_full, step_reduced_monitored, InitialCondition, ReducedState, SimConfig, State};
use piston_core::{EngineParams, ModelKind, RandomStream};
use proptest::prelude::*;

fn engine(g_frac: f64, n_h: f64, e_c: f64) -> EngineParams {
    let mut p = EngineParams::fig3();
    p.g = g_frac * p.kappa_h;
    p.hbar_g = p.g;
    p.n_h = n_h;
    p.e_c = e_c;
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reduced_steps_stay_physical(
        g_frac in 0.0f64..0.5,
        n_h in 0.0f64..200.0,
        e_c in 0.0f64..1e-3,
        phi in -3.1f64..3.1,
        seed in any::<u64>(),
    ) {
        let p = engine(g_frac, n_h, e_c);
        let mut rng = RandomStream::new(seed, 0);
        let mut s = ReducedState { n_a: 1.0, phi, l: 0.0 };
        for k in 0..2000 {
            let (next, _) = step_reduced_monitored(&s, &p, 0.01, &mut rng, k).unwrap();
            prop_assert!(next.n_a >= 0.0);
            prop_assert!((next.phi - s.phi).abs() < std::f64::consts::PI);
            s = next;
        }
    }

    #[test]
    fn full_steps_keep_angle_increments_small(
        g_frac in 0.0f64..0.5,
        e_c in 0.0f64..1e-3,
        seed in any::<u64>(),
    ) {
        let p = engine(g_frac, 100.0, e_c);
        let mut rng = RandomStream::new(seed, 1);
        let State::Full(mut s) = InitialCondition::fig3().to_state(ModelKind::Full, &p) else {
            unreachable!()
        };
        for k in 0..2000 {
            let next = step_full(&s, &p, 1e-3, &mut rng, k).unwrap();
            prop_assert!((next.phi - s.phi).abs() < std::f64::consts::PI);
            s = next;
        }
    }
}

#[test]
fn engine_run_rarely_clamps() {
    // full truncation clamps at a rate proportional to dt
    let cfg = SimConfig {
        params: EngineParams::fig3(),
        dt: 1e-3,
        t_end: 300.0,
        sample_stride: 1000,
    };
    let init = InitialCondition::fig3().to_state(ModelKind::Reduced, &cfg.params);
    let e = run_ensemble(&cfg, &init, 3, 16, None).unwrap();
    assert!(e.failures.is_empty());
    let clamped: u64 = e.trajectories.iter().map(|t| t.meta.clamped_steps).sum();
    let steps = cfg.n_steps() * e.trajectories.len() as u64;
    assert!((clamped as f64) < 1e-3 * steps as f64, "{clamped} of {steps}");
}

#[test]
fn statistics_of_a_short_ensemble_are_finite() {
    let cfg = SimConfig {
        params: EngineParams::fig3(),
        dt: 0.01,
        t_end: 400.0,
        sample_stride: 50,
    };
    let init = InitialCondition::fig3().to_state(ModelKind::Reduced, &cfg.params);
    let e = run_ensemble(&cfg, &init, 5, 12, Some(2)).unwrap();
    let s = ensemble_stats(&e, 200.0).unwrap();
    assert_eq!(s.len(), 801);
    for i in 0..s.len() {
        assert!(s.mean_l[i].is_finite() && s.var_l[i] >= 0.0 && s.mean_l2[i] >= 0.0);
        assert!((0.0..=1.0).contains(&s.free_fraction[i]));
        if let Some(snr) = s.snr[i] {
            assert!(snr.is_finite());
        }
    }
    // the rotor starts at rest, so the first sample carries no spread
    assert_eq!(s.var_l[0], 0.0);
    assert!(s.snr[0].is_none());
}
