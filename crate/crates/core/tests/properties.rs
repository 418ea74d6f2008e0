use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use nvberry::*;
use proptest::prelude::*;

const OMEGA: f64 = 4000.0 * PI;

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigenstates_solve_the_zero_field_problem(theta in 0.0..=PI, phi in -10.0..10.0f64) {
        let c = PhysicalConstants::default();
        let o = Orientation::new(theta, phi).unwrap();
        let h = zero_field_hamiltonian(o, &c);
        for m in MagneticNumber::ALL {
            let psi = analytic_eigenstate(m, o, Gauge::MicrowaveFixed);
            let hpsi = psi.apply(&h).unwrap();
            let expected = psi.vector() * num_complex::Complex64::from(c.zero_field * m.as_f64().powi(2));
            prop_assert!((hpsi.vector() - expected).norm() < 1e-10 * c.zero_field);
        }
    }

    #[test]
    fn gauges_agree_on_closed_loops(theta in 0.01..1.56f64, m in -1i8..=1) {
        let cfg = SpindleConfig::ramsey(OMEGA, theta).unwrap();
        let traj = ramsey_trajectory(&cfg, TAU).unwrap();
        let m = MagneticNumber::new(m).unwrap();
        let raw = geometric_phase(&traj, m, Gauge::Raw, None).unwrap().geometric;
        let mw = geometric_phase(&traj, m, Gauge::MicrowaveFixed, None).unwrap().geometric;
        prop_assert!(wrap(raw - mw).abs() < 1e-8);
    }

    #[test]
    fn ramsey_fringe_is_sinusoidal(theta in 0.05..1.5f64, phi0 in 0.0..0.6f64, retard in -PI..PI) {
        let cfg = SpindleConfig::ramsey(OMEGA, theta).unwrap();
        let deco = DecoherenceModel::gaussian(10e-6).unwrap();
        let r = run_ramsey(&cfg, phi0, &deco, retard, &ProtocolOptions::default()).unwrap();
        let expected = 0.5 * (1.0 + r.coherence_factor * (phi0 * theta.cos() + retard).cos());
        prop_assert!((r.population_m0 - expected).abs() < 1e-13);
        prop_assert!(r.coherence_factor > 0.0 && r.coherence_factor <= 1.0);
    }

    #[test]
    fn echo_phase_doubles_with_rotations(theta0 in 0.0..1.5f64, n in 1u32..6) {
        let cfg = SpindleConfig::echo(OMEGA, theta0).unwrap();
        let none = DecoherenceModel::none();
        let opts = ProtocolOptions::default();
        let one = run_echo(&cfg, n, &none, 0.0, &opts).unwrap();
        let two = run_echo(&cfg, 2 * n, &none, 0.0, &opts).unwrap();
        prop_assert_eq!(two.phase_estimate, 2.0 * one.phase_estimate);
    }

    #[test]
    fn echo_population_follows_the_phase(theta0 in 0.0..1.5f64, retard in -PI..PI, start in -PI..PI) {
        let cfg = SpindleConfig::echo(OMEGA, theta0).unwrap().with_start_angle(start).unwrap();
        let deco = DecoherenceModel::exponential(2e-3).unwrap();
        let r = run_echo(&cfg, 1, &deco, retard, &ProtocolOptions::default()).unwrap();
        let expected = 0.5 * (1.0 + r.coherence_factor * (r.phase_estimate + retard).cos());
        prop_assert!((r.population_m0 - expected).abs() < 1e-12);
    }

    #[test]
    fn sensitivity_is_monotone(
        a in 1.0..10.0f64,
        c in 0.01..0.9f64,
        t2 in 1e-6..1e-2f64,
        factor in 1.01..3.0f64,
    ) {
        let base = SensitivityParams::new(a, OMEGA, t2, c, 3600.0).unwrap();
        let s = relative_sensitivity(&base).unwrap();
        let more_c = SensitivityParams::new(a, OMEGA, t2, (c * factor).min(1.0), 3600.0).unwrap();
        let more_omega = SensitivityParams::new(a, OMEGA * factor, t2, c, 3600.0).unwrap();
        let more_t2 = SensitivityParams::new(a, OMEGA, t2 * factor, c, 3600.0).unwrap();
        let more_a = SensitivityParams::new(a * factor, OMEGA, t2, c, 3600.0).unwrap();
        prop_assert!(relative_sensitivity(&more_c).unwrap() < s);
        prop_assert!(relative_sensitivity(&more_omega).unwrap() < s);
        prop_assert!(relative_sensitivity(&more_t2).unwrap() < s);
        prop_assert!(relative_sensitivity(&more_a).unwrap() > s);
        let total = relative_uncertainty(&base).unwrap();
        prop_assert!((s / 3600f64.sqrt() - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn sampling_is_bit_reproducible(seed in any::<u64>(), pop in 0.0..=1.0f64, n in 1u64..1_000_000) {
        let rp = ReadoutParams::new(n, 0.15).unwrap();
        let a = sample_signal(pop, &rp, seed).unwrap();
        let b = sample_signal(pop, &rp, seed).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        let poisson = rp.with_model(SignalModel::Poisson { contrast: 0.3 }).unwrap();
        let p = sample_signal(pop, &poisson, seed).unwrap();
        prop_assert_eq!(p.to_bits(), sample_signal(pop, &poisson, seed).unwrap().to_bits());
    }

    #[test]
    fn pulses_preserve_the_norm(theta in 0.01..3.13f64, phi in -PI..PI, axis in -PI..PI) {
        let o = Orientation::new(theta, phi).unwrap();
        for gauge in [Gauge::Raw, Gauge::MicrowaveFixed] {
            let basis = Basis::NvPrime { orientation: o, gauge };
            let psi = SpinState::new(
                [
                    num_complex::Complex64::new(0.3, -0.2),
                    num_complex::Complex64::new(0.1, 0.7),
                    num_complex::Complex64::new(-0.4, 0.2),
                ],
                basis,
            )
            .unwrap();
            for kind in [PulseKind::HalfPi, PulseKind::Pi, PulseKind::Readout] {
                let out = apply_pulse(&psi, kind, axis, o).unwrap();
                prop_assert!((out.norm() - 1.0).abs() < 1e-14);
                prop_assert!((out.amplitudes()[2] - psi.amplitudes()[2]).norm() < 1e-15);
            }
        }
    }
}

#[test]
fn ramsey_phase_matches_quadrature_on_a_grid() {
    for k in 1..=15 {
        let theta = 0.1 * k as f64;
        let cfg = SpindleConfig::ramsey(OMEGA, theta).unwrap();
        for phi0 in [0.01, 0.5, 2.0, TAU] {
            let r = run_ramsey(&cfg, phi0, &DecoherenceModel::none(), 0.0, &ProtocolOptions::default()).unwrap();
            let traj = ramsey_trajectory(&cfg, phi0).unwrap();
            let q = geometric_phase(&traj, MagneticNumber::PLUS, Gauge::MicrowaveFixed, None).unwrap();
            assert_relative_eq!(r.phase_estimate, q.geometric, epsilon = 1e-10);
        }
    }
}

#[test]
fn end_to_end_recovers_the_phase() {
    let cfg = SpindleConfig::ramsey(OMEGA, PI / 3.0).unwrap();
    let opts = ProtocolOptions::default();
    for phi0 in [0.0, 2.0] {
        let predicted = phi0 * 0.5;
        let r = run_ramsey(&cfg, phi0, &DecoherenceModel::none(), steepest_retard(predicted), &opts).unwrap();
        let rp = ReadoutParams::new(1_000_000, 1.0).unwrap();
        let est = end_to_end_estimate(&vec![r; 500], &rp, 11).unwrap();
        assert!((est.mean - predicted).abs() < 3.0 * est.std / (est.trials as f64).sqrt());
    }
    let r = run_ramsey(&cfg, 1.0, &DecoherenceModel::none(), 0.0, &opts).unwrap();
    let rp = ReadoutParams::new(100, 0.15).unwrap();
    assert!(end_to_end_estimate(&vec![r; 99], &rp, 1).is_err());
}
