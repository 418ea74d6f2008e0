use std::f64::consts::{PI, TAU};
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nvberry::*;

fn propagation(c: &mut Criterion) {
    let constants = PhysicalConstants::default().with_zero_field(1000.0).unwrap();
    let cfg = SpindleConfig::ramsey(1.0, PI / 3.0).unwrap();
    let traj = ramsey_trajectory(&cfg, TAU).unwrap();
    let opts = OracleOptions::for_constants(&constants, Gauge::MicrowaveFixed);
    c.bench_function("oracle loop D/omega=1000", |b| {
        b.iter(|| extract_geometric_phase(black_box(&traj), MagneticNumber::PLUS, &opts, &constants).unwrap())
    });
}

fn quadrature(c: &mut Criterion) {
    let cfg = SpindleConfig::echo(4000.0 * PI, 0.25).unwrap();
    let traj = echo_trajectory(&cfg, 4).unwrap();
    let pulses = pi_pulse_times(&cfg, 4).unwrap();
    c.bench_function("rectified line integral n=4", |b| {
        b.iter(|| {
            geometric_phase(
                black_box(&traj),
                MagneticNumber::PLUS,
                Gauge::MicrowaveFixed,
                Some(&pulses),
            )
            .unwrap()
        })
    });
}

fn sampling(c: &mut Criterion) {
    let gaussian = ReadoutParams::new(100_000, 0.15).unwrap();
    let poisson = gaussian.with_model(SignalModel::Poisson { contrast: 0.3 }).unwrap();
    let mut seed = 0u64;
    c.bench_function("gaussian signal", |b| {
        b.iter(|| {
            seed += 1;
            sample_signal(black_box(0.4), &gaussian, seed).unwrap()
        })
    });
    c.bench_function("poisson signal", |b| {
        b.iter(|| {
            seed += 1;
            sample_signal(black_box(0.4), &poisson, seed).unwrap()
        })
    });
}

criterion_group!(benches, propagation, quadrature, sampling);
criterion_main!(benches);
