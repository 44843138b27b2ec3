use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rehab_core::control::*;
use rehab_core::posturography::*;

fn control(c: &mut Criterion) {
    let plant = MotorPlant::default();
    let cfg = TrackingConfig::default();
    let mut group = c.benchmark_group("control");
    group.sample_size(20);
    group.bench_function("simulate_motor_step_10s", |b| {
        b.iter(|| simulate_motor(&PidGains::default(), &plant, black_box(&TrackingReference::step()), &cfg, 0, 1))
    });
    group.sample_size(10);
    group.bench_function("tune_gains_step", |b| {
        b.iter(|| tune_gains(&plant, black_box(&TrackingReference::step()), &GainSearch::default(), &cfg))
    });
    group.finish();
}

fn posture(c: &mut Criterion) {
    let layout = FootLayout::default();
    let params = SynthesisParams::default();
    let frames = synthesize_loads(PostureCase::DynamicPlantar, &params, &layout).unwrap();
    let stimuli: Vec<f64> = (1..60).map(|k| k as f64).collect();

    c.bench_function("center_of_mass", |b| b.iter(|| center_of_mass(black_box([120.0, 80.0, 95.0]), 0.25, 1.0)));
    c.bench_function("lower_loads", |b| b.iter(|| lower_loads(black_box(&frames[100].upper), &layout, 0.25)));
    c.bench_function("synthesize_dynamic_70s", |b| {
        b.iter(|| synthesize_loads(black_box(PostureCase::DynamicPlantar), &params, &layout))
    });
    c.bench_function("detect_reaction_59_stimuli", |b| {
        b.iter(|| detect_reaction(black_box(&stimuli), &frames, &ThresholdPolicy::default()))
    });
}

criterion_group!(benches, control, posture);
criterion_main!(benches);
