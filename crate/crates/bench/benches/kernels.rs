use criterion::{criterion_group, criterion_main, Criterion};
use paraxial_bench::{hydro_state, kzk_beam};
use paraxial_core::hydro::{hydro_dt_limit, step_hydro_with, HydroOptions, HydroScheme};
use paraxial_core::kzk::{kzk_rhs, KzkProfile};
use paraxial_core::spectral::{d_dx, PeriodicAxisHandle};
use paraxial_core::ModelParams;
use std::hint::black_box;

fn spectral(c: &mut Criterion) {
    let beam = kzk_beam();
    let tau = PeriodicAxisHandle::by_name(beam.grid(), "tau").unwrap();
    c.bench_function("d_dx tau 64x128", |b| b.iter(|| d_dx(black_box(&beam), &tau, 1).unwrap()));
}

fn kzk(c: &mut Criterion) {
    let p = ModelParams::nondim(0.1).with_nu(0.01);
    let prof = KzkProfile::new(kzk_beam(), 0.0).unwrap();
    c.bench_function("kzk rhs 64x128", |b| b.iter(|| kzk_rhs(black_box(&prof), &p).unwrap()));
}

fn hydro(c: &mut Criterion) {
    let p = ModelParams::nondim(0.1).with_nu(0.05);
    let u = hydro_state(&p);
    for scheme in [HydroScheme::Muscl, HydroScheme::Pseudospectral] {
        let opts = HydroOptions { scheme, ..Default::default() };
        let dt = hydro_dt_limit(&u, &p, &opts).unwrap();
        c.bench_function(&format!("hydro step {scheme:?} 64x256"), |b| b.iter(|| step_hydro_with(black_box(&u), &p, dt, &opts).unwrap()));
    }
}

criterion_group!(benches, spectral, kzk, hydro);
criterion_main!(benches);
