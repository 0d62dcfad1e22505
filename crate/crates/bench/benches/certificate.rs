use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use mpcert::analysis::{horizon_row, linspace};
use mpcert::{
    alpha_closed_form, alpha_lp, gamma_from_exponential, stability_region, CertificateQuery,
    ExpBound,
};

fn closed_form_vs_lp(c: &mut Criterion) {
    let g = gamma_from_exponential(ExpBound::new(3.0, 2.0 / 3.0).unwrap(), 25).unwrap();
    let q = CertificateQuery::new(&g, 25, 5).unwrap();
    c.bench_function("alpha_closed_form N=25", |b| {
        b.iter(|| alpha_closed_form(black_box(&q)).unwrap())
    });
    c.bench_function("alpha_lp N=25", |b| {
        b.iter(|| alpha_lp(black_box(&q)).unwrap())
    });
}

fn sweeps(c: &mut Criterion) {
    let cs = linspace(1.0, 6.0, 50).unwrap();
    let ss = linspace(0.01, 0.99, 50).unwrap();
    c.bench_function("region 50x50 N=8", |b| {
        b.iter(|| stability_region(8, &cs, &ss, 1).unwrap())
    });
    c.bench_function("horizon row M=40", |b| {
        b.iter(|| horizon_row(black_box(40.0), 1000).unwrap())
    });
}

criterion_group!(benches, closed_form_vs_lp, sweeps);
criterion_main!(benches);
