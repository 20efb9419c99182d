use brse_core::sim::{generate, kl_point, run_replicate, DgpSpec, SimConfig};
use brse_core::{estimate, sample_posterior, McmcConfig, PriorSpec};
use criterion::{criterion_group, criterion_main, Criterion};

fn samplers(c: &mut Criterion) {
    let cfg = McmcConfig::simulation();
    let linear = DgpSpec::linear_quadratic(2.0, 100);
    let data = generate(&linear, 3).unwrap();
    let model = linear.kind.working_model();
    let prior = PriorSpec::simulation_default(2);
    c.bench_function("gibbs linear n=100", |b| {
        b.iter(|| sample_posterior(&model, &prior, &data, &cfg).unwrap())
    });

    let poisson = DgpSpec::poisson_quadratic(0.5, 100);
    let data = generate(&poisson, 3).unwrap();
    let model = poisson.kind.working_model();
    let prior = PriorSpec::normal(2, 0.0, 1e3);
    c.bench_function("metropolis poisson n=100", |b| {
        b.iter(|| sample_posterior(&model, &prior, &data, &cfg).unwrap())
    });

    let sample = sample_posterior(&model, &prior, &data, &cfg).unwrap();
    c.bench_function("estimate poisson n=100", |b| {
        b.iter(|| estimate(&model, &sample, &data, 0.95).unwrap())
    });
}

fn replicate(c: &mut Criterion) {
    let dgp = DgpSpec::weibull_ph(1.5, -0.5, 100);
    let kl = kl_point(&dgp, &dgp.kind.working_model()).unwrap();
    let cfg = SimConfig::new("bench/exp-ph", dgp);
    let mut rep = 0;
    c.bench_function("replicate exp-ph n=100", |b| {
        b.iter(|| {
            rep += 1;
            run_replicate(&cfg, &kl, rep).unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = samplers, replicate
}
criterion_main!(benches);
