use criterion::{criterion_group, criterion_main, Criterion};
use pokimd::simnet::{run_once, Scenario, ScenarioConfig, World, WorldConfig};
use std::hint::black_box;

fn enrollment(c: &mut Criterion) {
    c.bench_function("world/enrolled", |b| {
        b.iter(|| World::enrolled(WorldConfig::default(), black_box(1)).unwrap())
    });
}

fn scenarios(c: &mut Criterion) {
    let mut g = c.benchmark_group("scenario");
    for sc in Scenario::ALL {
        let cfg = ScenarioConfig {
            scenario: sc,
            ..ScenarioConfig::default()
        };
        g.bench_function(sc.name(), |b| {
            b.iter(|| run_once(&cfg, black_box(1)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, enrollment, scenarios);
criterion_main!(benches);
