use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use stormlet::engines::{check_reachability, check_total_reward};
use stormlet::explore::{orchard_model, OrchardConfig, OrchardVariant};
use stormlet::lp::{encode_reachability_lp, solve_lp};
use stormlet::reduce::{bisimulation_quotient, BisimulationOptions};
use stormlet::uncertain::{check_interval_reachability, UncertaintyMode};
use stormlet::{Direction, Environment, Method};

fn build(c: &mut Criterion) {
    c.bench_function("explore/orchard-full", |b| {
        b.iter(|| orchard_model(black_box(&OrchardConfig::full())).unwrap())
    });
}

fn reachability(c: &mut Criterion) {
    let m = orchard_model(&OrchardConfig::full()).unwrap();
    let goal = m.label("PlayersWon").unwrap().clone();
    let mut g = c.benchmark_group("pmax/orchard-full");
    g.sample_size(20);
    for method in [
        Method::ValueIteration,
        Method::GaussSeidel,
        Method::PolicyIteration,
        Method::OptimisticValueIteration,
    ] {
        let env = Environment::with_method(method);
        g.bench_with_input(BenchmarkId::from_parameter(method), &env, |b, env| {
            b.iter(|| check_reachability(&m, &goal, Direction::Max, env, false).unwrap())
        });
    }
    g.finish();

    let done = m.label("PlayersWon").unwrap().or(m.label("RavenWon").unwrap());
    c.bench_function("rmin/orchard-full", |b| {
        b.iter(|| check_total_reward(&m, "rounds", &done, Direction::Min, &Environment::default(), false).unwrap())
    });
}

fn interval(c: &mut Criterion) {
    let m = orchard_model(&OrchardConfig::full().with_variant(OrchardVariant::Interval(1.0 / 36.0))).unwrap();
    let goal = m.label("PlayersWon").unwrap().clone();
    let mut g = c.benchmark_group("imdp/orchard-full");
    g.sample_size(10);
    g.bench_function("robust", |b| {
        b.iter(|| check_interval_reachability(&m, &goal, Direction::Max, UncertaintyMode::Robust, &Environment::default()).unwrap())
    });
    g.finish();
}

fn reduce_and_lp(c: &mut Criterion) {
    let m = orchard_model(&OrchardConfig::full()).unwrap();
    let options = BisimulationOptions {
        labels: vec!["PlayersWon".into(), "RavenWon".into()],
        rewards: true,
        action_labels: false,
    };
    let mut g = c.benchmark_group("misc");
    g.sample_size(10);
    g.bench_function("bisim/orchard-full", |b| b.iter(|| bisimulation_quotient(&m, &options).unwrap()));
    let simple = orchard_model(&OrchardConfig::simplified()).unwrap();
    let lp = encode_reachability_lp(&simple, simple.label("PlayersWon").unwrap()).unwrap();
    g.bench_function("lp/orchard-simple", |b| b.iter(|| solve_lp(black_box(&lp)).unwrap()));
    g.finish();
}

criterion_group!(benches, build, reachability, interval, reduce_and_lp);
criterion_main!(benches);
