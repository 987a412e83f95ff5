//! Parallel versus sequential execution of the two batch loops: seeds in a
//! harness comparison and coordinates in the finite-difference oracle.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use influence_game::game::simplex_references;
use influence_game::harness::{opponent_allocations, run_compare, OpponentPolicy, ScenarioConfig};
use influence_game::netgen::gen_erdos_renyi;
use influence_game::solvers::{pg_oracle, OracleParams};
use influence_game::Execution;

const POLICIES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn compare_batch(c: &mut Criterion) {
    let mut cfg: ScenarioConfig = serde_json::from_str(
        r#"{"experiment":"compare","generator":{"model":"er","p":0.6},"nodes":30,
            "players":3,"budget":0.5,"ego_solver":"il","solvers":["il","random"],
            "opponent_policy":"random","seeds":[0,1,2,3,4,5,6,7]}"#,
    )
    .unwrap();
    let mut group = c.benchmark_group("compare_batch");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        cfg.execution = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| run_compare(cfg).unwrap())
        });
    }
    group.finish();
}

fn oracle_gradient(c: &mut Criterion) {
    let net = gen_erdos_renyi(40, 0.6, 1).unwrap();
    let refs = simplex_references(3).unwrap();
    let opp = opponent_allocations(OpponentPolicy::Random, 40, 3, 0.5, 1).unwrap();
    let params = OracleParams {
        iters: 5,
        ..OracleParams::default()
    };
    let mut group = c.benchmark_group("pg_oracle");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pg_oracle(&net, &refs, 2, &opp, 0.5, &params, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, compare_batch, oracle_gradient);
criterion_main!(benches);
