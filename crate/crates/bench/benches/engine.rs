use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kickback::{backprop_deltas, global_error, kickback_feedback, train_batch, Algorithm, TrainConfig};
use kickback_bench::Workload;

const SHAPES: [(&str, &[usize]); 2] = [("small", &[10, 10, 10]), ("wide", &[10, 100, 200])];

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward");
    for (name, hidden) in SHAPES {
        let w = Workload::new(10, hidden, 1, 3);
        group.bench_function(name, |b| b.iter(|| w.net.forward(black_box(&w.inputs[0])).unwrap()));
    }
    group.finish();
}

fn feedback(c: &mut Criterion) {
    let mut group = c.benchmark_group("feedback");
    for (name, hidden) in SHAPES {
        let w = Workload::new(10, hidden, 1, 3);
        let trace = w.net.forward(&w.inputs[0]).unwrap();
        let err = global_error(&w.net, &trace, w.targets[0]).unwrap();
        let ones = vec![1.0; w.net.num_hidden()];
        group.bench_function(BenchmarkId::new("backprop", name), |b| {
            b.iter(|| backprop_deltas(&w.net, black_box(&trace), err).unwrap())
        });
        group.bench_function(BenchmarkId::new("kickback", name), |b| {
            b.iter(|| kickback_feedback(&w.net, black_box(&trace), err, &ones).unwrap())
        });
    }
    group.finish();
}

fn batch_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_batch");
    group.sample_size(30);
    let w = Workload::new(10, &[10, 100, 200], 20, 3);
    let batch = w.batch();
    for algorithm in [Algorithm::Backprop, Algorithm::Kickback] {
        for parallel in [false, true] {
            let config = TrainConfig {
                algorithm,
                parallel,
                ..TrainConfig::default()
            };
            let id = BenchmarkId::new(algorithm.to_string(), if parallel { "parallel" } else { "sequential" });
            group.bench_function(id, |b| {
                let mut net = w.net.clone();
                b.iter(|| train_batch(&mut net, black_box(&batch), &config).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, forward, feedback, batch_step);
criterion_main!(benches);
