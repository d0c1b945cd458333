use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use topolstm::datagen::{generate_dataset, SynthConfig};
use topolstm::par::Parallelism;
use topolstm::trainer::{batch_gradient, prepare_cascades};
use topolstm::{Model, ModelConfig};

fn batch_gradients(c: &mut Criterion) {
    let mut config = SynthConfig::preset("desk-default").unwrap();
    config.cascade_count = 128;
    let data = generate_dataset(&config).unwrap();
    let (items, _) =
        prepare_cascades(&data.graph, &data.cascades, Parallelism::Sequential).unwrap();
    let model = Model::new(
        ModelConfig::new(32, data.graph.node_count()),
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();

    let mut group = c.benchmark_group("batch_gradient");
    group.sample_size(10);
    for size in [32usize, 128] {
        let batch = &items[..size];
        for (name, mode) in [
            ("sequential", Parallelism::Sequential),
            ("parallel", Parallelism::Parallel),
        ] {
            group.bench_with_input(BenchmarkId::new(name, size), &batch, |b, batch| {
                b.iter(|| batch_gradient(&model, batch, 1e-6, mode, true).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, batch_gradients);
criterion_main!(benches);
