//! Sequential versus data-parallel execution of the two embarrassingly
//! parallel hot paths: dataset synthesis and test-set evaluation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use earlypred::data::{synthesize_modality, Modality, SynthSpec};
use earlypred::eval::evaluate;
use earlypred::model::{ModelBundle, ModelDims, Variant};
use earlypred::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn synthesis(c: &mut Criterion) {
    let spec = SynthSpec {
        n_train: 2000,
        n_test: 500,
        ..SynthSpec::default()
    };
    let mut group = c.benchmark_group("synthesize");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| synthesize_modality(&spec, Modality::A, exec).unwrap())
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let (_, test) = synthesize_modality(&SynthSpec::default(), Modality::A, Exec::default()).unwrap();
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    for variant in [Variant::Scp, Variant::Full] {
        let bundle = ModelBundle::new(ModelDims::default(), variant, 0).unwrap();
        for (name, exec) in MODES {
            group.bench_function(BenchmarkId::new(variant.tag(), name), |b| {
                b.iter(|| evaluate(&bundle, &test, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, synthesis, evaluation);
criterion_main!(benches);
