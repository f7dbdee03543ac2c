use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use invex_bench::{image, mlp};
use invex_core::data::Shape;
use invex_core::model::OutputLayer;

fn bench_gradient(c: &mut Criterion) {
    let shape = Shape::new(16, 16, 3).unwrap();
    let model = mlp(shape.len(), &[64, 64], 10, 3);
    let x = image(shape, 4);
    c.bench_function("gradient_one_class_768d", |b| {
        b.iter(|| model.gradient(black_box(&x), 0).unwrap())
    });
    c.bench_function("outputs_and_all_gradients_768d", |b| {
        b.iter(|| model.outputs_and_gradients(black_box(&x), OutputLayer::Logits).unwrap())
    });
}

criterion_group!(benches, bench_gradient);
criterion_main!(benches);
