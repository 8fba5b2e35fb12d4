use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ulab::attacks::fit_logit_classifier;
use ulab::data::{gen_gaussian_mixture, toy3_spec};
use ulab::nn::{init_model, loss_and_grad, train_epochs, TrainConfig};
use ulab::trw::{reweight, solve_beta, tilt_scores, MomentConstraint};
use ulab::ProbVector;

fn tilt(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = ProbVector::from_weights((0..10).map(|_| rng.random::<f64>() + 0.01).collect()).unwrap();
    let scores: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
    let ptilde = reweight(&p, 3).unwrap();
    c.bench_function("tilt_k10", |b| b.iter(|| tilt_scores(black_box(&ptilde), &scores, 10.0).unwrap()));
    let target = MomentConstraint { c: 0.6 };
    c.bench_function("solve_beta_k10", |b| {
        b.iter(|| solve_beta(black_box(&ptilde), &scores, target, 1e-12).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let data = gen_gaussian_mixture(&toy3_spec(64, 2)).unwrap();
    let targets: Vec<ProbVector> = data.labels.iter().map(|&l| ProbVector::one_hot(l, 3)).collect();
    let model = init_model(&[2, 32, 32, 3], 3).unwrap();
    let inputs: Vec<&[f64]> = data.features.iter_rows().take(32).collect();
    let batch: Vec<&ProbVector> = targets.iter().take(32).collect();
    c.bench_function("loss_and_grad_batch32", |b| {
        b.iter(|| loss_and_grad(black_box(&model), &inputs, &batch).unwrap())
    });
    let cfg = TrainConfig {
        learning_rate: 0.1,
        epochs: 1,
        batch_size: 32,
        ..TrainConfig::default()
    };
    c.bench_function("train_epoch_192", |b| {
        b.iter(|| train_epochs(black_box(&model), &data.features, &targets, &cfg).unwrap())
    });
}

fn threshold(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pos: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() + 0.3).collect();
    let neg: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
    c.bench_function("threshold_fit_2000", |b| {
        b.iter(|| fit_logit_classifier(black_box(&pos), &neg).unwrap())
    });
}

criterion_group!(benches, tilt, network, threshold);
criterion_main!(benches);
