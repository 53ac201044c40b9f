use criterion::{black_box, criterion_group, criterion_main, Criterion};
use headscope_bench::{medium_model, prompt, samples};
use headscope_core::analytics::{ks_two_sample, skewness};
use headscope_core::head_attribution::attribute_heads;
use headscope_core::neuron_scout::{scout_neurons, CandidateTokens, ScoutOptions};
use headscope_core::transformer::{forward, ForwardOptions, LogitCapture};
use headscope_core::{NeuronHandle, Tokenizer, TokenizerTables};

fn forward_pass(c: &mut Criterion) {
    let model = medium_model();
    let ids = prompt(64, model.config.vocab_size);
    let mut group = c.benchmark_group("forward");
    group.sample_size(20);
    group.bench_function("logits_64", |b| {
        b.iter(|| forward(&model, black_box(&ids), &ForwardOptions::logits_only()).unwrap())
    });
    let capture = ForwardOptions { capture_heads: true, capture_logits: LogitCapture::None, ..ForwardOptions::default() };
    group.bench_function("heads_64", |b| b.iter(|| forward(&model, black_box(&ids), &capture).unwrap()));
    group.finish();
}

fn attribution(c: &mut Criterion) {
    let model = medium_model();
    let ids = prompt(64, model.config.vocab_size);
    let opts = ForwardOptions { capture_heads: true, capture_logits: LogitCapture::None, ..ForwardOptions::default() };
    let trace = forward(&model, &ids, &opts).unwrap();
    let neuron = NeuronHandle::new(3, 17);
    c.bench_function("attribute_heads", |b| {
        b.iter(|| attribute_heads(&trace, neuron, black_box(40), &model, "p", 2.0).unwrap())
    });
}

fn congruence(c: &mut Criterion) {
    let model = medium_model();
    let tok = Tokenizer::new(TokenizerTables::byte_level());
    let cands = CandidateTokens::all(model.config.vocab_size);
    let mut group = c.benchmark_group("scout");
    group.sample_size(10);
    group.bench_function("one_layer_all_tokens", |b| {
        b.iter(|| scout_neurons(&model, &tok, &[3], 40, &cands, ScoutOptions::default()).unwrap())
    });
    group.finish();
}

fn statistics(c: &mut Criterion) {
    let (a, b) = (samples(2000, 1), samples(1500, 2));
    c.bench_function("ks_2000x1500", |bch| bch.iter(|| ks_two_sample(black_box(&a), black_box(&b)).unwrap()));
    c.bench_function("skewness_2000", |bch| bch.iter(|| skewness(black_box(&a)).unwrap()));
}

criterion_group!(benches, forward_pass, attribution, congruence, statistics);
criterion_main!(benches);
