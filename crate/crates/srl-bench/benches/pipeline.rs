use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srl_core::data::{LabelSpaces, Vocabulary};
use srl_core::decode::{viterbi_decode, TransitionModel};
use srl_core::model::{DecodeStrategy, OracleSource, SrlModel};
use srl_core::synthetic::{generate_corpora, SyntheticGrammarSpec};
use srl_core::tensor::{Array, Tape};
use srl_core::train::batch_loss;
use srl_core::ModelConfig;

fn desk_model() -> (SrlModel, Vec<srl_core::Sentence>) {
    let spec = SyntheticGrammarSpec {
        train_sentences: 16,
        dev_sentences: 1,
        test_sentences: 1,
        len_min: 10,
        len_max: 12,
        seed: 7,
        ..Default::default()
    };
    let (corpus, _, _) = generate_corpora(&spec).expect("valid spec");
    let labels = LabelSpaces::build(&corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let vocab = Vocabulary::init_random(&corpus, 32, &mut rng);
    let mut cfg = ModelConfig::desk();
    cfg.dropout = 0.0;
    let mut model = SrlModel::init(cfg, labels, vocab, 7).expect("init");
    model.transitions = Some(TransitionModel::from_corpus(
        &corpus,
        &model.labels.role_bio_labels,
    ));
    (model, corpus)
}

fn bench_forward(c: &mut Criterion) {
    let (model, corpus) = desk_model();
    c.bench_function("encoder_forward_12_tokens", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            model
                .forward(&mut tape, &corpus[0], &OracleSource::gold(), None)
                .expect("forward");
            tape.len()
        })
    });
}

fn bench_predict(c: &mut Criterion) {
    let (model, corpus) = desk_model();
    c.bench_function("predict_viterbi_12_tokens", |b| {
        b.iter(|| {
            model
                .predict(&corpus[0], &OracleSource::model(), DecodeStrategy::Viterbi)
                .expect("predict")
        })
    });
}

fn bench_train_step(c: &mut Criterion) {
    let (model, corpus) = desk_model();
    let batch: Vec<&srl_core::Sentence> = corpus.iter().take(8).collect();
    c.bench_function("train_step_8_sentences", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let (_, loss, _) = batch_loss(&mut tape, &model, &batch, None).expect("loss");
            tape.backward(loss.total).expect("backward");
            tape.len()
        })
    });
}

fn bench_viterbi(c: &mut Criterion) {
    let labels: Vec<String> = std::iter::once("O".to_string())
        .chain((0..8).map(|i| format!("B-A{i}")))
        .chain((0..8).map(|i| format!("I-A{i}")))
        .collect();
    let tm = TransitionModel::from_corpus(&[], &labels);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = 40;
    let data: Vec<f64> = (0..t * labels.len())
        .map(|_| rng.gen_range(-4.0..4.0))
        .collect();
    let unary = Array::new(vec![t, labels.len()], data).expect("unary");
    c.bench_function("viterbi_40_tokens_17_labels", |b| {
        b.iter(|| viterbi_decode(&unary, &tm))
    });
}

criterion_group!(
    benches,
    bench_forward,
    bench_predict,
    bench_train_step,
    bench_viterbi
);
criterion_main!(benches);
