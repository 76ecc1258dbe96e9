use qmt_core::circuit::init_params;
use qmt_core::corpus::{default_lexicon, gen_corpus};
use qmt_core::encode::{bind_corpus, build_dataset, BoundPair, Dataset};
use qmt_core::seq2seq::{
    train, translate, translate_tokens, Example, Model, ModelConfig, Optimizer, OptimizerConfig, Seq2SeqError, TargetMeta,
    TrainConfig, Variant,
};
use qmt_core::sim::exact_distribution;

fn pairs(n: usize) -> Vec<BoundPair> {
    let lex = default_lexicon();
    let corpus = gen_corpus(&lex, n, 0).unwrap();
    let reg = init_params(&lex, 2, 0);
    bind_corpus(&corpus, &lex, &reg, 2).unwrap()
}

/// Default Adam; larger rates saturate the encoder before it separates the sources.
fn fit(ds: &Dataset, data: &[Example], epochs: usize) -> Model {
    let mut model = Model::build(ModelConfig::new(Variant::M3, ds.header.vocab_size, ds.header.seq_len), 0);
    let mut opt = Optimizer::new(OptimizerConfig::adam());
    let cfg = TrainConfig {
        epochs,
        val_split: 0.0,
        ..TrainConfig::default()
    };
    train(&mut model, data, &mut opt, &cfg).unwrap();
    model
}

#[test]
fn overfit_two_pairs_reproduces_targets() {
    let bound = pairs(2);
    let ds = build_dataset(&bound, 32, 2).unwrap();
    let data: Vec<Example> = ds
        .records
        .iter()
        .map(|r| Example {
            src: r.src_tokens.clone(),
            tgt: r.tgt_tokens.clone(),
        })
        .collect();
    let model = fit(&ds, &data, 8000);
    for (p, r) in bound.iter().zip(&ds.records) {
        let t = translate(&model, &p.src, &ds.header, &TargetMeta::Known(r.meta_tgt.clone()), None).unwrap();
        assert_eq!(t.decoded.tokens, r.tgt_tokens, "{}", p.id);
        assert_eq!(t.decoded.repairs, 0);
        assert_eq!(t.circuit.gates.len(), p.tgt.gates.len());
        assert!((exact_distribution(&t.circuit).unwrap().total() - 1.0).abs() < 1e-9);
        let inferred = translate(&model, &p.src, &ds.header, &TargetMeta::Infer { language: "fa".into() }, Some(&default_lexicon())).unwrap();
        assert_eq!(inferred.circuit.n_qubits, p.tgt.n_qubits);
        assert_eq!(inferred.circuit.postselect, p.tgt.postselect);
    }
}

#[test]
fn identity_task_round_trips() {
    let bound = pairs(4);
    let ds = build_dataset(&bound, 32, 2).unwrap();
    let data: Vec<Example> = ds
        .records
        .iter()
        .map(|r| Example {
            src: r.src_tokens.clone(),
            tgt: r.src_tokens.clone(),
        })
        .collect();
    let model = fit(&ds, &data, 4000);
    let (mut hits, mut total) = (0usize, 0usize);
    for r in &ds.records {
        let t = translate_tokens(&model, &r.src_tokens, &ds.header, &TargetMeta::Known(r.meta_src.clone()), None).unwrap();
        total += r.src_tokens.len().max(t.decoded.tokens.len());
        hits += r.src_tokens.iter().zip(&t.decoded.tokens).filter(|(a, b)| a == b).count();
    }
    let accuracy = hits as f64 / total as f64;
    assert!(accuracy >= 0.99, "token accuracy {accuracy}");
}

#[test]
fn pad_only_prediction_is_an_empty_circuit() {
    let bound = pairs(1);
    let ds = build_dataset(&bound, 32, 2).unwrap();
    let mut model = Model::build(ModelConfig::new(Variant::M3, ds.header.vocab_size, ds.header.seq_len), 0);
    let bias = model.params.names.iter().position(|n| n == "output.b").unwrap();
    model.params.values[bias][[0, 0]] = 1e3;
    let r = &ds.records[0];
    match translate_tokens(&model, &r.src_tokens, &ds.header, &TargetMeta::Known(r.meta_tgt.clone()), None) {
        Err(Seq2SeqError::EmptyCircuit) => {}
        other => panic!("{other:?}"),
    }
}
