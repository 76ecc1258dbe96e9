use qmt_core::seq2seq::{Batch, Example, Model, ModelConfig, Variant};

fn tiny(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        vocab_size: 9,
        seq_len: 6,
        emb_dim: 4,
        units: 3,
        dense_dim: 3,
    }
}

fn examples() -> Vec<Example> {
    vec![
        Example {
            src: vec![3, 4, 5, 6],
            tgt: vec![7, 8, 3],
        },
        Example {
            src: vec![5, 8],
            tgt: vec![4, 4, 6, 1, 2],
        },
        Example {
            src: vec![1, 2, 7, 3, 6],
            tgt: vec![8],
        },
    ]
}

fn loss(model: &Model, batch: &Batch) -> f64 {
    model.run(batch, false).loss
}

/// Central differences against the analytic gradient on every entry of
/// every tensor.
fn check(variant: Variant) {
    let data = examples();
    let refs: Vec<&Example> = data.iter().collect();
    let mut model = Model::build(tiny(variant), 7);
    let batch = Batch::new(&refs, model.cfg.seq_len);
    let grads = model.run(&batch, true).grads.unwrap();
    let h = 1e-5;
    let mut checked = 0;
    for k in 0..model.params.values.len() {
        let shape = model.params.values[k].dim();
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let orig = model.params.values[k][[i, j]];
                model.params.values[k][[i, j]] = orig + h;
                let up = loss(&model, &batch);
                model.params.values[k][[i, j]] = orig - h;
                let down = loss(&model, &batch);
                model.params.values[k][[i, j]] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads[k][[i, j]];
                // Round-off in the differences is about 1e-16 * loss / h.
                let scale = analytic.abs().max(numeric.abs());
                let err = (analytic - numeric).abs();
                assert!(
                    err <= 1e-4 * scale + 1e-9,
                    "{variant:?} {}[{i},{j}]: analytic {analytic:e} numeric {numeric:e}",
                    model.params.names[k]
                );
                checked += 1;
            }
        }
    }
    assert_eq!(checked, model.param_count());
}

#[test]
fn m1_gradients_match_finite_differences() {
    check(Variant::M1);
}

#[test]
fn m2_gradients_match_finite_differences() {
    check(Variant::M2);
}

#[test]
fn m3_gradients_match_finite_differences() {
    check(Variant::M3);
}

#[test]
fn unused_embedding_rows_get_no_gradient() {
    let data = examples();
    let refs: Vec<&Example> = data[..1].iter().collect();
    let model = Model::build(tiny(Variant::M3), 1);
    let batch = Batch::new(&refs, 6);
    let g = model.run(&batch, true).grads.unwrap();
    let emb = model.params.names.iter().position(|n| n == "embedding.w").unwrap();
    // Token 2 appears in neither the source nor the decoder inputs.
    assert!(g[emb].row(2).iter().all(|&v| v == 0.0));
    assert!(g[emb].row(3).iter().any(|&v| v != 0.0));
}

#[test]
fn stepwise_decoding_agrees_with_teacher_forcing() {
    let data = examples();
    for variant in [Variant::M1, Variant::M3] {
        let model = Model::build(tiny(variant), 3);
        for ex in &data {
            let batch = Batch::new(&[ex], 6);
            let forced = model.run(&batch, false).argmax;
            let mut state = model.start(&ex.src);
            let mut prev = 0;
            for (t, &want) in forced.iter().enumerate() {
                let logits = model.step(&mut state, prev);
                let best = (0..logits.len()).max_by(|&a, &b| logits[a].total_cmp(&logits[b])).unwrap() as u32;
                assert_eq!(best, want, "{variant:?} step {t}");
                prev = ex.tgt.get(t).copied().unwrap_or(0);
            }
        }
    }
    let model = Model::build(tiny(Variant::M2), 3);
    for ex in &data {
        let batch = Batch::new(&[ex], 6);
        let forced = model.run(&batch, false).argmax;
        let logits = model.positional_logits(&ex.src);
        for (t, &want) in forced.iter().enumerate() {
            let row = logits.row(t);
            let best = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap() as u32;
            assert_eq!(best, want, "M2 step {t}");
        }
    }
}
