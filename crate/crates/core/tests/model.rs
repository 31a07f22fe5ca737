mod oracles;

use oracles::{ChildWeights, Lcg, Mat};
use twostage_core::data::{make_batches, Document};
use twostage_core::model::{
    decode_child, decode_parent, embed, encode_document_states, forward, forward_batch, forward_on_tape,
    ForwardOptions, ModelDims, ModelParams, ParamVars,
};
use twostage_core::numerics::Tape;
use twostage_core::Tensor;
use std::collections::BTreeSet;

fn to_mat(t: &Tensor<f64>) -> Mat {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
}

fn from_mat(m: &Mat) -> Tensor<f64> {
    Tensor::from_rows(m).unwrap()
}

fn random_dims(rng: &mut Lcg) -> ModelDims {
    ModelDims {
        vocab_size: 6 + rng.below(10),
        embed_dim: 2 + rng.below(5),
        hidden_per_direction: 1 + rng.below(4),
        num_parents: 1 + rng.below(5),
        num_children: 1 + rng.below(9),
    }
}

fn random_params(dims: ModelDims, seed: u64) -> ModelParams<f64> {
    ModelParams::<f64>::init(dims, 0.8, seed, false).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn decoders_match_naive_oracle_on_random_instances() {
    let mut rng = Lcg(11);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let dims = random_dims(&mut rng);
        let params = random_params(dims, case);
        let n = 1 + rng.below(12);
        let valid = 1 + rng.below(n);
        let mask: Vec<bool> = (0..n).map(|i| i < valid).collect();
        let states = rng.matrix(n, dims.state_dim(), 1.5);

        let mut tape = Tape::new();
        let pv = ParamVars::constant(&mut tape, &params);
        let hv = tape.constant(from_mat(&states));
        let parent = decode_parent(&mut tape, &pv, hv, &mask).unwrap();
        let child = decode_child(&mut tape, &pv, hv, &mask, parent.probs, true).unwrap();
        let got_parent = tape.value(parent.probs).data().to_vec();
        let got_child = tape.value(child.probs).data().to_vec();

        let want_parent = oracles::decode_parent(
            &states,
            &mask,
            &to_mat(&params.parent_embeddings),
            &to_mat(&params.parent_attention),
            &to_mat(&params.parent_output),
        );
        let cw = ChildWeights {
            l: &to_mat(&params.child_embeddings),
            p: &to_mat(&params.parent_embeddings),
            w_p: &to_mat(&params.soft_parent),
            w_l: &to_mat(&params.child_attention),
            v_lh: &to_mat(&params.child_doc_output),
            v_lp: &to_mat(&params.child_parent_output),
        };
        let want_child = oracles::decode_child(&states, &mask, &want_parent, &cw);
        worst = worst.max(max_diff(&got_parent, &want_parent));
        worst = worst.max(max_diff(&got_child, &want_child));
    }
    assert!(worst <= 1e-6, "max deviation {worst}");
}

#[test]
fn encoder_matches_naive_lstm() {
    let mut rng = Lcg(5);
    for case in 0..30 {
        let dims = random_dims(&mut rng);
        let params = random_params(dims, 100 + case);
        let n = 1 + rng.below(8);
        let ids: Vec<u32> = (0..n).map(|_| 1 + rng.below(dims.vocab_size - 1) as u32).collect();
        let mask = vec![true; n];
        let mut tape = Tape::new();
        let pv = ParamVars::constant(&mut tape, &params);
        let e = embed(&mut tape, &pv, &ids).unwrap();
        let states = encode_document_states(&mut tape, &pv, e, &mask).unwrap();
        let got = to_mat(tape.value(states));

        let table = to_mat(&params.token_embeddings);
        let x: Mat = ids.iter().map(|&i| table[i as usize].clone()).collect();
        let lf = &params.lstm_forward;
        let lb = &params.lstm_backward;
        let fwd = oracles::lstm_direction(&x, &to_mat(&lf.w_ih), &to_mat(&lf.w_hh), lf.bias.data(), false);
        let bwd = oracles::lstm_direction(&x, &to_mat(&lb.w_ih), &to_mat(&lb.w_hh), lb.bias.data(), true);
        for t in 0..n {
            let want: Vec<f64> = fwd[t].iter().chain(&bwd[t]).copied().collect();
            assert!(max_diff(&got[t], &want) <= 1e-9);
        }
    }
}

#[test]
fn reversed_input_swaps_encoder_directions() {
    let dims = ModelDims {
        vocab_size: 12,
        embed_dim: 4,
        hidden_per_direction: 3,
        num_parents: 2,
        num_children: 4,
    };
    let mut params = random_params(dims, 3);
    params.lstm_backward = params.lstm_forward.clone();
    let ids: Vec<u32> = vec![2, 7, 3, 11, 5, 4];
    let rev: Vec<u32> = ids.iter().rev().copied().collect();
    let encode = |ids: &[u32]| {
        let mut tape = Tape::new();
        let pv = ParamVars::constant(&mut tape, &params);
        let e = embed(&mut tape, &pv, ids).unwrap();
        let s = encode_document_states(&mut tape, &pv, e, &vec![true; ids.len()]).unwrap();
        to_mat(tape.value(s))
    };
    let a = encode(&ids);
    let b = encode(&rev);
    let h = dims.hidden_per_direction;
    let n = ids.len();
    for t in 0..n {
        assert!(max_diff(&a[t][..h], &b[n - 1 - t][h..]) <= 1e-12);
        assert!(max_diff(&a[t][h..], &b[n - 1 - t][..h]) <= 1e-12);
    }
}

#[test]
fn attention_rows_are_distributions_and_ignore_padding() {
    let mut rng = Lcg(21);
    for case in 0..40 {
        let dims = random_dims(&mut rng);
        let params = random_params(dims, 200 + case);
        let n = 2 + rng.below(10);
        let valid = 1 + rng.below(n);
        let mut ids: Vec<u32> = (0..n).map(|_| 1 + rng.below(dims.vocab_size - 1) as u32).collect();
        for id in ids.iter_mut().skip(valid) {
            *id = 0;
        }
        let mask: Vec<bool> = (0..n).map(|i| i < valid).collect();
        let mut tape = Tape::new();
        let pv = ParamVars::constant(&mut tape, &params);
        let out = forward_on_tape(&mut tape, &pv, &ids, &mask, &ForwardOptions::default(), None).unwrap();
        for (att, cols, over_tokens) in [
            (out.parent.attention, n, true),
            (out.child.doc_attention, n, true),
            (out.child.parent_attention, dims.num_parents, false),
        ] {
            let m = to_mat(tape.value(att));
            for row in &m {
                assert_eq!(row.len(), cols);
                assert!(row.iter().all(|&x| x >= 0.0));
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
            if over_tokens {
                assert!(m.iter().all(|row| row[valid..].iter().all(|&x| x == 0.0)));
            }
        }
        let probs = tape.value(out.child.probs).data();
        assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0));
    }
}

#[test]
fn shapes_follow_dimensions() {
    let mut rng = Lcg(8);
    for case in 0..20 {
        let dims = random_dims(&mut rng);
        let params = random_params(dims, case);
        let n = 1 + rng.below(6);
        let ids: Vec<u32> = (0..n).map(|_| 1 + rng.below(dims.vocab_size - 1) as u32).collect();
        let mut tape = Tape::new();
        let pv = ParamVars::constant(&mut tape, &params);
        let out = forward_on_tape(&mut tape, &pv, &ids, &vec![true; n], &ForwardOptions::default(), None).unwrap();
        let (d, lp, lc) = (dims.state_dim(), dims.num_parents, dims.num_children);
        assert_eq!(tape.shape(out.states), [n, d]);
        assert_eq!(tape.shape(out.parent.attention), [lp, n]);
        assert_eq!(tape.shape(out.parent.probs), [lp]);
        assert_eq!(tape.shape(out.child.doc_attention), [lc, n]);
        assert_eq!(tape.shape(out.child.parent_attention), [lc, lp]);
        assert_eq!(tape.shape(out.child.probs), [lc]);
    }
}

#[test]
fn padded_batch_matches_single_documents() {
    let dims = ModelDims {
        vocab_size: 20,
        embed_dim: 5,
        hidden_per_direction: 3,
        num_parents: 3,
        num_children: 7,
    };
    let params = random_params(dims, 9);
    let mut rng = Lcg(77);
    let docs: Vec<Document> = (0..7)
        .map(|i| Document {
            id: format!("d{i}"),
            token_ids: (0..1 + rng.below(15)).map(|_| 1 + rng.below(19) as u32).collect(),
            gold_children: BTreeSet::new(),
            gold_parents: BTreeSet::new(),
            unrecoverable: Vec::new(),
        })
        .collect();
    let opts = ForwardOptions::default();
    for batch in make_batches(&docs, 3, Some(4)).unwrap() {
        let scores = forward_batch(&params, &batch, &opts).unwrap();
        for (row, &doc) in scores.iter().zip(&batch.indices) {
            let single = forward(&params, &docs[doc].token_ids, &opts).unwrap();
            assert!(max_diff(&row.child_probs, &single.child_probs) <= 1e-12);
            assert!(max_diff(&row.parent_probs, &single.parent_probs) <= 1e-12);
        }
    }
}

#[test]
fn zero_parent_term_makes_children_independent_of_parent_probs() {
    let mut rng = Lcg(31);
    for case in 0..20 {
        let dims = random_dims(&mut rng);
        let mut params = random_params(dims, 300 + case);
        params.child_parent_output = Tensor::zeros(params.child_parent_output.shape());
        let n = 1 + rng.below(8);
        let states = rng.matrix(n, dims.state_dim(), 1.0);
        let mask = vec![true; n];
        let child_with = |probs: Vec<f64>| {
            let mut tape = Tape::new();
            let pv = ParamVars::constant(&mut tape, &params);
            let hv = tape.constant(from_mat(&states));
            let pp = tape.constant(Tensor::new(vec![probs.len()], probs).unwrap());
            let c = decode_child(&mut tape, &pv, hv, &mask, pp, true).unwrap();
            tape.value(c.probs).data().to_vec()
        };
        let predicted: Vec<f64> = (0..dims.num_parents).map(|_| rng.uniform(0.0, 1.0)).collect();
        let oracle: Vec<f64> = (0..dims.num_parents).map(|_| rng.below(2) as f64).collect();
        assert_eq!(child_with(predicted), child_with(oracle));
    }
}

#[test]
fn single_parent_hierarchy_gives_uniform_parent_attention() {
    let dims = ModelDims {
        vocab_size: 9,
        embed_dim: 3,
        hidden_per_direction: 2,
        num_parents: 1,
        num_children: 4,
    };
    let params = random_params(dims, 1);
    let mut tape = Tape::new();
    let pv = ParamVars::constant(&mut tape, &params);
    let out = forward_on_tape(&mut tape, &pv, &[3, 4, 5], &[true; 3], &ForwardOptions::default(), None).unwrap();
    assert!(tape.value(out.child.parent_attention).data().iter().all(|&a| a == 1.0));
}

#[test]
fn forward_is_deterministic_and_f32_tracks_f64() {
    let dims = ModelDims {
        vocab_size: 30,
        embed_dim: 8,
        hidden_per_direction: 6,
        num_parents: 4,
        num_children: 10,
    };
    let params = ModelParams::<f32>::init(dims, 0.3, 2, false).unwrap();
    let ids: Vec<u32> = (0..40).map(|i| 1 + (i * 7 % 29) as u32).collect();
    let opts = ForwardOptions::default();
    let a = forward(&params, &ids, &opts).unwrap();
    let b = forward(&params, &ids, &opts).unwrap();
    assert_eq!(a, b);
    let wide = forward(&params.cast::<f64>(), &ids, &opts).unwrap();
    assert!(max_diff(&a.child_probs, &wide.child_probs) <= 1e-5);
}
