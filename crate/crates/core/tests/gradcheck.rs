mod oracles;

use oracles::{finite_difference, relative_error, Lcg};
use proptest::prelude::*;
use std::collections::BTreeSet;
use twostage_core::data::Document;
use twostage_core::model::{forward_on_tape, ForwardOptions, ModelDims, ModelParams, ParamVars};
use twostage_core::numerics::{Reduction, Tape, Var};
use twostage_core::training::total_loss;
use twostage_core::{Result, Tensor};

const STEP: f64 = 1e-4;
const TOLERANCE: f64 = 1e-6;

type Build<'a> = dyn Fn(&mut Tape<'_, f64>, &[Var]) -> Result<Var> + 'a;

/// Evaluates `build` on fresh leaves and projects a non-scalar output onto
/// fixed random weights so every output coordinate contributes.
fn scalar_output(inputs: &[Tensor<f64>], build: &Build<'_>) -> (f64, Vec<Tensor<f64>>) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param_owned(t.clone())).collect();
    let out = build(&mut tape, &vars).unwrap();
    let out = if tape.value(out).numel() == 1 {
        out
    } else {
        let shape = tape.shape(out).to_vec();
        let mut rng = Lcg(shape.iter().product::<usize>() as u64 + 17);
        let w = Tensor::from_fn(&shape, |_| rng.uniform(-1.0, 1.0));
        let w = tape.constant(w);
        let prod = tape.mul(out, w).unwrap();
        tape.sum(prod)
    };
    let value = tape.value(out).item();
    let grads = tape.backward(out).unwrap();
    (value, vars.iter().map(|&v| grads.wrt(v)).collect())
}

fn worst_error(inputs: Vec<Tensor<f64>>, build: &Build<'_>) -> f64 {
    let (_, analytic) = scalar_output(&inputs, build);
    let mut worst = 0.0f64;
    for (i, input) in inputs.iter().enumerate() {
        let numeric = finite_difference(input.data(), STEP, |x| {
            let mut probe = inputs.clone();
            probe[i] = Tensor::new(input.shape().to_vec(), x.to_vec()).unwrap();
            scalar_output(&probe, build).0
        });
        for (a, n) in analytic[i].data().iter().zip(&numeric) {
            worst = worst.max(relative_error(*a, *n));
        }
    }
    worst
}

fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = Lcg(seed);
    Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matmul_gradients(m in 1usize..5, k in 1usize..5, n in 1usize..5, seed in 0u64..1000) {
        let e = worst_error(vec![random(&[m, k], seed), random(&[k, n], seed + 1)], &|t, v| t.matmul(v[0], v[1]));
        prop_assert!(e <= TOLERANCE, "{e}");
        let e = worst_error(vec![random(&[m, k], seed), random(&[n, k], seed + 1)], &|t, v| t.matmul_bt(v[0], v[1]));
        prop_assert!(e <= TOLERANCE, "{e}");
    }

    #[test]
    fn broadcast_elementwise_gradients(m in 1usize..5, n in 1usize..5, seed in 0u64..1000) {
        let e = worst_error(vec![random(&[m, n], seed), random(&[1, n], seed + 1)], &|t, v| t.add(v[0], v[1]));
        prop_assert!(e <= TOLERANCE, "{e}");
        let e = worst_error(vec![random(&[m, n], seed), random(&[m, 1], seed + 1)], &|t, v| t.mul(v[0], v[1]));
        prop_assert!(e <= TOLERANCE, "{e}");
        let e = worst_error(vec![random(&[m, n], seed), random(&[m, n], seed + 1)], &|t, v| t.mul(v[0], v[1]));
        prop_assert!(e <= TOLERANCE, "{e}");
    }

    #[test]
    fn pointwise_gradients(m in 1usize..5, n in 1usize..5, seed in 0u64..1000) {
        let x = random(&[m, n], seed).map(|v| 3.0 * v);
        prop_assert!(worst_error(vec![x.clone()], &|t, v| Ok(t.tanh(v[0]))) <= TOLERANCE);
        prop_assert!(worst_error(vec![x.clone()], &|t, v| Ok(t.sigmoid(v[0]))) <= TOLERANCE);
        prop_assert!(worst_error(vec![x.clone()], &|t, v| Ok(t.scale(v[0], -2.5))) <= TOLERANCE);
        prop_assert!(worst_error(vec![x.clone()], &|t, v| t.sum_last_dim(v[0])) <= TOLERANCE);
        prop_assert!(worst_error(vec![x], &|t, v| t.reshape(v[0], &[m * n])) <= TOLERANCE);
    }

    #[test]
    fn masked_softmax_gradients(m in 1usize..5, n in 1usize..7, valid in 1usize..7, seed in 0u64..1000) {
        let valid = valid.min(n);
        let mask: Vec<bool> = (0..n).map(|i| i < valid).collect();
        let x = random(&[m, n], seed).map(|v| 4.0 * v);
        let e = worst_error(vec![x.clone()], &|t, v| t.row_softmax(v[0], Some(&mask)));
        prop_assert!(e <= TOLERANCE, "{e}");
        let e = worst_error(vec![x], &|t, v| t.row_softmax(v[0], None));
        prop_assert!(e <= TOLERANCE, "{e}");
    }

    #[test]
    fn bce_gradients(n in 1usize..8, seed in 0u64..1000, mean in any::<bool>()) {
        let mut rng = Lcg(seed + 5);
        let targets = Tensor::from_fn(&[n], |_| rng.below(2) as f64);
        let reduction = if mean { Reduction::Mean } else { Reduction::Sum };
        let e = worst_error(vec![random(&[n], seed)], &|t, v| {
            let p = t.sigmoid(v[0]);
            t.bce(p, &targets, reduction)
        });
        prop_assert!(e <= TOLERANCE, "{e}");
    }

    #[test]
    fn structural_gradients(n in 1usize..5, a in 1usize..4, b in 1usize..4, seed in 0u64..1000) {
        let e = worst_error(vec![random(&[n, a], seed), random(&[n, b], seed + 1)], &|t, v| t.concat_cols(v[0], v[1]));
        prop_assert!(e <= TOLERANCE, "{e}");
        let mut rng = Lcg(seed);
        let mask: Vec<f64> = (0..n * a).map(|_| if rng.below(2) == 0 { 0.0 } else { 2.0 }).collect();
        let e = worst_error(vec![random(&[n, a], seed)], &|t, v| t.dropout(v[0], mask.clone()));
        prop_assert!(e <= TOLERANCE, "{e}");
        let ids: Vec<usize> = (0..n + 2).map(|_| rng.below(4)).collect();
        let e = worst_error(vec![random(&[4, a], seed)], &|t, v| t.embedding(v[0], &ids, Some(0)));
        prop_assert!(e <= TOLERANCE, "{e}");
    }

    #[test]
    fn lstm_gradients(n in 1usize..6, d_in in 1usize..4, h in 1usize..4, len in 0usize..6, reverse in any::<bool>(), seed in 0u64..1000) {
        let len = len.min(n);
        let inputs = vec![
            random(&[n, d_in], seed),
            random(&[d_in, 4 * h], seed + 1),
            random(&[h, 4 * h], seed + 2),
            random(&[4 * h], seed + 3),
        ];
        let e = worst_error(inputs, &|t, v| t.lstm(v[0], v[1], v[2], v[3], len, reverse));
        prop_assert!(e <= TOLERANCE, "{e}");
    }
}

#[test]
fn padding_row_receives_no_gradient() {
    let mut tape = Tape::new();
    let table = tape.param_owned(random(&[3, 2], 1));
    let e = tape.embedding(table, &[0, 2, 0], Some(0)).unwrap();
    let s = tape.sum(e);
    let g = tape.backward(s).unwrap().wrt(table);
    assert_eq!(g.data(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
}

#[test]
fn clamped_bce_has_zero_gradient_outside_range() {
    let mut tape = Tape::<f64>::new();
    let p = tape.param_owned(Tensor::new(vec![2], vec![0.0, 1.0]).unwrap());
    let targets = Tensor::new(vec![2], vec![1.0, 0.0]).unwrap();
    let loss = tape.bce(p, &targets, Reduction::Sum).unwrap();
    assert!(tape.value(loss).item().is_finite());
    assert_eq!(tape.backward(loss).unwrap().wrt(p).data(), &[0.0, 0.0]);
}

pub fn tiny_dims() -> ModelDims {
    ModelDims {
        vocab_size: 7,
        embed_dim: 3,
        hidden_per_direction: 2,
        num_parents: 2,
        num_children: 4,
    }
}

fn tiny_docs() -> Vec<Document> {
    let doc = |ids: Vec<u32>, children: &[usize], parents: &[usize]| Document {
        id: String::new(),
        token_ids: ids,
        gold_children: children.iter().copied().collect::<BTreeSet<_>>(),
        gold_parents: parents.iter().copied().collect::<BTreeSet<_>>(),
        unrecoverable: Vec::new(),
    };
    vec![doc(vec![2, 3, 4, 5], &[0, 3], &[0, 1]), doc(vec![6, 2, 1, 3], &[1], &[0])]
}

fn model_loss(params: &ModelParams<f64>, docs: &[Document], parent_weight: f64, track: bool) -> (f64, Vec<Tensor<f64>>) {
    let mut tape = Tape::new();
    let pv = if track {
        ParamVars::track(&mut tape, params)
    } else {
        ParamVars::constant(&mut tape, params)
    };
    let opts = ForwardOptions::default();
    let outputs: Vec<(Var, Var)> = docs
        .iter()
        .map(|d| {
            let out = forward_on_tape(&mut tape, &pv, &d.token_ids, &vec![true; d.len()], &opts, None).unwrap();
            (out.parent.probs, out.child.probs)
        })
        .collect();
    let refs: Vec<&Document> = docs.iter().collect();
    let loss = total_loss(&mut tape, &outputs, &refs, parent_weight).unwrap();
    let value = tape.value(loss).item();
    if !track {
        return (value, Vec::new());
    }
    let grads = tape.backward(loss).unwrap();
    (value, pv.vars.iter().map(|&v| grads.wrt(v)).collect())
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let params = ModelParams::<f64>::init(tiny_dims(), 0.5, 42, false).unwrap();
    let docs = tiny_docs();
    for parent_weight in [1.0, 0.5] {
        let (_, analytic) = model_loss(&params, &docs, parent_weight, true);
        let base: Vec<Tensor<f64>> = params.tensors().iter().map(|t| (*t).clone()).collect();
        for (i, tensor) in base.iter().enumerate() {
            let numeric = finite_difference(tensor.data(), STEP, |x| {
                let mut probe = base.clone();
                probe[i] = Tensor::new(tensor.shape().to_vec(), x.to_vec()).unwrap();
                let p = ModelParams::from_tensors(probe).unwrap();
                model_loss(&p, &docs, parent_weight, false).0
            });
            for (a, n) in analytic[i].data().iter().zip(&numeric) {
                assert!(relative_error(*a, *n) <= TOLERANCE, "tensor {i}: {a} vs {n}");
            }
        }
    }
}

