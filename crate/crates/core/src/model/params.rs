use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Real, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab_size: usize,
    /// `d_e`, shared by token and label embeddings.
    pub embed_dim: usize,
    /// Hidden size of each LSTM direction; the encoder width is twice this.
    pub hidden_per_direction: usize,
    pub num_parents: usize,
    pub num_children: usize,
}

impl ModelDims {
    /// Width `d` of the encoder states.
    pub fn state_dim(&self) -> usize {
        2 * self.hidden_per_direction
    }

    /// Expected shape of every parameter tensor, in [`PARAM_NAMES`] order.
    pub fn shapes(&self) -> [Vec<usize>; 15] {
        let (de, h, d) = (self.embed_dim, self.hidden_per_direction, self.state_dim());
        let (lp, l) = (self.num_parents, self.num_children);
        let lstm = [alloc::vec![de, 4 * h], alloc::vec![h, 4 * h], alloc::vec![4 * h]];
        let [wi, wh, b] = lstm;
        [
            alloc::vec![self.vocab_size, de],
            wi.clone(),
            wh.clone(),
            b.clone(),
            wi,
            wh,
            b,
            alloc::vec![lp, de],
            alloc::vec![l, de],
            alloc::vec![de, d],
            alloc::vec![lp, d],
            alloc::vec![de, lp],
            alloc::vec![de, d],
            alloc::vec![l, d],
            alloc::vec![l, de],
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.vocab_size < 2
            || self.embed_dim == 0
            || self.hidden_per_direction == 0
            || self.num_parents == 0
            || self.num_children == 0
        {
            return Err(Error::invalid(format!("degenerate model dimensions {self:?}")));
        }
        Ok(())
    }
}

/// Tensor names, also used as checkpoint keys.
pub const PARAM_NAMES: [&str; 15] = [
    "token_embeddings",
    "lstm_forward.w_ih",
    "lstm_forward.w_hh",
    "lstm_forward.bias",
    "lstm_backward.w_ih",
    "lstm_backward.w_hh",
    "lstm_backward.bias",
    "parent_embeddings",
    "child_embeddings",
    "parent_attention",
    "parent_output",
    "soft_parent",
    "child_attention",
    "child_doc_output",
    "child_parent_output",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmWeights<T> {
    /// `[d_e × 4h]`, gate blocks `i | f | g | o`.
    pub w_ih: Tensor<T>,
    /// `[h × 4h]`
    pub w_hh: Tensor<T>,
    /// `[4h]`
    pub bias: Tensor<T>,
}

/// Every learnable tensor of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// `[vocab × d_e]`; row 0 is padding and is never read.
    pub token_embeddings: Tensor<T>,
    pub lstm_forward: LstmWeights<T>,
    pub lstm_backward: LstmWeights<T>,
    /// `P`, `[|L_P| × d_e]`
    pub parent_embeddings: Tensor<T>,
    /// `L`, `[|L| × d_e]`
    pub child_embeddings: Tensor<T>,
    /// `W`, `[d_e × d]`
    pub parent_attention: Tensor<T>,
    /// `V`, `[|L_P| × d]`
    pub parent_output: Tensor<T>,
    /// `W_P`, `[d_e × |L_P|]`
    pub soft_parent: Tensor<T>,
    /// `W_L`, `[d_e × d]`
    pub child_attention: Tensor<T>,
    /// `V_LH`, `[|L| × d]`
    pub child_doc_output: Tensor<T>,
    /// `V_LP`, `[|L| × d_e]`
    pub child_parent_output: Tensor<T>,
}

impl<T: Real> ModelParams<T> {
    /// Uniform(-scale, scale) weights, zero biases except a forget-gate bias
    /// of 1. With `zero_parent_term`, `V_LP` starts at zero.
    pub fn init(dims: ModelDims, scale: f64, seed: u64, zero_parent_term: bool) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = dims.shapes();
        let mut uniform = |shape: &[usize]| {
            Tensor::from_fn(shape, |_| T::of(rng.gen_range(-scale..=scale)))
        };
        let h = dims.hidden_per_direction;
        let bias = || {
            Tensor::from_fn(&[4 * h], |j| if (h..2 * h).contains(&j) { T::one() } else { T::zero() })
        };
        let lstm_forward = LstmWeights {
            w_ih: uniform(&shapes[1]),
            w_hh: uniform(&shapes[2]),
            bias: bias(),
        };
        let token_embeddings = {
            let mut t = uniform(&shapes[0]);
            t.data_mut()[..dims.embed_dim].iter_mut().for_each(|x| *x = T::zero());
            t
        };
        let lstm_backward = LstmWeights {
            w_ih: uniform(&shapes[4]),
            w_hh: uniform(&shapes[5]),
            bias: bias(),
        };
        let mut params = ModelParams {
            token_embeddings,
            lstm_forward,
            lstm_backward,
            parent_embeddings: uniform(&shapes[7]),
            child_embeddings: uniform(&shapes[8]),
            parent_attention: uniform(&shapes[9]),
            parent_output: uniform(&shapes[10]),
            soft_parent: uniform(&shapes[11]),
            child_attention: uniform(&shapes[12]),
            child_doc_output: uniform(&shapes[13]),
            child_parent_output: uniform(&shapes[14]),
        };
        if zero_parent_term {
            params.child_parent_output = Tensor::zeros(&shapes[14]);
        }
        Ok(params)
    }

    /// All tensors in [`PARAM_NAMES`] order.
    pub fn tensors(&self) -> [&Tensor<T>; 15] {
        [
            &self.token_embeddings,
            &self.lstm_forward.w_ih,
            &self.lstm_forward.w_hh,
            &self.lstm_forward.bias,
            &self.lstm_backward.w_ih,
            &self.lstm_backward.w_hh,
            &self.lstm_backward.bias,
            &self.parent_embeddings,
            &self.child_embeddings,
            &self.parent_attention,
            &self.parent_output,
            &self.soft_parent,
            &self.child_attention,
            &self.child_doc_output,
            &self.child_parent_output,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 15] {
        [
            &mut self.token_embeddings,
            &mut self.lstm_forward.w_ih,
            &mut self.lstm_forward.w_hh,
            &mut self.lstm_forward.bias,
            &mut self.lstm_backward.w_ih,
            &mut self.lstm_backward.w_hh,
            &mut self.lstm_backward.bias,
            &mut self.parent_embeddings,
            &mut self.child_embeddings,
            &mut self.parent_attention,
            &mut self.parent_output,
            &mut self.soft_parent,
            &mut self.child_attention,
            &mut self.child_doc_output,
            &mut self.child_parent_output,
        ]
    }

    /// Reassembles parameters from tensors in [`PARAM_NAMES`] order.
    pub fn from_tensors(tensors: Vec<Tensor<T>>) -> Result<Self> {
        let arr: [Tensor<T>; 15] = tensors
            .try_into()
            .map_err(|v: Vec<Tensor<T>>| Error::invalid(format!("expected 15 tensors, got {}", v.len())))?;
        let [te, fi, fh, fb, bi, bh, bb, pe, ce, pa, po, sp, ca, cdo, cpo] = arr;
        let params = ModelParams {
            token_embeddings: te,
            lstm_forward: LstmWeights { w_ih: fi, w_hh: fh, bias: fb },
            lstm_backward: LstmWeights { w_ih: bi, w_hh: bh, bias: bb },
            parent_embeddings: pe,
            child_embeddings: ce,
            parent_attention: pa,
            parent_output: po,
            soft_parent: sp,
            child_attention: ca,
            child_doc_output: cdo,
            child_parent_output: cpo,
        };
        params.dims()?;
        Ok(params)
    }

    /// Infers the dimensions and checks every tensor against them.
    pub fn dims(&self) -> Result<ModelDims> {
        let (vocab_size, embed_dim) = self.token_embeddings.dims2("token_embeddings")?;
        let hidden_per_direction = self.lstm_forward.w_hh.shape().first().copied().unwrap_or(0);
        let num_parents = self.parent_embeddings.shape().first().copied().unwrap_or(0);
        let num_children = self.child_embeddings.shape().first().copied().unwrap_or(0);
        let dims = ModelDims {
            vocab_size,
            embed_dim,
            hidden_per_direction,
            num_parents,
            num_children,
        };
        self.check_dims(&dims)?;
        Ok(dims)
    }

    /// Fails with the name of the first tensor whose shape disagrees with `dims`.
    pub fn check_dims(&self, dims: &ModelDims) -> Result<()> {
        for ((name, t), expected) in PARAM_NAMES.iter().zip(self.tensors()).zip(dims.shapes()) {
            if t.shape() != expected.as_slice() {
                return Err(Error::invalid(format!(
                    "tensor {name} has shape {:?}, expected {expected:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let tensors = self.tensors().iter().map(|t| t.cast()).collect();
        ModelParams::from_tensors(tensors).expect("same shapes")
    }
}

/// Tape handles for every parameter, in [`PARAM_NAMES`] order.
#[derive(Clone, Copy, Debug)]
pub struct ParamVars {
    pub vars: [Var; 15],
}

impl ParamVars {
    /// Registers parameters as gradient-tracked leaves.
    pub fn track<'p, T: Real>(tape: &mut Tape<'p, T>, params: &'p ModelParams<T>) -> Self {
        ParamVars {
            vars: params.tensors().map(|t| tape.param(t)),
        }
    }

    /// Registers parameters as constants for inference.
    pub fn constant<'p, T: Real>(tape: &mut Tape<'p, T>, params: &'p ModelParams<T>) -> Self {
        ParamVars {
            vars: params.tensors().map(|t| tape.constant_ref(t)),
        }
    }

    pub fn token_embeddings(&self) -> Var {
        self.vars[0]
    }
    pub fn lstm_forward(&self) -> (Var, Var, Var) {
        (self.vars[1], self.vars[2], self.vars[3])
    }
    pub fn lstm_backward(&self) -> (Var, Var, Var) {
        (self.vars[4], self.vars[5], self.vars[6])
    }
    pub fn parent_embeddings(&self) -> Var {
        self.vars[7]
    }
    pub fn child_embeddings(&self) -> Var {
        self.vars[8]
    }
    pub fn parent_attention(&self) -> Var {
        self.vars[9]
    }
    pub fn parent_output(&self) -> Var {
        self.vars[10]
    }
    pub fn soft_parent(&self) -> Var {
        self.vars[11]
    }
    pub fn child_attention(&self) -> Var {
        self.vars[12]
    }
    pub fn child_doc_output(&self) -> Var {
        self.vars[13]
    }
    pub fn child_parent_output(&self) -> Var {
        self.vars[14]
    }
}
