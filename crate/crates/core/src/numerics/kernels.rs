//! Slice-level kernels shared by the tape's forward and backward passes.

use alloc::vec;
use alloc::vec::Vec;

use super::{sigmoid, Real};

/// `out[m×n] += a[m×k] · b[k×n]`
pub(crate) fn matmul_acc<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let x = a[i * k + p];
            if x == T::zero() {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &y) in out_row.iter_mut().zip(b_row) {
                *o = *o + x * y;
            }
        }
    }
}

/// `out[m×n] += a[m×k] · b[n×k]ᵀ`
pub(crate) fn matmul_bt_acc<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (&x, &y) in a_row.iter().zip(b_row) {
                acc = acc + x * y;
            }
            out[i * n + j] = out[i * n + j] + acc;
        }
    }
}

/// `out[m×n] += a[k×m]ᵀ · b[k×n]`
pub(crate) fn matmul_at_acc<T: Real>(a: &[T], b: &[T], out: &mut [T], k: usize, m: usize, n: usize) {
    for p in 0..k {
        let b_row = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let x = a[p * m + i];
            if x == T::zero() {
                continue;
            }
            let out_row = &mut out[i * n..(i + 1) * n];
            for (o, &y) in out_row.iter_mut().zip(b_row) {
                *o = *o + x * y;
            }
        }
    }
}

/// Output shape of a same-rank broadcast, where every dimension pair is
/// either equal or contains a 1.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    if a.len() != b.len() {
        return None;
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x, y) {
            _ if x == y => Some(x),
            (1, _) => Some(y),
            (_, 1) => Some(x),
            _ => None,
        })
        .collect()
}

/// For every flat index of `out_shape`, the flat index into a tensor of
/// `in_shape` that broadcasts onto it.
pub(crate) fn broadcast_index(out_shape: &[usize], in_shape: &[usize]) -> Vec<usize> {
    let numel: usize = out_shape.iter().product();
    if out_shape == in_shape {
        return (0..numel).collect();
    }
    let rank = out_shape.len();
    let mut in_strides = vec![0usize; rank];
    let mut stride = 1;
    for d in (0..rank).rev() {
        in_strides[d] = if in_shape[d] == 1 { 0 } else { stride };
        stride *= in_shape[d];
    }
    let mut index = vec![0usize; rank];
    let mut map = Vec::with_capacity(numel);
    for _ in 0..numel {
        map.push(index.iter().zip(&in_strides).map(|(i, s)| i * s).sum());
        for d in (0..rank).rev() {
            index[d] += 1;
            if index[d] < out_shape[d] {
                break;
            }
            index[d] = 0;
        }
    }
    map
}

/// Activations kept from one LSTM direction for the backward pass.
/// Step `s` is the `s`-th position visited, which is position `len-1-s`
/// when running in reverse.
#[derive(Clone, Debug)]
pub(crate) struct LstmCache<T> {
    pub len: usize,
    pub reverse: bool,
    /// Activated gates `[len × 4h]`, laid out `i | f | g | o`.
    pub gates: Vec<T>,
    /// Cell states `[len × h]`.
    pub cells: Vec<T>,
    /// `tanh` of the cell states `[len × h]`.
    pub cell_tanh: Vec<T>,
}

impl<T> LstmCache<T> {
    pub fn position(&self, step: usize) -> usize {
        if self.reverse {
            self.len - 1 - step
        } else {
            step
        }
    }
}

/// Runs one LSTM direction over the first `len` rows of `x[n×input]`.
/// Rows at or beyond `len` of the returned `[n×h]` output are zero.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_forward<T: Real>(
    x: &[T],
    n: usize,
    input: usize,
    len: usize,
    hidden: usize,
    w_ih: &[T],
    w_hh: &[T],
    bias: &[T],
    reverse: bool,
) -> (Vec<T>, LstmCache<T>) {
    let g4 = 4 * hidden;
    let mut pre = vec![T::zero(); len * g4];
    matmul_acc(&x[..len * input], w_ih, &mut pre, len, input, g4);
    let mut out = vec![T::zero(); n * hidden];
    let mut cache = LstmCache {
        len,
        reverse,
        gates: vec![T::zero(); len * g4],
        cells: vec![T::zero(); len * hidden],
        cell_tanh: vec![T::zero(); len * hidden],
    };
    let mut h_prev = vec![T::zero(); hidden];
    let mut c_prev = vec![T::zero(); hidden];
    let mut z = vec![T::zero(); g4];
    for step in 0..len {
        let t = cache.position(step);
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = pre[t * g4 + j] + bias[j];
        }
        matmul_acc(&h_prev, w_hh, &mut z, 1, hidden, g4);
        let gates = &mut cache.gates[step * g4..(step + 1) * g4];
        for j in 0..hidden {
            let i_g = sigmoid(z[j]);
            let f_g = sigmoid(z[hidden + j]);
            let g_g = z[2 * hidden + j].tanh();
            let o_g = sigmoid(z[3 * hidden + j]);
            gates[j] = i_g;
            gates[hidden + j] = f_g;
            gates[2 * hidden + j] = g_g;
            gates[3 * hidden + j] = o_g;
            let c = f_g * c_prev[j] + i_g * g_g;
            let tc = c.tanh();
            cache.cells[step * hidden + j] = c;
            cache.cell_tanh[step * hidden + j] = tc;
            c_prev[j] = c;
            h_prev[j] = o_g * tc;
        }
        out[t * hidden..(t + 1) * hidden].copy_from_slice(&h_prev);
    }
    (out, cache)
}

pub(crate) struct LstmGrads<T> {
    pub input: Vec<T>,
    pub w_ih: Vec<T>,
    pub w_hh: Vec<T>,
    pub bias: Vec<T>,
}

/// Backpropagation through time for one direction.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_backward<T: Real>(
    x: &[T],
    n: usize,
    input: usize,
    hidden: usize,
    w_ih: &[T],
    w_hh: &[T],
    out: &[T],
    cache: &LstmCache<T>,
    grad_out: &[T],
) -> LstmGrads<T> {
    let len = cache.len;
    let g4 = 4 * hidden;
    let mut dz_all = vec![T::zero(); len * g4];
    let mut dh_next = vec![T::zero(); hidden];
    let mut dc_next = vec![T::zero(); hidden];
    let mut grads = LstmGrads {
        input: vec![T::zero(); n * input],
        w_ih: vec![T::zero(); input * g4],
        w_hh: vec![T::zero(); hidden * g4],
        bias: vec![T::zero(); g4],
    };
    let one = T::one();
    for step in (0..len).rev() {
        let t = cache.position(step);
        let gates = &cache.gates[step * g4..(step + 1) * g4];
        let dz = &mut dz_all[t * g4..(t + 1) * g4];
        for j in 0..hidden {
            let (i_g, f_g, g_g, o_g) = (
                gates[j],
                gates[hidden + j],
                gates[2 * hidden + j],
                gates[3 * hidden + j],
            );
            let tc = cache.cell_tanh[step * hidden + j];
            let c_prev = if step == 0 {
                T::zero()
            } else {
                cache.cells[(step - 1) * hidden + j]
            };
            let dh = grad_out[t * hidden + j] + dh_next[j];
            let dc = dc_next[j] + dh * o_g * (one - tc * tc);
            dz[j] = dc * g_g * i_g * (one - i_g);
            dz[hidden + j] = dc * c_prev * f_g * (one - f_g);
            dz[2 * hidden + j] = dc * i_g * (one - g_g * g_g);
            dz[3 * hidden + j] = dh * tc * o_g * (one - o_g);
            dc_next[j] = dc * f_g;
        }
        dh_next.iter_mut().for_each(|v| *v = T::zero());
        matmul_bt_acc(dz, w_hh, &mut dh_next, 1, g4, hidden);
        if step > 0 {
            let prev = cache.position(step - 1);
            let h_prev = &out[prev * hidden..(prev + 1) * hidden];
            matmul_at_acc(h_prev, dz, &mut grads.w_hh, 1, hidden, g4);
        }
    }
    matmul_at_acc(&x[..len * input], &dz_all, &mut grads.w_ih, len, input, g4);
    for t in 0..len {
        for j in 0..g4 {
            grads.bias[j] = grads.bias[j] + dz_all[t * g4 + j];
        }
    }
    matmul_bt_acc(&dz_all, w_ih, &mut grads.input[..len * input], len, g4, input);
    grads
}
