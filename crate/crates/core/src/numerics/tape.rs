use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{self, LstmCache};
use super::{sigmoid, Real, Tensor, BCE_EPSILON};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Sum,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Constant,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    RowSoftmax(Var),
    SumLastDim(Var),
    Sum(Var),
    Bce {
        probs: Var,
        targets: Vec<T>,
        reduction: Reduction,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
        padding: Option<usize>,
    },
    Lstm {
        input: Var,
        w_ih: Var,
        w_hh: Var,
        bias: Var,
        cache: LstmCache<T>,
    },
    ConcatCols(Var, Var),
    Reshape(Var),
    Dropout(Var, Vec<T>),
}

#[derive(Debug)]
struct Node<'p, T: Real> {
    value: Cow<'p, Tensor<T>>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records a forward computation so that [`Tape::backward`] can propagate
/// gradients to the tracked leaves.
///
/// Leaves are borrowed, so parameters are not copied onto the tape. One tape
/// covers one training step; it is not meant to be reused.
#[derive(Debug, Default)]
pub struct Tape<'p, T: Real> {
    nodes: Vec<Node<'p, T>>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the loss with respect to `v`. Nodes that do not reach the
    /// loss get a zero tensor of their own shape.
    pub fn wrt(&self, v: Var) -> Tensor<T> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor<T> {
        match self.grads[v.0].take() {
            Some(g) => g,
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'p, Tensor<T>>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.push(Cow::Owned(value), op, needs_grad)
    }

    /// A borrowed tensor whose gradient is tracked.
    pub fn param(&mut self, t: &'p Tensor<T>) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, true)
    }

    /// An owned tensor whose gradient is tracked.
    pub fn param_owned(&mut self, t: Tensor<T>) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, true)
    }

    /// A borrowed tensor that never receives a gradient.
    pub fn constant_ref(&mut self, t: &'p Tensor<T>) -> Var {
        self.push(Cow::Borrowed(t), Op::Constant, false)
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(Cow::Owned(t), Op::Constant, false)
    }

    /// Copies the value of `v` into a new node that blocks gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (k2, n) = self.value(b).dims2("matmul")?;
        if k != k2 {
            return Err(mismatch("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![T::zero(); m * n];
        kernels::matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.derived(value, Op::MatMul(a, b), &[a, b]))
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul_bt")?;
        let (n, k2) = self.value(b).dims2("matmul_bt")?;
        if k != k2 {
            return Err(mismatch("matmul_bt", self.shape(a), self.shape(b)));
        }
        let mut out = vec![T::zero(); m * n];
        kernels::matmul_bt_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.derived(value, Op::MatMulBt(a, b), &[a, b]))
    }

    fn broadcast_binary(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
    ) -> Result<Tensor<T>> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let shape = kernels::broadcast_shape(sa, sb).ok_or_else(|| mismatch(op, sa, sb))?;
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let data = if sa == sb {
            va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let ia = kernels::broadcast_index(&shape, sa);
            let ib = kernels::broadcast_index(&shape, sb);
            ia.iter().zip(&ib).map(|(&i, &j)| f(va[i], vb[j])).collect()
        };
        Tensor::new(shape, data)
    }

    /// Elementwise sum. Shapes must have equal rank; each dimension pair must
    /// be equal or contain a 1, which broadcasts.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.broadcast_binary("add", a, b, |x, y| x + y)?;
        Ok(self.derived(value, Op::Add(a, b), &[a, b]))
    }

    /// Elementwise product with the same broadcast rule as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.broadcast_binary("mul", a, b, |x, y| x * y)?;
        Ok(self.derived(value, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let value = self.value(a).map(|x| x * c);
        self.derived(value, Op::Scale(a, c), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.tanh());
        self.derived(value, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.derived(value, Op::Sigmoid(a), &[a])
    }

    /// Softmax along each row of a 2-D tensor. Columns whose mask entry is
    /// `false` get exactly zero probability.
    pub fn row_softmax(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        let (rows, cols) = self.value(a).dims2("row_softmax")?;
        if let Some(m) = mask {
            if m.len() != cols {
                return Err(mismatch("row_softmax", self.shape(a), &[m.len()]));
            }
        }
        let keep = |j: usize| mask.is_none_or(|m| m[j]);
        let src = self.value(a).data();
        let mut out = vec![T::zero(); rows * cols];
        for r in 0..rows {
            let row = &src[r * cols..(r + 1) * cols];
            let max = (0..cols)
                .filter(|&j| keep(j))
                .map(|j| row[j])
                .fold(None, |acc: Option<T>, x| Some(acc.map_or(x, |m| m.max(x))))
                .ok_or(Error::AllMasked { row: r })?;
            let dst = &mut out[r * cols..(r + 1) * cols];
            let mut total = T::zero();
            for j in 0..cols {
                if keep(j) {
                    let e = (row[j] - max).exp();
                    dst[j] = e;
                    total = total + e;
                }
            }
            for v in dst.iter_mut() {
                *v = *v / total;
            }
        }
        let value = Tensor::new(vec![rows, cols], out)?;
        Ok(self.derived(value, Op::RowSoftmax(a), &[a]))
    }

    /// Sums the last dimension away: `[…, d] → […]`.
    pub fn sum_last_dim(&mut self, a: Var) -> Result<Var> {
        let shape = self.shape(a);
        let (&d, lead) = shape
            .split_last()
            .ok_or_else(|| mismatch("sum_last_dim", shape, &[]))?;
        let lead = lead.to_vec();
        let out: Vec<T> = if d == 0 {
            vec![T::zero(); lead.iter().product()]
        } else {
            self.value(a).data().chunks(d).map(|c| c.iter().copied().sum()).collect()
        };
        let value = Tensor::new(lead, out)?;
        Ok(self.derived(value, Op::SumLastDim(a), &[a]))
    }

    /// Sum of all entries as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().copied().sum();
        self.derived(Tensor::scalar(total), Op::Sum(a), &[a])
    }

    /// Binary cross-entropy of `probs` against 0/1 `targets`. Probabilities
    /// are clamped to `[ε, 1-ε]` with ε = 1e-7; the clamp has zero derivative
    /// outside that range.
    pub fn bce(&mut self, probs: Var, targets: &Tensor<T>, reduction: Reduction) -> Result<Var> {
        if self.shape(probs) != targets.shape() {
            return Err(mismatch("bce", self.shape(probs), targets.shape()));
        }
        let eps = T::of(BCE_EPSILON);
        let hi = T::one() - eps;
        let mut total = T::zero();
        for (&p, &t) in self.value(probs).data().iter().zip(targets.data()) {
            let c = p.max(eps).min(hi);
            total = total - (t * c.ln() + (T::one() - t) * (T::one() - c).ln());
        }
        if reduction == Reduction::Mean && targets.numel() > 0 {
            total = total / T::of(targets.numel() as f64);
        }
        let op = Op::Bce {
            probs,
            targets: targets.data().to_vec(),
            reduction,
        };
        Ok(self.derived(Tensor::scalar(total), op, &[probs]))
    }

    /// Row lookup into a `[vocab × dim]` table. The padding id, if given,
    /// yields a zero row and receives no gradient.
    pub fn embedding(&mut self, table: Var, ids: &[usize], padding: Option<usize>) -> Result<Var> {
        let (vocab, dim) = self.value(table).dims2("embedding")?;
        let mut out = vec![T::zero(); ids.len() * dim];
        for (r, &id) in ids.iter().enumerate() {
            if id >= vocab {
                return Err(Error::OutOfRange {
                    what: "vocabulary",
                    index: id,
                    size: vocab,
                });
            }
            if Some(id) != padding {
                out[r * dim..(r + 1) * dim].copy_from_slice(self.value(table).row(id));
            }
        }
        let value = Tensor::new(vec![ids.len(), dim], out)?;
        let op = Op::Embedding {
            table,
            ids: ids.to_vec(),
            padding,
        };
        Ok(self.derived(value, op, &[table]))
    }

    /// One LSTM direction over the first `len` rows of `input [n × d_in]`,
    /// with `w_ih [d_in × 4h]`, `w_hh [h × 4h]`, `bias [4h]` and gates in
    /// `i, f, g, o` order. Output rows at or past `len` are zero.
    pub fn lstm(
        &mut self,
        input: Var,
        w_ih: Var,
        w_hh: Var,
        bias: Var,
        len: usize,
        reverse: bool,
    ) -> Result<Var> {
        let (n, d_in) = self.value(input).dims2("lstm")?;
        let (wi_rows, g4) = self.value(w_ih).dims2("lstm")?;
        let (hidden, g4h) = self.value(w_hh).dims2("lstm")?;
        if wi_rows != d_in || g4 != 4 * hidden || g4h != g4 {
            return Err(mismatch("lstm", self.shape(w_ih), self.shape(w_hh)));
        }
        if self.shape(bias) != [g4] {
            return Err(mismatch("lstm", self.shape(bias), &[g4]));
        }
        if len > n {
            return Err(Error::OutOfRange {
                what: "sequence",
                index: len,
                size: n,
            });
        }
        let (out, cache) = kernels::lstm_forward(
            self.value(input).data(),
            n,
            d_in,
            len,
            hidden,
            self.value(w_ih).data(),
            self.value(w_hh).data(),
            self.value(bias).data(),
            reverse,
        );
        let value = Tensor::new(vec![n, hidden], out)?;
        let op = Op::Lstm {
            input,
            w_ih,
            w_hh,
            bias,
            cache,
        };
        Ok(self.derived(value, op, &[input, w_ih, w_hh, bias]))
    }

    /// `[n × a] ‖ [n × b] → [n × (a+b)]`
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, ca) = self.value(a).dims2("concat_cols")?;
        let (n2, cb) = self.value(b).dims2("concat_cols")?;
        if n != n2 {
            return Err(mismatch("concat_cols", self.shape(a), self.shape(b)));
        }
        let mut out = Vec::with_capacity(n * (ca + cb));
        for r in 0..n {
            out.extend_from_slice(self.value(a).row(r));
            out.extend_from_slice(self.value(b).row(r));
        }
        let value = Tensor::new(vec![n, ca + cb], out)?;
        Ok(self.derived(value, Op::ConcatCols(a, b), &[a, b]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).reshape(shape)?;
        Ok(self.derived(value, Op::Reshape(a), &[a]))
    }

    /// Multiplies by a fixed mask, e.g. inverted-dropout keep/scale factors.
    pub fn dropout(&mut self, a: Var, mask: Vec<T>) -> Result<Var> {
        if mask.len() != self.value(a).numel() {
            return Err(mismatch("dropout", self.shape(a), &[mask.len()]));
        }
        let src = self.value(a);
        let data = src.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        Ok(self.derived(value, Op::Dropout(a, mask), &[a]))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let loss_value = self.value(loss);
        if loss_value.numel() != 1 {
            return Err(Error::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(loss_value.shape(), T::one()));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        // Only leaves keep gradients; intermediates are dropped.
        for (idx, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) {
                grads[idx] = None;
            }
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn reduce_broadcast(&self, g: &Tensor<T>, target: Var, scale: Option<&[T]>) -> Tensor<T> {
        let shape = self.shape(target);
        let mut out = Tensor::zeros(shape);
        let map = kernels::broadcast_index(g.shape(), shape);
        let dst = out.data_mut();
        for (k, (&i, &gv)) in map.iter().zip(g.data()).enumerate() {
            let factor = scale.map_or(T::one(), |s| s[k]);
            dst[i] = dst[i] + gv * factor;
        }
        out
    }

    fn propagate(&self, node: &Node<'p, T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let y = node.value.as_ref();
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k) = va.dims2("matmul")?;
                let n = vb.shape()[1];
                if self.nodes[a.0].needs_grad {
                    let mut da = vec![T::zero(); m * k];
                    kernels::matmul_bt_acc(g.data(), vb.data(), &mut da, m, n, k);
                    self.accumulate(grads, *a, Tensor::new(vec![m, k], da)?);
                }
                if self.nodes[b.0].needs_grad {
                    let mut db = vec![T::zero(); k * n];
                    kernels::matmul_at_acc(va.data(), g.data(), &mut db, m, k, n);
                    self.accumulate(grads, *b, Tensor::new(vec![k, n], db)?);
                }
            }
            Op::MatMulBt(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k) = va.dims2("matmul_bt")?;
                let n = vb.shape()[0];
                if self.nodes[a.0].needs_grad {
                    let mut da = vec![T::zero(); m * k];
                    kernels::matmul_acc(g.data(), vb.data(), &mut da, m, n, k);
                    self.accumulate(grads, *a, Tensor::new(vec![m, k], da)?);
                }
                if self.nodes[b.0].needs_grad {
                    let mut db = vec![T::zero(); n * k];
                    kernels::matmul_at_acc(g.data(), va.data(), &mut db, m, n, k);
                    self.accumulate(grads, *b, Tensor::new(vec![n, k], db)?);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.nodes[v.0].needs_grad {
                        let d = if self.shape(v) == g.shape() {
                            g.clone()
                        } else {
                            self.reduce_broadcast(g, v, None)
                        };
                        self.accumulate(grads, v, d);
                    }
                }
            }
            Op::Mul(a, b) => {
                for (v, other) in [(*a, *b), (*b, *a)] {
                    if !self.nodes[v.0].needs_grad {
                        continue;
                    }
                    let ov = self.value(other);
                    let d = if self.shape(v) == g.shape() && ov.shape() == g.shape() {
                        let data = g.data().iter().zip(ov.data()).map(|(&x, &o)| x * o).collect();
                        Tensor::new(g.shape().to_vec(), data)?
                    } else {
                        let oi = kernels::broadcast_index(g.shape(), ov.shape());
                        let factors: Vec<T> = oi.iter().map(|&i| ov.data()[i]).collect();
                        self.reduce_broadcast(g, v, Some(&factors))
                    };
                    self.accumulate(grads, v, d);
                }
            }
            Op::Scale(a, c) => {
                self.accumulate(grads, *a, g.map(|x| x * *c));
            }
            Op::Tanh(a) => {
                let data = g.data().iter().zip(y.data()).map(|(&d, &t)| d * (T::one() - t * t)).collect();
                self.accumulate(grads, *a, Tensor::new(g.shape().to_vec(), data)?);
            }
            Op::Sigmoid(a) => {
                let data = g.data().iter().zip(y.data()).map(|(&d, &s)| d * s * (T::one() - s)).collect();
                self.accumulate(grads, *a, Tensor::new(g.shape().to_vec(), data)?);
            }
            Op::RowSoftmax(a) => {
                let (rows, cols) = y.dims2("row_softmax")?;
                let mut dx = vec![T::zero(); rows * cols];
                for r in 0..rows {
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let dot: T = yr.iter().zip(gr).map(|(&p, &d)| p * d).sum();
                    for j in 0..cols {
                        dx[r * cols + j] = yr[j] * (gr[j] - dot);
                    }
                }
                self.accumulate(grads, *a, Tensor::new(vec![rows, cols], dx)?);
            }
            Op::SumLastDim(a) => {
                let shape = self.shape(*a).to_vec();
                let d = *shape.last().unwrap_or(&1);
                let mut dx = Vec::with_capacity(g.numel() * d);
                for &gv in g.data() {
                    dx.extend(core::iter::repeat_n(gv, d));
                }
                self.accumulate(grads, *a, Tensor::new(shape, dx)?);
            }
            Op::Sum(a) => {
                let shape = self.shape(*a);
                self.accumulate(grads, *a, Tensor::full(shape, g.item()));
            }
            Op::Bce {
                probs,
                targets,
                reduction,
            } => {
                let eps = T::of(BCE_EPSILON);
                let hi = T::one() - eps;
                let mut factor = g.item();
                if *reduction == Reduction::Mean && !targets.is_empty() {
                    factor = factor / T::of(targets.len() as f64);
                }
                let p = self.value(*probs);
                let data = p
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(&p, &t)| {
                        if p < eps || p > hi {
                            T::zero()
                        } else {
                            factor * ((T::one() - t) / (T::one() - p) - t / p)
                        }
                    })
                    .collect();
                self.accumulate(grads, *probs, Tensor::new(p.shape().to_vec(), data)?);
            }
            Op::Embedding { table, ids, padding } => {
                let shape = self.shape(*table).to_vec();
                let dim = shape[1];
                let mut dt = Tensor::zeros(&shape);
                let dst = dt.data_mut();
                for (r, &id) in ids.iter().enumerate() {
                    if Some(id) == padding.as_ref().copied() {
                        continue;
                    }
                    for j in 0..dim {
                        dst[id * dim + j] = dst[id * dim + j] + g.data()[r * dim + j];
                    }
                }
                self.accumulate(grads, *table, dt);
            }
            Op::Lstm {
                input,
                w_ih,
                w_hh,
                bias,
                cache,
            } => {
                let x = self.value(*input);
                let (n, d_in) = x.dims2("lstm")?;
                let hidden = self.shape(*w_hh)[0];
                let lg = kernels::lstm_backward(
                    x.data(),
                    n,
                    d_in,
                    hidden,
                    self.value(*w_ih).data(),
                    self.value(*w_hh).data(),
                    y.data(),
                    cache,
                    g.data(),
                );
                let g4 = 4 * hidden;
                self.accumulate(grads, *input, Tensor::new(vec![n, d_in], lg.input)?);
                self.accumulate(grads, *w_ih, Tensor::new(vec![d_in, g4], lg.w_ih)?);
                self.accumulate(grads, *w_hh, Tensor::new(vec![hidden, g4], lg.w_hh)?);
                self.accumulate(grads, *bias, Tensor::new(vec![g4], lg.bias)?);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.shape(*a)[1];
                let (n, total) = g.dims2("concat_cols")?;
                let cb = total - ca;
                let mut da = Vec::with_capacity(n * ca);
                let mut db = Vec::with_capacity(n * cb);
                for r in 0..n {
                    let row = g.row(r);
                    da.extend_from_slice(&row[..ca]);
                    db.extend_from_slice(&row[ca..]);
                }
                self.accumulate(grads, *a, Tensor::new(vec![n, ca], da)?);
                self.accumulate(grads, *b, Tensor::new(vec![n, cb], db)?);
            }
            Op::Reshape(a) => {
                let d = g.reshape(self.shape(*a))?;
                self.accumulate(grads, *a, d);
            }
            Op::Dropout(a, mask) => {
                let data = g.data().iter().zip(mask).map(|(&d, &m)| d * m).collect();
                self.accumulate(grads, *a, Tensor::new(g.shape().to_vec(), data)?);
            }
        }
        Ok(())
    }
}
