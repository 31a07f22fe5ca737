//! Independent reference implementations used only by tests: plain nested
//! loops over `Vec<Vec<f64>>`, with no shared code with the engine.
#![allow(dead_code)]

use std::collections::BTreeSet;

pub type Mat = Vec<Vec<f64>>;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `softmax` over the columns where `keep` is true; other entries are 0.
pub fn masked_softmax(row: &[f64], keep: &[bool]) -> Vec<f64> {
    let exps: Vec<f64> = row
        .iter()
        .zip(keep)
        .map(|(&x, &k)| if k { x.exp() } else { 0.0 })
        .collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

fn label_attention(labels: &Mat, w: &Mat, h: &Mat, mask: &[bool]) -> Mat {
    let n = h.len();
    let d = h[0].len();
    let de = w.len();
    // tanh(W Hᵀ): [d_e × n]
    let mut t = vec![vec![0.0; n]; de];
    for a in 0..de {
        for j in 0..n {
            let mut s = 0.0;
            for b in 0..d {
                s += w[a][b] * h[j][b];
            }
            t[a][j] = s.tanh();
        }
    }
    let mut att = Vec::new();
    for label in labels {
        let scores: Vec<f64> = (0..n)
            .map(|j| (0..de).map(|a| label[a] * t[a][j]).sum())
            .collect();
        let weights = masked_softmax(&scores, mask);
        let ctx: Vec<f64> = (0..d)
            .map(|b| (0..n).map(|j| weights[j] * h[j][b]).sum())
            .collect();
        att.push(ctx);
    }
    att
}

fn rowwise_dot(v: &Mat, att: &Mat) -> Vec<f64> {
    v.iter()
        .zip(att)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
        .collect()
}

/// Parent probabilities: sigmoid of row sums of `V ⊙ softmax(P tanh(W Hᵀ)) H`.
pub fn decode_parent(h: &Mat, mask: &[bool], p: &Mat, w: &Mat, v: &Mat) -> Vec<f64> {
    let att = label_attention(p, w, h, mask);
    rowwise_dot(v, &att).into_iter().map(sigmoid).collect()
}

pub struct ChildWeights<'a> {
    pub l: &'a Mat,
    pub p: &'a Mat,
    pub w_p: &'a Mat,
    pub w_l: &'a Mat,
    pub v_lh: &'a Mat,
    pub v_lp: &'a Mat,
}

/// Child probabilities from the soft parent embedding and document attention.
pub fn decode_child(h: &Mat, mask: &[bool], parent_probs: &[f64], cw: &ChildWeights) -> Vec<f64> {
    let de = cw.w_p.len();
    let lp = parent_probs.len();
    // tanh(W_P ⊙ probs broadcast over rows): [d_e × |L_P|]
    let soft: Mat = (0..de)
        .map(|a| (0..lp).map(|j| (cw.w_p[a][j] * parent_probs[j]).tanh()).collect())
        .collect();
    let all = vec![true; lp];
    let mut att_p = Vec::new();
    for label in cw.l {
        let scores: Vec<f64> = (0..lp)
            .map(|j| (0..de).map(|a| label[a] * soft[a][j]).sum())
            .collect();
        let weights = masked_softmax(&scores, &all);
        att_p.push((0..de).map(|a| (0..lp).map(|j| weights[j] * cw.p[j][a]).sum()).collect());
    }
    let att_h = label_attention(cw.l, cw.w_l, h, mask);
    let lh = rowwise_dot(cw.v_lh, &att_h);
    let lpl = rowwise_dot(cw.v_lp, &att_p);
    lh.iter().zip(&lpl).map(|(a, b)| sigmoid(a + b)).collect()
}

/// One LSTM direction with gates `i, f, g, o`; weights `[in × 4h]`, `[h × 4h]`.
pub fn lstm_direction(x: &Mat, w_ih: &Mat, w_hh: &Mat, bias: &[f64], reverse: bool) -> Mat {
    let n = x.len();
    let hd = w_hh.len();
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    let mut out = vec![vec![0.0; hd]; n];
    let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
    for t in order {
        let z: Vec<f64> = (0..4 * hd)
            .map(|k| {
                bias[k]
                    + (0..x[t].len()).map(|a| x[t][a] * w_ih[a][k]).sum::<f64>()
                    + (0..hd).map(|a| h[a] * w_hh[a][k]).sum::<f64>()
            })
            .collect();
        for j in 0..hd {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[hd + j]);
            let g = z[2 * hd + j].tanh();
            let o = sigmoid(z[3 * hd + j]);
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        out[t] = h.clone();
    }
    out
}

/// Macro/micro F1 from a dense `docs × labels` confusion table.
pub fn f1_dense(pred: &[BTreeSet<usize>], gold: &[BTreeSet<usize>], num_labels: usize) -> (f64, f64) {
    let mut table = vec![[0u64; 3]; num_labels];
    for d in 0..pred.len() {
        for l in 0..num_labels {
            match (pred[d].contains(&l), gold[d].contains(&l)) {
                (true, true) => table[l][0] += 1,
                (true, false) => table[l][1] += 1,
                (false, true) => table[l][2] += 1,
                (false, false) => {}
            }
        }
    }
    let f1 = |tp: u64, fp: u64, fn_: u64| {
        if 2 * tp + fp + fn_ == 0 {
            0.0
        } else {
            (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    let mut macro_sum = 0.0;
    let mut active = 0;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for row in &table {
        tp += row[0];
        fp += row[1];
        fn_ += row[2];
        if row.iter().sum::<u64>() > 0 {
            macro_sum += f1(row[0], row[1], row[2]);
            active += 1;
        }
    }
    let macro_f1 = if active == 0 { 0.0 } else { macro_sum / active as f64 };
    (macro_f1, f1(tp, fp, fn_))
}

/// AUC from every positive/negative pair: wins count 2, ties 1, over 2·pairs.
pub fn auc_pairwise(pairs: &[(f64, bool)]) -> Option<f64> {
    let pos: Vec<f64> = pairs.iter().filter(|p| p.1).map(|p| p.0).collect();
    let neg: Vec<f64> = pairs.iter().filter(|p| !p.1).map(|p| p.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut doubled: u128 = 0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                doubled += 2;
            } else if p == n {
                doubled += 1;
            }
        }
    }
    Some(doubled as f64 / (2 * pos.len() * neg.len()) as f64)
}

pub fn auc_brute(scores: &[Vec<f64>], gold: &[BTreeSet<usize>]) -> (Option<f64>, Option<f64>) {
    let num_labels = scores[0].len();
    let mut sum = 0.0;
    let mut valid = 0;
    for l in 0..num_labels {
        let col: Vec<(f64, bool)> = (0..scores.len()).map(|d| (scores[d][l], gold[d].contains(&l))).collect();
        if let Some(a) = auc_pairwise(&col) {
            sum += a;
            valid += 1;
        }
    }
    let mut flat = Vec::new();
    for d in 0..scores.len() {
        for l in 0..num_labels {
            flat.push((scores[d][l], gold[d].contains(&l)));
        }
    }
    ((valid > 0).then(|| sum / valid as f64), auc_pairwise(&flat))
}

/// Sorts each row (score desc, index asc), counts gold hits in the top k.
pub fn precision_at_k_sorted(scores: &[Vec<f64>], gold: &[BTreeSet<usize>], k: usize) -> f64 {
    let mut total = 0.0;
    for (row, g) in scores.iter().zip(gold) {
        let mut pairs: Vec<(f64, usize)> = row.iter().copied().zip(0..).collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let hits = pairs[..k].iter().filter(|(_, l)| g.contains(l)).count();
        total += hits as f64 / k as f64;
    }
    total / scores.len() as f64
}

/// Central finite difference of `f` at every coordinate of `x`.
pub fn finite_difference(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, 1e-4)`; the floor keeps near-zero gradients
/// from amplifying finite-difference round-off.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Deterministic pseudo-random numbers for building test instances.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 11
    }
    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next_u64() as f64 / (1u64 << 53) as f64)
    }
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
    pub fn matrix(&mut self, rows: usize, cols: usize, scale: f64) -> Mat {
        (0..rows).map(|_| (0..cols).map(|_| self.uniform(-scale, scale)).collect()).collect()
    }
}

/// Random score matrix and gold sets. Scores are sometimes quantized so
/// that ties occur; some labels end up all-positive or all-negative.
pub fn random_instance(rng: &mut Lcg, max_docs: usize, max_labels: usize) -> (Vec<Vec<f64>>, Vec<BTreeSet<usize>>) {
    let docs = 1 + rng.below(max_docs);
    let labels = 1 + rng.below(max_labels);
    let levels = [0usize, 3, 10, 1000][rng.below(4)];
    let density = rng.uniform(0.02, 0.6);
    let mut scores = Vec::with_capacity(docs);
    let mut gold = Vec::with_capacity(docs);
    for _ in 0..docs {
        let mut row = Vec::with_capacity(labels);
        let mut g = BTreeSet::new();
        for l in 0..labels {
            let s = rng.uniform(0.0, 1.0);
            row.push(if levels == 0 { s } else { (s * levels as f64).floor() / levels as f64 });
            if rng.uniform(0.0, 1.0) < density {
                g.insert(l);
            }
        }
        scores.push(row);
        gold.push(g);
    }
    (scores, gold)
}

/// Every grid pair scored by recounting joint-rule predictions; returns the
/// best `(parent, child)` with ties to (0.5, 0.5), then the smaller pair.
pub fn tune_brute(
    parent_probs: &[Vec<f64>],
    child_probs: &[Vec<f64>],
    child_parent: &[usize],
    gold: &[BTreeSet<usize>],
    n: usize,
) -> (f64, f64) {
    let total_gold: usize = gold.iter().map(BTreeSet::len).sum();
    let mut best: Option<((usize, usize), usize, usize)> = None;
    let better = |a: (usize, usize), b: (usize, usize)| (a.0 as u128) * (b.1 as u128) > (b.0 as u128) * (a.1 as u128);
    let half = (n % 2 == 0).then_some(n / 2);
    let mut half_score = None;
    for i in 1..n {
        for j in 1..n {
            let (tp_thr, tc_thr) = (i as f64 / n as f64, j as f64 / n as f64);
            let mut tp = 0;
            let mut predicted = 0;
            for d in 0..child_probs.len() {
                for (c, &p) in child_probs[d].iter().enumerate() {
                    if p > tc_thr && parent_probs[d][child_parent[c]] > tp_thr {
                        predicted += 1;
                        if gold[d].contains(&c) {
                            tp += 1;
                        }
                    }
                }
            }
            let f1 = (2 * tp, (predicted + total_gold).max(1));
            if Some(i) == half && Some(j) == half {
                half_score = Some(f1);
            }
            if best.map_or(true, |(b, _, _)| better(f1, b)) {
                best = Some((f1, i, j));
            }
        }
    }
    let (f1, i, j) = best.unwrap();
    if let (Some(h), Some(hs)) = (half, half_score) {
        if !better(f1, hs) {
            return (h as f64 / n as f64, h as f64 / n as f64);
        }
    }
    (i as f64 / n as f64, j as f64 / n as f64)
}
