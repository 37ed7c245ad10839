//! Minimal reverse-mode differentiation over dense matrices.
//!
//! Values are recorded in evaluation order; `backward` walks the tape in
//! reverse and accumulates gradients only for variables that need them.

use ndarray::{Array2, Axis, Zip};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf { param: Option<usize> },
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Silu(Var),
    Gather(Var, Vec<usize>),
    /// Rows averaged into `out[idx[r]]`; `inv[r]` is `1 / |bucket|`.
    ScatterMean(Var, Vec<usize>, Vec<f64>),
    /// `Σ_r w_r · CE(softmax(x_r), y_r)`; keeps the softmax for backward.
    CrossEntropy(Var, Vec<usize>, Vec<f64>, Array2<f64>),
    Sum(Var, Var),
    Scale(Var, f64),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf { param: None }, false)
    }

    /// A trainable leaf; its gradient is reported under `index`.
    pub fn param(&mut self, value: Array2<f64>, index: usize) -> Var {
        self.push(value, Op::Leaf { param: Some(index) }, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::MatMul(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::Add(a, b), ng)
    }

    /// Adds a `1 × h` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let v = self.value(a) + self.value(bias);
        let ng = self.needs(a) || self.needs(bias);
        self.push(v, Op::AddRow(a, bias), ng)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x / (1.0 + (-x).exp()));
        let ng = self.needs(a);
        self.push(v, Op::Silu(a), ng)
    }

    pub fn gather(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let v = self.value(a).select(Axis(0), &idx);
        let ng = self.needs(a);
        self.push(v, Op::Gather(a, idx), ng)
    }

    /// Averages the rows of `a` into `rows` buckets given by `idx`. Empty
    /// buckets stay zero.
    pub fn scatter_mean(&mut self, a: Var, idx: Vec<usize>, rows: usize) -> Var {
        let mut count = vec![0usize; rows];
        for &i in &idx {
            count[i] += 1;
        }
        let inv: Vec<f64> = idx.iter().map(|&i| 1.0 / count[i] as f64).collect();
        let src = self.value(a);
        let mut out = Array2::zeros((rows, src.ncols()));
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(i).scaled_add(inv[r], &src.row(r));
        }
        let ng = self.needs(a);
        self.push(out, Op::ScatterMean(a, idx, inv), ng)
    }

    /// Weighted softmax cross-entropy summed over rows, as a `1 × 1` value.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<usize>, weights: Vec<f64>) -> Var {
        let probs = softmax_rows(self.value(logits));
        let mut total = 0.0;
        for (r, (&y, &w)) in targets.iter().zip(&weights).enumerate() {
            if w != 0.0 {
                total -= w * log_softmax_at(self.value(logits).row(r).as_slice().unwrap(), y);
            }
        }
        let ng = self.needs(logits);
        self.push(
            Array2::from_elem((1, 1), total),
            Op::CrossEntropy(logits, targets, weights, probs),
            ng,
        )
    }

    pub fn sum(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::Sum(a, b), ng)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        let ng = self.needs(a);
        self.push(v, Op::Scale(a, c), ng)
    }

    /// Gradients of the scalar `out` with respect to every parameter leaf,
    /// indexed by the leaf's parameter index.
    pub fn backward(&self, out: Var, num_params: usize) -> Vec<Option<Array2<f64>>> {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Array2::ones(self.value(out).raw_dim()));
        let mut result = vec![None; num_params];
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf { param } => {
                    if let Some(p) = param {
                        result[*p] = Some(g);
                    }
                }
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], g.dot(&self.value(*b).t()));
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads[b.0], self.value(*a).t().dot(&g));
                    }
                }
                Op::Add(a, b) | Op::Sum(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], g.clone());
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads[b.0], g);
                    }
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads[a.0], g * *c);
                }
                Op::AddRow(a, bias) => {
                    if self.needs(*bias) {
                        accumulate(&mut grads[bias.0], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], g);
                    }
                }
                Op::Silu(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                        let s = 1.0 / (1.0 + (-x).exp());
                        *d *= s * (1.0 + x * (1.0 - s));
                    });
                    accumulate(&mut grads[a.0], d);
                }
                Op::Gather(a, idx) => {
                    let mut d = Array2::zeros(self.value(*a).raw_dim());
                    for (r, &j) in idx.iter().enumerate() {
                        d.row_mut(j).scaled_add(1.0, &g.row(r));
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::ScatterMean(a, idx, inv) => {
                    let mut d = Array2::zeros(self.value(*a).raw_dim());
                    for (r, &j) in idx.iter().enumerate() {
                        d.row_mut(r).scaled_add(inv[r], &g.row(j));
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::CrossEntropy(a, targets, weights, probs) => {
                    let scale = g[[0, 0]];
                    let mut d = probs.clone();
                    for (r, (&y, &w)) in targets.iter().zip(weights).enumerate() {
                        let mut row = d.row_mut(r);
                        row[y] -= 1.0;
                        row *= w * scale;
                    }
                    accumulate(&mut grads[a.0], d);
                }
            }
        }
        result
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

pub(crate) fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let z = row.sum();
        row /= z;
    }
    out
}

fn log_softmax_at(row: &[f64], y: usize) -> f64 {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row[y] - lse
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    // f(W) = CE(silu(X W) + b) against finite differences
    fn eval(w: &Array2<f64>, b: &Array2<f64>) -> (f64, Vec<Option<Array2<f64>>>) {
        let mut t = Tape::new();
        let x = t.constant(array![[0.3, -1.2], [0.8, 0.1], [-0.5, 0.7]]);
        let wv = t.param(w.clone(), 0);
        let bv = t.param(b.clone(), 1);
        let h = t.matmul(x, wv);
        let h = t.silu(h);
        let g = t.gather(h, vec![2, 0, 0, 1]);
        let s = t.scatter_mean(g, vec![0, 1, 1, 0], 2);
        let s = t.add_row(s, bv);
        let l = t.cross_entropy(s, vec![1, 2], vec![0.5, 2.0]);
        (t.value(l)[[0, 0]], t.backward(l, 2))
    }

    #[test]
    fn matches_finite_differences() {
        let w = array![[0.2, -0.4, 0.9], [1.1, 0.3, -0.6]];
        let b = array![[0.05, -0.1, 0.2]];
        let (_, grads) = eval(&w, &b);
        let gw = grads[0].as_ref().unwrap();
        let gb = grads[1].as_ref().unwrap();
        let h = 1e-5;
        for i in 0..2 {
            for j in 0..3 {
                let mut wp = w.clone();
                wp[[i, j]] += h;
                let mut wm = w.clone();
                wm[[i, j]] -= h;
                let fd = (eval(&wp, &b).0 - eval(&wm, &b).0) / (2.0 * h);
                assert!((fd - gw[[i, j]]).abs() < 1e-8, "{fd} vs {}", gw[[i, j]]);
            }
        }
        for j in 0..3 {
            let mut bp = b.clone();
            bp[[0, j]] += h;
            let mut bm = b.clone();
            bm[[0, j]] -= h;
            let fd = (eval(&w, &bp).0 - eval(&w, &bm).0) / (2.0 * h);
            assert!((fd - gb[[0, j]]).abs() < 1e-8);
        }
    }

    #[test]
    fn uniform_logits_cost_ln_m() {
        let mut t = Tape::new();
        let x = t.constant(Array2::zeros((3, 4)));
        let l = t.cross_entropy(x, vec![0, 1, 3], vec![1.0; 3]);
        assert!((t.value(l)[[0, 0]] - 3.0 * 4f64.ln()).abs() < 1e-12);
    }
}
