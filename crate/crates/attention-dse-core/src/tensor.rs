//! Dense f64 matrix kernel with reverse-mode automatic differentiation.
//!
//! Everything is a 2-D row-major matrix; the tape is rebuilt per forward pass
//! (define-by-run). Operations are eager: each builder computes its value
//! immediately and records enough context for the backward sweep, which visits
//! nodes in exact reverse order of creation.
//!
//! The kernel is deliberately small: matrix products, row softmax (with
//! sliding-window masking for attention), affine-free layer normalization,
//! GELU, concatenation/row extraction, and mean-squared-error loss — the ops
//! the attention predictor needs, nothing more. Shape mismatches are
//! programmer errors and panic; numerical failures (NaN) surface as errors at
//! the training-loop level.

use serde::{Deserialize, Serialize};
use std::cell::Cell;
use thiserror::Error;

/// Plain dense matrix. `data.len() == rows * cols`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        Tensor {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn numel(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Attention mask: position `i` may attend to `j` when `|i - j| <= half`, or
/// when either is position 0 and `global_first` is set (the prediction token
/// attends to and is attended by everything).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowMask {
    pub len: usize,
    pub half: usize,
    pub global_first: bool,
}

impl WindowMask {
    /// Window of odd width `window` over a sequence of `len` positions.
    pub fn new(len: usize, window: usize, global_first: bool) -> Self {
        assert!(window % 2 == 1, "window width must be odd");
        WindowMask {
            len,
            half: window / 2,
            global_first,
        }
    }

    /// Degenerate mask equivalent to full self-attention.
    pub fn full(len: usize) -> Self {
        WindowMask {
            len,
            half: len,
            global_first: false,
        }
    }

    #[inline]
    pub fn allowed(&self, i: usize, j: usize) -> bool {
        if self.global_first && (i == 0 || j == 0) {
            return true;
        }
        i.abs_diff(j) <= self.half
    }
}

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(usize, usize),
    /// C = A * B^T
    MatMulNT(usize, usize),
    Add(usize, usize),
    /// rows of `a` plus a 1 x n bias row
    AddRow(usize, usize),
    Scale(usize, f64),
    Gelu(usize),
    /// Row softmax over (possibly -inf masked) logits.
    SoftmaxRows(usize),
    /// scores[i][j] = scale * dot(q[i], k[j]) for unmasked (i, j), -inf elsewhere.
    WindowedScores {
        q: usize,
        k: usize,
        scale: f64,
        mask: WindowMask,
    },
    /// out[i] = sum_j probs[i][j] * v[j], iterating unmasked j only.
    MaskedAttnMatMul {
        probs: usize,
        v: usize,
        mask: WindowMask,
    },
    LayerNorm {
        x: usize,
    },
    /// 1 x cols copy of one row of `table`.
    GatherRow {
        table: usize,
        row: usize,
    },
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    MseLoss(usize, usize),
}

struct Node {
    value: Tensor,
    grad: Vec<f64>,
    op: Op,
    /// Per-op cached forward statistics (layer norm mean / inv-std).
    aux: Vec<f64>,
}

/// Reverse-mode tape. One tape per forward(-and-backward) pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    /// Floating-point operations spent on attention score and weighted-sum
    /// computation, counted over unmasked pairs only. This is the measured
    /// quantity behind the linear-vs-quadratic attention cost comparison.
    attn_ops: Cell<u64>,
}

#[derive(Debug, Error)]
pub enum TapeError {
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn attention_ops(&self) -> u64 {
        self.attn_ops.get()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.push_aux(value, op, Vec::new())
    }

    fn push_aux(&mut self, value: Tensor, op: Op, aux: Vec<f64>) -> Var {
        let grad = vec![0.0; value.numel()];
        self.nodes.push(Node {
            value,
            grad,
            op,
            aux,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor {
            rows: n.value.rows,
            cols: n.value.cols,
            data: n.grad.clone(),
        }
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(
            ta.cols, tb.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            ta.rows, ta.cols, tb.rows, tb.cols
        );
        let (m, k, n) = (ta.rows, ta.cols, tb.cols);
        let mut out = Tensor::zeros(m, n);
        for i in 0..m {
            for p in 0..k {
                let aip = ta.data[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &tb.data[p * n..(p + 1) * n];
                let orow = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += aip * brow[j];
                }
            }
        }
        self.push(out, Op::MatMul(a.0, b.0))
    }

    /// C = A * B^T, with A: m x k and B: n x k.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.cols, tb.cols, "matmul_nt inner dimension mismatch");
        let (m, k, n) = (ta.rows, ta.cols, tb.rows);
        let mut out = Tensor::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += ta.data[i * k + p] * tb.data[j * k + p];
                }
                out.data[i * n + j] = s;
            }
        }
        self.push(out, Op::MatMulNT(a.0, b.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols), "add shape mismatch");
        let mut out = ta.clone();
        for (o, x) in out.data.iter_mut().zip(&tb.data) {
            *o += x;
        }
        self.push(out, Op::Add(a.0, b.0))
    }

    /// Add a 1 x n bias row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[bias.0].value);
        assert_eq!(tb.rows, 1, "bias must be a single row");
        assert_eq!(ta.cols, tb.cols, "bias width mismatch");
        let mut out = ta.clone();
        for i in 0..out.rows {
            for j in 0..out.cols {
                out.data[i * out.cols + j] += tb.data[j];
            }
        }
        self.push(out, Op::AddRow(a.0, bias.0))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let ta = &self.nodes[a.0].value;
        let out = Tensor {
            rows: ta.rows,
            cols: ta.cols,
            data: ta.data.iter().map(|v| v * c).collect(),
        };
        self.push(out, Op::Scale(a.0, c))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let ta = &self.nodes[a.0].value;
        let out = Tensor {
            rows: ta.rows,
            cols: ta.cols,
            data: ta.data.iter().map(|&x| gelu(x)).collect(),
        };
        self.push(out, Op::Gelu(a.0))
    }

    /// Numerically stable row softmax. `-inf` logits become exact zeros.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let ta = &self.nodes[a.0].value;
        assert!(
            ta.data.iter().all(|v| !v.is_nan()),
            "softmax over NaN logits"
        );
        let (m, n) = (ta.rows, ta.cols);
        let mut out = Tensor::zeros(m, n);
        for i in 0..m {
            let row = &ta.data[i * n..(i + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..n {
                let e = if row[j] == f64::NEG_INFINITY {
                    0.0
                } else {
                    (row[j] - max).exp()
                };
                out.data[i * n + j] = e;
                sum += e;
            }
            for j in 0..n {
                out.data[i * n + j] /= sum;
            }
        }
        self.push(out, Op::SoftmaxRows(a.0))
    }

    /// Scaled attention logits computed only over unmasked pairs; masked
    /// entries are `-inf`. Counts 2*d flops per computed pair.
    pub fn windowed_scores(&mut self, q: Var, k: Var, scale: f64, mask: WindowMask) -> Var {
        let (tq, tk) = (&self.nodes[q.0].value, &self.nodes[k.0].value);
        assert_eq!(tq.cols, tk.cols, "q/k width mismatch");
        assert_eq!(tq.rows, tk.rows, "q/k length mismatch");
        assert_eq!(tq.rows, mask.len, "mask length mismatch");
        let (n, d) = (tq.rows, tq.cols);
        let mut out = Tensor {
            rows: n,
            cols: n,
            data: vec![f64::NEG_INFINITY; n * n],
        };
        let mut ops = 0u64;
        for i in 0..n {
            for j in 0..n {
                if !mask.allowed(i, j) {
                    continue;
                }
                let mut s = 0.0;
                for p in 0..d {
                    s += tq.data[i * d + p] * tk.data[j * d + p];
                }
                out.data[i * n + j] = s * scale;
                ops += 2 * d as u64;
            }
        }
        self.attn_ops.set(self.attn_ops.get() + ops);
        self.push(out, Op::WindowedScores { q: q.0, k: k.0, scale, mask })
    }

    /// Weighted sum of value rows, iterating unmasked columns only. Masked
    /// probabilities are exactly zero by construction, so this equals the
    /// dense product.
    pub fn masked_attn_matmul(&mut self, probs: Var, v: Var, mask: WindowMask) -> Var {
        let (tp, tv) = (&self.nodes[probs.0].value, &self.nodes[v.0].value);
        assert_eq!(tp.rows, tp.cols, "probability matrix must be square");
        assert_eq!(tp.cols, tv.rows, "probs/value shape mismatch");
        let (n, d) = (tv.rows, tv.cols);
        let mut out = Tensor::zeros(n, d);
        let mut ops = 0u64;
        for i in 0..n {
            for j in 0..n {
                if !mask.allowed(i, j) {
                    continue;
                }
                let w = tp.data[i * n + j];
                let vrow = &tv.data[j * d..(j + 1) * d];
                let orow = &mut out.data[i * d..(i + 1) * d];
                for p in 0..d {
                    orow[p] += w * vrow[p];
                }
                ops += 2 * d as u64;
            }
        }
        self.attn_ops.set(self.attn_ops.get() + ops);
        self.push(out, Op::MaskedAttnMatMul { probs: probs.0, v: v.0, mask })
    }

    /// Affine-free layer normalization over the last dimension.
    pub fn layer_norm(&mut self, x: Var, eps: f64) -> Var {
        let tx = &self.nodes[x.0].value;
        let (m, n) = (tx.rows, tx.cols);
        let mut out = Tensor::zeros(m, n);
        let mut aux = Vec::with_capacity(2 * m);
        for i in 0..m {
            let row = &tx.data[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            for j in 0..n {
                out.data[i * n + j] = (row[j] - mean) * inv_std;
            }
            aux.push(mean);
            aux.push(inv_std);
        }
        self.push_aux(out, Op::LayerNorm { x: x.0 }, aux)
    }

    /// 1 x cols slice of row `row` of `table` (embedding lookup).
    pub fn gather_row(&mut self, table: Var, row: usize) -> Var {
        let tt = &self.nodes[table.0].value;
        assert!(row < tt.rows, "gather_row out of range");
        let out = Tensor {
            rows: 1,
            cols: tt.cols,
            data: tt.data[row * tt.cols..(row + 1) * tt.cols].to_vec(),
        };
        self.push(out, Op::GatherRow { table: table.0, row })
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let cols = self.nodes[parts[0].0].value.cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let t = &self.nodes[p.0].value;
            assert_eq!(t.cols, cols, "concat_rows width mismatch");
            data.extend_from_slice(&t.data);
            rows += t.rows;
        }
        self.push(
            Tensor { rows, cols, data },
            Op::ConcatRows(parts.iter().map(|v| v.0).collect()),
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.nodes[parts[0].0].value.rows;
        let cols: usize = parts.iter().map(|p| self.nodes[p.0].value.cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            let t = &self.nodes[p.0].value;
            assert_eq!(t.rows, rows, "concat_cols height mismatch");
            for i in 0..rows {
                out.data[i * cols + off..i * cols + off + t.cols]
                    .copy_from_slice(&t.data[i * t.cols..(i + 1) * t.cols]);
            }
            off += t.cols;
        }
        self.push(out, Op::ConcatCols(parts.iter().map(|v| v.0).collect()))
    }

    /// 1 x cols copy of a single row (used to read the prediction token).
    pub fn row(&mut self, x: Var, idx: usize) -> Var {
        self.gather_row(x, idx)
    }

    /// Mean squared error over all entries: mean((a - b)^2), 1 x 1.
    pub fn mse_loss(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols), "mse shape mismatch");
        let n = ta.numel() as f64;
        let loss = ta
            .data
            .iter()
            .zip(&tb.data)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            / n;
        self.push(Tensor::scalar(loss), Op::MseLoss(a.0, b.0))
    }

    /// Backward sweep from `loss` (must be 1 x 1). Gradients accumulate into
    /// every node; read them out with [`Tape::grad`].
    pub fn backward(&mut self, loss: Var) -> Result<(), TapeError> {
        {
            let n = &mut self.nodes[loss.0];
            assert_eq!(n.value.numel(), 1, "backward root must be scalar");
            n.grad[0] = 1.0;
        }
        for idx in (0..=loss.0).rev() {
            // Take the gradient out to appease the borrow checker; ops never
            // read their own grad after this point.
            let grad = std::mem::take(&mut self.nodes[idx].grad);
            if grad.iter().all(|&g| g == 0.0) {
                self.nodes[idx].grad = grad;
                continue;
            }
            match &self.nodes[idx].op {
                Op::Leaf => {}
                &Op::MatMul(a, b) => {
                    let (m, k) = (self.nodes[a].value.rows, self.nodes[a].value.cols);
                    let n = self.nodes[b].value.cols;
                    // dA += dC * B^T ; dB += A^T * dC
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += grad[i * n + j] * self.nodes[b].value.data[p * n + j];
                            }
                            self.nodes[a].grad[i * k + p] += s;
                        }
                    }
                    for p in 0..k {
                        for j in 0..n {
                            let mut s = 0.0;
                            for i in 0..m {
                                s += self.nodes[a].value.data[i * k + p] * grad[i * n + j];
                            }
                            self.nodes[b].grad[p * n + j] += s;
                        }
                    }
                }
                &Op::MatMulNT(a, b) => {
                    // C = A * B^T: dA += dC * B ; dB += dC^T * A
                    let (m, k) = (self.nodes[a].value.rows, self.nodes[a].value.cols);
                    let n = self.nodes[b].value.rows;
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += grad[i * n + j] * self.nodes[b].value.data[j * k + p];
                            }
                            self.nodes[a].grad[i * k + p] += s;
                        }
                    }
                    for j in 0..n {
                        for p in 0..k {
                            let mut s = 0.0;
                            for i in 0..m {
                                s += grad[i * n + j] * self.nodes[a].value.data[i * k + p];
                            }
                            self.nodes[b].grad[j * k + p] += s;
                        }
                    }
                }
                &Op::Add(a, b) => {
                    for (i, g) in grad.iter().enumerate() {
                        self.nodes[a].grad[i] += g;
                        self.nodes[b].grad[i] += g;
                    }
                }
                &Op::AddRow(a, bias) => {
                    let cols = self.nodes[bias].value.cols;
                    for (i, g) in grad.iter().enumerate() {
                        self.nodes[a].grad[i] += g;
                        self.nodes[bias].grad[i % cols] += g;
                    }
                }
                &Op::Scale(a, c) => {
                    for (i, g) in grad.iter().enumerate() {
                        self.nodes[a].grad[i] += g * c;
                    }
                }
                &Op::Gelu(a) => {
                    for (i, g) in grad.iter().enumerate() {
                        let x = self.nodes[a].value.data[i];
                        self.nodes[a].grad[i] += g * gelu_grad(x);
                    }
                }
                &Op::SoftmaxRows(a) => {
                    let p = self.nodes[idx].value.clone();
                    let (m, n) = (p.rows, p.cols);
                    for i in 0..m {
                        let prow = &p.data[i * n..(i + 1) * n];
                        let grow = &grad[i * n..(i + 1) * n];
                        let dot: f64 = prow.iter().zip(grow).map(|(p, g)| p * g).sum();
                        for j in 0..n {
                            self.nodes[a].grad[i * n + j] += prow[j] * (grow[j] - dot);
                        }
                    }
                }
                &Op::WindowedScores { q, k, scale, mask } => {
                    let d = self.nodes[q].value.cols;
                    let n = mask.len;
                    for i in 0..n {
                        for j in 0..n {
                            if !mask.allowed(i, j) {
                                continue;
                            }
                            let g = grad[i * n + j] * scale;
                            if g == 0.0 {
                                continue;
                            }
                            for p in 0..d {
                                let qv = self.nodes[q].value.data[i * d + p];
                                let kv = self.nodes[k].value.data[j * d + p];
                                self.nodes[q].grad[i * d + p] += g * kv;
                                self.nodes[k].grad[j * d + p] += g * qv;
                            }
                        }
                    }
                }
                &Op::MaskedAttnMatMul { probs, v, mask } => {
                    let n = mask.len;
                    let d = self.nodes[v].value.cols;
                    for i in 0..n {
                        for j in 0..n {
                            if !mask.allowed(i, j) {
                                continue;
                            }
                            let w = self.nodes[probs].value.data[i * n + j];
                            let mut gp = 0.0;
                            for p in 0..d {
                                let g = grad[i * d + p];
                                gp += g * self.nodes[v].value.data[j * d + p];
                                self.nodes[v].grad[j * d + p] += g * w;
                            }
                            self.nodes[probs].grad[i * n + j] += gp;
                        }
                    }
                }
                &Op::LayerNorm { x } => {
                    let y = self.nodes[idx].value.clone();
                    let aux = self.nodes[idx].aux.clone();
                    let (m, n) = (y.rows, y.cols);
                    let nf = n as f64;
                    for i in 0..m {
                        let inv_std = aux[2 * i + 1];
                        let yrow = &y.data[i * n..(i + 1) * n];
                        let grow = &grad[i * n..(i + 1) * n];
                        let g_mean: f64 = grow.iter().sum::<f64>() / nf;
                        let gy_mean: f64 =
                            grow.iter().zip(yrow).map(|(g, y)| g * y).sum::<f64>() / nf;
                        for j in 0..n {
                            self.nodes[x].grad[i * n + j] +=
                                inv_std * (grow[j] - g_mean - yrow[j] * gy_mean);
                        }
                    }
                }
                &Op::GatherRow { table, row } => {
                    let cols = self.nodes[table].value.cols;
                    for j in 0..cols {
                        self.nodes[table].grad[row * cols + j] += grad[j];
                    }
                }
                Op::ConcatRows(parts) => {
                    let parts = parts.clone();
                    let mut off = 0;
                    for p in parts {
                        let sz = self.nodes[p].value.numel();
                        for i in 0..sz {
                            self.nodes[p].grad[i] += grad[off + i];
                        }
                        off += sz;
                    }
                }
                Op::ConcatCols(parts) => {
                    let parts = parts.clone();
                    let rows = self.nodes[idx].value.rows;
                    let total_cols = self.nodes[idx].value.cols;
                    let mut off = 0;
                    for p in parts {
                        let c = self.nodes[p].value.cols;
                        for i in 0..rows {
                            for j in 0..c {
                                self.nodes[p].grad[i * c + j] += grad[i * total_cols + off + j];
                            }
                        }
                        off += c;
                    }
                }
                &Op::MseLoss(a, b) => {
                    let n = self.nodes[a].value.numel() as f64;
                    let g = grad[0] * 2.0 / n;
                    for i in 0..self.nodes[a].value.numel() {
                        let diff =
                            self.nodes[a].value.data[i] - self.nodes[b].value.data[i];
                        self.nodes[a].grad[i] += g * diff;
                        self.nodes[b].grad[i] -= g * diff;
                    }
                }
            }
            self.nodes[idx].grad = grad;
        }
        for n in &self.nodes {
            if n.grad.iter().any(|g| !g.is_finite()) {
                return Err(TapeError::NonFinite("gradient"));
            }
        }
        Ok(())
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

#[inline]
fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(usize),
}

/// Gradient descent with optional classical momentum.
pub struct SgdOptimizer {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl SgdOptimizer {
    pub fn new(lr: f64, momentum: f64) -> Self {
        assert!(lr > 0.0, "learning rate must be positive");
        SgdOptimizer {
            lr,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), OptimError> {
        assert_eq!(params.len(), grads.len());
        if self.velocity.len() != params.len() {
            self.velocity = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        }
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(p.numel(), g.numel(), "parameter/gradient shape mismatch");
            if !g.is_finite() {
                return Err(OptimError::NonFiniteGradient(i));
            }
            let v = &mut self.velocity[i];
            for j in 0..p.data.len() {
                v[j] = self.momentum * v[j] + g.data[j];
                p.data[j] -= self.lr * v[j];
            }
        }
        Ok(())
    }
}
