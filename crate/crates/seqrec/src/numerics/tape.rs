//! Wengert tape: forward ops recorded in creation order, replayed in reverse
//! for gradients.
//!
//! Node indices are only ever created after their inputs, so walking the node
//! list backwards visits the graph in reverse topological order exactly once.
//! Gradients accumulate additively across fan-out. A tape is confined to one
//! thread of execution; independent tapes may run in parallel.

use rand::Rng;

use super::tensor::{NumericsError, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    /// `[m,k] x [k,p] -> [m,p]`
    Matmul { a: VarId, b: VarId },
    /// `[m,k] x [p,k]^T -> [m,p]`
    MatmulNt { a: VarId, b: VarId },
    Add { a: VarId, b: VarId },
    Mul { a: VarId, b: VarId },
    Scale { x: VarId, factor: f64 },
    /// `[r,c] + [c]` broadcast over rows.
    AddRowBroadcast { x: VarId, row: VarId },
    Softmax { x: VarId, axis: usize },
    LogSoftmax { x: VarId, axis: usize },
    /// Normalizes the last axis; `gain`/`shift` have that extent.
    LayerNorm { x: VarId, gain: VarId, shift: VarId, epsilon: f64 },
    Gelu { x: VarId },
    Softplus { x: VarId },
    SliceCols { x: VarId, start: usize },
    ConcatCols { parts: Vec<VarId> },
    SliceRows { x: VarId, start: usize },
    GatherRows { table: VarId, indices: Vec<usize> },
    /// Picks `(row, col)` entries of a matrix into a vector.
    PickElements { x: VarId, positions: Vec<(usize, usize)> },
    Sum { x: VarId },
    /// Mask entries are 0 or 1/(1-rate) (inverted dropout).
    Dropout { x: VarId, mask: Vec<f64> },
}

struct Node {
    value: Tensor,
    needs_grad: bool,
    op: Op,
}

/// Gradients of one backward pass, indexed by the ids of the consumed tape.
#[derive(Debug)]
pub struct Gradients {
    entries: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: VarId) -> Option<&Tensor> {
        self.entries.get(id.0).and_then(|e| e.as_ref())
    }

    pub fn take(&mut self, id: VarId) -> Option<Tensor> {
        self.entries.get_mut(id.0).and_then(|e| e.take())
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Registers a leaf. Tracked by backward iff `t.grad_required()`.
    pub fn input(&mut self, t: Tensor) -> VarId {
        let needs_grad = t.grad_required();
        self.push(t, needs_grad, Op::Leaf)
    }

    /// Registers a leaf that never receives gradient.
    pub fn constant(&mut self, t: Tensor) -> VarId {
        self.push(t, false, Op::Leaf)
    }

    fn push(&mut self, value: Tensor, needs_grad: bool, op: Op) -> VarId {
        self.nodes.push(Node { value, needs_grad, op });
        VarId(self.nodes.len() - 1)
    }

    fn needs(&self, ids: &[VarId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].needs_grad)
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> Result<VarId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows() {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, k, p) = (ta.rows(), ta.cols(), tb.cols());
        let data = matmul_raw(ta.data(), tb.data(), m, k, p);
        let out = Tensor::new(vec![m, p], data).expect("matmul shape");
        let ng = self.needs(&[a, b]);
        Ok(self.push(out, ng, Op::Matmul { a, b }))
    }

    /// `a @ b^T` without materializing the transpose.
    pub fn matmul_nt(&mut self, a: VarId, b: VarId) -> Result<VarId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.cols() {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul_nt",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, k, p) = (ta.rows(), ta.cols(), tb.rows());
        let data = matmul_nt_raw(ta.data(), tb.data(), m, k, p);
        let out = Tensor::new(vec![m, p], data).expect("matmul_nt shape");
        let ng = self.needs(&[a, b]);
        Ok(self.push(out, ng, Op::MatmulNt { a, b }))
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "add shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(ta.shape().to_vec(), data).expect("add shape");
        let ng = self.needs(&[a, b]);
        self.push(out, ng, Op::Add { a, b })
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "mul shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(ta.shape().to_vec(), data).expect("mul shape");
        let ng = self.needs(&[a, b]);
        self.push(out, ng, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: VarId, factor: f64) -> VarId {
        let t = self.value(x);
        let data = t.data().iter().map(|v| v * factor).collect();
        let out = Tensor::new(t.shape().to_vec(), data).expect("scale shape");
        let ng = self.needs(&[x]);
        self.push(out, ng, Op::Scale { x, factor })
    }

    pub fn add_row_broadcast(&mut self, x: VarId, row: VarId) -> VarId {
        let (tx, tr) = (self.value(x), self.value(row));
        assert_eq!(tx.rank(), 2, "add_row_broadcast lhs must be a matrix");
        assert_eq!(tr.shape(), &[tx.cols()], "broadcast row extent mismatch");
        let c = tx.cols();
        let data = tx
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + tr.data()[i % c])
            .collect();
        let out = Tensor::new(tx.shape().to_vec(), data).expect("add_row_broadcast shape");
        let ng = self.needs(&[x, row]);
        self.push(out, ng, Op::AddRowBroadcast { x, row })
    }

    /// Numerically stabilized softmax along `axis`.
    pub fn softmax(&mut self, x: VarId, axis: usize) -> Result<VarId, NumericsError> {
        let t = self.value(x);
        let (lane_len, lanes) = lanes(t.shape(), axis)?;
        let mut data = t.data().to_vec();
        for &(base, stride) in &lanes {
            softmax_lane(&mut data, base, stride, lane_len);
        }
        let out = Tensor::new(t.shape().to_vec(), data).expect("softmax shape");
        let ng = self.needs(&[x]);
        Ok(self.push(out, ng, Op::Softmax { x, axis }))
    }

    pub fn log_softmax(&mut self, x: VarId, axis: usize) -> Result<VarId, NumericsError> {
        let t = self.value(x);
        let (lane_len, lanes) = lanes(t.shape(), axis)?;
        let mut data = t.data().to_vec();
        for &(base, stride) in &lanes {
            let mut max = f64::NEG_INFINITY;
            for i in 0..lane_len {
                max = max.max(data[base + i * stride]);
            }
            let mut sum = 0.0;
            for i in 0..lane_len {
                sum += (data[base + i * stride] - max).exp();
            }
            let lse = max + sum.ln();
            for i in 0..lane_len {
                data[base + i * stride] -= lse;
            }
        }
        let out = Tensor::new(t.shape().to_vec(), data).expect("log_softmax shape");
        let ng = self.needs(&[x]);
        Ok(self.push(out, ng, Op::LogSoftmax { x, axis }))
    }

    /// Layer normalization over the last axis, then `gain * x_hat + shift`.
    pub fn layer_norm(
        &mut self,
        x: VarId,
        gain: VarId,
        shift: VarId,
        epsilon: f64,
    ) -> VarId {
        let (tx, tg, ts) = (self.value(x), self.value(gain), self.value(shift));
        let last = *tx.shape().last().expect("layer_norm on scalar");
        assert_eq!(tg.shape(), &[last], "layer_norm gain extent mismatch");
        assert_eq!(ts.shape(), &[last], "layer_norm shift extent mismatch");
        let rows = tx.len() / last;
        let mut data = vec![0.0; tx.len()];
        for r in 0..rows {
            let xs = &tx.data()[r * last..(r + 1) * last];
            let (mean, inv_std) = moments(xs, epsilon);
            for j in 0..last {
                let xhat = (xs[j] - mean) * inv_std;
                data[r * last + j] = tg.data()[j] * xhat + ts.data()[j];
            }
        }
        let out = Tensor::new(tx.shape().to_vec(), data).expect("layer_norm shape");
        let ng = self.needs(&[x, gain, shift]);
        self.push(out, ng, Op::LayerNorm { x, gain, shift, epsilon })
    }

    /// Gaussian error linear unit (tanh approximation).
    pub fn gelu(&mut self, x: VarId) -> VarId {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| gelu_scalar(v)).collect();
        let out = Tensor::new(t.shape().to_vec(), data).expect("gelu shape");
        let ng = self.needs(&[x]);
        self.push(out, ng, Op::Gelu { x })
    }

    pub fn softplus(&mut self, x: VarId) -> VarId {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| softplus_scalar(v)).collect();
        let out = Tensor::new(t.shape().to_vec(), data).expect("softplus shape");
        let ng = self.needs(&[x]);
        self.push(out, ng, Op::Softplus { x })
    }

    pub fn slice_cols(&mut self, x: VarId, start: usize, width: usize) -> VarId {
        let t = self.value(x);
        let (r, c) = (t.rows(), t.cols());
        assert!(start + width <= c, "slice_cols out of range");
        let mut data = Vec::with_capacity(r * width);
        for i in 0..r {
            data.extend_from_slice(&t.data()[i * c + start..i * c + start + width]);
        }
        let out = Tensor::new(vec![r, width], data).expect("slice_cols shape");
        let ng = self.needs(&[x]);
        self.push(out, ng, Op::SliceCols { x, start })
    }

    pub fn concat_cols(&mut self, parts: &[VarId]) -> VarId {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let r = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for &p in parts {
                let t = self.value(p);
                assert_eq!(t.rows(), r, "concat_cols row mismatch");
                data.extend_from_slice(t.row(i));
            }
        }
        let out = Tensor::new(vec![r, total], data).expect("concat_cols shape");
        let ng = self.needs(parts);
        self.push(out, ng, Op::ConcatCols { parts: parts.to_vec() })
    }

    pub fn slice_rows(&mut self, x: VarId, start: usize, len: usize) -> VarId {
        let t = self.value(x);
        let (r, c) = (t.rows(), t.cols());
        assert!(start + len <= r, "slice_rows out of range");
        let data = t.data()[start * c..(start + len) * c].to_vec();
        let out = Tensor::new(vec![len, c], data).expect("slice_rows shape");
        let ng = self.needs(&[x]);
        self.push(out, ng, Op::SliceRows { x, start })
    }

    pub fn gather_rows(&mut self, table: VarId, indices: &[usize]) -> Result<VarId, NumericsError> {
        let t = self.value(table);
        let (r, c) = (t.rows(), t.cols());
        if indices.is_empty() {
            return Err(NumericsError::EmptyInput { op: "gather_rows" });
        }
        let mut data = Vec::with_capacity(indices.len() * c);
        for &idx in indices {
            if idx >= r {
                return Err(NumericsError::IndexOutOfBounds {
                    op: "gather_rows",
                    index: idx,
                    extent: r,
                });
            }
            data.extend_from_slice(t.row(idx));
        }
        let out = Tensor::new(vec![indices.len(), c], data).expect("gather_rows shape");
        let ng = self.needs(&[table]);
        Ok(self.push(out, ng, Op::GatherRows { table, indices: indices.to_vec() }))
    }

    pub fn pick_elements(&mut self, x: VarId, positions: &[(usize, usize)]) -> VarId {
        let t = self.value(x);
        assert!(!positions.is_empty(), "pick_elements of nothing");
        let data = positions.iter().map(|&(r, c)| t.at(r, c)).collect();
        let out = Tensor::new(vec![positions.len()], data).expect("pick shape");
        let ng = self.needs(&[x]);
        self.push(out, ng, Op::PickElements { x, positions: positions.to_vec() })
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, x: VarId) -> VarId {
        let t = self.value(x);
        let out = Tensor::scalar(t.data().iter().sum());
        let ng = self.needs(&[x]);
        self.push(out, ng, Op::Sum { x })
    }

    /// Inverted dropout: zeroes entries with probability `rate` and scales the
    /// survivors by `1/(1-rate)`. `rate == 0` is the identity.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: VarId, rate: f64, rng: &mut R) -> VarId {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0,1)");
        if rate == 0.0 {
            return x;
        }
        let keep_scale = 1.0 / (1.0 - rate);
        let t = self.value(x);
        let mask: Vec<f64> = (0..t.len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep_scale })
            .collect();
        let data = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Tensor::new(t.shape().to_vec(), data).expect("dropout shape");
        let ng = self.needs(&[x]);
        self.push(out, ng, Op::Dropout { x, mask })
    }

    /// Reverse pass from a scalar loss. Consumes the tape; gradients for every
    /// grad-tracked node are returned.
    pub fn backward(self, loss: VarId) -> Result<Gradients, NumericsError> {
        let nodes = self.nodes;
        assert!(loss.0 < nodes.len(), "loss id not on this tape");
        let loss_shape = nodes[loss.0].value.shape();
        if !loss_shape.is_empty() {
            return Err(NumericsError::NonScalarLoss { shape: loss_shape.to_vec() });
        }

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..nodes.len()).rev() {
            if !nodes[i].needs_grad {
                continue;
            }
            let out_grad = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            backward_op(&nodes, i, &out_grad, &mut grads);
            grads[i] = Some(out_grad);
        }

        let entries = nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| {
                g.map(|data| {
                    Tensor::new(node.value.shape().to_vec(), data).expect("grad shape")
                })
            })
            .collect();
        Ok(Gradients { entries })
    }
}

fn accumulate(grads: &mut Vec<Option<Vec<f64>>>, nodes: &[Node], id: VarId, update: &[f64]) {
    if !nodes[id.0].needs_grad {
        return;
    }
    match &mut grads[id.0] {
        Some(existing) => {
            for (e, u) in existing.iter_mut().zip(update) {
                *e += u;
            }
        }
        None => grads[id.0] = Some(update.to_vec()),
    }
}

fn backward_op(nodes: &[Node], i: usize, out_grad: &[f64], grads: &mut Vec<Option<Vec<f64>>>) {
    let out_val = &nodes[i].value;
    match &nodes[i].op {
        Op::Leaf => {}
        Op::Matmul { a, b } => {
            let ta = &nodes[a.0].value;
            let tb = &nodes[b.0].value;
            let (m, k, p) = (ta.rows(), ta.cols(), tb.cols());
            if nodes[a.0].needs_grad {
                let da = matmul_nt_raw(out_grad, tb.data(), m, p, k);
                accumulate(grads, nodes, *a, &da);
            }
            if nodes[b.0].needs_grad {
                let db = matmul_tn_raw(ta.data(), out_grad, m, k, p);
                accumulate(grads, nodes, *b, &db);
            }
        }
        Op::MatmulNt { a, b } => {
            let ta = &nodes[a.0].value;
            let tb = &nodes[b.0].value;
            let (m, k, p) = (ta.rows(), ta.cols(), tb.rows());
            if nodes[a.0].needs_grad {
                let da = matmul_raw(out_grad, tb.data(), m, p, k);
                accumulate(grads, nodes, *a, &da);
            }
            if nodes[b.0].needs_grad {
                let db = matmul_tn_raw(out_grad, ta.data(), m, p, k);
                accumulate(grads, nodes, *b, &db);
            }
        }
        Op::Add { a, b } => {
            accumulate(grads, nodes, *a, out_grad);
            accumulate(grads, nodes, *b, out_grad);
        }
        Op::Mul { a, b } => {
            if nodes[a.0].needs_grad {
                let tb = &nodes[b.0].value;
                let da: Vec<f64> = out_grad.iter().zip(tb.data()).map(|(g, v)| g * v).collect();
                accumulate(grads, nodes, *a, &da);
            }
            if nodes[b.0].needs_grad {
                let ta = &nodes[a.0].value;
                let db: Vec<f64> = out_grad.iter().zip(ta.data()).map(|(g, v)| g * v).collect();
                accumulate(grads, nodes, *b, &db);
            }
        }
        Op::Scale { x, factor } => {
            let dx: Vec<f64> = out_grad.iter().map(|g| g * factor).collect();
            accumulate(grads, nodes, *x, &dx);
        }
        Op::AddRowBroadcast { x, row } => {
            accumulate(grads, nodes, *x, out_grad);
            if nodes[row.0].needs_grad {
                let c = nodes[row.0].value.len();
                let mut drow = vec![0.0; c];
                for (i, g) in out_grad.iter().enumerate() {
                    drow[i % c] += g;
                }
                accumulate(grads, nodes, *row, &drow);
            }
        }
        Op::Softmax { x, axis } => {
            let (lane_len, lane_list) =
                lanes(out_val.shape(), *axis).expect("softmax lanes validated on forward");
            let y = out_val.data();
            let mut dx = vec![0.0; y.len()];
            for &(base, stride) in &lane_list {
                let mut dot = 0.0;
                for i in 0..lane_len {
                    let idx = base + i * stride;
                    dot += out_grad[idx] * y[idx];
                }
                for i in 0..lane_len {
                    let idx = base + i * stride;
                    dx[idx] = y[idx] * (out_grad[idx] - dot);
                }
            }
            accumulate(grads, nodes, *x, &dx);
        }
        Op::LogSoftmax { x, axis } => {
            let (lane_len, lane_list) =
                lanes(out_val.shape(), *axis).expect("log_softmax lanes validated on forward");
            let y = out_val.data();
            let mut dx = vec![0.0; y.len()];
            for &(base, stride) in &lane_list {
                let mut gsum = 0.0;
                for i in 0..lane_len {
                    gsum += out_grad[base + i * stride];
                }
                for i in 0..lane_len {
                    let idx = base + i * stride;
                    dx[idx] = out_grad[idx] - y[idx].exp() * gsum;
                }
            }
            accumulate(grads, nodes, *x, &dx);
        }
        Op::LayerNorm { x, gain, shift, epsilon } => {
            let tx = &nodes[x.0].value;
            let tg = &nodes[gain.0].value;
            let last = *tx.shape().last().expect("layer_norm rank");
            let rows = tx.len() / last;
            let mut dx = vec![0.0; tx.len()];
            let mut dgain = vec![0.0; last];
            let mut dshift = vec![0.0; last];
            for r in 0..rows {
                let xs = &tx.data()[r * last..(r + 1) * last];
                let gs = &out_grad[r * last..(r + 1) * last];
                let (mean, inv_std) = moments(xs, *epsilon);
                let mut w_mean = 0.0;
                let mut wx_mean = 0.0;
                for j in 0..last {
                    let xhat = (xs[j] - mean) * inv_std;
                    let w = gs[j] * tg.data()[j];
                    dgain[j] += gs[j] * xhat;
                    dshift[j] += gs[j];
                    w_mean += w;
                    wx_mean += w * xhat;
                }
                w_mean /= last as f64;
                wx_mean /= last as f64;
                for j in 0..last {
                    let xhat = (xs[j] - mean) * inv_std;
                    let w = gs[j] * tg.data()[j];
                    dx[r * last + j] = (w - w_mean - xhat * wx_mean) * inv_std;
                }
            }
            accumulate(grads, nodes, *x, &dx);
            accumulate(grads, nodes, *gain, &dgain);
            accumulate(grads, nodes, *shift, &dshift);
        }
        Op::Gelu { x } => {
            let tx = &nodes[x.0].value;
            let dx: Vec<f64> = tx
                .data()
                .iter()
                .zip(out_grad)
                .map(|(&v, g)| g * gelu_grad_scalar(v))
                .collect();
            accumulate(grads, nodes, *x, &dx);
        }
        Op::Softplus { x } => {
            let tx = &nodes[x.0].value;
            let dx: Vec<f64> = tx
                .data()
                .iter()
                .zip(out_grad)
                .map(|(&v, g)| g * sigmoid_scalar(v))
                .collect();
            accumulate(grads, nodes, *x, &dx);
        }
        Op::SliceCols { x, start } => {
            let tx = &nodes[x.0].value;
            let (r, c) = (tx.rows(), tx.cols());
            let width = out_val.cols();
            let mut dx = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..width {
                    dx[i * c + start + j] = out_grad[i * width + j];
                }
            }
            accumulate(grads, nodes, *x, &dx);
        }
        Op::ConcatCols { parts } => {
            let r = out_val.rows();
            let total = out_val.cols();
            let mut offset = 0;
            for &p in parts {
                let w = nodes[p.0].value.cols();
                if nodes[p.0].needs_grad {
                    let mut dp = vec![0.0; r * w];
                    for i in 0..r {
                        dp[i * w..(i + 1) * w]
                            .copy_from_slice(&out_grad[i * total + offset..i * total + offset + w]);
                    }
                    accumulate(grads, nodes, p, &dp);
                }
                offset += w;
            }
        }
        Op::SliceRows { x, start } => {
            let tx = &nodes[x.0].value;
            let (r, c) = (tx.rows(), tx.cols());
            let len = out_val.rows();
            let mut dx = vec![0.0; r * c];
            dx[start * c..(start + len) * c].copy_from_slice(out_grad);
            accumulate(grads, nodes, *x, &dx);
        }
        Op::GatherRows { table, indices } => {
            let tt = &nodes[table.0].value;
            let c = tt.cols();
            let mut dt = vec![0.0; tt.len()];
            for (i, &idx) in indices.iter().enumerate() {
                for j in 0..c {
                    dt[idx * c + j] += out_grad[i * c + j];
                }
            }
            accumulate(grads, nodes, *table, &dt);
        }
        Op::PickElements { x, positions } => {
            let tx = &nodes[x.0].value;
            let c = tx.cols();
            let mut dx = vec![0.0; tx.len()];
            for (i, &(r, col)) in positions.iter().enumerate() {
                dx[r * c + col] += out_grad[i];
            }
            accumulate(grads, nodes, *x, &dx);
        }
        Op::Sum { x } => {
            let n = nodes[x.0].value.len();
            let dx = vec![out_grad[0]; n];
            accumulate(grads, nodes, *x, &dx);
        }
        Op::Dropout { x, mask } => {
            let dx: Vec<f64> = out_grad.iter().zip(mask).map(|(g, m)| g * m).collect();
            accumulate(grads, nodes, *x, &dx);
        }
    }
}

/// `(base, stride)` of every lane along `axis`, plus the lane length.
fn lanes(shape: &[usize], axis: usize) -> Result<(usize, Vec<(usize, usize)>), NumericsError> {
    match (shape.len(), axis) {
        (1, 0) => Ok((shape[0], vec![(0, 1)])),
        (2, 1) => {
            let (r, c) = (shape[0], shape[1]);
            Ok((c, (0..r).map(|i| (i * c, 1)).collect()))
        }
        (2, 0) => {
            let (r, c) = (shape[0], shape[1]);
            Ok((r, (0..c).map(|j| (j, c)).collect()))
        }
        _ => Err(NumericsError::AxisOutOfRange { axis, shape: shape.to_vec() }),
    }
}

fn softmax_lane(data: &mut [f64], base: usize, stride: usize, len: usize) {
    let mut max = f64::NEG_INFINITY;
    for i in 0..len {
        max = max.max(data[base + i * stride]);
    }
    let mut sum = 0.0;
    for i in 0..len {
        let e = (data[base + i * stride] - max).exp();
        data[base + i * stride] = e;
        sum += e;
    }
    for i in 0..len {
        data[base + i * stride] /= sum;
    }
}

/// Mean and inverse standard deviation (biased variance, stabilized by epsilon).
fn moments(xs: &[f64], epsilon: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + epsilon).sqrt())
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad_scalar(x: f64) -> f64 {
    let t = (GELU_K * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_A * x * x)
}

fn softplus_scalar(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        for kk in 0..k {
            let av = a[i * k + kk];
            let brow = &b[kk * p..(kk + 1) * p];
            let orow = &mut out[i * p..(i + 1) * p];
            for j in 0..p {
                orow[j] += av * brow[j];
            }
        }
    }
    out
}

/// `a [m,k] @ b[p,k]^T -> [m,p]`.
fn matmul_nt_raw(a: &[f64], b: &[f64], m: usize, k: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..p {
            let brow = &b[j * k..(j + 1) * k];
            out[i * p + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `a[m,k]^T @ c[m,p] -> [k,p]`.
fn matmul_tn_raw(a: &[f64], c: &[f64], m: usize, k: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * p];
    for i in 0..m {
        for kk in 0..k {
            let av = a[i * k + kk];
            let crow = &c[i * p..(i + 1) * p];
            let orow = &mut out[kk * p..(kk + 1) * p];
            for j in 0..p {
                orow[j] += av * crow[j];
            }
        }
    }
    out
}
