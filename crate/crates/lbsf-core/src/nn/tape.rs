//! Tape-based reverse-mode differentiation.
//!
//! A [`Tape`] records one forward computation over a read-only [`ParamSet`].
//! Intermediate values live on the tape; parameter gradients accumulate into
//! a caller-supplied [`Grads`] buffer so several tapes (one per batch item)
//! can share it. The reverse sweep walks the records in strict reverse push
//! order, which fixes the accumulation order and keeps results deterministic.
//!
//! Non-finite values do not abort mid-forward; the tape records the first
//! offending op and [`Tape::check_numerics`] reports it afterwards.

use super::param::{Grads, ParamId, ParamSet};
use super::scalar::Scalar;
use super::tensor::{matmul, softmax_slice, Tensor};
use super::KernelError;

/// Handle to a value node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

pub(crate) struct BackwardState<'a, S> {
    nodes: &'a [Tensor<S>],
    node_grads: &'a mut [Option<Tensor<S>>],
    params: &'a ParamSet<S>,
    param_grads: &'a mut Grads<S>,
}

impl<S: Scalar> BackwardState<'_, S> {
    fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0]
    }

    fn add_node_grad(&mut self, id: NodeId, delta: Tensor<S>) {
        match &mut self.node_grads[id.0] {
            Some(g) => g.add_assign(&delta),
            slot => *slot = Some(delta),
        }
    }

    fn param_value(&self, id: ParamId) -> &Tensor<S> {
        self.params.value(id)
    }

    fn param_grad(&mut self, id: ParamId) -> &mut Tensor<S> {
        let shape = self.params.value(id).shape().to_vec();
        self.param_grads.entry(id, &shape)
    }
}

type BackwardFn<S> = Box<dyn Fn(&Tensor<S>, &mut BackwardState<'_, S>)>;

struct OpRecord<S> {
    out: NodeId,
    backward: BackwardFn<S>,
}

pub struct Tape<'p, S: Scalar> {
    params: &'p ParamSet<S>,
    nodes: Vec<Tensor<S>>,
    records: Vec<OpRecord<S>>,
    first_non_finite: Option<&'static str>,
    attn_cells: u64,
}

impl<'p, S: Scalar> Tape<'p, S> {
    pub fn new(params: &'p ParamSet<S>) -> Self {
        Tape { params, nodes: Vec::new(), records: Vec::new(), first_non_finite: None, attn_cells: 0 }
    }

    pub fn params(&self) -> &ParamSet<S> {
        self.params
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0]
    }

    /// Query-key score entries recorded by attention ops (one count per
    /// attention application; heads share the score structure).
    pub fn attn_cells(&self) -> u64 {
        self.attn_cells
    }

    pub(crate) fn count_attn_cells(&mut self, cells: u64) {
        self.attn_cells += cells;
    }

    /// Err if any op so far produced a NaN/Inf, naming the first one.
    pub fn check_numerics(&self) -> Result<(), KernelError> {
        match self.first_non_finite {
            Some(op) => Err(KernelError::NonFinite { op }),
            None => Ok(()),
        }
    }

    fn push(&mut self, op: &'static str, value: Tensor<S>) -> NodeId {
        if self.first_non_finite.is_none() && !value.is_finite() {
            self.first_non_finite = Some(op);
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(value);
        id
    }

    fn record(&mut self, out: NodeId, backward: BackwardFn<S>) {
        self.records.push(OpRecord { out, backward });
    }

    /// Reverse sweep from `loss` (a 1-element tensor), seeding with `seed`.
    /// Parameter gradients accumulate into `param_grads`; existing contents
    /// are kept, so per-item contributions of a batch sum naturally.
    pub fn backward(&self, loss: NodeId, seed: S, param_grads: &mut Grads<S>) -> Result<(), KernelError> {
        if self.value(loss).numel() != 1 {
            return Err(KernelError::LossNotScalar { numel: self.value(loss).numel() });
        }
        self.check_numerics()?;
        let mut node_grads: Vec<Option<Tensor<S>>> = vec![None; self.nodes.len()];
        node_grads[loss.0] = Some(Tensor::new(self.value(loss).shape().to_vec(), vec![seed]));
        for rec in self.records.iter().rev() {
            if let Some(g) = node_grads[rec.out.0].take() {
                let mut st = BackwardState {
                    nodes: &self.nodes,
                    node_grads: &mut node_grads,
                    params: self.params,
                    param_grads,
                };
                (rec.backward)(&g, &mut st);
            }
        }
        Ok(())
    }

    // ---- leaves ----

    /// Constant input; no gradient flows out of it.
    pub fn constant(&mut self, value: Tensor<S>) -> NodeId {
        self.push("constant", value)
    }

    /// Parameter leaf. The value is copied onto the tape; the reverse sweep
    /// adds the node gradient to the parameter's slot.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        let out = self.push("param", self.params.value(id).clone());
        self.record(
            out,
            Box::new(move |g, st| {
                st.param_grad(id).add_assign(g);
            }),
        );
        out
    }

    // ---- elementwise ----

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        let out = self.push("add", v);
        self.record(
            out,
            Box::new(move |g, st| {
                st.add_node_grad(a, g.clone());
                st.add_node_grad(b, g.clone());
            }),
        );
        out
    }

    /// `x + t` for a constant tensor `t` of the same shape.
    pub fn add_const(&mut self, x: NodeId, t: &Tensor<S>) -> NodeId {
        let mut v = self.value(x).clone();
        v.add_assign(t);
        let out = self.push("add_const", v);
        self.record(out, Box::new(move |g, st| st.add_node_grad(x, g.clone())));
        out
    }

    /// Elementwise `x * t` for a constant tensor `t` (dropout masks).
    pub fn mul_const(&mut self, x: NodeId, t: Tensor<S>) -> NodeId {
        assert_eq!(self.value(x).shape(), t.shape(), "mul_const shape mismatch");
        let v = Tensor::new(
            t.shape().to_vec(),
            self.value(x).data().iter().zip(t.data()).map(|(&a, &b)| a * b).collect(),
        );
        let out = self.push("mul_const", v);
        self.record(
            out,
            Box::new(move |g, st| {
                let delta = Tensor::new(
                    t.shape().to_vec(),
                    g.data().iter().zip(t.data()).map(|(&gv, &tv)| gv * tv).collect(),
                );
                st.add_node_grad(x, delta);
            }),
        );
        out
    }

    pub fn scale(&mut self, x: NodeId, c: S) -> NodeId {
        let v = self.value(x).map(|v| v * c);
        let out = self.push("scale", v);
        self.record(
            out,
            Box::new(move |g, st| {
                st.add_node_grad(x, g.map(|v| v * c));
            }),
        );
        out
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|v| v * v);
        let out = self.push("square", v);
        self.record(
            out,
            Box::new(move |g, st| {
                let xv = st.value(x);
                let two = S::from_f64(2.0);
                let delta = Tensor::new(
                    xv.shape().to_vec(),
                    xv.data().iter().zip(g.data()).map(|(&xi, &gi)| two * xi * gi).collect(),
                );
                st.add_node_grad(x, delta);
            }),
        );
        out
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(gelu_forward);
        let out = self.push("gelu", v);
        self.record(
            out,
            Box::new(move |g, st| {
                let xv = st.value(x);
                let delta = Tensor::new(
                    xv.shape().to_vec(),
                    xv.data().iter().zip(g.data()).map(|(&xi, &gi)| gelu_grad(xi) * gi).collect(),
                );
                st.add_node_grad(x, delta);
            }),
        );
        out
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(sigmoid_forward);
        let out = self.push("sigmoid", v);
        self.record(
            out,
            Box::new(move |g, st| {
                let y = st.value(out);
                let delta = Tensor::new(
                    y.shape().to_vec(),
                    y.data().iter().zip(g.data()).map(|(&yi, &gi)| gi * yi * (S::one() - yi)).collect(),
                );
                st.add_node_grad(x, delta);
            }),
        );
        out
    }

    /// Sum of all elements, as a 1-element tensor.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total = self.value(x).data().iter().cloned().sum();
        let out = self.push("sum", Tensor::scalar(total));
        self.record(
            out,
            Box::new(move |g, st| {
                let gv = g.data()[0];
                let shape = st.value(x).shape().to_vec();
                let n: usize = shape.iter().product();
                st.add_node_grad(x, Tensor::new(shape, vec![gv; n]));
            }),
        );
        out
    }

    // ---- linear algebra ----

    /// `x @ w^T + b` with `w: [out, in]`. Rank-1 inputs stay rank 1.
    pub fn linear(&mut self, x: NodeId, w: ParamId, b: Option<ParamId>) -> NodeId {
        let xv = self.value(x);
        let rank1 = xv.rank() == 1;
        let wv = self.params.value(w);
        let fan_out = wv.shape()[0];
        assert_eq!(xv.cols(), wv.shape()[1], "linear fan-in mismatch");
        let mut y = matmul(xv, false, wv, true);
        if let Some(b) = b {
            let bv = self.params.value(b);
            assert_eq!(bv.numel(), fan_out, "linear bias length mismatch");
            for i in 0..y.rows() {
                let row = y.row_mut(i);
                for (o, bo) in row.iter_mut().zip(bv.data()) {
                    *o += *bo;
                }
            }
        }
        let y = if rank1 { Tensor::vector(y.data().to_vec()) } else { y };
        let out = self.push("linear", y);
        self.record(
            out,
            Box::new(move |g, st| {
                let xv = st.value(x);
                // dW += g^T @ x, dx += g @ W, db += column sums of g
                let dw = matmul(g, true, xv, false);
                st.param_grad(w).add_assign(&dw);
                if let Some(b) = b {
                    let cols = g.cols();
                    let db = st.param_grad(b);
                    for i in 0..g.rows() {
                        let row = &g.data()[i * cols..(i + 1) * cols];
                        for (acc, gv) in db.data_mut().iter_mut().zip(row) {
                            *acc += *gv;
                        }
                    }
                }
                let dx = matmul(g, false, st.param_value(w), false);
                let dx = if rank1 { Tensor::vector(dx.data().to_vec()) } else { dx };
                st.add_node_grad(x, dx);
            }),
        );
        out
    }

    /// `a @ b` between two tape nodes.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = matmul(self.value(a), false, self.value(b), false);
        let out = self.push("matmul", v);
        self.record(
            out,
            Box::new(move |g, st| {
                let da = matmul(g, false, st.value(b), true);
                let db = matmul(st.value(a), true, g, false);
                st.add_node_grad(a, da);
                st.add_node_grad(b, db);
            }),
        );
        out
    }

    /// `a @ b^T` between two tape nodes (attention scores).
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = matmul(self.value(a), false, self.value(b), true);
        let out = self.push("matmul_nt", v);
        self.record(
            out,
            Box::new(move |g, st| {
                let da = matmul(g, false, st.value(b), false);
                let db = matmul(g, true, st.value(a), false);
                st.add_node_grad(a, da);
                st.add_node_grad(b, db);
            }),
        );
        out
    }

    // ---- shape ----

    /// Stack inputs as rows; rank-1 inputs contribute one row each.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut meta: Vec<(NodeId, usize, usize)> = Vec::new(); // (node, row offset, rows)
        let mut offset = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.cols(), cols, "concat_rows column mismatch");
            let r = v.rows();
            data.extend_from_slice(v.data());
            meta.push((p, offset, r));
            offset += r;
        }
        let out = self.push("concat_rows", Tensor::matrix(offset, cols, data));
        self.record(
            out,
            Box::new(move |g, st| {
                for &(node, row0, rows) in &meta {
                    let slice = &g.data()[row0 * cols..(row0 + rows) * cols];
                    let orig = st.value(node).shape().to_vec();
                    st.add_node_grad(node, Tensor::new(orig, slice.to_vec()));
                }
            }),
        );
        out
    }

    /// Concatenate along columns; inputs must agree on row count.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let rows = self.value(parts[0]).rows();
        let rank1 = self.value(parts[0]).rank() == 1;
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut data = vec![S::zero(); rows * total];
        let mut col0 = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let v = self.value(p);
            assert_eq!(v.rows(), rows, "concat_cols row mismatch");
            for r in 0..rows {
                data[r * total + col0..r * total + col0 + w]
                    .copy_from_slice(&v.data()[r * w..(r + 1) * w]);
            }
            col0 += w;
        }
        let value =
            if rank1 { Tensor::vector(data) } else { Tensor::matrix(rows, total, data) };
        let out = self.push("concat_cols", value);
        let parts: Vec<NodeId> = parts.to_vec();
        self.record(
            out,
            Box::new(move |g, st| {
                let mut col0 = 0;
                for (&p, &w) in parts.iter().zip(&widths) {
                    let orig = st.value(p).shape().to_vec();
                    let mut delta = vec![S::zero(); rows * w];
                    for r in 0..rows {
                        delta[r * w..(r + 1) * w]
                            .copy_from_slice(&g.data()[r * total + col0..r * total + col0 + w]);
                    }
                    st.add_node_grad(p, Tensor::new(orig, delta));
                    col0 += w;
                }
            }),
        );
        out
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.value(x);
        let (rows, cols) = (v.rows(), v.cols());
        assert!(start + len <= cols, "slice_cols out of range");
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&v.data()[r * cols + start..r * cols + start + len]);
        }
        let out = self.push("slice_cols", Tensor::matrix(rows, len, data));
        self.record(
            out,
            Box::new(move |g, st| {
                let orig = st.value(x).shape().to_vec();
                let mut delta = Tensor::zeros(orig);
                for r in 0..rows {
                    delta.data_mut()[r * cols + start..r * cols + start + len]
                        .copy_from_slice(&g.data()[r * len..(r + 1) * len]);
                }
                st.add_node_grad(x, delta);
            }),
        );
        out
    }

    /// Extract row `i` as a rank-1 vector.
    pub fn slice_row(&mut self, x: NodeId, i: usize) -> NodeId {
        let v = self.value(x);
        assert!(i < v.rows(), "slice_row out of range");
        let out = self.push("slice_row", Tensor::vector(v.row(i).to_vec()));
        self.record(
            out,
            Box::new(move |g, st| {
                let orig = st.value(x).shape().to_vec();
                let mut delta = Tensor::zeros(orig);
                delta.row_mut(i).copy_from_slice(g.data());
                st.add_node_grad(x, delta);
            }),
        );
        out
    }

    // ---- reductions and normalizations ----

    /// Row-wise softmax with max-shift.
    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let mut v = self.value(x).clone();
        for i in 0..v.rows() {
            softmax_slice(v.row_mut(i));
        }
        let out = self.push("softmax", v);
        self.record(
            out,
            Box::new(move |g, st| {
                let y = st.value(out);
                let mut delta = Tensor::zeros(y.shape().to_vec());
                let cols = y.cols();
                for r in 0..y.rows() {
                    let yr = y.row(r);
                    let gr = &g.data()[r * cols..(r + 1) * cols];
                    let dot: S = yr.iter().zip(gr).map(|(&yi, &gi)| yi * gi).sum();
                    for ((d, &yi), &gi) in
                        delta.row_mut(r).iter_mut().zip(yr).zip(gr)
                    {
                        *d = yi * (gi - dot);
                    }
                }
                st.add_node_grad(x, delta);
            }),
        );
        out
    }

    /// Row-wise layer normalization with learned scale and shift.
    pub fn layer_norm(&mut self, x: NodeId, gamma: ParamId, beta: ParamId, eps: S) -> NodeId {
        let xv = self.value(x);
        let d = xv.cols();
        let gv = self.params.value(gamma);
        let bv = self.params.value(beta);
        assert_eq!(gv.numel(), d, "layer_norm gamma length mismatch");
        assert_eq!(bv.numel(), d, "layer_norm beta length mismatch");
        let inv_d = S::one() / S::from_f64(d as f64);
        let mut v = xv.clone();
        for r in 0..v.rows() {
            let row = v.row_mut(r);
            let mean: S = row.iter().cloned().sum::<S>() * inv_d;
            let var: S = row.iter().map(|&vi| (vi - mean) * (vi - mean)).sum::<S>() * inv_d;
            let inv_std = S::one() / (var + eps).sqrt();
            for (j, vi) in row.iter_mut().enumerate() {
                *vi = (*vi - mean) * inv_std * gv.data()[j] + bv.data()[j];
            }
        }
        let out = self.push("layer_norm", v);
        self.record(
            out,
            Box::new(move |g, st| {
                let xv = st.value(x).clone();
                let gamma_v = st.param_value(gamma).clone();
                let d = xv.cols();
                let inv_d = S::one() / S::from_f64(d as f64);
                let mut dx = Tensor::zeros(xv.shape().to_vec());
                let mut dgamma = vec![S::zero(); d];
                let mut dbeta = vec![S::zero(); d];
                for r in 0..xv.rows() {
                    let row = xv.row(r);
                    let gr = &g.data()[r * d..(r + 1) * d];
                    let mean: S = row.iter().cloned().sum::<S>() * inv_d;
                    let var: S = row.iter().map(|&vi| (vi - mean) * (vi - mean)).sum::<S>() * inv_d;
                    let inv_std = S::one() / (var + eps).sqrt();
                    let xhat: Vec<S> = row.iter().map(|&vi| (vi - mean) * inv_std).collect();
                    let gy: Vec<S> =
                        gr.iter().zip(gamma_v.data()).map(|(&gi, &ga)| gi * ga).collect();
                    let mean_gy: S = gy.iter().cloned().sum::<S>() * inv_d;
                    let mean_gy_xhat: S =
                        gy.iter().zip(&xhat).map(|(&a, &b)| a * b).sum::<S>() * inv_d;
                    for j in 0..d {
                        dx.row_mut(r)[j] = inv_std * (gy[j] - mean_gy - xhat[j] * mean_gy_xhat);
                        dgamma[j] += gr[j] * xhat[j];
                        dbeta[j] += gr[j];
                    }
                }
                st.param_grad(gamma).add_assign(&Tensor::vector(dgamma));
                st.param_grad(beta).add_assign(&Tensor::vector(dbeta));
                st.add_node_grad(x, dx);
            }),
        );
        out
    }

    /// Mean over unmasked rows. Errors upstream guarantee >= 1 true entry.
    pub fn mean_rows_masked(&mut self, x: NodeId, mask: Vec<bool>) -> NodeId {
        let v = self.value(x);
        assert_eq!(v.rows(), mask.len(), "mask length mismatch");
        let n = mask.iter().filter(|&&m| m).count();
        assert!(n > 0, "mean_rows_masked with empty mask");
        let d = v.cols();
        let inv_n = S::one() / S::from_f64(n as f64);
        let mut acc = vec![S::zero(); d];
        for (r, &keep) in mask.iter().enumerate() {
            if keep {
                for (a, &vi) in acc.iter_mut().zip(v.row(r)) {
                    *a += vi;
                }
            }
        }
        for a in acc.iter_mut() {
            *a *= inv_n;
        }
        let out = self.push("mean_rows_masked", Tensor::vector(acc));
        self.record(
            out,
            Box::new(move |g, st| {
                let shape = st.value(x).shape().to_vec();
                let mut delta = Tensor::zeros(shape);
                for (r, &keep) in mask.iter().enumerate() {
                    if keep {
                        for (dv, &gv) in delta.row_mut(r).iter_mut().zip(g.data()) {
                            *dv = gv * inv_n;
                        }
                    }
                }
                st.add_node_grad(x, delta);
            }),
        );
        out
    }

    /// Zero out masked rows; valid rows pass through unchanged.
    pub fn zero_rows(&mut self, x: NodeId, mask: Vec<bool>) -> NodeId {
        let v = self.value(x);
        assert_eq!(v.rows(), mask.len(), "mask length mismatch");
        let mut out_v = v.clone();
        for (r, &keep) in mask.iter().enumerate() {
            if !keep {
                for vi in out_v.row_mut(r) {
                    *vi = S::zero();
                }
            }
        }
        let out = self.push("zero_rows", out_v);
        self.record(
            out,
            Box::new(move |g, st| {
                let mut delta = g.clone();
                for (r, &keep) in mask.iter().enumerate() {
                    if !keep {
                        for dv in delta.row_mut(r) {
                            *dv = S::zero();
                        }
                    }
                }
                st.add_node_grad(x, delta);
            }),
        );
        out
    }

    /// Bag-of-tokens rows: row `l` of the output is the mean of the table
    /// rows listed in `lists[l]`; empty lists produce zero rows. Gradient
    /// scatters only into the listed rows.
    pub fn bag_mean_rows(&mut self, table: ParamId, lists: Vec<Vec<u32>>) -> NodeId {
        let tv = self.params.value(table);
        let (buckets, dim) = (tv.shape()[0], tv.shape()[1]);
        let rows = lists.len();
        let mut data = vec![S::zero(); rows * dim];
        for (l, toks) in lists.iter().enumerate() {
            if toks.is_empty() {
                continue;
            }
            let inv = S::one() / S::from_f64(toks.len() as f64);
            for &t in toks {
                let t = t as usize;
                assert!(t < buckets, "token bucket out of range");
                for (o, &e) in data[l * dim..(l + 1) * dim].iter_mut().zip(tv.row(t)) {
                    *o += e * inv;
                }
            }
        }
        let out = self.push("bag_mean_rows", Tensor::matrix(rows, dim, data));
        self.record(
            out,
            Box::new(move |g, st| {
                let tg = st.param_grad(table);
                for (l, toks) in lists.iter().enumerate() {
                    if toks.is_empty() {
                        continue;
                    }
                    let inv = S::one() / S::from_f64(toks.len() as f64);
                    let grow = &g.data()[l * dim..(l + 1) * dim];
                    for &t in toks {
                        for (acc, &gv) in tg.row_mut(t as usize).iter_mut().zip(grow) {
                            *acc += gv * inv;
                        }
                    }
                }
            }),
        );
        out
    }

    // ---- loss ----

    /// Binary cross-entropy of one probability against label `y`, with the
    /// probability clamped to `[eps, 1 - eps]` to keep the loss finite.
    pub fn bce_scalar(&mut self, p: NodeId, y: S, eps: S) -> NodeId {
        let pv = self.value(p).item();
        let pc = pv.max(eps).min(S::one() - eps);
        let loss = -(y * pc.ln() + (S::one() - y) * (S::one() - pc).ln());
        let out = self.push("bce", Tensor::scalar(loss));
        self.record(
            out,
            Box::new(move |g, st| {
                let pv = st.value(p).item();
                let inside = pv >= eps && pv <= S::one() - eps;
                let d = if inside {
                    let pc = pv.max(eps).min(S::one() - eps);
                    -(y / pc - (S::one() - y) / (S::one() - pc))
                } else {
                    S::zero()
                };
                st.add_node_grad(p, Tensor::scalar(g.data()[0] * d));
            }),
        );
        out
    }
}

fn gelu_forward<S: Scalar>(x: S) -> S {
    let c = S::from_f64(0.797_884_560_802_865_4); // sqrt(2/pi)
    let a = S::from_f64(0.044715);
    let half = S::from_f64(0.5);
    let u = c * (x + a * x * x * x);
    half * x * (S::one() + u.tanh())
}

fn gelu_grad<S: Scalar>(x: S) -> S {
    let c = S::from_f64(0.797_884_560_802_865_4);
    let a = S::from_f64(0.044715);
    let half = S::from_f64(0.5);
    let three = S::from_f64(3.0);
    let u = c * (x + a * x * x * x);
    let t = u.tanh();
    half * (S::one() + t) + half * x * (S::one() - t * t) * c * (S::one() + three * a * x * x)
}

fn sigmoid_forward<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}
