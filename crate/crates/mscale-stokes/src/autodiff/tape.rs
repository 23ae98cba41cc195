//! Reverse-mode tape over the jet-valued forward pass.
//!
//! Training needs d(loss)/d(parameter) for up to ~10^6 parameters, so the
//! parameter side runs reverse mode while spatial derivatives ride along in
//! forward mode: every buffer on the tape holds a batch of points, and each
//! point carries `val` / `gx` / `gy` (and optionally Hessian) planes produced
//! by the jet chain rule. Ops are recorded at layer granularity with
//! hand-derived adjoints; the adjoint of a jet component with respect to a
//! parameter is exactly what backpropagation through this structure yields.
//!
//! Determinism: every kernel loops in a fixed order and accumulates through a
//! fixed expression tree, so gradients are bit-identical across runs and
//! across target CPUs for a given build.

use crate::autodiff::jet::Comp;
use crate::{Error, Result};

/// Contiguous range of parameter slots (one weight matrix or bias vector).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SlotRange {
    pub start: usize,
    pub len: usize,
}

impl SlotRange {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Derivative payload carried per point in a batch buffer.
///
/// `Zero` is plain values (boundary passes), `First` adds the gradient
/// planes, `Second` adds the symmetric Hessian planes.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BatchOrder {
    Zero,
    First,
    Second,
}

impl BatchOrder {
    pub fn ncomp(self) -> usize {
        match self {
            BatchOrder::Zero => 1,
            BatchOrder::First => 3,
            BatchOrder::Second => 6,
        }
    }
}

/// Handle to a buffer owned by a [`Tape`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct BufId(usize);

/// One scalar read out of a batch buffer: the `comp` component of neuron
/// `neuron`, multiplied by `coeff`. Residual rows are built from these.
#[derive(Clone, Debug)]
pub struct View {
    pub buf: BufId,
    pub neuron: usize,
    pub comp: Comp,
    pub coeff: f64,
}

#[derive(Clone, Debug)]
struct BufMeta {
    n: usize,
    width: usize,
    order: BatchOrder,
    /// Constant buffers (input seeds) do not depend on parameters; no
    /// adjoint flows into them.
    constant: bool,
}

impl BufMeta {
    fn len(&self) -> usize {
        self.n * self.order.ncomp() * self.width
    }
}

enum TapeOp {
    /// `z = W a + b`, applied to every jet component plane (bias only on the
    /// value plane).
    Affine {
        input: BufId,
        out: BufId,
        w: SlotRange,
        b: SlotRange,
        in_width: usize,
        out_width: usize,
    },
    /// Componentwise jet sine.
    Sine { input: BufId, out: BufId },
    /// Elementwise sum of same-shape buffers (sub-network outputs).
    Accumulate { inputs: Vec<BufId>, out: BufId },
    /// Per-point residual row: `r[p] = constant[p] + sum_k view_k[p]`.
    LinComb {
        views: Vec<View>,
        out: BufId,
    },
    /// `out = (1/n) * sum_p sum_rows weight_r * r_r[p]^2`.
    MeanSquare { rows: Vec<(BufId, f64)>, out: BufId },
    /// Weighted sum of scalar buffers (total loss assembly).
    WeightedSum { terms: Vec<(BufId, f64)>, out: BufId },
}

impl TapeOp {
    fn out(&self) -> BufId {
        match self {
            TapeOp::Affine { out, .. }
            | TapeOp::Sine { out, .. }
            | TapeOp::Accumulate { out, .. }
            | TapeOp::LinComb { out, .. }
            | TapeOp::MeanSquare { out, .. }
            | TapeOp::WeightedSum { out, .. } => *out,
        }
    }
}

/// Append-only record of the batched forward pass.
///
/// Recording executes eagerly: each `record_*` call computes the output
/// buffer immediately and stores the op for the backward sweep. Parameter
/// values are read at record time and again at backprop time, so they must
/// not change in between.
pub struct Tape {
    n_params: usize,
    metas: Vec<BufMeta>,
    data: Vec<Vec<f64>>,
    ops: Vec<TapeOp>,
}

/// Flat index of `(point, component, neuron)` in a buffer.
#[inline]
fn at(ncomp: usize, width: usize, p: usize, c: usize, j: usize) -> usize {
    (p * ncomp + c) * width + j
}

/// Dot product with a fixed 4-accumulator reduction tree. The shape is
/// explicit so the result does not depend on what the vectorizer picks.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n4 = a.len() / 4 * 4;
    let mut acc = [0.0f64; 4];
    let mut k = 0;
    while k < n4 {
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
        k += 4;
    }
    let mut tail = 0.0;
    while k < a.len() {
        tail += a[k] * b[k];
        k += 1;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += s * x`.
#[inline]
fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * *xi;
    }
}

impl Tape {
    pub fn new(n_params: usize) -> Tape {
        Tape { n_params, metas: Vec::new(), data: Vec::new(), ops: Vec::new() }
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    fn alloc(&mut self, n: usize, width: usize, order: BatchOrder, constant: bool) -> BufId {
        let meta = BufMeta { n, width, order, constant };
        let len = meta.len();
        self.metas.push(meta);
        self.data.push(vec![0.0; len]);
        BufId(self.metas.len() - 1)
    }

    /// Coordinate seeds for a batch of points, pre-scaled by `scale`:
    /// values are `scale * x`, gradient planes carry `scale` on the own-axis
    /// entry, Hessian planes are zero. This is the chain rule for feeding a
    /// sub-network with a scaled copy of the input.
    pub fn seed_points(&mut self, pts: &[[f64; 2]], scale: f64, order: BatchOrder) -> BufId {
        let id = self.alloc(pts.len(), 2, order, true);
        let ncomp = order.ncomp();
        let buf = &mut self.data[id.0];
        for (p, xy) in pts.iter().enumerate() {
            buf[at(ncomp, 2, p, 0, 0)] = scale * xy[0];
            buf[at(ncomp, 2, p, 0, 1)] = scale * xy[1];
            if ncomp >= 3 {
                buf[at(ncomp, 2, p, 1, 0)] = scale;
                buf[at(ncomp, 2, p, 2, 1)] = scale;
            }
        }
        id
    }

    /// A constant (parameter-independent) buffer with caller-provided data in
    /// `(point, component, neuron)` order.
    pub fn constant_batch(
        &mut self,
        n: usize,
        width: usize,
        order: BatchOrder,
        data: Vec<f64>,
    ) -> BufId {
        assert_eq!(data.len(), n * order.ncomp() * width, "constant batch size mismatch");
        let id = self.alloc(n, width, order, true);
        self.data[id.0] = data;
        id
    }

    /// Read a whole buffer (tests and diagnostics).
    pub fn buffer(&self, id: BufId) -> &[f64] {
        &self.data[id.0]
    }

    /// Read one component of one neuron at one point.
    pub fn read(&self, id: BufId, p: usize, comp: Comp, neuron: usize) -> f64 {
        let m = &self.metas[id.0];
        assert!(comp.idx() < m.order.ncomp(), "component not tracked by this buffer");
        self.data[id.0][at(m.order.ncomp(), m.width, p, comp.idx(), neuron)]
    }

    /// Value of a scalar (1x1, order-zero) buffer.
    pub fn value(&self, id: BufId) -> f64 {
        let m = &self.metas[id.0];
        assert!(
            m.n == 1 && m.width == 1 && m.order == BatchOrder::Zero,
            "value() expects a scalar buffer"
        );
        self.data[id.0][0]
    }

    pub fn affine(
        &mut self,
        params: &[f64],
        input: BufId,
        w: SlotRange,
        b: SlotRange,
        out_width: usize,
    ) -> BufId {
        let (n, in_width, order) = {
            let m = &self.metas[input.0];
            (m.n, m.width, m.order)
        };
        assert_eq!(w.len, out_width * in_width, "weight slot range does not match layer shape");
        assert_eq!(b.len, out_width, "bias slot range does not match layer width");
        assert!(w.end() <= self.n_params && b.end() <= self.n_params, "slot range out of bounds");
        assert!(params.len() >= self.n_params, "parameter vector shorter than slot space");
        let out = self.alloc(n, out_width, order, false);
        let ncomp = order.ncomp();
        let wv = &params[w.start..w.end()];
        let bv = &params[b.start..b.end()];
        // out was just allocated, so it sits past every existing buffer.
        let (head, tail) = self.data.split_at_mut(out.0);
        let input_data = &head[input.0];
        let out_data = &mut tail[0];
        for p in 0..n {
            for c in 0..ncomp {
                let a = &input_data[at(ncomp, in_width, p, c, 0)..][..in_width];
                let z = &mut out_data[at(ncomp, out_width, p, c, 0)..][..out_width];
                for (i, zi) in z.iter_mut().enumerate() {
                    let s = dot(&wv[i * in_width..(i + 1) * in_width], a);
                    *zi = if c == 0 { s + bv[i] } else { s };
                }
            }
        }
        self.ops.push(TapeOp::Affine { input, out, w, b, in_width, out_width });
        out
    }

    pub fn sine(&mut self, input: BufId) -> BufId {
        let (n, width, order) = {
            let m = &self.metas[input.0];
            (m.n, m.width, m.order)
        };
        let out = self.alloc(n, width, order, false);
        let ncomp = order.ncomp();
        let (head, tail) = self.data.split_at_mut(out.0);
        let input_data = &head[input.0];
        let out_data = &mut tail[0];
        for p in 0..n {
            let base = p * ncomp * width;
            for j in 0..width {
                let v = input_data[base + j];
                let (s, c) = v.sin_cos();
                out_data[base + j] = s;
                if ncomp >= 3 {
                    let gx = input_data[base + width + j];
                    let gy = input_data[base + 2 * width + j];
                    out_data[base + width + j] = c * gx;
                    out_data[base + 2 * width + j] = c * gy;
                    if ncomp == 6 {
                        let hxx = input_data[base + 3 * width + j];
                        let hxy = input_data[base + 4 * width + j];
                        let hyy = input_data[base + 5 * width + j];
                        out_data[base + 3 * width + j] = c * hxx - s * gx * gx;
                        out_data[base + 4 * width + j] = c * hxy - s * gx * gy;
                        out_data[base + 5 * width + j] = c * hyy - s * gy * gy;
                    }
                }
            }
        }
        self.ops.push(TapeOp::Sine { input, out });
        out
    }

    /// Elementwise sum of same-shape buffers, in the given order.
    pub fn accumulate(&mut self, inputs: &[BufId]) -> BufId {
        assert!(!inputs.is_empty(), "accumulate needs at least one input");
        let (n, width, order) = {
            let m = &self.metas[inputs[0].0];
            (m.n, m.width, m.order)
        };
        for id in inputs {
            let m = &self.metas[id.0];
            assert!(
                m.n == n && m.width == width && m.order == order,
                "accumulate inputs must share a shape"
            );
        }
        let out = self.alloc(n, width, order, false);
        for id in inputs {
            // Split borrow: `id` is always a previously allocated buffer.
            let (head, tail) = self.data.split_at_mut(out.0);
            axpy(1.0, &head[id.0], &mut tail[0]);
        }
        self.ops.push(TapeOp::Accumulate { inputs: inputs.to_vec(), out });
        out
    }

    /// Residual rows over a batch: `r[p] = constant[p] + sum_k view_k[p]`.
    /// The output is a `(n, 1)` order-zero buffer.
    pub fn lin_comb(&mut self, views: Vec<View>, constant: Vec<f64>) -> BufId {
        let n = constant.len();
        assert!(n > 0, "lin_comb needs at least one point");
        for v in &views {
            let m = &self.metas[v.buf.0];
            assert_eq!(m.n, n, "view batch size mismatch");
            assert!(v.neuron < m.width, "view neuron out of range");
            assert!(
                v.comp.idx() < m.order.ncomp(),
                "view requests a component the buffer does not track"
            );
        }
        let out = self.alloc(n, 1, BatchOrder::Zero, false);
        let mut acc = constant;
        for v in &views {
            let m = &self.metas[v.buf.0];
            let (ncomp, width) = (m.order.ncomp(), m.width);
            let src = &self.data[v.buf.0];
            for (p, a) in acc.iter_mut().enumerate() {
                *a += v.coeff * src[at(ncomp, width, p, v.comp.idx(), v.neuron)];
            }
        }
        self.data[out.0] = acc;
        // The constant part needs no adjoint, so the op does not keep it.
        self.ops.push(TapeOp::LinComb { views, out });
        out
    }

    /// Mean over points of the weighted sum of squared rows.
    pub fn mean_square(&mut self, rows: Vec<(BufId, f64)>) -> BufId {
        assert!(!rows.is_empty(), "mean_square needs at least one row");
        let n = self.metas[rows[0].0 .0].n;
        assert!(n > 0, "mean_square over an empty batch");
        for (id, _) in &rows {
            let m = &self.metas[id.0];
            assert!(m.n == n && m.width == 1 && m.order == BatchOrder::Zero, "rows must be residual rows");
        }
        let out = self.alloc(1, 1, BatchOrder::Zero, false);
        let mut acc = 0.0;
        for (id, weight) in &rows {
            let r = &self.data[id.0];
            let mut s = 0.0;
            for v in r {
                s += v * v;
            }
            acc += weight * s;
        }
        self.data[out.0][0] = acc / n as f64;
        self.ops.push(TapeOp::MeanSquare { rows, out });
        out
    }

    /// Weighted sum of scalar buffers.
    pub fn weighted_sum(&mut self, terms: Vec<(BufId, f64)>) -> BufId {
        assert!(!terms.is_empty(), "weighted_sum needs at least one term");
        let out = self.alloc(1, 1, BatchOrder::Zero, false);
        let mut acc = 0.0;
        for (id, weight) in &terms {
            let m = &self.metas[id.0];
            assert!(m.n == 1 && m.width == 1 && m.order == BatchOrder::Zero, "terms must be scalars");
            acc += weight * self.data[id.0][0];
        }
        self.data[out.0][0] = acc;
        self.ops.push(TapeOp::WeightedSum { terms, out });
        out
    }

    /// Gradient of the scalar in `loss` with respect to every parameter
    /// slot. Parameters that do not influence the loss get exactly zero.
    pub fn backprop(&self, loss: BufId, params: &[f64]) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.n_params];
        self.backprop_into(loss, 1.0, params, &mut grads)?;
        Ok(grads)
    }

    /// As [`Tape::backprop`] but seeds the sweep with `seed` and accumulates
    /// into `grads`, enabling exact fixed-order reductions over tape
    /// segments (micro-batches).
    pub fn backprop_into(
        &self,
        loss: BufId,
        seed: f64,
        params: &[f64],
        grads: &mut [f64],
    ) -> Result<()> {
        if self.ops.is_empty() {
            return Err(Error::usage("backprop on an empty tape"));
        }
        {
            let m = &self.metas[loss.0];
            if !(m.n == 1 && m.width == 1 && m.order == BatchOrder::Zero) {
                return Err(Error::usage("backprop target must be a scalar buffer"));
            }
        }
        if grads.len() != self.n_params {
            return Err(Error::usage(format!(
                "gradient vector has {} slots, tape was built for {}",
                grads.len(),
                self.n_params
            )));
        }

        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.metas.len()];
        adj[loss.0] = Some(vec![seed]);

        for op in self.ops.iter().rev() {
            let out = op.out();
            // A buffer is produced by exactly one op, so by the time the
            // producer is visited its adjoint is complete; absent means the
            // buffer never influenced the loss.
            let Some(dz) = adj[out.0].take() else { continue };
            match op {
                TapeOp::Affine { input, w, b, in_width, out_width, .. } => {
                    self.backward_affine(
                        &dz, *input, *w, *b, *in_width, *out_width, params, grads, &mut adj,
                    );
                }
                TapeOp::Sine { input, .. } => {
                    self.backward_sine(&dz, *input, &mut adj);
                }
                TapeOp::Accumulate { inputs, .. } => {
                    for id in inputs {
                        if !self.metas[id.0].constant {
                            axpy(1.0, &dz, self.adj_mut(&mut adj, *id));
                        }
                    }
                }
                TapeOp::LinComb { views, .. } => {
                    for v in views {
                        let m = &self.metas[v.buf.0];
                        if m.constant {
                            continue;
                        }
                        let (ncomp, width) = (m.order.ncomp(), m.width);
                        let dst = self.adj_mut(&mut adj, v.buf);
                        for (p, d) in dz.iter().enumerate() {
                            dst[at(ncomp, width, p, v.comp.idx(), v.neuron)] += v.coeff * d;
                        }
                    }
                }
                TapeOp::MeanSquare { rows, .. } => {
                    let n = self.metas[rows[0].0 .0].n as f64;
                    for (id, weight) in rows {
                        let fac = dz[0] * 2.0 * weight / n;
                        let src = &self.data[id.0];
                        let dst = self.adj_mut(&mut adj, *id);
                        for (d, r) in dst.iter_mut().zip(src) {
                            *d += fac * r;
                        }
                    }
                }
                TapeOp::WeightedSum { terms, .. } => {
                    for (id, weight) in terms {
                        self.adj_mut(&mut adj, *id)[0] += dz[0] * weight;
                    }
                }
            }
        }
        Ok(())
    }

    /// Adjoint buffer for `id`, zero-allocated on first touch.
    #[allow(clippy::mut_from_ref)]
    fn adj_mut<'a>(&self, adj: &'a mut [Option<Vec<f64>>], id: BufId) -> &'a mut Vec<f64> {
        adj[id.0].get_or_insert_with(|| vec![0.0; self.metas[id.0].len()])
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_affine(
        &self,
        dz: &[f64],
        input: BufId,
        w: SlotRange,
        b: SlotRange,
        in_width: usize,
        out_width: usize,
        params: &[f64],
        grads: &mut [f64],
        adj: &mut [Option<Vec<f64>>],
    ) {
        let m = self.metas[input.0].clone();
        let ncomp = m.order.ncomp();
        let n = m.n;
        let a_data = &self.data[input.0];

        // dW[i][j] = sum over (point, component) of dz_i * a_j; db on the
        // value plane only. Row-major, serial in (p, c): fixed order.
        for i in 0..out_width {
            let gw_row = &mut grads[w.start + i * in_width..w.start + (i + 1) * in_width];
            let mut gb = 0.0;
            for p in 0..n {
                for c in 0..ncomp {
                    let d = dz[at(ncomp, out_width, p, c, i)];
                    if c == 0 {
                        gb += d;
                    }
                    let a = &a_data[at(ncomp, in_width, p, c, 0)..][..in_width];
                    axpy(d, a, gw_row);
                }
            }
            grads[b.start + i] += gb;
        }

        if !m.constant {
            let wv = &params[w.start..w.end()];
            let da = self.adj_mut(adj, input);
            for p in 0..n {
                for c in 0..ncomp {
                    let dz_row = &dz[at(ncomp, out_width, p, c, 0)..][..out_width];
                    let da_row = &mut da[at(ncomp, in_width, p, c, 0)..][..in_width];
                    for (i, d) in dz_row.iter().enumerate() {
                        axpy(*d, &wv[i * in_width..(i + 1) * in_width], da_row);
                    }
                }
            }
        }
    }

    fn backward_sine(&self, dz: &[f64], input: BufId, adj: &mut [Option<Vec<f64>>]) {
        let m = self.metas[input.0].clone();
        let (n, width, ncomp) = (m.n, m.width, m.order.ncomp());
        let in_data = &self.data[input.0];
        let din = self.adj_mut(adj, input);
        for p in 0..n {
            let base = p * ncomp * width;
            for j in 0..width {
                let v = in_data[base + j];
                let (s, c) = v.sin_cos();
                match ncomp {
                    1 => {
                        din[base + j] += dz[base + j] * c;
                    }
                    3 => {
                        let gx = in_data[base + width + j];
                        let gy = in_data[base + 2 * width + j];
                        let (uv, ugx, ugy) =
                            (dz[base + j], dz[base + width + j], dz[base + 2 * width + j]);
                        din[base + j] += uv * c - s * (ugx * gx + ugy * gy);
                        din[base + width + j] += ugx * c;
                        din[base + 2 * width + j] += ugy * c;
                    }
                    6 => {
                        let gx = in_data[base + width + j];
                        let gy = in_data[base + 2 * width + j];
                        let hxx = in_data[base + 3 * width + j];
                        let hxy = in_data[base + 4 * width + j];
                        let hyy = in_data[base + 5 * width + j];
                        let uv = dz[base + j];
                        let ugx = dz[base + width + j];
                        let ugy = dz[base + 2 * width + j];
                        let uxx = dz[base + 3 * width + j];
                        let uxy = dz[base + 4 * width + j];
                        let uyy = dz[base + 5 * width + j];
                        din[base + j] += uv * c
                            - s * (ugx * gx + ugy * gy)
                            - uxx * (s * hxx + c * gx * gx)
                            - uxy * (s * hxy + c * gx * gy)
                            - uyy * (s * hyy + c * gy * gy);
                        din[base + width + j] +=
                            ugx * c - s * (2.0 * uxx * gx + uxy * gy);
                        din[base + 2 * width + j] +=
                            ugy * c - s * (2.0 * uyy * gy + uxy * gx);
                        din[base + 3 * width + j] += uxx * c;
                        din[base + 4 * width + j] += uxy * c;
                        din[base + 5 * width + j] += uyy * c;
                    }
                    _ => unreachable!(),
                }
            }
        }
    }
}
