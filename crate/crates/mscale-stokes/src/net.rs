//! Multi-scale sine networks.
//!
//! A network here is a sum of identical-architecture MLP sub-networks, the
//! i-th one evaluated on the input scaled by `scales[i]`. With one scale
//! equal to 1 this reduces exactly to a plain MLP. All hidden layers use the
//! sine activation; the output layer is affine. Parameters live in a flat
//! slot vector shared by all networks of a run; layouts only remember slot
//! ranges, which keeps the tape, the optimizer, and checkpoints trivially
//! consistent.

use rand::Rng;

use crate::autodiff::{BatchOrder, BufId, Jet2, JetOrder, SlotRange, Tape};
use crate::{Error, Result};

/// Shape of one MLP: `in_dim -> hidden_width x hidden_layers -> out_dim`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct MlpArch {
    pub in_dim: usize,
    pub out_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

impl MlpArch {
    /// Affine layer shapes as `(rows, cols)`, hidden layers first.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut cols = self.in_dim;
        for _ in 0..self.hidden_layers {
            shapes.push((self.hidden_width, cols));
            cols = self.hidden_width;
        }
        shapes.push((self.out_dim, cols));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(|(r, c)| r * (c + 1)).sum()
    }

    /// Hidden neurons; the budget that multi-scale and plain networks are
    /// matched on.
    pub fn neuron_count(&self) -> usize {
        self.hidden_layers * self.hidden_width
    }

    fn validate(&self) -> Result<()> {
        if self.in_dim != 2 {
            return Err(Error::config(format!(
                "network input dimension must be 2 (spatial point), got {}",
                self.in_dim
            )));
        }
        if self.out_dim == 0 {
            return Err(Error::config("network output dimension must be positive"));
        }
        if self.hidden_layers > 0 && self.hidden_width == 0 {
            return Err(Error::config("hidden width must be positive"));
        }
        Ok(())
    }
}

/// Slot ranges of one affine layer within the flat parameter vector.
/// Weights are row-major: `w[start + i*cols + j]` multiplies input j of
/// output i.
#[derive(Copy, Clone, Debug)]
pub struct LayerSlots {
    pub w: SlotRange,
    pub b: SlotRange,
    pub rows: usize,
    pub cols: usize,
}

/// One MLP's parameter layout.
#[derive(Clone, Debug)]
pub struct DenseLayout {
    pub layers: Vec<LayerSlots>,
}

/// Hands out contiguous slot ranges from a single flat parameter space.
#[derive(Debug, Default)]
pub struct SlotAllocator {
    next: usize,
}

impl SlotAllocator {
    pub fn new() -> Self {
        SlotAllocator { next: 0 }
    }

    pub fn alloc(&mut self, len: usize) -> SlotRange {
        let r = SlotRange { start: self.next, len };
        self.next += len;
        r
    }

    /// Total number of slots handed out so far.
    pub fn total(&self) -> usize {
        self.next
    }
}

fn allocate_dense(arch: &MlpArch, alloc: &mut SlotAllocator) -> DenseLayout {
    let layers = arch
        .shapes()
        .into_iter()
        .map(|(rows, cols)| LayerSlots {
            w: alloc.alloc(rows * cols),
            b: alloc.alloc(rows),
            rows,
            cols,
        })
        .collect();
    DenseLayout { layers }
}

/// Glorot-uniform initialization: weights from
/// `U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))`, biases zero.
/// Draw order is layer-major, weights row-major, so a fixed seed gives a
/// fixed parameter vector.
pub fn glorot_uniform(layout: &DenseLayout, rng: &mut impl Rng, params: &mut [f64]) {
    for layer in &layout.layers {
        let bound = (6.0 / (layer.cols + layer.rows) as f64).sqrt();
        for k in 0..layer.w.len {
            params[layer.w.start + k] = rng.gen_range(-bound..=bound);
        }
        for k in 0..layer.b.len {
            params[layer.b.start + k] = 0.0;
        }
    }
}

/// Anything that can flow through a dense layer: plain values for cheap
/// evaluation, jets when spatial derivatives are needed.
trait Feed: Copy {
    fn times(self, w: f64) -> Self;
    fn plus(self, o: Self) -> Self;
    fn plus_const(self, c: f64) -> Self;
    fn sine(self) -> Self;
}

impl Feed for f64 {
    fn times(self, w: f64) -> f64 {
        self * w
    }
    fn plus(self, o: f64) -> f64 {
        self + o
    }
    fn plus_const(self, c: f64) -> f64 {
        self + c
    }
    fn sine(self) -> f64 {
        self.sin()
    }
}

impl Feed for Jet2 {
    fn times(self, w: f64) -> Jet2 {
        self * w
    }
    fn plus(self, o: Jet2) -> Jet2 {
        self + o
    }
    fn plus_const(self, c: f64) -> Jet2 {
        self + c
    }
    fn sine(self) -> Jet2 {
        self.sin()
    }
}

fn dense_forward<T: Feed>(layout: &DenseLayout, params: &[f64], input: &[T]) -> Vec<T> {
    let mut cur: Vec<T> = input.to_vec();
    let last = layout.layers.len() - 1;
    for (li, layer) in layout.layers.iter().enumerate() {
        debug_assert_eq!(cur.len(), layer.cols);
        let mut next = Vec::with_capacity(layer.rows);
        for i in 0..layer.rows {
            let row = &params[layer.w.start + i * layer.cols..][..layer.cols];
            let mut acc = cur[0].times(row[0]);
            for j in 1..layer.cols {
                acc = acc.plus(cur[j].times(row[j]));
            }
            acc = acc.plus_const(params[layer.b.start + i]);
            next.push(if li < last { acc.sine() } else { acc });
        }
        cur = next;
    }
    cur
}

/// Sum of sine MLPs over scaled copies of the input.
#[derive(Clone, Debug)]
pub struct MscaleNet {
    pub arch: MlpArch,
    pub scales: Vec<f64>,
    pub subnets: Vec<DenseLayout>,
}

impl MscaleNet {
    /// Lay out one sub-network per scale on the shared slot space.
    pub fn allocate(arch: MlpArch, scales: Vec<f64>, alloc: &mut SlotAllocator) -> Result<Self> {
        arch.validate()?;
        if scales.is_empty() {
            return Err(Error::config("scale list must not be empty"));
        }
        if let Some(bad) = scales.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::config(format!("scales must be positive and finite, got {bad}")));
        }
        let subnets = scales.iter().map(|_| allocate_dense(&arch, alloc)).collect();
        Ok(MscaleNet { arch, scales, subnets })
    }

    pub fn param_count(&self) -> usize {
        self.scales.len() * self.arch.param_count()
    }

    pub fn neuron_count(&self) -> usize {
        self.scales.len() * self.arch.neuron_count()
    }

    /// Contiguous slot span covering all sub-networks.
    pub fn slot_span(&self) -> SlotRange {
        let first = self.subnets[0].layers[0].w.start;
        let last = self.subnets.last().unwrap().layers.last().unwrap().b.end();
        SlotRange { start: first, len: last - first }
    }

    /// Errors if `params` cannot back this network's slots.
    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        let span = self.slot_span();
        if params.len() < span.end() {
            return Err(Error::config(format!(
                "parameter vector has {} slots but the network needs {}",
                params.len(),
                span.end()
            )));
        }
        Ok(())
    }

    /// Fill this network's slots with Glorot-uniform weights and zero
    /// biases, sub-network by sub-network.
    pub fn init_params(&self, rng: &mut impl Rng, params: &mut [f64]) {
        for sub in &self.subnets {
            glorot_uniform(sub, rng, params);
        }
    }

    /// Plain values, no derivatives: the evaluation path.
    pub fn forward_value(&self, params: &[f64], x: [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.arch.out_dim];
        for (scale, sub) in self.scales.iter().zip(&self.subnets) {
            let seeded = [scale * x[0], scale * x[1]];
            let o = dense_forward(sub, params, &seeded);
            for (acc, v) in out.iter_mut().zip(o) {
                *acc += v;
            }
        }
        out
    }

    /// Output jets with spatial derivatives of the requested order. The
    /// scaled input is seeded with `scale` on the gradient so derivatives
    /// come out with respect to the unscaled coordinates.
    pub fn forward_jets(&self, params: &[f64], x: [f64; 2], order: JetOrder) -> Vec<Jet2> {
        let mut out = vec![Jet2::constant(0.0, order); self.arch.out_dim];
        for (scale, sub) in self.scales.iter().zip(&self.subnets) {
            let seeded = [
                Jet2::var(x[0], 0, order) * *scale,
                Jet2::var(x[1], 1, order) * *scale,
            ];
            let o = dense_forward(sub, params, &seeded);
            for (acc, v) in out.iter_mut().zip(o) {
                *acc = *acc + v;
            }
        }
        out
    }

    /// Record the batched forward pass on a tape; the returned buffer holds
    /// the summed sub-network outputs for every point.
    pub fn record_forward(
        &self,
        tape: &mut Tape,
        params: &[f64],
        pts: &[[f64; 2]],
        order: BatchOrder,
    ) -> BufId {
        let finals: Vec<BufId> = self
            .scales
            .iter()
            .zip(&self.subnets)
            .map(|(scale, sub)| {
                let mut cur = tape.seed_points(pts, *scale, order);
                let last = sub.layers.len() - 1;
                for (li, layer) in sub.layers.iter().enumerate() {
                    cur = tape.affine(params, cur, layer.w, layer.b, layer.rows);
                    if li < last {
                        cur = tape.sine(cur);
                    }
                }
                cur
            })
            .collect();
        tape.accumulate(&finals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Comp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arch(out: usize, layers: usize, width: usize) -> MlpArch {
        MlpArch { in_dim: 2, out_dim: out, hidden_layers: layers, hidden_width: width }
    }

    fn build(
        a: MlpArch,
        scales: &[f64],
        seed: u64,
    ) -> (MscaleNet, Vec<f64>) {
        let mut alloc = SlotAllocator::new();
        let net = MscaleNet::allocate(a, scales.to_vec(), &mut alloc).unwrap();
        let mut params = vec![0.0; alloc.total()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        net.init_params(&mut rng, &mut params);
        (net, params)
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut alloc = SlotAllocator::new();
        let net = MscaleNet::allocate(arch(2, 2, 8), vec![1.0, 4.0], &mut alloc).unwrap();
        let params = vec![0.0; alloc.total()];
        let out = net.forward_value(&params, [0.37, -1.2]);
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn single_unit_hidden_layer_is_sin_of_sum() {
        // One hidden neuron, all weights 1, biases 0, input (0.5, 0.5):
        // output = 1 * sin(1*0.5 + 1*0.5) = sin 1.
        let mut alloc = SlotAllocator::new();
        let net = MscaleNet::allocate(arch(1, 1, 1), vec![1.0], &mut alloc).unwrap();
        let mut params = vec![0.0; alloc.total()];
        for layer in &net.subnets[0].layers {
            for k in 0..layer.w.len {
                params[layer.w.start + k] = 1.0;
            }
        }
        let out = net.forward_value(&params, [0.5, 0.5]);
        assert!((out[0] - 1.0f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn one_scale_of_one_is_a_plain_mlp() {
        let (net, params) = build(arch(2, 2, 6), &[1.0], 11);
        let x = [0.8, -0.1];
        let direct = dense_forward(&net.subnets[0], &params, &x);
        assert_eq!(net.forward_value(&params, x), direct);
    }

    #[test]
    fn duplicated_subnet_parameters_double_the_output() {
        let (net1, params1) = build(arch(1, 2, 5), &[1.0], 3);
        let mut alloc = SlotAllocator::new();
        let net2 = MscaleNet::allocate(arch(1, 2, 5), vec![1.0, 1.0], &mut alloc).unwrap();
        let mut params2 = vec![0.0; alloc.total()];
        let single = net1.param_count();
        params2[..single].copy_from_slice(&params1);
        params2[single..].copy_from_slice(&params1);
        let x = [0.4, 0.9];
        let one = net1.forward_value(&params1, x)[0];
        let two = net2.forward_value(&params2, x)[0];
        assert!((two - 2.0 * one).abs() < 1e-15);
    }

    #[test]
    fn output_layer_is_linear_in_its_parameters() {
        let (net, mut params) = build(arch(2, 2, 6), &[1.0, 2.0], 5);
        let x = [0.3, 0.6];
        let base = net.forward_value(&params, x);
        // Scale every output-layer weight and bias by c: outputs scale by c.
        let c = -2.5;
        for sub in &net.subnets {
            let last = sub.layers.last().unwrap();
            for k in 0..last.w.len {
                params[last.w.start + k] *= c;
            }
            for k in 0..last.b.len {
                params[last.b.start + k] *= c;
            }
        }
        let scaled = net.forward_value(&params, x);
        for (s, b) in scaled.iter().zip(&base) {
            assert!((s - c * b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let a = MlpArch { in_dim: 2, out_dim: 1, hidden_layers: 1, hidden_width: 50 };
        let (net, params) = build(a, &[1.0], 42);
        let first = net.subnets[0].layers[0];
        // fan_in 2, fan_out 50: bound = sqrt(6/52) ~ 0.3397.
        let bound = (6.0 / 52.0f64).sqrt();
        assert!((bound - 0.3397).abs() < 5e-5);
        for k in 0..first.w.len {
            assert!(params[first.w.start + k].abs() <= bound);
        }
        for layer in &net.subnets[0].layers {
            for k in 0..layer.b.len {
                assert_eq!(params[layer.b.start + k], 0.0);
            }
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let (_, p1) = build(arch(2, 3, 16), &[1.0, 2.0, 4.0], 7);
        let (_, p2) = build(arch(2, 3, 16), &[1.0, 2.0, 4.0], 7);
        let (_, p3) = build(arch(2, 3, 16), &[1.0, 2.0, 4.0], 8);
        assert_eq!(p1, p2);
        assert_ne!(p1, p3);
    }

    #[test]
    fn parameter_and_neuron_accounting() {
        let mut alloc = SlotAllocator::new();
        let multi =
            MscaleNet::allocate(arch(2, 3, 32), vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0], &mut alloc)
                .unwrap();
        let mut alloc2 = SlotAllocator::new();
        let single = MscaleNet::allocate(arch(2, 3, 192), vec![1.0], &mut alloc2).unwrap();
        // Same hidden-neuron budget; the wide net has far more connections.
        assert_eq!(multi.neuron_count(), single.neuron_count());
        assert_eq!(multi.param_count(), 6 * arch(2, 3, 32).param_count());
        assert!(single.param_count() > multi.param_count());
    }

    #[test]
    fn empty_scales_and_bad_arch_are_config_errors() {
        let mut alloc = SlotAllocator::new();
        assert!(matches!(
            MscaleNet::allocate(arch(2, 2, 8), vec![], &mut alloc),
            Err(crate::Error::Config(_))
        ));
        assert!(matches!(
            MscaleNet::allocate(arch(2, 2, 8), vec![1.0, -2.0], &mut alloc),
            Err(crate::Error::Config(_))
        ));
        let bad = MlpArch { in_dim: 3, out_dim: 1, hidden_layers: 1, hidden_width: 4 };
        assert!(matches!(
            MscaleNet::allocate(bad, vec![1.0], &mut alloc),
            Err(crate::Error::Config(_))
        ));
    }

    /// d/dx of a scale-2 sub-network must be 2 f'(2x): check jets against
    /// central finite differences of the value path.
    #[test]
    fn jets_match_finite_differences_with_scaling() {
        let (net, params) = build(arch(2, 2, 10), &[2.0], 19);
        let x = [0.45, -0.3];
        let h = 1e-6;
        let jets = net.forward_jets(&params, x, JetOrder::First);
        for k in 0..2 {
            let fp = net.forward_value(&params, [x[0] + h, x[1]])[k];
            let fm = net.forward_value(&params, [x[0] - h, x[1]])[k];
            let fd_x = (fp - fm) / (2.0 * h);
            assert!((jets[k].gx - fd_x).abs() < 1e-7 * (1.0 + fd_x.abs()));
            let fp = net.forward_value(&params, [x[0], x[1] + h])[k];
            let fm = net.forward_value(&params, [x[0], x[1] - h])[k];
            let fd_y = (fp - fm) / (2.0 * h);
            assert!((jets[k].gy - fd_y).abs() < 1e-7 * (1.0 + fd_y.abs()));
        }
    }

    /// The tape engine and the jet engine are independent implementations of
    /// the same forward pass; they must agree to rounding.
    #[test]
    fn tape_forward_matches_jet_forward() {
        let (net, params) = build(arch(2, 2, 12), &[1.0, 4.0], 23);
        let pts = [[0.1, 0.2], [1.7, -0.4], [0.9, 1.3]];
        let mut tape = Tape::new(params.len());
        let out = net.record_forward(&mut tape, &params, &pts, BatchOrder::Second);
        for (p, xy) in pts.iter().enumerate() {
            let jets = net.forward_jets(&params, *xy, JetOrder::Second);
            for (k, jet) in jets.iter().enumerate() {
                for comp in [Comp::Val, Comp::Gx, Comp::Gy, Comp::Hxx, Comp::Hxy, Comp::Hyy] {
                    let t = tape.read(out, p, comp, k);
                    let j = jet.comp(comp);
                    assert!(
                        (t - j).abs() <= 1e-12 * (1.0 + j.abs()),
                        "point {p} output {k} {comp:?}: tape {t} vs jet {j}"
                    );
                }
            }
        }
    }
}
