//! The solution field bundle: velocity, pressure, and the auxiliary fields
//! a loss variant introduces (pressure gradient `q` and one of vorticity,
//! scaled stress, or velocity gradient).
//!
//! Two implementations sit behind [`FieldSet`]: trained multi-scale networks
//! sharing one flat parameter vector, and an exact-solution oracle whose
//! "fields" are the manufactured solution and its derived quantities. The
//! oracle records constant buffers on the tape, so the entire loss pipeline
//! runs unchanged on it: residuals vanish to rounding and no gradient
//! reaches any parameter.

use crate::autodiff::{BatchOrder, BufId, JetOrder, Tape};
use crate::net::{MlpArch, MscaleNet, SlotAllocator};
use crate::problems::ExactSolution;
use crate::rng;
use crate::{Error, Result};

/// Which auxiliary tensor a loss variant carries next to `u`, `p`, `q`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum AuxKind {
    /// Scalar vorticity `curl u`.
    Vorticity,
    /// Symmetric scaled stress, stored `[T11, T12, T22]`.
    Stress,
    /// Full velocity gradient, stored row-major `[U11, U12, U21, U22]`.
    VelocityGradient,
}

impl AuxKind {
    pub fn width(self) -> usize {
        match self {
            AuxKind::Vorticity => 1,
            AuxKind::Stress => 3,
            AuxKind::VelocityGradient => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AuxKind::Vorticity => "vorticity",
            AuxKind::Stress => "stress",
            AuxKind::VelocityGradient => "velocity-gradient",
        }
    }
}

/// What a loss variant needs from the field bundle.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Requirements {
    pub aux: Option<AuxKind>,
    /// Whether a separate pressure-gradient network `q` exists.
    pub pressure_gradient_net: bool,
}

/// Architecture request for one field network.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    pub scales: Vec<f64>,
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

impl NetSpec {
    fn arch(&self, out_dim: usize) -> MlpArch {
        MlpArch {
            in_dim: 2,
            out_dim,
            hidden_layers: self.hidden_layers,
            hidden_width: self.hidden_width,
        }
    }
}

/// Networks for every required field, laid out on one flat slot space in
/// the fixed order u, p, q, aux.
#[derive(Clone, Debug)]
pub struct TrainedFields {
    pub u: MscaleNet,
    pub p: MscaleNet,
    pub q: Option<MscaleNet>,
    pub aux: Option<(AuxKind, MscaleNet)>,
    n_params: usize,
}

impl TrainedFields {
    pub fn new(
        req: Requirements,
        u: &NetSpec,
        p: &NetSpec,
        q: &NetSpec,
        aux: &NetSpec,
    ) -> Result<Self> {
        let mut alloc = SlotAllocator::new();
        let u_net = MscaleNet::allocate(u.arch(2), u.scales.clone(), &mut alloc)?;
        let p_net = MscaleNet::allocate(p.arch(1), p.scales.clone(), &mut alloc)?;
        let q_net = if req.pressure_gradient_net {
            Some(MscaleNet::allocate(q.arch(2), q.scales.clone(), &mut alloc)?)
        } else {
            None
        };
        let aux_net = match req.aux {
            Some(kind) => Some((
                kind,
                MscaleNet::allocate(aux.arch(kind.width()), aux.scales.clone(), &mut alloc)?,
            )),
            None => None,
        };
        Ok(TrainedFields { u: u_net, p: p_net, q: q_net, aux: aux_net, n_params: alloc.total() })
    }

    pub fn nets(&self) -> Vec<(&'static str, &MscaleNet)> {
        let mut out = vec![("u", &self.u), ("p", &self.p)];
        if let Some(q) = &self.q {
            out.push(("q", q));
        }
        if let Some((kind, net)) = &self.aux {
            out.push((kind.label(), net));
        }
        out
    }
}

/// Exact manufactured solution standing in for trained networks.
#[derive(Clone, Debug)]
pub struct OracleFields {
    pub solution: ExactSolution,
    pub requirements: Requirements,
}

#[derive(Clone, Debug)]
pub enum FieldSet {
    Trained(TrainedFields),
    Oracle(OracleFields),
}

fn jet_order(order: BatchOrder) -> JetOrder {
    match order {
        BatchOrder::Second => JetOrder::Second,
        _ => JetOrder::First,
    }
}

impl FieldSet {
    pub fn trained(fields: TrainedFields) -> Self {
        FieldSet::Trained(fields)
    }

    pub fn oracle(solution: ExactSolution, requirements: Requirements) -> Self {
        FieldSet::Oracle(OracleFields { solution, requirements })
    }

    pub fn requirements(&self) -> Requirements {
        match self {
            FieldSet::Trained(t) => Requirements {
                aux: t.aux.as_ref().map(|(k, _)| *k),
                pressure_gradient_net: t.q.is_some(),
            },
            FieldSet::Oracle(o) => o.requirements,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            FieldSet::Trained(t) => t.n_params,
            FieldSet::Oracle(_) => 0,
        }
    }

    /// Fresh Glorot parameters; each network draws from its own stream of
    /// the given seed. Empty for the oracle.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        match self {
            FieldSet::Trained(t) => {
                let mut params = vec![0.0; t.n_params];
                t.u.init_params(&mut rng::stream_rng(seed, rng::STREAM_INIT_U), &mut params);
                t.p.init_params(&mut rng::stream_rng(seed, rng::STREAM_INIT_P), &mut params);
                if let Some(q) = &t.q {
                    q.init_params(&mut rng::stream_rng(seed, rng::STREAM_INIT_Q), &mut params);
                }
                if let Some((_, aux)) = &t.aux {
                    aux.init_params(&mut rng::stream_rng(seed, rng::STREAM_INIT_AUX), &mut params);
                }
                params
            }
            FieldSet::Oracle(_) => Vec::new(),
        }
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        let need = self.param_count();
        if params.len() != need {
            return Err(Error::config(format!(
                "parameter vector has {} slots, field set needs {need}",
                params.len()
            )));
        }
        Ok(())
    }

    /// Velocity buffer, 2 wide, at the requested derivative order.
    pub fn record_u(
        &self,
        tape: &mut Tape,
        params: &[f64],
        pts: &[[f64; 2]],
        order: BatchOrder,
    ) -> BufId {
        match self {
            FieldSet::Trained(t) => t.u.record_forward(tape, params, pts, order),
            FieldSet::Oracle(o) => {
                let ncomp = order.ncomp();
                let mut data = vec![0.0; pts.len() * ncomp * 2];
                for (p, &pt) in pts.iter().enumerate() {
                    let jets = o.solution.velocity_jets(pt, jet_order(order));
                    for (j, jet) in jets.iter().enumerate() {
                        let base = p * ncomp * 2;
                        data[base + j] = jet.val;
                        if ncomp >= 3 {
                            data[base + 2 + j] = jet.gx;
                            data[base + 4 + j] = jet.gy;
                        }
                        if ncomp == 6 {
                            data[base + 6 + j] = jet.hxx();
                            data[base + 8 + j] = jet.hxy();
                            data[base + 10 + j] = jet.hyy();
                        }
                    }
                }
                tape.constant_batch(pts.len(), 2, order, data)
            }
        }
    }

    /// Pressure buffer, 1 wide, first-order.
    pub fn record_p(&self, tape: &mut Tape, params: &[f64], pts: &[[f64; 2]]) -> BufId {
        match self {
            FieldSet::Trained(t) => t.p.record_forward(tape, params, pts, BatchOrder::First),
            FieldSet::Oracle(o) => {
                let mut data = vec![0.0; pts.len() * 3];
                for (p, &pt) in pts.iter().enumerate() {
                    let jet = o.solution.pressure_jet(pt, JetOrder::First);
                    data[p * 3] = jet.val;
                    data[p * 3 + 1] = jet.gx;
                    data[p * 3 + 2] = jet.gy;
                }
                tape.constant_batch(pts.len(), 1, BatchOrder::First, data)
            }
        }
    }

    /// Pressure-gradient buffer, 2 wide, first-order; `None` when the
    /// variant carries no `q` field.
    pub fn record_q(&self, tape: &mut Tape, params: &[f64], pts: &[[f64; 2]]) -> Option<BufId> {
        match self {
            FieldSet::Trained(t) => t
                .q
                .as_ref()
                .map(|q| q.record_forward(tape, params, pts, BatchOrder::First)),
            FieldSet::Oracle(o) => {
                if !o.requirements.pressure_gradient_net {
                    return None;
                }
                // Oracle q is grad p; its derivatives come from the
                // pressure Hessian.
                let mut data = vec![0.0; pts.len() * 3 * 2];
                for (p, &pt) in pts.iter().enumerate() {
                    let jet = o.solution.pressure_jet(pt, JetOrder::Second);
                    let base = p * 6;
                    data[base] = jet.gx;
                    data[base + 1] = jet.gy;
                    data[base + 2] = jet.hxx();
                    data[base + 3] = jet.hxy();
                    data[base + 4] = jet.hxy();
                    data[base + 5] = jet.hyy();
                }
                Some(tape.constant_batch(pts.len(), 2, BatchOrder::First, data))
            }
        }
    }

    /// Auxiliary tensor buffer, first-order; width set by the kind.
    pub fn record_aux(&self, tape: &mut Tape, params: &[f64], pts: &[[f64; 2]]) -> Option<BufId> {
        match self {
            FieldSet::Trained(t) => t
                .aux
                .as_ref()
                .map(|(_, net)| net.record_forward(tape, params, pts, BatchOrder::First)),
            FieldSet::Oracle(o) => {
                let kind = o.requirements.aux?;
                let width = kind.width();
                let mut data = vec![0.0; pts.len() * 3 * width];
                for (p, &pt) in pts.iter().enumerate() {
                    let [u1, u2] = o.solution.velocity_jets(pt, JetOrder::Second);
                    // Rows of [value, d/dx, d/dy] per component.
                    let rows: Vec<[f64; 3]> = match kind {
                        AuxKind::Vorticity => vec![[
                            u2.gx - u1.gy,
                            u2.hxx() - u1.hxy(),
                            u2.hxy() - u1.hyy(),
                        ]],
                        AuxKind::Stress => {
                            let s = (2.0 * o.solution.nu).sqrt();
                            vec![
                                [s * u1.gx, s * u1.hxx(), s * u1.hxy()],
                                [
                                    0.5 * s * (u1.gy + u2.gx),
                                    0.5 * s * (u1.hxy() + u2.hxx()),
                                    0.5 * s * (u1.hyy() + u2.hxy()),
                                ],
                                [s * u2.gy, s * u2.hxy(), s * u2.hyy()],
                            ]
                        }
                        AuxKind::VelocityGradient => vec![
                            [u1.gx, u1.hxx(), u1.hxy()],
                            [u1.gy, u1.hxy(), u1.hyy()],
                            [u2.gx, u2.hxx(), u2.hxy()],
                            [u2.gy, u2.hxy(), u2.hyy()],
                        ],
                    };
                    let base = p * 3 * width;
                    for (j, row) in rows.iter().enumerate() {
                        data[base + j] = row[0];
                        data[base + width + j] = row[1];
                        data[base + 2 * width + j] = row[2];
                    }
                }
                Some(tape.constant_batch(pts.len(), width, BatchOrder::First, data))
            }
        }
    }

    /// Plain velocity values: the evaluation path.
    pub fn velocity(&self, params: &[f64], pt: [f64; 2]) -> [f64; 2] {
        match self {
            FieldSet::Trained(t) => {
                let v = t.u.forward_value(params, pt);
                [v[0], v[1]]
            }
            FieldSet::Oracle(o) => o.solution.velocity(pt),
        }
    }

    pub fn pressure(&self, params: &[f64], pt: [f64; 2]) -> f64 {
        match self {
            FieldSet::Trained(t) => t.p.forward_value(params, pt)[0],
            FieldSet::Oracle(o) => o.solution.pressure(pt),
        }
    }
}
