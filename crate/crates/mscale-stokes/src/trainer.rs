//! Dataset construction, the epoch/minibatch loop, error evaluation, and
//! line profiles.
//!
//! One epoch is one pass over the fixed interior set: shuffled, cut into
//! `interior_batch`-sized minibatches (leftovers dropped that epoch), one
//! Adam step per minibatch. Each step also draws `boundary_batch` samples
//! with replacement from the fixed boundary set. Loss evaluation is chunked
//! into fixed-size micro-batches whose gradient contributions accumulate in
//! a fixed order, so results are bit-reproducible and memory stays bounded
//! regardless of batch size.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::autodiff::Tape;
use crate::config::{EvalSet, RunConfig};
use crate::fields::FieldSet;
use crate::geometry::RectWithHoles;
use crate::loss::{
    self, BoundaryData, InteriorData, LossWeights, ResidualBundle,
};
use crate::optim::AdamState;
use crate::problems::ExactSolution;
use crate::rng::{boundary_stream, shuffle_stream, stream_rng, STREAM_EVAL, STREAM_INTERIOR};
use crate::{Error, Result};

/// Micro-batch size for tape construction. Gradients are mathematically
/// independent of this number; it only bounds tape memory.
const CHUNK: usize = 256;

/// Fixed point sets for one run, sampled once up front.
#[derive(Clone, Debug)]
pub struct Datasets {
    pub interior: Vec<[f64; 2]>,
    pub interior_forcing: Vec<[f64; 2]>,
    pub interior_div_forcing: Vec<f64>,
    pub boundary: Vec<[f64; 2]>,
    pub boundary_values: Vec<[f64; 2]>,
    pub eval: Vec<[f64; 2]>,
}

/// Mutable training status: everything a checkpoint has to capture.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: Vec<f64>,
    pub adams: Vec<AdamState>,
    pub alpha: f64,
    /// Completed epochs (0-based count).
    pub epoch: u64,
}

/// One history row. Error fields are present only on evaluation epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: u64,
    pub lr: f64,
    /// Penalty weight after any adaptation at this epoch.
    pub alpha: f64,
    pub loss: ResidualBundle,
    pub err_u: Option<f64>,
    pub err_p: Option<f64>,
    pub wall_seconds: f64,
}

pub struct Trainer {
    pub config: RunConfig,
    pub domain: RectWithHoles,
    pub solution: ExactSolution,
    pub fields: FieldSet,
    pub datasets: Datasets,
}

/// Sample every fixed point set for a run.
pub fn build_datasets(
    config: &RunConfig,
    domain: &RectWithHoles,
    solution: &ExactSolution,
) -> Datasets {
    let t = &config.training;
    let mut sampler = stream_rng(t.sampling_seed, STREAM_INTERIOR);
    let interior = domain.sample_interior(t.interior_points, &mut sampler);
    let interior_forcing = interior.iter().map(|&p| solution.forcing(p)).collect();
    let interior_div_forcing = interior.iter().map(|&p| solution.div_forcing(p)).collect();
    let boundary_samples = domain.sample_boundary(t.boundary_points, &mut sampler);
    let boundary: Vec<[f64; 2]> = boundary_samples.iter().map(|s| s.point).collect();
    let boundary_values = boundary.iter().map(|&p| solution.velocity(p)).collect();
    let eval = build_eval_set(t.eval_set, domain, t.eval_seed);
    Datasets {
        interior,
        interior_forcing,
        interior_div_forcing,
        boundary,
        boundary_values,
        eval,
    }
}

/// Grid evaluation points are cell centers, so none sits on the outer
/// boundary; centers inside holes are dropped. Random sets are rejection
/// sampled like training points.
pub fn build_eval_set(set: EvalSet, domain: &RectWithHoles, seed: u64) -> Vec<[f64; 2]> {
    match set {
        EvalSet::Grid { nx, ny } => {
            let dx = (domain.xmax - domain.xmin) / nx as f64;
            let dy = (domain.ymax - domain.ymin) / ny as f64;
            let mut pts = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let p = [
                        domain.xmin + (i as f64 + 0.5) * dx,
                        domain.ymin + (j as f64 + 0.5) * dy,
                    ];
                    if domain.contains(p) {
                        pts.push(p);
                    }
                }
            }
            pts
        }
        EvalSet::Random { count } => {
            domain.sample_interior(count, &mut stream_rng(seed, STREAM_EVAL))
        }
    }
}

impl Trainer {
    pub fn new(config: RunConfig) -> Result<Self> {
        let fields = FieldSet::trained(config.build_fields()?);
        Self::with_fields(config, fields)
    }

    /// Build a trainer around an explicit field set (e.g. the exact-solution
    /// oracle).
    pub fn with_fields(config: RunConfig, fields: FieldSet) -> Result<Self> {
        config.validate()?;
        if fields.requirements() != config.loss.variant.requirements() {
            return Err(Error::config(format!(
                "field set does not match the {} loss variant",
                config.loss.variant.label()
            )));
        }
        let domain = config.build_domain()?;
        let solution = config.build_solution()?;
        let datasets = build_datasets(&config, &domain, &solution);
        Ok(Trainer { config, domain, solution, fields, datasets })
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.config.training.interior_points / self.config.training.interior_batch
    }

    /// Fresh parameters, optimizer states, and penalty weight.
    pub fn initial_state(&self) -> TrainState {
        let params = self.fields.init_params(self.config.training.init_seed);
        let adams = self.adam_states();
        TrainState { params, adams, alpha: self.config.loss.alpha, epoch: 0 }
    }

    pub fn adam_states(&self) -> Vec<AdamState> {
        match &self.fields {
            FieldSet::Trained(t) => {
                t.nets().iter().map(|(_, net)| AdamState::new(net.slot_span())).collect()
            }
            FieldSet::Oracle(_) => Vec::new(),
        }
    }

    /// Loss and parameter gradient for one minibatch, chunked into fixed
    /// micro-batches. `grads` must be zeroed by the caller.
    pub fn loss_and_grad(
        &self,
        params: &[f64],
        interior_idx: &[usize],
        boundary_idx: &[usize],
        alpha: f64,
        grads: &mut [f64],
    ) -> Result<ResidualBundle> {
        let variant = self.config.loss.variant;
        let nu = self.solution.nu;
        let beta = self.config.loss.beta;
        let n = interior_idx.len() as f64;
        let m = boundary_idx.len() as f64;
        let mut terms = loss::InteriorTerms::default();
        let mut boundary_term = 0.0;

        for chunk in interior_idx.chunks(CHUNK) {
            let pts: Vec<[f64; 2]> = chunk.iter().map(|&i| self.datasets.interior[i]).collect();
            let forcing: Vec<[f64; 2]> =
                chunk.iter().map(|&i| self.datasets.interior_forcing[i]).collect();
            let divf: Vec<f64> =
                chunk.iter().map(|&i| self.datasets.interior_div_forcing[i]).collect();
            let mut tape = Tape::new(params.len());
            let (total, t) = loss::record_interior(
                &mut tape,
                &self.fields,
                params,
                variant,
                nu,
                alpha,
                &InteriorData { pts: &pts, forcing: &forcing, div_forcing: &divf },
            )?;
            let w = chunk.len() as f64 / n;
            tape.backprop_into(total, w, params, grads)?;
            terms.momentum += w * t.momentum;
            terms.poisson_div += w * t.poisson_div;
            terms.constitutive += w * t.constitutive;
            terms.incompressibility += w * t.incompressibility;
            terms.pressure_gradient += w * t.pressure_gradient;
        }

        for chunk in boundary_idx.chunks(CHUNK) {
            let pts: Vec<[f64; 2]> = chunk.iter().map(|&i| self.datasets.boundary[i]).collect();
            let values: Vec<[f64; 2]> =
                chunk.iter().map(|&i| self.datasets.boundary_values[i]).collect();
            let mut tape = Tape::new(params.len());
            let (mean, value) = loss::record_boundary(
                &mut tape,
                &self.fields,
                params,
                &BoundaryData { pts: &pts, values: &values },
            )?;
            let w = chunk.len() as f64 / m;
            tape.backprop_into(mean, beta * w, params, grads)?;
            boundary_term += w * value;
        }

        Ok(ResidualBundle::compose(terms, boundary_term, LossWeights { alpha, beta }))
    }

    /// Run epochs `state.epoch + 1 ..= config.training.epochs`, appending
    /// one record per epoch. Aborts on a non-finite loss.
    pub fn train(
        &self,
        state: &mut TrainState,
        history: &mut Vec<EpochRecord>,
    ) -> Result<()> {
        let t = &self.config.training;
        let schedule = self.config.schedule();
        let adapter = self.config.alpha_adapter();
        let steps = self.steps_per_epoch();
        let deterministic = self.config.deterministic();
        let mut grads = vec![0.0; state.params.len()];

        while state.epoch < t.epochs {
            let e = state.epoch;
            let started = Instant::now();
            let lr = schedule.at(e);

            let mut order: Vec<usize> = (0..t.interior_points).collect();
            order.shuffle(&mut stream_rng(t.shuffle_seed, shuffle_stream(e)));
            let mut boundary_rng = stream_rng(t.shuffle_seed, boundary_stream(e));

            let mut mean = ResidualBundle::compose(
                loss::InteriorTerms::default(),
                0.0,
                LossWeights { alpha: state.alpha, beta: self.config.loss.beta },
            );
            for s in 0..steps {
                let interior_idx = &order[s * t.interior_batch..(s + 1) * t.interior_batch];
                let boundary_idx: Vec<usize> = (0..t.boundary_batch)
                    .map(|_| boundary_rng.gen_range(0..t.boundary_points))
                    .collect();
                grads.fill(0.0);
                let bundle = self.loss_and_grad(
                    &state.params,
                    interior_idx,
                    &boundary_idx,
                    state.alpha,
                    &mut grads,
                )?;
                if !bundle.is_finite() {
                    return Err(Error::NonFinite {
                        epoch: e + 1,
                        step: s + 1,
                        total: bundle.total,
                        terms: Box::new(bundle),
                    });
                }
                for adam in &mut state.adams {
                    adam.step(&mut state.params, &grads, lr);
                }
                mean.total += bundle.total;
                mean.momentum += bundle.momentum;
                mean.poisson_div += bundle.poisson_div;
                mean.constitutive += bundle.constitutive;
                mean.incompressibility += bundle.incompressibility;
                mean.pressure_gradient += bundle.pressure_gradient;
                mean.boundary += bundle.boundary;
            }
            let inv = 1.0 / steps as f64;
            for v in [
                &mut mean.total,
                &mut mean.momentum,
                &mut mean.poisson_div,
                &mut mean.constitutive,
                &mut mean.incompressibility,
                &mut mean.pressure_gradient,
                &mut mean.boundary,
            ] {
                *v *= inv;
            }

            state.epoch += 1;
            let is_final = state.epoch == t.epochs;
            let alpha_check = adapter.should_check(e);
            let evaluate = state.epoch % t.eval_every == 0 || alpha_check || is_final;
            let (mut err_u, mut err_p) = (None, None);
            if evaluate {
                let (eu, ep) = self.evaluate_errors(&state.params)?;
                err_u = Some(eu);
                err_p = Some(ep);
                if alpha_check {
                    state.alpha = adapter.adapt(state.alpha, eu, ep);
                }
            }

            history.push(EpochRecord {
                epoch: state.epoch,
                lr,
                alpha: state.alpha,
                loss: mean,
                err_u,
                err_p,
                wall_seconds: if deterministic { 0.0 } else { started.elapsed().as_secs_f64() },
            });
        }
        Ok(())
    }

    /// Root-mean-square evaluation errors over the eval set: the Euclidean
    /// norm of the velocity error and the absolute pressure error. Never
    /// mutates parameters or optimizer state.
    pub fn evaluate_errors(&self, params: &[f64]) -> Result<(f64, f64)> {
        let pts = &self.datasets.eval;
        if pts.is_empty() {
            return Err(Error::usage("evaluation set is empty"));
        }
        let mut su = 0.0;
        let mut sp = 0.0;
        for &pt in pts {
            let u = self.fields.velocity(params, pt);
            let ue = self.solution.velocity(pt);
            let p = self.fields.pressure(params, pt);
            let pe = self.solution.pressure(pt);
            su += (u[0] - ue[0]).powi(2) + (u[1] - ue[1]).powi(2);
            sp += (p - pe) * (p - pe);
        }
        let n = pts.len() as f64;
        Ok(((su / n).sqrt(), (sp / n).sqrt()))
    }

    /// Solution profile along the horizontal line at height `y`: `n` evenly
    /// spaced abscissae spanning the domain, endpoints included. Points
    /// inside a hole are excluded.
    pub fn profile_line(&self, params: &[f64], y: f64, n: usize) -> Result<Vec<ProfileRow>> {
        if n < 2 {
            return Err(Error::usage("a profile needs at least two points"));
        }
        let step = (self.domain.xmax - self.domain.xmin) / (n - 1) as f64;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let x = self.domain.xmin + i as f64 * step;
            let pt = [x, y];
            if self.domain.in_hole(pt) {
                continue;
            }
            let u = self.fields.velocity(params, pt);
            let ue = self.solution.velocity(pt);
            rows.push(ProfileRow {
                x,
                u1_dnn: u[0],
                u1_exact: ue[0],
                u2_dnn: u[1],
                u2_exact: ue[1],
                p_dnn: self.fields.pressure(params, pt),
                p_exact: self.solution.pressure(pt),
            });
        }
        Ok(rows)
    }
}

/// One row of a solution profile.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ProfileRow {
    pub x: f64,
    pub u1_dnn: f64,
    pub u1_exact: f64,
    pub u2_dnn: f64,
    pub u2_exact: f64,
    pub p_dnn: f64,
    pub p_exact: f64,
}
