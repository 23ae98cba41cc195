//! First-order least-squares formulations of steady Stokes flow.
//!
//! Every variant turns `-nu lap(u) + grad p = f`, `div u = 0` into a sum of
//! mean-square residuals over sampled points. The first-order variants add
//! auxiliary fields so that no term needs second derivatives of `u`:
//!
//! - `vp`: plain velocity-pressure residual (keeps the Laplacian)
//! - `omega-vp`: vorticity `w = curl u` and pressure gradient `q`
//! - `vsp`: scaled symmetric stress `T` and `q`
//! - `vg-vp`: full velocity gradient `U` and `q`
//! - `omega-vp-no-poisson`: vorticity only, pressure enters directly
//!
//! Variants with `q` also carry the pressure Poisson residual
//! `div q - div f` (weighted by `alpha`) and the coupling `grad p - q`.
//! The boundary term is the plain velocity mismatch, weighted by `beta`.
//! All stored term values are unweighted means; the weights enter the
//! total and the recorded tape.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::autodiff::{BatchOrder, BufId, Comp, Tape, View};
use crate::fields::{AuxKind, FieldSet, Requirements};
use crate::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossVariant {
    Vp,
    OmegaVp,
    Vsp,
    VgVp,
    OmegaVpNoPoisson,
}

impl LossVariant {
    pub const ALL: [LossVariant; 5] = [
        LossVariant::Vp,
        LossVariant::OmegaVp,
        LossVariant::Vsp,
        LossVariant::VgVp,
        LossVariant::OmegaVpNoPoisson,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LossVariant::Vp => "vp",
            LossVariant::OmegaVp => "omega-vp",
            LossVariant::Vsp => "vsp",
            LossVariant::VgVp => "vg-vp",
            LossVariant::OmegaVpNoPoisson => "omega-vp-no-poisson",
        }
    }

    pub fn requirements(self) -> Requirements {
        match self {
            LossVariant::Vp => Requirements { aux: None, pressure_gradient_net: false },
            LossVariant::OmegaVp => Requirements {
                aux: Some(AuxKind::Vorticity),
                pressure_gradient_net: true,
            },
            LossVariant::Vsp => {
                Requirements { aux: Some(AuxKind::Stress), pressure_gradient_net: true }
            }
            LossVariant::VgVp => Requirements {
                aux: Some(AuxKind::VelocityGradient),
                pressure_gradient_net: true,
            },
            LossVariant::OmegaVpNoPoisson => {
                Requirements { aux: Some(AuxKind::Vorticity), pressure_gradient_net: false }
            }
        }
    }

    /// Only the plain variant needs velocity Hessians.
    pub fn u_order(self) -> BatchOrder {
        match self {
            LossVariant::Vp => BatchOrder::Second,
            _ => BatchOrder::First,
        }
    }
}

/// Penalty weights: `alpha` on the pressure Poisson residual, `beta` on the
/// boundary mismatch.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

/// Interior collocation points with precomputed forcing data.
pub struct InteriorData<'a> {
    pub pts: &'a [[f64; 2]],
    pub forcing: &'a [[f64; 2]],
    pub div_forcing: &'a [f64],
}

/// Boundary collocation points with Dirichlet velocity data.
pub struct BoundaryData<'a> {
    pub pts: &'a [[f64; 2]],
    pub values: &'a [[f64; 2]],
}

/// Unweighted interior term means.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct InteriorTerms {
    pub momentum: f64,
    pub poisson_div: f64,
    pub constitutive: f64,
    pub incompressibility: f64,
    pub pressure_gradient: f64,
}

/// One full loss evaluation, unweighted terms plus the weighted total.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ResidualBundle {
    pub total: f64,
    pub momentum: f64,
    pub poisson_div: f64,
    pub constitutive: f64,
    pub incompressibility: f64,
    pub pressure_gradient: f64,
    pub boundary: f64,
}

impl ResidualBundle {
    pub fn compose(terms: InteriorTerms, boundary: f64, weights: LossWeights) -> Self {
        let total = terms.momentum
            + weights.alpha * terms.poisson_div
            + terms.constitutive
            + terms.incompressibility
            + terms.pressure_gradient
            + weights.beta * boundary;
        ResidualBundle {
            total,
            momentum: terms.momentum,
            poisson_div: terms.poisson_div,
            constitutive: terms.constitutive,
            incompressibility: terms.incompressibility,
            pressure_gradient: terms.pressure_gradient,
            boundary,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.total,
            self.momentum,
            self.poisson_div,
            self.constitutive,
            self.incompressibility,
            self.pressure_gradient,
            self.boundary,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

impl fmt::Display for ResidualBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "momentum {:.3e}, poisson_div {:.3e}, constitutive {:.3e}, \
             incompressibility {:.3e}, pressure_gradient {:.3e}, boundary {:.3e}",
            self.momentum,
            self.poisson_div,
            self.constitutive,
            self.incompressibility,
            self.pressure_gradient,
            self.boundary
        )
    }
}

fn v(buf: BufId, neuron: usize, comp: Comp, coeff: f64) -> View {
    View { buf, neuron, comp, coeff }
}

fn check_compatible(variant: LossVariant, fields: &FieldSet) -> Result<()> {
    if fields.requirements() != variant.requirements() {
        return Err(Error::usage(format!(
            "field set provides {:?} but the {} loss needs {:?}",
            fields.requirements(),
            variant.label(),
            variant.requirements()
        )));
    }
    Ok(())
}

/// Record all interior terms for one batch of points. Returns the chunk
/// total (with `alpha` already applied) and the unweighted term means.
pub fn record_interior(
    tape: &mut Tape,
    fields: &FieldSet,
    params: &[f64],
    variant: LossVariant,
    nu: f64,
    alpha: f64,
    data: &InteriorData,
) -> Result<(BufId, InteriorTerms)> {
    check_compatible(variant, fields)?;
    let n = data.pts.len();
    if n == 0 || data.forcing.len() != n || data.div_forcing.len() != n {
        return Err(Error::usage("interior batch and forcing data lengths must match"));
    }

    let u = fields.record_u(tape, params, data.pts, variant.u_order());
    let p = fields.record_p(tape, params, data.pts);
    let q = fields.record_q(tape, params, data.pts);
    let aux = fields.record_aux(tape, params, data.pts);

    let zeros = vec![0.0; n];
    let f1: Vec<f64> = data.forcing.iter().map(|f| f[0]).collect();
    let f2: Vec<f64> = data.forcing.iter().map(|f| f[1]).collect();
    let neg_f1: Vec<f64> = f1.iter().map(|v| -v).collect();
    let neg_f2: Vec<f64> = f2.iter().map(|v| -v).collect();

    // Momentum residual rows. Signs are chosen so the row vanishes on the
    // exact solution; squaring makes the overall sign irrelevant.
    let momentum = match variant {
        LossVariant::Vp => {
            let m1 = tape.lin_comb(
                vec![v(u, 0, Comp::Hxx, nu), v(u, 0, Comp::Hyy, nu), v(p, 0, Comp::Gx, -1.0)],
                f1.clone(),
            );
            let m2 = tape.lin_comb(
                vec![v(u, 1, Comp::Hxx, nu), v(u, 1, Comp::Hyy, nu), v(p, 0, Comp::Gy, -1.0)],
                f2.clone(),
            );
            tape.mean_square(vec![(m1, 1.0), (m2, 1.0)])
        }
        LossVariant::OmegaVp => {
            let (w, q) = (aux.unwrap(), q.unwrap());
            let m1 = tape.lin_comb(
                vec![v(w, 0, Comp::Gy, nu), v(q, 0, Comp::Val, 1.0)],
                neg_f1.clone(),
            );
            let m2 = tape.lin_comb(
                vec![v(w, 0, Comp::Gx, -nu), v(q, 1, Comp::Val, 1.0)],
                neg_f2.clone(),
            );
            tape.mean_square(vec![(m1, 1.0), (m2, 1.0)])
        }
        LossVariant::Vsp => {
            let (t, q) = (aux.unwrap(), q.unwrap());
            let s = (2.0 * nu).sqrt();
            let m1 = tape.lin_comb(
                vec![v(t, 0, Comp::Gx, s), v(t, 1, Comp::Gy, s), v(q, 0, Comp::Val, -1.0)],
                f1.clone(),
            );
            let m2 = tape.lin_comb(
                vec![v(t, 1, Comp::Gx, s), v(t, 2, Comp::Gy, s), v(q, 1, Comp::Val, -1.0)],
                f2.clone(),
            );
            tape.mean_square(vec![(m1, 1.0), (m2, 1.0)])
        }
        LossVariant::VgVp => {
            let (g, q) = (aux.unwrap(), q.unwrap());
            let m1 = tape.lin_comb(
                vec![v(g, 0, Comp::Gx, nu), v(g, 1, Comp::Gy, nu), v(q, 0, Comp::Val, -1.0)],
                f1.clone(),
            );
            let m2 = tape.lin_comb(
                vec![v(g, 2, Comp::Gx, nu), v(g, 3, Comp::Gy, nu), v(q, 1, Comp::Val, -1.0)],
                f2.clone(),
            );
            tape.mean_square(vec![(m1, 1.0), (m2, 1.0)])
        }
        LossVariant::OmegaVpNoPoisson => {
            let w = aux.unwrap();
            let m1 = tape.lin_comb(
                vec![v(w, 0, Comp::Gy, nu), v(p, 0, Comp::Gx, 1.0)],
                neg_f1.clone(),
            );
            let m2 = tape.lin_comb(
                vec![v(w, 0, Comp::Gx, -nu), v(p, 0, Comp::Gy, 1.0)],
                neg_f2.clone(),
            );
            tape.mean_square(vec![(m1, 1.0), (m2, 1.0)])
        }
    };

    // Pressure Poisson residual div q - div f.
    let poisson = q.map(|q| {
        let neg_divf: Vec<f64> = data.div_forcing.iter().map(|v| -v).collect();
        let r = tape.lin_comb(vec![v(q, 0, Comp::Gx, 1.0), v(q, 1, Comp::Gy, 1.0)], neg_divf);
        tape.mean_square(vec![(r, 1.0)])
    });

    // Constitutive coupling between the auxiliary tensor and grad u.
    let constitutive = aux.map(|a| match variant.requirements().aux.unwrap() {
        AuxKind::Vorticity => {
            let r = tape.lin_comb(
                vec![v(a, 0, Comp::Val, 1.0), v(u, 1, Comp::Gx, -1.0), v(u, 0, Comp::Gy, 1.0)],
                zeros.clone(),
            );
            tape.mean_square(vec![(r, 1.0)])
        }
        AuxKind::Stress => {
            let s = (2.0 * nu).sqrt();
            let c11 = tape.lin_comb(
                vec![v(a, 0, Comp::Val, 1.0), v(u, 0, Comp::Gx, -s)],
                zeros.clone(),
            );
            let c12 = tape.lin_comb(
                vec![
                    v(a, 1, Comp::Val, 1.0),
                    v(u, 0, Comp::Gy, -0.5 * s),
                    v(u, 1, Comp::Gx, -0.5 * s),
                ],
                zeros.clone(),
            );
            let c22 = tape.lin_comb(
                vec![v(a, 2, Comp::Val, 1.0), v(u, 1, Comp::Gy, -s)],
                zeros.clone(),
            );
            // Frobenius norm of a symmetric tensor: the off-diagonal
            // residual counts twice.
            tape.mean_square(vec![(c11, 1.0), (c12, 2.0), (c22, 1.0)])
        }
        AuxKind::VelocityGradient => {
            let rows: Vec<(BufId, f64)> = [(0, 0, Comp::Gx), (1, 0, Comp::Gy), (2, 1, Comp::Gx), (3, 1, Comp::Gy)]
                .into_iter()
                .map(|(an, un, comp)| {
                    let r = tape.lin_comb(
                        vec![v(a, an, Comp::Val, 1.0), v(u, un, comp, -1.0)],
                        zeros.clone(),
                    );
                    (r, 1.0)
                })
                .collect();
            tape.mean_square(rows)
        }
    });

    let div_u = tape.lin_comb(
        vec![v(u, 0, Comp::Gx, 1.0), v(u, 1, Comp::Gy, 1.0)],
        zeros.clone(),
    );
    let incompressibility = tape.mean_square(vec![(div_u, 1.0)]);

    let pressure_gradient = q.map(|q| {
        let pg1 = tape.lin_comb(
            vec![v(p, 0, Comp::Gx, 1.0), v(q, 0, Comp::Val, -1.0)],
            zeros.clone(),
        );
        let pg2 = tape.lin_comb(
            vec![v(p, 0, Comp::Gy, 1.0), v(q, 1, Comp::Val, -1.0)],
            zeros,
        );
        tape.mean_square(vec![(pg1, 1.0), (pg2, 1.0)])
    });

    let mut total_terms = vec![(momentum, 1.0)];
    if let Some(b) = poisson {
        total_terms.push((b, alpha));
    }
    if let Some(b) = constitutive {
        total_terms.push((b, 1.0));
    }
    total_terms.push((incompressibility, 1.0));
    if let Some(b) = pressure_gradient {
        total_terms.push((b, 1.0));
    }
    let total = tape.weighted_sum(total_terms);

    let terms = InteriorTerms {
        momentum: tape.value(momentum),
        poisson_div: poisson.map_or(0.0, |b| tape.value(b)),
        constitutive: constitutive.map_or(0.0, |b| tape.value(b)),
        incompressibility: tape.value(incompressibility),
        pressure_gradient: pressure_gradient.map_or(0.0, |b| tape.value(b)),
    };
    Ok((total, terms))
}

/// Record the boundary velocity mismatch for one batch. Returns the
/// unweighted mean buffer and its value; `beta` is applied by the caller.
pub fn record_boundary(
    tape: &mut Tape,
    fields: &FieldSet,
    params: &[f64],
    data: &BoundaryData,
) -> Result<(BufId, f64)> {
    let n = data.pts.len();
    if n == 0 || data.values.len() != n {
        return Err(Error::usage("boundary batch and data lengths must match"));
    }
    let u = fields.record_u(tape, params, data.pts, BatchOrder::Zero);
    let neg_g1: Vec<f64> = data.values.iter().map(|g| -g[0]).collect();
    let neg_g2: Vec<f64> = data.values.iter().map(|g| -g[1]).collect();
    let b1 = tape.lin_comb(vec![v(u, 0, Comp::Val, 1.0)], neg_g1);
    let b2 = tape.lin_comb(vec![v(u, 1, Comp::Val, 1.0)], neg_g2);
    let mean = tape.mean_square(vec![(b1, 1.0), (b2, 1.0)]);
    Ok((mean, tape.value(mean)))
}

/// Record the complete loss (interior plus boundary) on one tape. Suited to
/// batches small enough to hold in memory at once; training chunks instead.
pub fn record_total(
    tape: &mut Tape,
    fields: &FieldSet,
    params: &[f64],
    variant: LossVariant,
    nu: f64,
    weights: LossWeights,
    interior: &InteriorData,
    boundary: &BoundaryData,
) -> Result<(BufId, ResidualBundle)> {
    let (ti, terms) = record_interior(tape, fields, params, variant, nu, weights.alpha, interior)?;
    let (tb, bval) = record_boundary(tape, fields, params, boundary)?;
    let total = tape.weighted_sum(vec![(ti, 1.0), (tb, weights.beta)]);
    let mut bundle = ResidualBundle::compose(terms, bval, weights);
    // The recorded scalar is authoritative; compose() only orders the
    // floating-point sums differently.
    bundle.total = tape.value(total);
    Ok((total, bundle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{NetSpec, TrainedFields};
    use crate::geometry::RectWithHoles;
    use crate::problems::ExactSolution;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_data(
        n_int: usize,
        n_bnd: usize,
        sol: &ExactSolution,
        seed: u64,
    ) -> (Vec<[f64; 2]>, Vec<[f64; 2]>, Vec<f64>, Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let dom = RectWithHoles::rectangle(0.0, 2.0, -0.5, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = dom.sample_interior(n_int, &mut rng);
        let forcing: Vec<[f64; 2]> = pts.iter().map(|&p| sol.forcing(p)).collect();
        let divf: Vec<f64> = pts.iter().map(|&p| sol.div_forcing(p)).collect();
        let bnd = dom.sample_boundary(n_bnd, &mut rng);
        let bpts: Vec<[f64; 2]> = bnd.iter().map(|s| s.point).collect();
        let bvals: Vec<[f64; 2]> = bpts.iter().map(|&p| sol.velocity(p)).collect();
        (pts, forcing, divf, bpts, bvals)
    }

    #[test]
    fn oracle_residuals_vanish_for_every_variant() {
        let sol = ExactSolution::kovasznay(0.1).unwrap();
        let (pts, forcing, divf, bpts, bvals) = sample_data(200, 100, &sol, 11);
        for variant in LossVariant::ALL {
            let fields = FieldSet::oracle(sol.clone(), variant.requirements());
            let mut tape = Tape::new(0);
            let (_, bundle) = record_total(
                &mut tape,
                &fields,
                &[],
                variant,
                sol.nu,
                LossWeights { alpha: 1.0, beta: 100.0 },
                &InteriorData { pts: &pts, forcing: &forcing, div_forcing: &divf },
                &BoundaryData { pts: &bpts, values: &bvals },
            )
            .unwrap();
            assert!(
                bundle.total < 1e-12,
                "{}: oracle residual {:.3e} ({bundle})",
                variant.label(),
                bundle.total
            );
        }
    }

    #[test]
    fn requirements_mismatch_is_a_usage_error() {
        let sol = ExactSolution::kovasznay(0.1).unwrap();
        let fields = FieldSet::oracle(sol.clone(), LossVariant::Vp.requirements());
        let pts = [[0.5, 0.5]];
        let forcing = [sol.forcing(pts[0])];
        let divf = [sol.div_forcing(pts[0])];
        let mut tape = Tape::new(0);
        let r = record_interior(
            &mut tape,
            &fields,
            &[],
            LossVariant::OmegaVp,
            sol.nu,
            1.0,
            &InteriorData { pts: &pts, forcing: &forcing, div_forcing: &divf },
        );
        assert!(matches!(r, Err(crate::Error::Usage(_))));
    }

    #[test]
    fn variant_names_round_trip_through_serde() {
        #[derive(serde::Deserialize)]
        struct W {
            v: LossVariant,
        }
        for variant in LossVariant::ALL {
            let doc = format!("v = \"{}\"", variant.label());
            let w: W = toml::from_str(&doc).unwrap();
            assert_eq!(w.v, variant);
        }
        assert!(toml::from_str::<W>("v = \"nope\"").is_err());
    }

    #[test]
    fn alpha_scales_only_the_poisson_share() {
        let sol = ExactSolution::kovasznay(0.1).unwrap();
        let variant = LossVariant::OmegaVp;
        let spec = NetSpec { scales: vec![1.0], hidden_layers: 1, hidden_width: 8 };
        let fields = FieldSet::trained(
            TrainedFields::new(variant.requirements(), &spec, &spec, &spec, &spec).unwrap(),
        );
        let params = fields.init_params(5);
        let (pts, forcing, divf, _, _) = sample_data(40, 1, &sol, 13);
        let data = InteriorData { pts: &pts, forcing: &forcing, div_forcing: &divf };
        let total_at = |alpha: f64| {
            let mut tape = Tape::new(params.len());
            let (id, terms) =
                record_interior(&mut tape, &fields, &params, variant, sol.nu, alpha, &data)
                    .unwrap();
            (tape.value(id), terms)
        };
        let (total0, terms0) = total_at(0.0);
        let (total2, _) = total_at(2.0);
        assert!(terms0.poisson_div > 0.0);
        let diff = total2 - total0;
        assert!((diff - 2.0 * terms0.poisson_div).abs() < 1e-12 * (1.0 + diff.abs()));
    }

    #[test]
    fn backprop_matches_finite_differences_on_a_small_net() {
        let sol = ExactSolution::kovasznay(0.1).unwrap();
        let variant = LossVariant::OmegaVp;
        let spec = NetSpec { scales: vec![1.0, 2.0], hidden_layers: 1, hidden_width: 5 };
        let fields = FieldSet::trained(
            TrainedFields::new(variant.requirements(), &spec, &spec, &spec, &spec).unwrap(),
        );
        let mut params = fields.init_params(9);
        let (pts, forcing, divf, bpts, bvals) = sample_data(6, 4, &sol, 17);
        let weights = LossWeights { alpha: 1.0, beta: 1.0 };
        let interior = InteriorData { pts: &pts, forcing: &forcing, div_forcing: &divf };
        let boundary = BoundaryData { pts: &bpts, values: &bvals };

        let mut tape = Tape::new(params.len());
        let (total, _) = record_total(
            &mut tape, &fields, &params, variant, sol.nu, weights, &interior, &boundary,
        )
        .unwrap();
        let grad = tape.backprop(total, &params).unwrap();

        let loss_at = |params: &[f64]| {
            let mut t = Tape::new(params.len());
            let (id, _) = record_total(
                &mut t, &fields, params, variant, sol.nu, weights, &interior, &boundary,
            )
            .unwrap();
            t.value(id)
        };
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut worst: f64 = 0.0;
        for _ in 0..40 {
            let i = rng.gen_range(0..params.len());
            let orig = params[i];
            params[i] = orig + h;
            let up = loss_at(&params);
            params[i] = orig - h;
            let down = loss_at(&params);
            params[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1e-3);
            worst = worst.max((fd - grad[i]).abs() / denom);
        }
        assert!(worst < 1e-5, "worst relative gradient error {worst:.3e}");
    }
}
