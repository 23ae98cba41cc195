//! Compare the tape's reverse-mode gradient of the full loss against
//! central finite differences, parameter by parameter, for every loss
//! variant on a small random field set.
//!
//!     cargo run --release --example gradient_check

use mscale_stokes::autodiff::Tape;
use mscale_stokes::fields::{FieldSet, NetSpec, TrainedFields};
use mscale_stokes::geometry::RectWithHoles;
use mscale_stokes::loss::{self, BoundaryData, InteriorData, LossVariant, LossWeights};
use mscale_stokes::problems::ExactSolution;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    let solution = ExactSolution::kovasznay(0.1).unwrap();
    let domain = RectWithHoles::rectangle(0.0, 2.0, -0.5, 1.5).unwrap();
    let mut rng = StdRng::seed_from_u64(3);
    let pts = domain.sample_interior(8, &mut rng);
    let forcing: Vec<[f64; 2]> = pts.iter().map(|&p| solution.forcing(p)).collect();
    let divf: Vec<f64> = pts.iter().map(|&p| solution.div_forcing(p)).collect();
    let bpts: Vec<[f64; 2]> =
        domain.sample_boundary(4, &mut rng).iter().map(|s| s.point).collect();
    let bvals: Vec<[f64; 2]> = bpts.iter().map(|&p| solution.velocity(p)).collect();
    let interior = InteriorData { pts: &pts, forcing: &forcing, div_forcing: &divf };
    let boundary = BoundaryData { pts: &bpts, values: &bvals };
    let weights = LossWeights { alpha: 1.0, beta: 1.0 };

    let spec = NetSpec { scales: vec![1.0, 3.0], hidden_layers: 2, hidden_width: 8 };

    for variant in LossVariant::ALL {
        let trained =
            TrainedFields::new(variant.requirements(), &spec, &spec, &spec, &spec).unwrap();
        let fields = FieldSet::trained(trained);
        let mut params = fields.init_params(17);

        let loss_at = |params: &[f64]| -> f64 {
            let mut tape = Tape::new(params.len());
            let (_, bundle) = loss::record_total(
                &mut tape, &fields, params, variant, solution.nu, weights, &interior, &boundary,
            )
            .unwrap();
            bundle.total
        };

        let mut tape = Tape::new(params.len());
        let (total, _) = loss::record_total(
            &mut tape, &fields, &params, variant, solution.nu, weights, &interior, &boundary,
        )
        .unwrap();
        let grad = tape.backprop(total, &params).unwrap();

        let h = 1e-6;
        let mut worst = 0.0f64;
        for i in 0..params.len() {
            let saved = params[i];
            params[i] = saved + h;
            let up = loss_at(&params);
            params[i] = saved - h;
            let down = loss_at(&params);
            params[i] = saved;
            let fd = (up - down) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-3);
            worst = worst.max(rel);
        }
        println!(
            "{:<22} {} parameters, worst relative gradient error {:.3e}",
            variant.label(),
            params.len(),
            worst
        );
    }
}
