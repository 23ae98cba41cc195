//! Wrap each benchmark's exact solution as an oracle field set and show
//! that every loss variant's residual vanishes on it. This is the
//! transcription check for the first-order reformulations: a sign error in
//! any momentum, constitutive, or Poisson term would leave a visible
//! residual.
//!
//!     cargo run --release --example exact_residuals

use mscale_stokes::fields::FieldSet;
use mscale_stokes::geometry::RectWithHoles;
use mscale_stokes::loss::{self, BoundaryData, InteriorData, LossVariant, LossWeights};
use mscale_stokes::problems::ExactSolution;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    let cases = [
        (
            "kovasznay",
            ExactSolution::kovasznay(0.1).unwrap(),
            RectWithHoles::rectangle(0.0, 2.0, -0.5, 1.5).unwrap(),
        ),
        (
            "two-frequency",
            ExactSolution::two_frequency(0.1, 50.0, 55.0).unwrap(),
            RectWithHoles::six_hole_benchmark(),
        ),
        (
            "multi-frequency",
            ExactSolution::multi_frequency(0.1).unwrap(),
            RectWithHoles::six_hole_benchmark(),
        ),
    ];
    let weights = LossWeights { alpha: 2000.0, beta: 100.0 };

    for (name, solution, domain) in cases {
        println!("{name} (nu = {}, lambda = {:.6}):", solution.nu, solution.lambda);
        let mut rng = StdRng::seed_from_u64(11);
        let pts = domain.sample_interior(500, &mut rng);
        let forcing: Vec<[f64; 2]> = pts.iter().map(|&p| solution.forcing(p)).collect();
        let divf: Vec<f64> = pts.iter().map(|&p| solution.div_forcing(p)).collect();
        let boundary = domain.sample_boundary(250, &mut rng);
        let bpts: Vec<[f64; 2]> = boundary.iter().map(|s| s.point).collect();
        let bvals: Vec<[f64; 2]> = bpts.iter().map(|&p| solution.velocity(p)).collect();

        for variant in LossVariant::ALL {
            let fields = FieldSet::oracle(solution.clone(), variant.requirements());
            let mut tape = mscale_stokes::autodiff::Tape::new(0);
            let (_, bundle) = loss::record_total(
                &mut tape,
                &fields,
                &[],
                variant,
                solution.nu,
                weights,
                &InteriorData { pts: &pts, forcing: &forcing, div_forcing: &divf },
                &BoundaryData { pts: &bpts, values: &bvals },
            )
            .unwrap();
            println!("  {:<22} total residual {:.3e}", variant.label(), bundle.total);
        }
        println!();
    }
}
