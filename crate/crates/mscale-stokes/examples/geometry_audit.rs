//! Inspect the holed benchmark domain: exact and sampled fluid area,
//! boundary make-up, and the compatibility flux of each benchmark's
//! Dirichlet data.
//!
//!     cargo run --release --example geometry_audit

use mscale_stokes::geometry::RectWithHoles;
use mscale_stokes::problems::ExactSolution;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() {
    let domain = RectWithHoles::six_hole_benchmark();
    println!("rectangle area          {}", domain.rect_area());
    println!("fluid area (exact)      {}", domain.fluid_area());

    let mut rng = StdRng::seed_from_u64(7);
    let proposals = 1_000_000;
    let mut accepted = 0;
    for _ in 0..proposals {
        let p = [
            rng.gen_range(domain.xmin..domain.xmax),
            rng.gen_range(domain.ymin..domain.ymax),
        ];
        if domain.contains(p) {
            accepted += 1;
        }
    }
    let rate = accepted as f64 / proposals as f64;
    println!("acceptance rate         {rate}");
    println!("fluid area (sampled)    {}", rate * domain.rect_area());

    println!("\nboundary components (length):");
    for (i, len) in domain.component_lengths().iter().enumerate() {
        let kind = match i {
            0 => "bottom edge",
            1 => "right edge",
            2 => "top edge",
            3 => "left edge",
            _ => "hole",
        };
        println!("  {i:>2}  {kind:<12} {len:.6}");
    }

    // A divergence-free field must carry zero net flux through the whole
    // boundary; the quadrature should resolve that to near roundoff.
    println!("\ncompatibility flux (2000 nodes):");
    let cases = [
        ("kovasznay", ExactSolution::kovasznay(0.1).unwrap()),
        ("two-frequency", ExactSolution::two_frequency(0.1, 50.0, 55.0).unwrap()),
        ("multi-frequency", ExactSolution::multi_frequency(0.1).unwrap()),
    ];
    for (name, solution) in &cases {
        let flux = domain.compatibility_flux(|p| solution.velocity(p), 2000);
        println!("  {name:<16} {flux:+.3e}");
    }

    // Sanity check of the quadrature itself: g = (x, 0) has divergence 1,
    // so its flux must equal the fluid area.
    let flux = domain.compatibility_flux(|p| [p[0], 0.0], 2000);
    println!("\nflux of g=(x,0)         {flux} (equals the fluid area)");
}
