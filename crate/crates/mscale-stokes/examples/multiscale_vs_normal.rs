//! A quick look at why the multi-scale architecture exists: train the same
//! neuron budget once as four scaled subnets and once as a single plain
//! network on an oscillatory flow, and compare errors. A down-scaled
//! version of the full separation experiment (tests/acceptance.rs runs
//! that one); this takes a few minutes in release mode.
//!
//!     cargo run --release --example multiscale_vs_normal

use mscale_stokes::config::{
    BenchmarkName, DomainConfig, EvalSet, LossConfig, NetworksConfig, OutputConfig,
    ProblemConfig, RunConfig, TrainingConfig,
};
use mscale_stokes::fields::NetSpec;
use mscale_stokes::loss::LossVariant;
use mscale_stokes::trainer::Trainer;

fn config(spec: NetSpec) -> RunConfig {
    RunConfig {
        problem: ProblemConfig {
            name: BenchmarkName::TwoFrequency,
            nu: Some(0.1),
            re: None,
            freqs: Some([6.0, 7.0]),
        },
        domain: DomainConfig {
            xmin: 0.0,
            xmax: 2.0,
            ymin: -0.5,
            ymax: 1.5,
            holes: vec![],
        },
        networks: NetworksConfig {
            u: spec.clone(),
            p: spec.clone(),
            q: Some(spec.clone()),
            aux: Some(spec),
        },
        loss: LossConfig {
            variant: LossVariant::OmegaVp,
            alpha: 2000.0,
            beta: 100.0,
            alpha_adaptation: true,
        },
        training: TrainingConfig {
            epochs: 120,
            interior_points: 6000,
            boundary_points: 2400,
            interior_batch: 1000,
            boundary_batch: 200,
            lr: 1e-3,
            lr_drop_every: 60,
            lr_drop_factor: 0.1,
            init_seed: 1,
            sampling_seed: 2,
            shuffle_seed: 3,
            eval_seed: 4,
            eval_every: 20,
            eval_set: EvalSet::Random { count: 2000 },
            deterministic: false,
        },
        output: OutputConfig { directory: "runs/example".into(), precision: 16 },
    }
}

fn run(label: &str, spec: NetSpec) -> (f64, f64) {
    let trainer = Trainer::new(config(spec)).unwrap();
    println!(
        "{label}: {} parameters, {} hidden neurons per field",
        trainer.fields.param_count(),
        match &trainer.fields {
            mscale_stokes::fields::FieldSet::Trained(t) => t.u.neuron_count(),
            _ => unreachable!(),
        }
    );
    let mut state = trainer.initial_state();
    let mut history = Vec::new();
    trainer.train(&mut state, &mut history).unwrap();
    for r in &history {
        if let (Some(eu), Some(ep)) = (r.err_u, r.err_p) {
            println!("  epoch {:>4}  Err_u {eu:.4e}  Err_p {ep:.4e}", r.epoch);
        }
    }
    let last = history.last().unwrap();
    (last.err_u.unwrap(), last.err_p.unwrap())
}

fn main() {
    // Equal neuron budget: 4 subnets of 24 versus one plain net of 96.
    let multi = NetSpec { scales: vec![1.0, 2.0, 4.0, 8.0], hidden_layers: 2, hidden_width: 24 };
    let plain = NetSpec { scales: vec![1.0], hidden_layers: 2, hidden_width: 96 };

    let (mu, mp) = run("multi-scale", multi);
    println!();
    let (nu_err, np) = run("plain", plain);

    println!("\nfinal errors:");
    println!("  multi-scale  Err_u {mu:.4e}  Err_p {mp:.4e}");
    println!("  plain        Err_u {nu_err:.4e}  Err_p {np:.4e}");
    println!("  Err_u ratio  {:.2}", mu / nu_err);
}
