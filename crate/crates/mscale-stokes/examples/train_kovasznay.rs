//! Train a small multi-scale model on the Kovasznay benchmark and watch
//! the errors fall. Uses a reduced version of the flow-past-nothing
//! rectangle setup: a few thousand points and a couple hundred epochs,
//! about a minute in release mode.
//!
//!     cargo run --release --example train_kovasznay

use mscale_stokes::config::parse_str;
use mscale_stokes::trainer::Trainer;

const CONFIG: &str = r#"
preset = "kovasznay-s4"

[networks.u]
scales = [1.0, 2.0, 4.0, 8.0]
hidden_layers = 2
hidden_width = 24

[networks.p]
scales = [1.0, 2.0, 4.0, 8.0]
hidden_layers = 2
hidden_width = 24

[networks.q]
scales = [1.0, 2.0, 4.0, 8.0]
hidden_layers = 2
hidden_width = 24

[networks.aux]
scales = [1.0, 2.0, 4.0, 8.0]
hidden_layers = 2
hidden_width = 24

[training]
epochs = 60
interior_points = 3000
boundary_points = 1200
interior_batch = 500
boundary_batch = 200
lr_drop_every = 30
lr_drop_factor = 0.1
eval_every = 10
eval_set = "grid:80,80"
"#;

fn main() {
    let config = parse_str(CONFIG).unwrap();
    let trainer = Trainer::new(config).unwrap();
    println!(
        "{} parameters across u, p, q, and the vorticity net; {} steps per epoch",
        trainer.fields.param_count(),
        trainer.steps_per_epoch()
    );

    let mut state = trainer.initial_state();
    let mut history = Vec::new();
    trainer.train(&mut state, &mut history).unwrap();

    println!("\nepoch      lr      loss_total      Err_u      Err_p");
    for r in &history {
        if let (Some(eu), Some(ep)) = (r.err_u, r.err_p) {
            println!(
                "{:>5}  {:>6.0e}  {:>12.4e}  {:>9.3e}  {:>9.3e}",
                r.epoch, r.lr, r.loss.total, eu, ep
            );
        }
    }

    // A profile along a horizontal line, the same view the plotting
    // pipeline consumes.
    println!("\nprofile at y = 0.7:");
    println!("{:>6}  {:>10}  {:>10}  {:>10}  {:>10}", "x", "u1_dnn", "u1_exact", "p_dnn", "p_exact");
    for row in trainer.profile_line(&state.params, 0.7, 9).unwrap() {
        println!(
            "{:>6.3}  {:>10.5}  {:>10.5}  {:>10.5}  {:>10.5}",
            row.x, row.u1_dnn, row.u1_exact, row.p_dnn, row.p_exact
        );
    }
}
