//! Show that checkpoints capture training exactly: run ten epochs straight
//! through, then run five, save, load, and run five more. Both paths end
//! with bit-identical parameters and history tails.
//!
//!     cargo run --release --example checkpoint_resume

use mscale_stokes::checkpoint;
use mscale_stokes::config::parse_str;
use mscale_stokes::trainer::Trainer;

const CONFIG: &str = r#"
preset = "kovasznay-s4"

[networks.u]
scales = [1.0, 2.0]
hidden_layers = 1
hidden_width = 12

[networks.p]
scales = [1.0]
hidden_layers = 1
hidden_width = 12

[networks.q]
scales = [1.0]
hidden_layers = 1
hidden_width = 12

[networks.aux]
scales = [1.0, 2.0]
hidden_layers = 1
hidden_width = 12

[training]
epochs = 10
interior_points = 1000
boundary_points = 400
interior_batch = 200
boundary_batch = 80
eval_every = 5
eval_set = "random:500"
deterministic = true
"#;

fn main() {
    let config = parse_str(CONFIG).unwrap();
    let trainer = Trainer::new(config.clone()).unwrap();

    // Path one: ten epochs without interruption.
    let mut straight = trainer.initial_state();
    let mut straight_history = Vec::new();
    trainer.train(&mut straight, &mut straight_history).unwrap();

    // Path two: five epochs, a round trip through the checkpoint file,
    // then five more.
    let mut half_config = config.clone();
    half_config.training.epochs = 5;
    let half_trainer = Trainer::new(half_config).unwrap();
    let mut state = half_trainer.initial_state();
    let mut history = Vec::new();
    half_trainer.train(&mut state, &mut history).unwrap();

    let dir = std::env::temp_dir().join("mscale-stokes-example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("halfway.ckpt");
    checkpoint::save(&path, &config, &half_trainer.fields, &state).unwrap();
    println!("saved {} ({} bytes)", path.display(), std::fs::metadata(&path).unwrap().len());

    let loaded = checkpoint::load(&path).unwrap();
    println!(
        "loaded epoch {} with {} parameters",
        loaded.state.epoch,
        loaded.state.params.len()
    );
    let mut resumed = loaded.state;
    trainer.train(&mut resumed, &mut history).unwrap();

    println!("\nstraight params == resumed params: {}", straight.params == resumed.params);
    println!(
        "straight history tail == resumed tail: {}",
        straight_history[5..] == history[5..]
    );
    let last = straight_history.last().unwrap();
    println!(
        "final epoch {}: loss {:.4e}, Err_u {:.4e}",
        last.epoch,
        last.loss.total,
        last.err_u.unwrap()
    );
}
