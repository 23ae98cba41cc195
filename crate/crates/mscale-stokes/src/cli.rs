//! Command-line entry points. The library stays file-free; this module
//! composes training, checkpointing, and CSV emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::Rng;

use crate::checkpoint;
use crate::config::{self, EvalSet};
use crate::history;
use crate::rng::{stream_rng, STREAM_INTERIOR};
use crate::trainer::Trainer;
use crate::{Error, Result};

#[derive(Parser)]
#[command(name = "mscale-stokes", version, about = "Mesh-free Stokes solver \
training multi-scale networks on first-order least-squares residuals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train networks from a config file and write checkpoint plus history.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from a checkpoint written by the same config.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Output directory, overriding the config's `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report evaluation errors for a checkpoint.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        /// Override the evaluation set, `grid:NX,NY` or `random:N`.
        #[arg(long)]
        eval_set: Option<String>,
    },
    /// Write a solution profile along a horizontal line as CSV.
    Profile {
        #[arg(long)]
        ckpt: PathBuf,
        /// Height of the profile line.
        #[arg(long)]
        y: f64,
        /// Number of evenly spaced abscissae, endpoints included.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check domain geometry: area, sampling acceptance, boundary flux.
    AuditGeometry {
        #[arg(long)]
        config: PathBuf,
    },
}

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, resume, out } => train(&config, resume.as_deref(), out),
        Command::Evaluate { ckpt, eval_set } => evaluate(&ckpt, eval_set.as_deref()),
        Command::Profile { ckpt, y, n, out } => profile(&ckpt, y, n, &out),
        Command::AuditGeometry { config } => audit_geometry(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn train(config_path: &Path, resume: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let config = config::parse_file(config_path)?;
    let out_dir = out.unwrap_or_else(|| PathBuf::from(&config.output.directory));
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let ckpt_path = out_dir.join("checkpoint.ckpt");
    let history_path = out_dir.join("history.csv");

    let trainer = Trainer::new(config.clone())?;
    let (mut state, mut records) = match resume {
        None => (trainer.initial_state(), Vec::new()),
        Some(path) => {
            let ckpt = checkpoint::load(path)?;
            if ckpt.oracle {
                return Err(Error::usage("an oracle checkpoint cannot seed training"));
            }
            // Raising the epoch budget is what resuming is for, and the
            // output section never touches the trajectory. Everything else
            // must match or the tail would not continue the same run.
            let mut written = ckpt.config.clone();
            written.training.epochs = config.training.epochs;
            written.output = config.output.clone();
            if written != config {
                return Err(Error::config(format!(
                    "checkpoint {} was written by a different configuration",
                    path.display()
                )));
            }
            // Keep any rows the earlier run already emitted.
            let mut prefix = Vec::new();
            if history_path.exists() {
                prefix = history::read_history(&history_path)?;
                prefix.retain(|r| r.epoch <= ckpt.state.epoch);
            }
            (ckpt.state, prefix)
        }
    };

    let started = Instant::now();
    let outcome = trainer.train(&mut state, &mut records);
    // Persist progress even when training aborts on a non-finite loss.
    checkpoint::save(&ckpt_path, &config, &trainer.fields, &state)?;
    history::write_history(&history_path, &records, config.output.precision)?;
    outcome?;

    println!(
        "trained {} epochs in {:.1} s",
        state.epoch,
        started.elapsed().as_secs_f64()
    );
    if let Some(last) = records.last() {
        println!("loss_total = {}", last.loss.total);
        if let (Some(eu), Some(ep)) = (last.err_u, last.err_p) {
            println!("Err_u = {eu}");
            println!("Err_p = {ep}");
        }
    }
    println!("checkpoint: {}", ckpt_path.display());
    println!("history: {}", history_path.display());
    Ok(())
}

fn evaluate(ckpt_path: &Path, eval_set: Option<&str>) -> Result<()> {
    let ckpt = checkpoint::load(ckpt_path)?;
    let mut config = ckpt.config.clone();
    if let Some(s) = eval_set {
        config.training.eval_set = s.parse::<EvalSet>().map_err(Error::usage)?;
    }
    let fields = ckpt.fields()?;
    let trainer = Trainer::with_fields(config, fields)?;
    let (err_u, err_p) = trainer.evaluate_errors(&ckpt.state.params)?;
    println!("Err_u = {err_u}");
    println!("Err_p = {err_p}");
    Ok(())
}

fn profile(ckpt_path: &Path, y: f64, n: usize, out: &Path) -> Result<()> {
    let ckpt = checkpoint::load(ckpt_path)?;
    let fields = ckpt.fields()?;
    let trainer = Trainer::with_fields(ckpt.config.clone(), fields)?;
    let rows = trainer.profile_line(&ckpt.state.params, y, n)?;

    let precision = trainer.config.output.precision;
    let mut text = String::from("x,u1_dnn,u1_exact,u2_dnn,u2_exact,p_dnn,p_exact\n");
    for r in &rows {
        for (i, v) in [r.x, r.u1_dnn, r.u1_exact, r.u2_dnn, r.u2_exact, r.p_dnn, r.p_exact]
            .iter()
            .enumerate()
        {
            if i > 0 {
                text.push(',');
            }
            text.push_str(&format!("{v:.precision$e}"));
        }
        text.push('\n');
    }
    history::write_atomic(out, &text)?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn audit_geometry(config_path: &Path) -> Result<()> {
    let config = config::parse_file(config_path)?;
    let domain = config.build_domain()?;
    let solution = config.build_solution()?;

    // Monte Carlo acceptance probe with the run's own sampling stream.
    let proposals = 1_000_000usize;
    let mut rng = stream_rng(config.training.sampling_seed, STREAM_INTERIOR);
    let mut accepted = 0usize;
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
    let flux = domain.compatibility_flux(|p| solution.velocity(p), 2000);

    println!("fluid area (exact) = {}", domain.fluid_area());
    println!("fluid area (estimate) = {}", rate * domain.rect_area());
    println!("acceptance rate = {rate}");
    println!("compatibility flux = {flux}");
    Ok(())
}
