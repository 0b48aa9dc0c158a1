//! `uno train`.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.toml        effective config; `uno train manifest.toml` repeats the run
//! training_log.csv     one row per episode
//! curves.csv           one row per evaluation (episode, games, win_rate, total_avg_reward, ci95)
//! checkpoints/episode-<n>.ckpt
//! checkpoints/final.ckpt
//! ```

use std::cell::RefCell;
use std::fs;

use uno_core::agents::Trainer;
use uno_core::eval::{CsvLog, CURVE_HEADER, TRAINING_LOG_HEADER};
use uno_core::neural::{load_checkpoint, DEFAULT_LAYERS};

use crate::config::{load_run_config, manifest_text, RunConfig};
use crate::{CliError, TrainArgs};

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let mut config = load_run_config(&args.config)?;
    if let Some(dir) = &args.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(e) = args.episodes {
        config.train.episodes = e;
    }
    if let Some(s) = args.seed {
        config.train.seed = s;
    }
    config.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    train(&config, args.quiet)
}

fn runtime(what: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{what}: {e}"))
}

pub fn train(config: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let mut trainer = Trainer::new(config.train.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(path) = &config.resume {
        let ckpt = load_checkpoint(path, Some(&DEFAULT_LAYERS))
            .map_err(|e| runtime(&format!("cannot load {}", path.display()), e))?;
        trainer
            .warm_start(ckpt)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }

    let out = &config.out_dir;
    let ckpt_dir = out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).map_err(|e| runtime(&format!("cannot create {}", ckpt_dir.display()), e))?;
    fs::write(out.join("manifest.toml"), manifest_text(config)?).map_err(|e| runtime("cannot write manifest", e))?;
    let episodes = RefCell::new(
        CsvLog::create(out.join("training_log.csv"), &TRAINING_LOG_HEADER).map_err(|e| runtime("training log", e))?,
    );
    let curves = RefCell::new(CsvLog::create(out.join("curves.csv"), &CURVE_HEADER).map_err(|e| runtime("curves", e))?);
    let failure: RefCell<Option<CliError>> = RefCell::new(None);
    let note = |e: CliError| {
        failure.borrow_mut().get_or_insert(e);
    };

    let t = &config.train;
    println!(
        "training {} for {} episodes, {} players, seed {} -> {}",
        t.algorithm,
        t.episodes,
        t.players,
        t.seed,
        out.display()
    );
    let report_every = (t.episodes / 20).max(1);
    trainer
        .run(
            |log| {
                if let Err(e) = episodes.borrow_mut().append(log) {
                    note(runtime("training log", e));
                }
                if !quiet && log.episode % report_every == 0 {
                    println!(
                        "episode {:>7}  steps {:>8}  loss {:.4}  eps {:.3}  {:.0}s",
                        log.episode, log.train_steps, log.loss_total, log.epsilon, log.wall_clock_s
                    );
                }
            },
            |point, trainer| {
                if let Err(e) = curves.borrow_mut().append(point) {
                    note(runtime("curves", e));
                }
                let path = ckpt_dir.join(format!("episode-{}.ckpt", point.episode));
                if let Err(e) = trainer.save(&path) {
                    note(runtime(&format!("cannot write {}", path.display()), e));
                }
                println!(
                    "eval episode {:>7}  win rate {:.3} ± {:.3}  avg reward {:+.3}",
                    point.episode, point.win_rate, point.ci95, point.total_avg_reward
                );
            },
        )
        .map_err(|e| runtime("training failed", e))?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let final_path = ckpt_dir.join("final.ckpt");
    trainer
        .save(&final_path)
        .map_err(|e| runtime(&format!("cannot write {}", final_path.display()), e))?;
    println!("wrote {}", final_path.display());
    Ok(())
}
