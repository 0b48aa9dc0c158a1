//! Training config files.
//!
//! A config is a flat TOML table. Every training key is optional and falls
//! back to its default; two more keys belong to the command itself:
//! `out_dir` (where results go) and `resume` (a checkpoint to continue
//! from). Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use uno_core::agents::TrainConfig;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    pub resume: Option<PathBuf>,
}

impl RunConfig {
    pub fn default_out_dir(train: &TrainConfig) -> PathBuf {
        PathBuf::from(format!("runs/{}-seed{}", train.algorithm, train.seed))
    }
}

fn take_path(table: &mut toml::Table, key: &str, origin: &str) -> Result<Option<PathBuf>, CliError> {
    match table.remove(key) {
        None => Ok(None),
        Some(toml::Value::String(s)) => Ok(Some(PathBuf::from(s))),
        Some(other) => Err(CliError::Usage(format!(
            "{origin}: invalid value for `{key}`: expected a string, found {}",
            other.type_str()
        ))),
    }
}

/// Parses config text. `origin` prefixes error messages.
pub fn parse_run_config(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("{origin}: {}", e.message())))?;
    let out_dir = take_path(&mut table, "out_dir", origin)?;
    let resume = take_path(&mut table, "resume", origin)?;
    let train = TrainConfig::deserialize(toml::Value::Table(table.clone())).map_err(|e| {
        // Type errors do not say which key they came from; find it.
        let culprit = table.iter().find(|(k, v)| {
            let single = toml::Table::from_iter([((*k).clone(), (*v).clone())]);
            TrainConfig::deserialize(toml::Value::Table(single)).is_err()
        });
        match culprit {
            Some((k, _)) if !e.message().contains(k.as_str()) => {
                CliError::Usage(format!("{origin}: invalid value for `{k}`: {}", e.message()))
            }
            _ => CliError::Usage(format!("{origin}: {}", e.message())),
        }
    })?;
    train
        .validate()
        .map_err(|e| CliError::Usage(format!("{origin}: {e}")))?;
    Ok(RunConfig {
        out_dir: out_dir.unwrap_or_else(|| RunConfig::default_out_dir(&train)),
        train,
        resume,
    })
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_run_config(&text, &path.display().to_string())
}

/// The effective config with every default spelled out. Loading it again
/// gives back the same [`RunConfig`].
pub fn manifest_text(config: &RunConfig) -> Result<String, CliError> {
    let mut table = toml::Table::try_from(&config.train)
        .map_err(|e| CliError::Usage(format!("config cannot be written as TOML: {e}")))?;
    table.insert(
        "out_dir".into(),
        toml::Value::String(config.out_dir.display().to_string()),
    );
    if let Some(r) = &config.resume {
        table.insert("resume".into(), toml::Value::String(r.display().to_string()));
    }
    let body =
        toml::to_string(&table).map_err(|e| CliError::Usage(format!("config cannot be written as TOML: {e}")))?;
    Ok(format!(
        "# Effective configuration of this run, defaults included.\n# Re-run with: uno train <this file>\n# uno {}\n{body}",
        env!("CARGO_PKG_VERSION")
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use uno_core::agents::Algorithm;

    fn usage(r: Result<RunConfig, CliError>) -> String {
        match r {
            Err(CliError::Usage(m)) => m,
            other => panic!("expected a usage error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_run_config("", "x").unwrap();
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.train.discount, 0.99);
        assert_eq!(c.train.simulations, 50);
        assert_eq!(c.out_dir, PathBuf::from("runs/ddqn_mcts-seed0"));
    }

    #[test]
    fn keys_override_defaults() {
        let c = parse_run_config(
            "algorithm = \"nfsp\"\nplayers = 4\nlr = 1e-3\nsimulation_mode = \"determinized\"\nout_dir = \"o\"\n",
            "x",
        )
        .unwrap();
        assert_eq!(c.train.algorithm, Algorithm::Nfsp);
        assert_eq!(c.train.players, 4);
        assert_eq!(c.train.lr, 1e-3);
        assert_eq!(c.out_dir, PathBuf::from("o"));
    }

    #[test]
    fn errors_name_the_field() {
        assert!(usage(parse_run_config("colour = 1", "x")).contains("colour"));
        assert!(usage(parse_run_config("players = 11", "x")).contains("players"));
        assert!(usage(parse_run_config("lr = \"fast\"", "x")).contains("lr"));
        assert!(usage(parse_run_config("algorithm = \"ppo\"", "x")).contains("ppo"));
        assert!(usage(parse_run_config("out_dir = 3", "x")).contains("out_dir"));
        assert!(usage(parse_run_config("players = ", "cfg.toml")).starts_with("cfg.toml"));
    }

    #[test]
    fn manifest_reloads_to_the_same_config() {
        let c = parse_run_config(
            "algorithm = \"dmc\"\nseed = 17\nepsilon_end = 0.1\nresume = \"a.ckpt\"\n",
            "x",
        )
        .unwrap();
        let text = manifest_text(&c).unwrap();
        assert_eq!(parse_run_config(&text, "manifest").unwrap(), c);
    }
}
