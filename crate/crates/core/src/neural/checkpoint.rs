//! Checkpoint files.
//!
//! A checkpoint is a short ASCII header followed by raw little-endian f64
//! values:
//!
//! ```text
//! uno-checkpoint 1
//! layers 240 64 64 61
//! seed 42
//! episode 3000
//! algorithm ddqn_mcts
//! adam 5e-5 0.9 0.999 1e-8 91234
//! optimizer 1
//! end
//! <parameters in flat layer order>
//! <adam first moments, same order>    (only when optimizer is 1)
//! <adam second moments, same order>   (only when optimizer is 1)
//! ```
//!
//! Header floats are written in Rust's shortest round-trip form, so loading
//! reproduces every value bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Adam, AdamConfig, Network};
use crate::error::NetworkError;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "uno-checkpoint";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub episode: u64,
    pub algorithm: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: Network,
    pub optimizer: Option<Adam>,
    pub meta: CheckpointMeta,
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    net: &Network,
    optimizer: Option<&Adam>,
    meta: &CheckpointMeta,
) -> Result<(), NetworkError> {
    if meta.algorithm.is_empty() || meta.algorithm.contains(char::is_whitespace) {
        return Err(NetworkError::Corrupt("algorithm name must be a single token".into()));
    }
    let config = optimizer.map(|o| o.config).unwrap_or_default();
    let step = optimizer.map_or(0, |o| o.step);
    let sizes: Vec<String> = net.layer_sizes().iter().map(usize::to_string).collect();
    let mut out = Vec::new();
    writeln!(out, "{MAGIC} {FORMAT_VERSION}")?;
    writeln!(out, "layers {}", sizes.join(" "))?;
    writeln!(out, "seed {}", meta.seed)?;
    writeln!(out, "episode {}", meta.episode)?;
    writeln!(out, "algorithm {}", meta.algorithm)?;
    writeln!(
        out,
        "adam {:?} {:?} {:?} {:?} {}",
        config.lr, config.beta1, config.beta2, config.eps, step
    )?;
    writeln!(out, "optimizer {}", u8::from(optimizer.is_some()))?;
    writeln!(out, "end")?;
    let mut push = |n: &Network| {
        for p in n.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    };
    push(net);
    if let Some(opt) = optimizer {
        if !opt.m.same_shape(net) {
            return Err(NetworkError::Shape("optimizer state does not match network".into()));
        }
        push(&opt.m);
        push(&opt.v);
    }
    fs::write(path, out)?;
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> NetworkError {
    NetworkError::Corrupt(msg.into())
}

fn field<'a>(lines: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<Vec<&'a str>, NetworkError> {
    let line = lines.next().ok_or_else(|| corrupt(format!("missing {key} line")))?;
    let mut parts = line.split(' ');
    if parts.next() != Some(key) {
        return Err(corrupt(format!("expected {key} line, found {line:?}")));
    }
    Ok(parts.collect())
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, NetworkError> {
    s.parse().map_err(|_| corrupt(format!("bad {what}: {s:?}")))
}

/// Loads a checkpoint. With `expected_layers`, a file of any other shape is
/// rejected with a shape error.
pub fn load_checkpoint(path: impl AsRef<Path>, expected_layers: Option<&[usize]>) -> Result<Checkpoint, NetworkError> {
    let bytes = fs::read(path)?;
    let marker = b"\nend\n";
    let header_end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| corrupt("header terminator not found"))?
        + marker.len();
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| corrupt("header is not UTF-8"))?;
    let mut lines = header.lines();

    let magic = lines.next().unwrap_or_default();
    if magic != format!("{MAGIC} {FORMAT_VERSION}") {
        return Err(corrupt(format!("unsupported header {magic:?}")));
    }
    let sizes = field(&mut lines, "layers")?
        .into_iter()
        .map(|s| num::<usize>(s, "layer size"))
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(corrupt("invalid layer sizes"));
    }
    if let Some(expected) = expected_layers {
        if expected != sizes.as_slice() {
            return Err(NetworkError::Shape(format!(
                "checkpoint layers {sizes:?}, expected {expected:?}"
            )));
        }
    }
    let seed = num(field(&mut lines, "seed")?.first().copied().unwrap_or(""), "seed")?;
    let episode = num(field(&mut lines, "episode")?.first().copied().unwrap_or(""), "episode")?;
    let algorithm = field(&mut lines, "algorithm")?.join(" ");
    let adam = field(&mut lines, "adam")?;
    if adam.len() != 5 {
        return Err(corrupt("adam line needs 5 values"));
    }
    let config = AdamConfig {
        lr: num(adam[0], "lr")?,
        beta1: num(adam[1], "beta1")?,
        beta2: num(adam[2], "beta2")?,
        eps: num(adam[3], "eps")?,
    };
    let step: u64 = num(adam[4], "step")?;
    let has_opt = match field(&mut lines, "optimizer")?.as_slice() {
        ["0"] => false,
        ["1"] => true,
        other => return Err(corrupt(format!("bad optimizer flag {other:?}"))),
    };
    if lines.next() != Some("end") {
        return Err(corrupt("unexpected header line"));
    }

    let body = &bytes[header_end..];
    let mut net = Network::zeros(&sizes);
    let n = net.num_params();
    let blocks = if has_opt { 3 } else { 1 };
    if body.len() != blocks * n * 8 {
        return Err(corrupt(format!(
            "body has {} bytes, expected {}",
            body.len(),
            blocks * n * 8
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut fill = |target: &mut Network| {
        for p in target.params_mut() {
            *p = values.next().expect("length checked");
        }
    };
    fill(&mut net);
    let optimizer = if has_opt {
        let mut opt = Adam::new(&net, config);
        opt.step = step;
        fill(&mut opt.m);
        fill(&mut opt.v);
        Some(opt)
    } else {
        None
    };
    Ok(Checkpoint {
        net,
        optimizer,
        meta: CheckpointMeta {
            seed,
            episode,
            algorithm,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::DEFAULT_LAYERS;

    fn meta() -> CheckpointMeta {
        CheckpointMeta {
            seed: 17,
            episode: 4000,
            algorithm: "ddqn_mcts".into(),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let mut net = Network::init(&DEFAULT_LAYERS, 3);
        let mut opt = Adam::new(&net, AdamConfig::default());
        let mut g = Network::zeros(&DEFAULT_LAYERS);
        for i in 0..g.num_params() {
            *g.param_mut(i) = (i as f64 * 0.37).sin();
        }
        opt.step(&mut net, &g).unwrap();
        save_checkpoint(&path, &net, Some(&opt), &meta()).unwrap();
        let loaded = load_checkpoint(&path, Some(&DEFAULT_LAYERS)).unwrap();
        assert_eq!(loaded.net, net);
        assert_eq!(loaded.optimizer.as_ref(), Some(&opt));
        assert_eq!(loaded.meta, meta());
        let x = crate::encoding::encode_hand_target(&[], crate::game::Card::number(crate::game::Color::Red, 1));
        let a = net.predict(&x);
        let b = loaded.net.predict(&x);
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn without_optimizer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.ckpt");
        let net = Network::init(&[4, 3, 2], 3);
        save_checkpoint(&path, &net, None, &meta()).unwrap();
        let loaded = load_checkpoint(&path, None).unwrap();
        assert_eq!(loaded.net, net);
        assert!(loaded.optimizer.is_none());
    }

    #[test]
    fn wrong_layer_config_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        save_checkpoint(&path, &Network::init(&[240, 32, 61], 0), None, &meta()).unwrap();
        assert!(matches!(
            load_checkpoint(&path, Some(&DEFAULT_LAYERS)),
            Err(NetworkError::Shape(_))
        ));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ckpt");
        save_checkpoint(&path, &Network::init(&[4, 3, 2], 0), None, &meta()).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(NetworkError::Corrupt(_))));
        fs::write(&path, b"garbage").unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(NetworkError::Corrupt(_))));
    }
}
