//! Tournaments between policies and the CSV files they produce.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Policy;
use crate::encoding::ActionId;
use crate::error::GameError;
use crate::game::{TableState, MAX_PLAYERS, MIN_PLAYERS};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("need between 2 and 10 agents, got {0}")]
    AgentCount(usize),
    #[error("game {game}: agent {agent} chose illegal action {action}")]
    IllegalAction {
        game: usize,
        agent: usize,
        action: ActionId,
    },
    #[error("game {game}: {source}")]
    Game { game: usize, source: GameError },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentStats {
    pub agent: usize,
    pub name: String,
    pub games: usize,
    pub wins: usize,
    pub win_rate: f64,
    /// Sum of rewards over games divided by games.
    pub avg_reward: f64,
    /// Half-width of the normal-approximation 95% interval on `win_rate`.
    pub ci95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub num_games: usize,
    pub seat_rotation: bool,
    pub agents: Vec<AgentStats>,
}

/// `1.96 * sqrt(p (1 - p) / n)`.
pub fn ci95(p: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.96 * (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Seat of agent `agent` in game `game`.
pub fn seat_of(agent: usize, game: usize, n: usize, rotate: bool) -> usize {
    if rotate {
        (agent + game) % n
    } else {
        agent
    }
}

fn play_one(agents: &[&dyn Policy], game: usize, seed: u64, rotate: bool) -> Result<usize, EvalError> {
    let n = agents.len();
    let game_seed = derive_seed(seed, game as u64);
    let mut env = TableState::new(n, game_seed).map_err(|source| EvalError::Game { game, source })?;
    let mut rng = rng_from_seed(derive_seed(game_seed, 1));
    let agent_at: Vec<usize> = (0..n)
        .map(|seat| {
            (0..n)
                .find(|&a| seat_of(a, game, n, rotate) == seat)
                .expect("rotation is a permutation")
        })
        .collect();
    while !env.is_over() {
        if env.is_stalled() {
            return Err(EvalError::Game {
                game,
                source: GameError::Stalled(env.round_count()),
            });
        }
        let seat = env.current_player();
        let agent = agent_at[seat];
        let view = env.view(seat);
        let action = agents[agent].act(&view, &mut rng);
        if !view.legal_actions.contains(action) {
            return Err(EvalError::IllegalAction { game, agent, action });
        }
        env.apply_action(action)
            .map_err(|source| EvalError::Game { game, source })?;
    }
    let winner_seat = env.result().expect("game over").winner;
    Ok(agent_at[winner_seat])
}

/// Plays `num_games` independent games. Game `g` uses a seed derived from
/// `seed` and `g`; with `seat_rotation` agent `i` sits at seat
/// `(i + g) % n`. Games run in parallel and the report does not depend on
/// scheduling.
pub fn play_match(
    agents: &[&dyn Policy],
    num_games: usize,
    seed: u64,
    seat_rotation: bool,
) -> Result<EvalReport, EvalError> {
    let n = agents.len();
    if !(MIN_PLAYERS..=MAX_PLAYERS).contains(&n) {
        return Err(EvalError::AgentCount(n));
    }
    let winners: Vec<usize> = (0..num_games)
        .into_par_iter()
        .map(|g| play_one(agents, g, seed, seat_rotation))
        .collect::<Result<_, _>>()?;
    let mut wins = vec![0usize; n];
    for w in winners {
        wins[w] += 1;
    }
    let agents = agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let win_rate = if num_games == 0 {
                0.0
            } else {
                wins[i] as f64 / num_games as f64
            };
            AgentStats {
                agent: i,
                name: a.name().to_string(),
                games: num_games,
                wins: wins[i],
                win_rate,
                // Rewards are +1 for the single winner and -1 otherwise, so
                // the mean reward is 2p - 1; computed that way it is exact.
                avg_reward: if num_games == 0 { 0.0 } else { 2.0 * win_rate - 1.0 },
                ci95: ci95(win_rate, num_games),
            }
        })
        .collect();
    Ok(EvalReport {
        seed,
        num_games,
        seat_rotation,
        agents,
    })
}

/// One evaluation of a training checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub episode: u64,
    pub games: usize,
    pub win_rate: f64,
    pub total_avg_reward: f64,
    pub ci95: f64,
}

impl EvalPoint {
    pub fn from_report(episode: u64, report: &EvalReport, agent: usize) -> EvalPoint {
        let a = &report.agents[agent];
        EvalPoint {
            episode,
            games: a.games,
            win_rate: a.win_rate,
            total_avg_reward: a.avg_reward,
            ci95: a.ci95,
        }
    }
}

pub const CURVE_HEADER: [&str; 5] = ["episode", "games", "win_rate", "total_avg_reward", "ci95"];

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(EvalError::from)).collect()
}

/// Writes a learning curve, one row per evaluation. An empty series gives a
/// header-only file.
pub fn export_curves(path: impl AsRef<Path>, points: &[EvalPoint]) -> Result<(), EvalError> {
    write_rows(path.as_ref(), &CURVE_HEADER, points)
}

pub fn read_curves(path: impl AsRef<Path>) -> Result<Vec<EvalPoint>, EvalError> {
    read_rows(path.as_ref())
}

pub const REPORT_HEADER: [&str; 7] = ["agent", "name", "games", "wins", "win_rate", "avg_reward", "ci95"];

pub fn export_report(path: impl AsRef<Path>, report: &EvalReport) -> Result<(), EvalError> {
    write_rows(path.as_ref(), &REPORT_HEADER, &report.agents)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Vec<AgentStats>, EvalError> {
    read_rows(path.as_ref())
}

/// Appends rows to a CSV file, writing the header once.
pub struct CsvLog {
    writer: csv::Writer<File>,
}

impl CsvLog {
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<CsvLog, EvalError> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        writer.write_record(header)?;
        writer.flush()?;
        Ok(CsvLog { writer })
    }

    pub fn append<T: Serialize>(&mut self, row: &T) -> Result<(), EvalError> {
        self.writer.serialize(row)?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<File, EvalError> {
        let mut f = self.writer.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
        f.flush()?;
        Ok(f)
    }
}

pub const TRAINING_LOG_HEADER: [&str; 10] = [
    "episode",
    "env_steps",
    "decisions",
    "train_steps",
    "loss_ddqn",
    "loss_mcts",
    "loss_total",
    "epsilon",
    "reward",
    "wall_clock_s",
];
