//! Training loop shared by all algorithms.
//!
//! One learner plays against random opponents. Each episode is generated
//! with frozen parameters, then every `train_every` newly stored samples
//! (past `warmup`) trigger one optimizer step.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, ReservoirBuffer};
use super::ddqn::{DdqnLearner, LossComponents, Transition};
use super::dmc::{dmc_samples, DmcLearner, DmcSample};
use super::episode::{generate_episode, Decision};
use super::nfsp::{nfsp_act, NfspLearner};
use super::policy::{epsilon_greedy, EpsilonSchedule, GreedyPolicy, RandomPolicy};
use crate::encoding::{ActionId, EncodedState};
use crate::error::{AgentError, NetworkError};
use crate::eval::{play_match, EvalPoint};
use crate::game::{TableState, MAX_PLAYERS, MIN_PLAYERS};
use crate::mcts::{run_search, MctsConfig, SimulationMode};
use crate::neural::{save_checkpoint, AdamConfig, Checkpoint, CheckpointMeta, Network, DEFAULT_LAYERS};
use crate::rng::{derive_seed, rng_from_seed, GameRng};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    DdqnMcts,
    Ddqn,
    Dmc,
    Nfsp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::DdqnMcts, Algorithm::Ddqn, Algorithm::Dmc, Algorithm::Nfsp];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::DdqnMcts => "ddqn_mcts",
            Algorithm::Ddqn => "ddqn",
            Algorithm::Dmc => "dmc",
            Algorithm::Nfsp => "nfsp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Algorithm, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?} (expected ddqn_mcts, ddqn, dmc or nfsp)"))
    }
}

/// Every knob of a training run. Defaults follow the reference setup:
/// lr 5e-5, batch 32, discount 0.99, 50 simulations per decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub players: usize,
    pub episodes: u64,
    pub seed: u64,
    pub lr: f64,
    pub batch_size: usize,
    pub discount: f64,
    pub simulations: usize,
    pub c_puct: f64,
    pub simulation_mode: SimulationMode,
    pub replay_capacity: usize,
    pub reservoir_capacity: usize,
    pub warmup: usize,
    pub train_every: usize,
    pub target_sync: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub eta: f64,
    pub eval_every: u64,
    pub eval_games: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::DdqnMcts,
            players: 2,
            episodes: 3000,
            seed: 0,
            lr: 5e-5,
            batch_size: 32,
            discount: 0.99,
            simulations: 50,
            c_puct: 1.0,
            simulation_mode: SimulationMode::Oracle,
            replay_capacity: 20_000,
            reservoir_capacity: 100_000,
            warmup: 100,
            train_every: 1,
            target_sync: 1000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 20_000,
            eta: 0.1,
            eval_every: 1000,
            eval_games: 1000,
        }
    }
}

/// A rejected configuration value.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid value for `{field}`: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &'static str, reason: &str| {
            Err(ConfigError {
                field,
                reason: reason.to_string(),
            })
        };
        if !(MIN_PLAYERS..=MAX_PLAYERS).contains(&self.players) {
            return bad("players", "must be between 2 and 10");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr", "must be a positive number");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount", "must lie in [0, 1]");
        }
        if self.algorithm == Algorithm::DdqnMcts && self.simulations == 0 {
            return bad("simulations", "must be positive for ddqn_mcts");
        }
        if !(self.c_puct.is_finite() && self.c_puct >= 0.0) {
            return bad("c_puct", "must be a non-negative number");
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity", "must be at least batch_size");
        }
        if self.reservoir_capacity < self.batch_size {
            return bad("reservoir_capacity", "must be at least batch_size");
        }
        if self.train_every == 0 {
            return bad("train_every", "must be positive");
        }
        for (field, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
            ("eta", self.eta),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(field, "must lie in [0, 1]");
            }
        }
        if self.eval_every > 0 && self.eval_games == 0 {
            return bad("eval_games", "must be positive when eval_every is set");
        }
        Ok(())
    }

    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_steps: self.epsilon_decay_steps,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }

    pub fn mcts(&self, epsilon: f64) -> MctsConfig {
        MctsConfig {
            simulations: self.simulations,
            c_puct: self.c_puct,
            discount: self.discount,
            epsilon,
            mode: self.simulation_mode,
            trace: false,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Learner {
    /// DDQN, with or without the search term.
    Q(DdqnLearner),
    Dmc(DmcLearner),
    Nfsp(NfspLearner),
}

/// One row of the training log.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: u64,
    pub env_steps: u64,
    pub decisions: u64,
    pub train_steps: u64,
    pub loss_ddqn: f64,
    pub loss_mcts: f64,
    pub loss_total: f64,
    pub epsilon: f64,
    pub reward: f64,
    pub wall_clock_s: f64,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub learner: Learner,
    replay: ReplayBuffer<Transition>,
    dmc_replay: ReplayBuffer<DmcSample>,
    msl: ReservoirBuffer<(EncodedState, ActionId)>,
    rng: GameRng,
    pub episode: u64,
    pub env_steps: u64,
    pub decisions: u64,
    stored: u64,
    started: Instant,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Trainer, ConfigError> {
        config.validate()?;
        let net = Network::init(&DEFAULT_LAYERS, derive_seed(config.seed, u64::MAX));
        let adam = config.adam();
        let q = |mcts| {
            DdqnLearner::new(
                net.clone(),
                adam,
                config.discount,
                config.batch_size,
                config.target_sync,
                mcts,
            )
        };
        let learner = match config.algorithm {
            Algorithm::DdqnMcts => Learner::Q(q(true)),
            Algorithm::Ddqn => Learner::Q(q(false)),
            Algorithm::Dmc => Learner::Dmc(DmcLearner::new(net.clone(), adam, config.batch_size)),
            Algorithm::Nfsp => {
                let policy = Network::init(&DEFAULT_LAYERS, derive_seed(config.seed, u64::MAX - 1));
                Learner::Nfsp(NfspLearner::new(q(false), policy, adam, config.eta))
            }
        };
        Ok(Trainer {
            rng: rng_from_seed(derive_seed(config.seed, u64::MAX - 2)),
            replay: ReplayBuffer::new(config.replay_capacity),
            dmc_replay: ReplayBuffer::new(config.replay_capacity),
            msl: ReservoirBuffer::new(config.reservoir_capacity),
            config,
            learner,
            episode: 0,
            env_steps: 0,
            decisions: 0,
            stored: 0,
            started: Instant::now(),
        })
    }

    /// Network used for greedy play: the estimator, or the average policy
    /// for NFSP.
    pub fn eval_network(&self) -> &Network {
        match &self.learner {
            Learner::Q(l) => &l.estimator,
            Learner::Dmc(l) => &l.net,
            Learner::Nfsp(l) => &l.policy,
        }
    }

    pub fn greedy_policy(&self) -> GreedyPolicy {
        GreedyPolicy::new(self.eval_network().clone(), self.config.algorithm.as_str())
    }

    /// Seat of the learner in `episode`; rotates so every seat is trained.
    pub fn learner_seat(&self, episode: u64) -> usize {
        (episode % self.config.players as u64) as usize
    }

    /// Generates one episode and runs the training steps it unlocks.
    pub fn run_episode(&mut self) -> Result<EpisodeLog, AgentError> {
        self.episode += 1;
        let episode = self.episode;
        let seat = self.learner_seat(episode);
        let mut env = TableState::new(self.config.players, derive_seed(self.config.seed, episode))?;
        let schedule = self.config.epsilon();
        let config = &self.config;
        let decisions = &mut self.decisions;
        let msl = &mut self.msl;
        let opponent = RandomPolicy;

        let transitions = match &self.learner {
            Learner::Q(l) if l.mcts => {
                let net = &l.estimator;
                generate_episode(&mut env, seat, &opponent, &mut self.rng, |table, _, _, rng| {
                    let eps = schedule.value(*decisions);
                    *decisions += 1;
                    let res = run_search(table, net, &config.mcts(eps), &opponent, rng)?;
                    Ok(Decision {
                        action: res.a_best,
                        q_m: Some(res.q_m_chosen),
                        r_m: res.r_m,
                    })
                })?
            }
            Learner::Q(DdqnLearner { estimator: net, .. }) | Learner::Dmc(DmcLearner { net, .. }) => {
                generate_episode(&mut env, seat, &opponent, &mut self.rng, |_, s, legal, rng| {
                    let eps = schedule.value(*decisions);
                    *decisions += 1;
                    Ok(Decision::plain(epsilon_greedy(&net.predict(s), legal, eps, rng)?))
                })?
            }
            Learner::Nfsp(l) => generate_episode(&mut env, seat, &opponent, &mut self.rng, |_, s, legal, rng| {
                let eps = schedule.value(*decisions);
                *decisions += 1;
                let (a, best_response) = nfsp_act(s, legal, &l.value.estimator, &l.policy, l.eta, eps, rng)?;
                if best_response {
                    msl.push((*s, a), rng);
                }
                Ok(Decision::plain(a))
            })?,
        };
        self.env_steps += u64::from(env.round_count());
        let reward = transitions.last().map_or(0.0, |t| t.r);

        let mut losses = Vec::new();
        let new_samples = match self.learner {
            Learner::Dmc(_) => {
                let samples = dmc_samples(&transitions, self.config.discount);
                let n = samples.len();
                for x in samples {
                    self.dmc_replay.push(x);
                }
                n
            }
            _ => {
                let n = transitions.len();
                for t in transitions {
                    self.replay.push(t);
                }
                n
            }
        };
        for _ in 0..new_samples {
            self.stored += 1;
            if self.stored < self.config.warmup as u64 || !self.stored.is_multiple_of(self.config.train_every as u64) {
                continue;
            }
            if let Some(loss) = self.train_once()? {
                losses.push(loss);
            }
        }

        let n = losses.len().max(1) as f64;
        let train_steps = match &self.learner {
            Learner::Q(l) => l.train_steps,
            Learner::Dmc(l) => l.train_steps,
            Learner::Nfsp(l) => l.value.train_steps,
        };
        Ok(EpisodeLog {
            episode,
            env_steps: self.env_steps,
            decisions: self.decisions,
            train_steps,
            loss_ddqn: losses.iter().map(|l| l.ddqn).sum::<f64>() / n,
            loss_mcts: losses.iter().map(|l| l.mcts).sum::<f64>() / n,
            loss_total: losses.iter().map(|l| l.total).sum::<f64>() / n,
            epsilon: schedule.value(self.decisions),
            reward,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        })
    }

    /// One optimizer step; `None` while the buffers are too small. A
    /// non-finite gradient skips the step.
    fn train_once(&mut self) -> Result<Option<LossComponents>, AgentError> {
        let batch = self.config.batch_size;
        let result = match &mut self.learner {
            Learner::Q(l) => {
                if self.replay.len() < batch {
                    return Ok(None);
                }
                l.train_step(&self.replay, &mut self.rng)
            }
            Learner::Dmc(l) => {
                if self.dmc_replay.len() < batch {
                    return Ok(None);
                }
                let samples = self.dmc_replay.sample(batch, &mut self.rng)?;
                l.train_on(&samples).map(|loss| LossComponents {
                    ddqn: loss,
                    mcts: 0.0,
                    total: loss,
                })
            }
            Learner::Nfsp(l) => {
                if self.replay.len() < batch || self.msl.len() < batch {
                    return Ok(None);
                }
                super::nfsp::nfsp_train_step(l, &self.replay, &self.msl, &mut self.rng).map(|x| LossComponents {
                    ddqn: x.value,
                    mcts: x.policy,
                    total: x.value + x.policy,
                })
            }
        };
        match result {
            Ok(loss) => Ok(Some(loss)),
            Err(AgentError::Network(NetworkError::NonFiniteGradient)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Greedy evaluation against random opponents, learner in every seat
    /// in turn.
    pub fn evaluate(&self, games: usize, seed: u64) -> Result<EvalPoint, AgentError> {
        let policy = self.greedy_policy();
        let random = RandomPolicy;
        let mut agents: Vec<&dyn super::Policy> = vec![&policy];
        for _ in 1..self.config.players {
            agents.push(&random);
        }
        let report = play_match(&agents, games, seed, true).map_err(|e| AgentError::Eval(e.to_string()))?;
        Ok(EvalPoint::from_report(self.episode, &report, 0))
    }

    /// Runs until `config.episodes`, evaluating every `eval_every`
    /// episodes.
    pub fn run(
        &mut self,
        mut on_episode: impl FnMut(&EpisodeLog),
        mut on_eval: impl FnMut(&EvalPoint, &Trainer),
    ) -> Result<Vec<EvalPoint>, AgentError> {
        let mut points = Vec::new();
        while self.episode < self.config.episodes {
            let log = self.run_episode()?;
            on_episode(&log);
            let every = self.config.eval_every;
            if every > 0 && self.episode.is_multiple_of(every) {
                let point = self.evaluate(
                    self.config.eval_games,
                    derive_seed(self.config.seed ^ 0xE7A1, self.episode),
                )?;
                on_eval(&point, self);
                points.push(point);
            }
        }
        Ok(points)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        let opt = match &self.learner {
            Learner::Q(l) => &l.optimizer,
            Learner::Dmc(l) => &l.optimizer,
            Learner::Nfsp(l) => &l.policy_optimizer,
        };
        let meta = CheckpointMeta {
            seed: self.config.seed,
            episode: self.episode,
            algorithm: self.config.algorithm.as_str().to_string(),
        };
        save_checkpoint(path, self.eval_network(), Some(opt), &meta)
    }

    /// Continues from a saved checkpoint: network weights, optimizer state
    /// and the episode counter are restored. Replay memory and the
    /// exploration RNG start fresh.
    pub fn warm_start(&mut self, ckpt: Checkpoint) -> Result<(), ConfigError> {
        let mismatch = |reason: String| ConfigError {
            field: "resume",
            reason,
        };
        if ckpt.meta.algorithm != self.config.algorithm.as_str() {
            return Err(mismatch(format!(
                "checkpoint was trained with {}, config says {}",
                ckpt.meta.algorithm, self.config.algorithm
            )));
        }
        if ckpt.net.layer_sizes() != DEFAULT_LAYERS {
            return Err(mismatch(format!("checkpoint layers {:?}", ckpt.net.layer_sizes())));
        }
        if ckpt.meta.episode >= self.config.episodes {
            return Err(mismatch(format!(
                "checkpoint is at episode {}, run ends at {}",
                ckpt.meta.episode, self.config.episodes
            )));
        }
        let net = ckpt.net;
        match &mut self.learner {
            Learner::Q(l) => {
                l.estimator = net.clone();
                l.target = net;
                if let Some(o) = ckpt.optimizer {
                    l.optimizer = o;
                }
            }
            Learner::Dmc(l) => {
                l.net = net;
                if let Some(o) = ckpt.optimizer {
                    l.optimizer = o;
                }
            }
            Learner::Nfsp(l) => {
                l.policy = net;
                if let Some(o) = ckpt.optimizer {
                    l.policy_optimizer = o;
                }
            }
        }
        self.episode = ckpt.meta.episode;
        Ok(())
    }
}
