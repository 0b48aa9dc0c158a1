//! Learning agents, their buffers and the training loop.

mod buffer;
mod ddqn;
mod dmc;
mod episode;
mod nfsp;
mod policy;
mod trainer;

pub use buffer::{ReplayBuffer, ReservoirBuffer};
pub use ddqn::{
    ddqn_loss, ddqn_mcts_train_step, ddqn_targets, ddqn_train_step, DdqnLearner, LossComponents, RewardSource,
    Transition,
};
pub use dmc::{dmc_loss, dmc_returns, dmc_samples, dmc_train_step, DmcLearner, DmcSample};
pub use episode::{generate_episode, generate_episode_mcts, learner_state, Decision};
pub use nfsp::{nfsp_act, nfsp_train_step, NfspLearner, NfspLosses};
pub use policy::{
    epsilon_greedy, masked_argmax, random_act, sample_masked_softmax, EpsilonSchedule, GreedyPolicy, Policy,
    RandomPolicy,
};
pub use trainer::{Algorithm, ConfigError, EpisodeLog, Learner, TrainConfig, Trainer};
