//! Centralised multi-agent DDPG over the CAV graph.

mod ddpg;
mod networks;
mod noise;
mod replay;
mod train;

pub use ddpg::{select_action, soft_update, td_target, DdpgAgent, TrainConfig, UpdateStats};
pub use networks::{clip_action, ActorParams, ActorTrace, CriticParams, CriticTrace, Fusion, HIDDEN};
pub use noise::OuNoise;
pub use replay::{ReplayBuffer, Transition};
pub use train::{episode_seed, train, EpisodeLog};
