//! Decision makers over [`crate::simenv`]: the DDQN/DQN agent and the
//! exhaustive, random, all-local and all-offload baselines.
//!
//! Every policy sees a [`SlotState`] and returns one [`JointAction`]. Learned
//! policies act in a flat joint action space of size `(K+1)^N`, addressed
//! through [`ActionCodec`] and masked by server availability at the decision
//! positions.

use crate::error::Result;
use crate::simenv::{JointAction, Scenario, SlotState};

pub mod agent;
pub mod baselines;
pub mod codec;
pub mod encoding;
pub mod replay;

pub use agent::{
    ddqn_targets, dqn_targets, select_action, train_agent, AgentConfig, CurvePoint, GreedyPolicy,
    TrainedAgent, Variant,
};
pub use baselines::{AllLocal, AllOffload, Exhaustive, RandomPolicy};
pub use codec::ActionCodec;
pub use encoding::StateEncoder;
pub use replay::{ReplayBuffer, Transition};

pub trait Policy {
    fn decide(&mut self, scenario: &Scenario, state: &SlotState) -> Result<JointAction>;
}
