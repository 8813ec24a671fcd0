use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ActionCodec, Policy, ReplayBuffer, StateEncoder, Transition};
use crate::error::{Error, Result};
use crate::nn::{self, checkpoint, AdamConfig, AdamState, Mlp, Parameterized};
use crate::rng::{derive_seed, substream, Rng};
use crate::simenv::{reward, Env, JointAction, Scenario, SlotState};

pub const CHECKPOINT_KIND: &str = "agent";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Bootstrap action from the online network, value from the target.
    Ddqn,
    /// Max over the target network.
    Dqn,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddqn" => Ok(Variant::Ddqn),
            "dqn" => Ok(Variant::Dqn),
            other => Err(Error::Config(format!("unknown agent variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Linear decay length, counted from the end of warmup.
    pub epsilon_decay_steps: u64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub target_sync_period: u64,
    pub learning_rate: f64,
    pub hidden_sizes: Vec<usize>,
    /// Environment steps, warmup included.
    pub training_steps: u64,
    /// Uniformly random steps that fill the buffer before learning starts.
    pub warmup_steps: u64,
    /// Environment steps per gradient update.
    pub train_every: u64,
    pub slots_per_episode: u64,
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 5_000,
            buffer_capacity: 10_000,
            batch_size: 64,
            target_sync_period: 200,
            learning_rate: 3e-4,
            hidden_sizes: vec![128, 128],
            training_steps: 20_000,
            warmup_steps: 1_000,
            train_every: 1,
            slots_per_episode: 100,
            clip_norm: Some(10.0),
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "agent gamma {} outside [0, 1)",
                self.gamma
            )));
        }
        if !unit(self.epsilon_start) || !unit(self.epsilon_end) {
            return Err(Error::Config(
                "agent epsilon bounds must lie in [0, 1]".into(),
            ));
        }
        if self.buffer_capacity == 0
            || self.batch_size == 0
            || self.target_sync_period == 0
            || self.train_every == 0
            || self.slots_per_episode == 0
        {
            return Err(Error::Config(
                "agent buffer, batch, sync period, train_every and episode length must be >= 1"
                    .into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || self.hidden_sizes.contains(&0) {
            return Err(Error::Config(
                "agent learning rate must be >= 0 and hidden sizes >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Exploration rate after `learning_steps` post-warmup steps.
    pub fn epsilon_at(&self, learning_steps: u64) -> f64 {
        if self.epsilon_decay_steps == 0 || learning_steps >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let frac = learning_steps as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// A uniformly random index among `mask`'s true entries.
pub fn random_valid(mask: &[bool], rng: &mut Rng) -> usize {
    let valid: Vec<usize> = (0..mask.len()).filter(|&a| mask[a]).collect();
    valid[rng.random_range(0..valid.len())]
}

/// Highest masked value; lowest index on ties. Falls back to 0 (all-local)
/// when nothing is marked.
pub fn masked_argmax(q: &[f64], mask: &[bool]) -> usize {
    let mut best: Option<usize> = None;
    for a in (0..q.len()).filter(|&a| mask[a]) {
        if best.is_none_or(|b| q[a] > q[b]) {
            best = Some(a);
        }
    }
    best.unwrap_or(0)
}

/// ε-greedy over the masked action set.
pub fn select_action(q: &[f64], mask: &[bool], epsilon: f64, rng: &mut Rng) -> usize {
    if rng.random::<f64>() < epsilon {
        random_valid(mask, rng)
    } else {
        masked_argmax(q, mask)
    }
}

fn bootstrap(t: &Transition, gamma: f64, value: impl FnOnce() -> Result<f64>) -> Result<f64> {
    if t.done || gamma == 0.0 {
        Ok(t.reward)
    } else {
        Ok(t.reward + gamma * value()?)
    }
}

/// `y = r + γ Q_target(s', argmax_a Q_online(s', a))` over valid `a`.
pub fn ddqn_targets(
    batch: &[&Transition],
    online: &Mlp,
    target: &Mlp,
    gamma: f64,
) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            bootstrap(t, gamma, || {
                let a = masked_argmax(&online.forward(&t.next_state)?, &t.next_mask);
                Ok(target.forward(&t.next_state)?[a])
            })
        })
        .collect()
}

/// `y = r + γ max_a Q_target(s', a)` over valid `a`.
pub fn dqn_targets(batch: &[&Transition], target: &Mlp, gamma: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            bootstrap(t, gamma, || {
                let q = target.forward(&t.next_state)?;
                Ok(q[masked_argmax(&q, &t.next_mask)])
            })
        })
        .collect()
}

/// One learning-curve row, emitted per episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub episode_reward: f64,
    /// Mean mini-batch loss over the episode; `None` before learning starts.
    pub loss: Option<f64>,
    pub epsilon: f64,
}

impl CurvePoint {
    pub fn csv_header() -> &'static str {
        "step,episode_reward,loss,epsilon"
    }

    pub fn csv_row(&self) -> String {
        let loss = self.loss.map(|l| l.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{}",
            self.step, self.episode_reward, loss, self.epsilon
        )
    }
}

/// A frozen Q-network with the scenario shape it was trained for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedAgent {
    pub variant: Variant,
    pub config: AgentConfig,
    pub vehicles: usize,
    pub servers: usize,
    pub online: Mlp,
}

impl TrainedAgent {
    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, CHECKPOINT_KIND, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        checkpoint::load(path, CHECKPOINT_KIND)
    }

    pub fn greedy(&self, scenario: &Scenario) -> Result<GreedyPolicy<'_>> {
        GreedyPolicy::new(self, scenario)
    }
}

/// Acts greedily (ε = 0) with a trained agent.
#[derive(Debug, Clone)]
pub struct GreedyPolicy<'a> {
    agent: &'a TrainedAgent,
    encoder: StateEncoder,
    codec: ActionCodec,
}

impl<'a> GreedyPolicy<'a> {
    pub fn new(agent: &'a TrainedAgent, scenario: &Scenario) -> Result<Self> {
        if agent.vehicles != scenario.num_vehicles() || agent.servers != scenario.num_servers() {
            return Err(Error::Shape(format!(
                "agent trained for {} vehicles x {} servers, scenario has {} x {}",
                agent.vehicles,
                agent.servers,
                scenario.num_vehicles(),
                scenario.num_servers()
            )));
        }
        let encoder = StateEncoder::new(scenario);
        if agent.online.input_dim() != encoder.dim() {
            return Err(Error::Shape(
                "agent input size does not match the scenario encoding".into(),
            ));
        }
        Ok(GreedyPolicy {
            agent,
            encoder,
            codec: ActionCodec::new(agent.vehicles, agent.servers)?,
        })
    }
}

impl Policy for GreedyPolicy<'_> {
    fn decide(&mut self, scenario: &Scenario, state: &SlotState) -> Result<JointAction> {
        let q = self
            .agent
            .online
            .forward(&self.encoder.encode(scenario, state))?;
        let mask = self
            .codec
            .mask(&scenario.availability(&state.decision_positions));
        self.codec.decode(masked_argmax(&q, &mask))
    }
}

struct Learner {
    online: Mlp,
    target: Mlp,
    adam: AdamState,
}

impl Learner {
    fn update(
        &mut self,
        batch: &[&Transition],
        variant: Variant,
        cfg: &AgentConfig,
        step: u64,
    ) -> Result<f64> {
        let targets = match variant {
            Variant::Ddqn => ddqn_targets(batch, &self.online, &self.target, cfg.gamma)?,
            Variant::Dqn => dqn_targets(batch, &self.target, cfg.gamma)?,
        };
        let n = batch.len() as f64;
        let mut grads = self.online.zeros_like();
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(targets) {
            let (q, cache) = self.online.forward_cached(&t.state)?;
            let err = q[t.action] - y;
            loss += err * err / n;
            let mut dout = vec![0.0; q.len()];
            dout[t.action] = 2.0 * err / n;
            self.online.backward(&cache, &dout, &mut grads)?;
        }
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::NonFiniteLoss(format!(
                "agent step {step}: loss {loss}"
            )));
        }
        if let Some(max) = cfg.clip_norm {
            nn::clip_global_norm(&mut grads, max);
        }
        self.adam.step(&mut self.online, &grads)?;
        Ok(loss)
    }
}

/// Trains a Q-network on episodes of `scenario` with true positions.
///
/// The first `warmup_steps` actions are uniformly random. When warmup ends
/// the output biases are set to the discounted value of the mean warmup
/// reward, so untried actions start out at an average rather than zero.
pub fn train_agent(
    scenario: Arc<Scenario>,
    cfg: &AgentConfig,
    variant: Variant,
) -> Result<(TrainedAgent, Vec<CurvePoint>)> {
    cfg.validate()?;
    scenario.validate()?;
    let sc = &*scenario;
    let codec = ActionCodec::new(sc.num_vehicles(), sc.num_servers())?;
    let encoder = StateEncoder::new(sc);
    let mut sizes = vec![encoder.dim()];
    sizes.extend(&cfg.hidden_sizes);
    sizes.push(codec.size());
    let online = Mlp::init(&sizes, &mut substream(cfg.seed, "agent-init", &[]))?;
    let mut learner = Learner {
        target: online.clone(),
        adam: AdamState::new(AdamConfig::with_lr(cfg.learning_rate), &online)?,
        online,
    };
    let mut rng = substream(cfg.seed, "agent", &[]);
    let env_seed = derive_seed(cfg.seed, "agent-env", &[]);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut curve = Vec::new();
    let mut step = 0u64;
    let mut episode = 0u64;

    while step < cfg.training_steps {
        let mut env = Env::new(scenario.clone(), env_seed, episode)?;
        let mut x = encoder.encode(sc, env.state());
        let mut mask = codec.mask(&sc.availability(&env.state().decision_positions));
        let (mut ep_reward, mut loss_sum, mut updates) = (0.0, 0.0, 0u64);
        let mut epsilon = cfg.epsilon_start;
        for _ in 0..cfg.slots_per_episode {
            if step >= cfg.training_steps {
                break;
            }
            let a = if step < cfg.warmup_steps {
                random_valid(&mask, &mut rng)
            } else {
                epsilon = cfg.epsilon_at(step - cfg.warmup_steps);
                let q = learner.online.forward(&x)?;
                select_action(&q, &mask, epsilon, &mut rng)
            };
            let out = env.step(&codec.decode(a)?)?;
            let r = reward(&out, sc.miss_penalty);
            ep_reward += r;
            let next_x = encoder.encode(sc, env.state());
            let next_mask = codec.mask(&sc.availability(&env.state().decision_positions));
            buffer.push(Transition {
                state: std::mem::replace(&mut x, next_x.clone()),
                action: a,
                reward: r,
                next_state: next_x,
                next_mask: next_mask.clone(),
                done: false,
            });
            mask = next_mask;
            step += 1;

            if step == cfg.warmup_steps {
                let mean = buffer.iter().map(|t| t.reward).sum::<f64>() / buffer.len() as f64;
                let bias = mean / (1.0 - cfg.gamma);
                learner
                    .online
                    .output_layer_mut()
                    .bias
                    .iter_mut()
                    .for_each(|b| *b = bias);
                learner.target.copy_from(&learner.online);
            }
            if step >= cfg.warmup_steps
                && step % cfg.train_every == 0
                && buffer.len() >= cfg.batch_size
            {
                let batch = buffer.sample(cfg.batch_size, &mut rng);
                loss_sum += learner.update(&batch, variant, cfg, step)?;
                updates += 1;
            }
            if step % cfg.target_sync_period == 0 {
                learner.target.copy_from(&learner.online);
            }
        }
        curve.push(CurvePoint {
            step,
            episode_reward: ep_reward,
            loss: (updates > 0).then(|| loss_sum / updates as f64),
            epsilon,
        });
        episode += 1;
    }

    Ok((
        TrainedAgent {
            variant,
            config: cfg.clone(),
            vehicles: sc.num_vehicles(),
            servers: sc.num_servers(),
            online: learner.online,
        },
        curve,
    ))
}
