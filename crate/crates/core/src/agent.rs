//! Off-policy Q-learning with experience replay and a target network.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{Adam, Gradients, Mlp, NnError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Network(#[from] NnError),
    #[error("transition has state length {got}, network expects {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("action {0} outside the action set")]
    InvalidAction(usize),
    #[error("invalid agent config: {0}")]
    Config(&'static str),
}

/// How the bootstrap value of the next state is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TdMode {
    /// `max_a' Q_target(s', a')`
    Dqn,
    /// `Q_target(s', argmax_a' Q_online(s', a'))`
    DoubleDqn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only for terminal states; bootstrapping stops here.
    pub done: bool,
}

/// A minibatch laid out for batched network passes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub states: Vec<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn push(&mut self, t: &Transition) {
        self.states.extend_from_slice(&t.state);
        self.actions.push(t.action);
        self.rewards.push(t.reward);
        self.next_states.extend_from_slice(&t.next_state);
        self.dones.push(t.done);
    }
}

/// Fixed-capacity ring buffer of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: Vec::with_capacity(capacity),
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Insert, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Uniform indices with replacement; `None` while fewer than `size` items are stored.
    pub fn sample_indices<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Option<Vec<usize>> {
        if self.items.len() < size || size == 0 {
            return None;
        }
        Some((0..size).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Option<Batch> {
        let idx = self.sample_indices(size, rng)?;
        let mut batch = Batch::default();
        for i in idx {
            batch.push(&self.items[i]);
        }
        Some(batch)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy: uniform over actions with probability `epsilon`, otherwise greedy.
pub fn act<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// Bootstrap targets for a minibatch.
pub fn td_targets(
    batch: &Batch,
    net: &Mlp,
    target_net: &Mlp,
    gamma: f64,
    mode: TdMode,
) -> Result<Vec<f64>, NnError> {
    let n = batch.len();
    let n_act = target_net.output_dim();
    let q_target = target_net.forward_batch(&batch.next_states, n)?;
    let q_online = match mode {
        TdMode::Dqn => None,
        TdMode::DoubleDqn => Some(net.forward_batch(&batch.next_states, n)?),
    };
    Ok((0..n)
        .map(|b| {
            if batch.dones[b] {
                return batch.rewards[b];
            }
            let row = &q_target[b * n_act..(b + 1) * n_act];
            let bootstrap = match &q_online {
                None => row[argmax(row)],
                Some(q) => row[argmax(&q[b * n_act..(b + 1) * n_act])],
            };
            batch.rewards[b] + gamma * bootstrap
        })
        .collect())
}

/// One Adam step on the squared TD error; returns the pre-update loss.
pub fn train_step(
    net: &mut Mlp,
    adam: &mut Adam,
    grads: &mut Gradients,
    batch: &Batch,
    targets: &[f64],
) -> Result<f64, NnError> {
    let loss = net.selected_mse_grad(&batch.states, &batch.actions, targets, grads)?;
    adam.step(net, grads);
    Ok(loss)
}

/// Copy the online parameters into the target network.
pub fn sync_target(net: &Mlp, target_net: &mut Mlp) {
    target_net.copy_from(net);
}

/// Linear ε decay over `anneal_steps`, then constant.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl EpsilonSchedule {
    /// Anneal 1.0 → 0.01 over the first half of `total_steps`.
    pub fn half_of(total_steps: u64) -> Self {
        Self {
            start: 1.0,
            end: 0.01,
            anneal_steps: total_steps / 2,
        }
    }

    pub fn value(&self, step: u64) -> f64 {
        if step >= self.anneal_steps {
            return self.end;
        }
        let frac = step as f64 / self.anneal_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DqnConfig {
    pub mode: TdMode,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Train steps between target-network syncs.
    pub target_sync: u64,
}

impl DqnConfig {
    /// Three hidden layers of `width` units, with the replay, batch and
    /// sync settings used throughout.
    pub fn with_width(mode: TdMode, width: usize, lr: f64) -> Self {
        Self {
            mode,
            hidden: vec![width; 3],
            lr,
            gamma: 0.99,
            batch_size: 64,
            replay_capacity: 1000,
            target_sync: 50,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.lr > 0.0) {
            return Err(AgentError::Config("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(AgentError::Config("gamma must be in [0, 1)"));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(AgentError::Config("replay must hold at least one batch"));
        }
        if self.target_sync == 0 {
            return Err(AgentError::Config("target sync period must be positive"));
        }
        Ok(())
    }
}

/// Interface for value-based learners driven by the training loop.
///
/// DQN and Double DQN implement it here; a Bayesian Q-learner with its own
/// action selection (for example Thompson sampling over Q-beliefs) plugs in by
/// overriding [`QLearner::select_action`].
pub trait QLearner {
    fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, AgentError>;

    fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<usize, AgentError> {
        Ok(act(&self.q_values(state)?, epsilon, rng))
    }

    /// Store a transition and possibly update; returns the loss of the
    /// update if one ran.
    fn record<R: Rng + ?Sized>(&mut self, t: Transition, rng: &mut R) -> Result<Option<f64>, AgentError>;
}

/// Online network, delayed target network, optimiser state and replay.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    cfg: DqnConfig,
    net: Mlp,
    target: Mlp,
    adam: Adam,
    grads: Gradients,
    replay: ReplayBuffer,
    train_steps: u64,
    syncs: u64,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        n_actions: usize,
        cfg: DqnConfig,
        rng: &mut R,
    ) -> Result<Self, AgentError> {
        cfg.validate()?;
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(n_actions);
        let net = Mlp::new(&sizes, rng)?;
        Ok(Self::from_network(net, cfg))
    }

    pub fn from_network(net: Mlp, cfg: DqnConfig) -> Self {
        let adam = Adam::new(&net, cfg.lr);
        let grads = Gradients::zeros_like(&net);
        Self {
            target: net.clone(),
            replay: ReplayBuffer::new(cfg.replay_capacity),
            net,
            adam,
            grads,
            cfg,
            train_steps: 0,
            syncs: 0,
        }
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn target_network(&self) -> &Mlp {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn target_syncs(&self) -> u64 {
        self.syncs
    }

    /// Sample a minibatch, take one gradient step, and sync the target
    /// network on its cadence. `None` until the replay holds a full batch.
    pub fn train<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>, AgentError> {
        let Some(batch) = self.replay.sample(self.cfg.batch_size, rng) else {
            return Ok(None);
        };
        let targets = td_targets(&batch, &self.net, &self.target, self.cfg.gamma, self.cfg.mode)?;
        let loss = train_step(&mut self.net, &mut self.adam, &mut self.grads, &batch, &targets)?;
        self.train_steps += 1;
        if self.train_steps % self.cfg.target_sync == 0 {
            sync_target(&self.net, &mut self.target);
            self.syncs += 1;
        }
        Ok(Some(loss))
    }

    pub fn push(&mut self, t: Transition) -> Result<(), AgentError> {
        let expected = self.net.input_dim();
        for len in [t.state.len(), t.next_state.len()] {
            if len != expected {
                return Err(AgentError::StateLength { expected, got: len });
            }
        }
        if t.action >= self.net.output_dim() {
            return Err(AgentError::InvalidAction(t.action));
        }
        self.replay.push(t);
        Ok(())
    }
}

impl QLearner for DqnAgent {
    fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        Ok(self.net.forward(state)?)
    }

    fn record<R: Rng + ?Sized>(&mut self, t: Transition, rng: &mut R) -> Result<Option<f64>, AgentError> {
        self.push(t)?;
        self.train(rng)
    }
}
