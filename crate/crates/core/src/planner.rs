//! Tree-search information planner used as the model-based baseline.
//!
//! The planner expands every motion-primitive sequence up to a fixed depth.
//! Beliefs are pushed through the Kalman prediction and, whenever the
//! predicted mean is visible from the node pose, a covariance-only EKF update
//! linearised at that mean. Because the update assumes the measurement lands
//! on the predicted mean, the mean never moves and the tree is deterministic.

use alloc::vec::Vec;

use rand::Rng;

use crate::env::{reward_from_log_dets, RewardWeights};
use crate::filter::{ekf_covariance_update, kf_predict, FilterError, GaussianBelief, TargetModel};
use crate::world::{closest_obstacle, step_robot, MotionPrimitive, Pose, SensorSpec, WorldMap, NUM_ACTIONS};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlannerConfig {
    pub horizon: usize,
    pub gamma: f64,
    /// Nodes trailing the best score at their depth by more than this are
    /// dropped. `f64::INFINITY` disables pruning.
    pub prune_eps: f64,
    pub weights: RewardWeights,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 3,
            gamma: 0.99,
            prune_eps: 5.0,
            weights: RewardWeights::default(),
        }
    }
}

/// A node of the search tree.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub pose: Pose,
    pub beliefs: Vec<GaussianBelief>,
    pub depth: usize,
    pub score: f64,
    pub first_action: usize,
}

/// Advance beliefs one step as seen from `pose`.
///
/// Returns the new beliefs and their log-determinants.
pub fn propagate_beliefs(
    pose: &Pose,
    beliefs: &[GaussianBelief],
    map: &WorldMap,
    spec: &SensorSpec,
    model: &TargetModel,
) -> Result<(Vec<GaussianBelief>, Vec<f64>), FilterError> {
    let mut next = Vec::with_capacity(beliefs.len());
    let mut log_dets = Vec::with_capacity(beliefs.len());
    for b in beliefs {
        let mut pred = kf_predict(b, model);
        if spec.can_see(pose, pred.position(), map) {
            match ekf_covariance_update(&pred, pose, spec) {
                Ok(upd) => pred = upd,
                Err(FilterError::DegenerateRange) => {}
                Err(e) => return Err(e),
            }
        }
        log_dets.push(pred.log_det()?);
        next.push(pred);
    }
    Ok((next, log_dets))
}

/// Expand one node by `action`; `None` if the resulting covariances are not
/// usable.
fn expand(
    node: &PlanNode,
    action: usize,
    map: &WorldMap,
    spec: &SensorSpec,
    model: &TargetModel,
    cfg: &PlannerConfig,
    discount: f64,
) -> Option<PlanNode> {
    let a = MotionPrimitive::from_index(action)?;
    let pose = step_robot(node.pose, a, model.tau(), map);
    let (beliefs, log_dets) = propagate_beliefs(&pose, &node.beliefs, map, spec, model).ok()?;
    let obstacle = closest_obstacle(&pose, spec, map);
    let score = node.score + discount * reward_from_log_dets(&log_dets, &obstacle, &cfg.weights);
    if !score.is_finite() {
        return None;
    }
    Some(PlanNode {
        pose,
        beliefs,
        depth: node.depth + 1,
        score,
        first_action: if node.depth == 0 { action } else { node.first_action },
    })
}

/// Best first action of a depth-`cfg.horizon` search.
///
/// Children are generated in action-index order, so among equal scores the
/// lexicographically smallest sequence wins. A horizon of zero returns
/// action 0.
pub fn plan(
    pose: &Pose,
    beliefs: &[GaussianBelief],
    map: &WorldMap,
    spec: &SensorSpec,
    model: &TargetModel,
    cfg: &PlannerConfig,
) -> usize {
    let mut frontier = alloc::vec![PlanNode {
        pose: *pose,
        beliefs: beliefs.to_vec(),
        depth: 0,
        score: 0.0,
        first_action: 0,
    }];
    let mut discount = 1.0;
    for _ in 0..cfg.horizon {
        let mut next = Vec::with_capacity(frontier.len() * NUM_ACTIONS);
        for node in &frontier {
            next.extend((0..NUM_ACTIONS).filter_map(|a| expand(node, a, map, spec, model, cfg, discount)));
        }
        if next.is_empty() {
            break;
        }
        let best = next.iter().map(|n| n.score).fold(f64::NEG_INFINITY, f64::max);
        next.retain(|n| best - n.score <= cfg.prune_eps);
        frontier = next;
        discount *= cfg.gamma;
    }
    let mut best: Option<&PlanNode> = None;
    for node in &frontier {
        if best.is_none_or(|b| node.score > b.score) {
            best = Some(node);
        }
    }
    best.map_or(0, |n| n.first_action)
}

/// Uniformly random action; the lower-bound comparator.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R) -> usize {
    rng.random_range(0..NUM_ACTIONS)
}
