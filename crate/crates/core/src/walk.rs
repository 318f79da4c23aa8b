//! Random-walk lenses: simple random walks that stop once a target number of distinct nodes
//! has been visited.

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Graph, NodeId};

/// Walks give up after `STEP_CAP_FACTOR * target` steps.
pub const STEP_CAP_FACTOR: usize = 1000;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum WalkError {
    #[error("lens size {0} is below the minimum of 2")]
    TargetTooSmall(usize),
    #[error("start node {start} is out of range")]
    StartOutOfRange { start: NodeId },
    #[error("component of node {start} has {reachable} nodes, fewer than the lens size {target}")]
    ComponentTooSmall {
        start: NodeId,
        reachable: usize,
        target: usize,
    },
    #[error("walk from node {start} collected {collected} of {target} nodes within {steps} steps")]
    WalkExhausted {
        start: NodeId,
        collected: usize,
        target: usize,
        steps: usize,
    },
}

/// Distinct nodes visited by one walk, in order of first visit. `members[0]` is the start.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkSample {
    pub members: Vec<NodeId>,
    pub lens_size: usize,
}

impl WalkSample {
    pub fn start(&self) -> NodeId {
        self.members[0]
    }
}

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds each word into the running state with SplitMix64: `h = splitmix64(h ^ word)`,
/// starting from `h = splitmix64(master)`.
///
/// Child seeds depend only on the master seed and the word sequence, never on scheduling.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(master), |h, &w| splitmix64(h ^ w))
}

/// Seed for the walk started at `node` with lens `size`, repetition `rep`.
pub fn walk_seed(master: u64, node: NodeId, size: usize, rep: usize) -> u64 {
    derive_seed(master, &[node as u64, size as u64, rep as u64])
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Simple random walk from `start` until `target` distinct nodes are collected.
pub fn random_walk_sample(
    g: &Graph,
    start: NodeId,
    target: usize,
    seed: u64,
) -> Result<WalkSample, WalkError> {
    walk(g, start, target, seed, None)
}

/// Like [`random_walk_sample`], restricted to the nodes accepted by `allowed`. Steps choose
/// uniformly among the allowed neighbors of the current node.
pub fn random_walk_sample_within<F>(
    g: &Graph,
    start: NodeId,
    target: usize,
    seed: u64,
    allowed: F,
) -> Result<WalkSample, WalkError>
where
    F: Fn(NodeId) -> bool,
{
    walk(g, start, target, seed, Some(&allowed))
}

fn walk(
    g: &Graph,
    start: NodeId,
    target: usize,
    seed: u64,
    allowed: Option<&dyn Fn(NodeId) -> bool>,
) -> Result<WalkSample, WalkError> {
    let allowed_node = |v: NodeId| allowed.map_or(true, |f| f(v));
    if target < 2 {
        return Err(WalkError::TargetTooSmall(target));
    }
    if start >= g.node_count() || !allowed_node(start) {
        return Err(WalkError::StartOutOfRange { start });
    }
    let reachable = bounded_reach(g, start, target, &allowed_node);
    if reachable < target {
        return Err(WalkError::ComponentTooSmall {
            start,
            reachable,
            target,
        });
    }

    let mut rng = rng_from_seed(seed);
    let mut members = Vec::with_capacity(target);
    let mut seen = HashSet::with_capacity(target * 2);
    members.push(start);
    seen.insert(start);
    let mut current = start;
    let mut options: Vec<NodeId> = Vec::new();
    let cap = STEP_CAP_FACTOR * target;
    for _ in 0..cap {
        let nbrs = g.neighbors(current);
        let next = match allowed {
            None => nbrs[rng.gen_range(0..nbrs.len())],
            Some(f) => {
                options.clear();
                options.extend(nbrs.iter().copied().filter(|&w| f(w)));
                options[rng.gen_range(0..options.len())]
            }
        };
        current = next;
        if seen.insert(next) {
            members.push(next);
            if members.len() == target {
                return Ok(WalkSample {
                    members,
                    lens_size: target,
                });
            }
        }
    }
    Err(WalkError::WalkExhausted {
        start,
        collected: members.len(),
        target,
        steps: cap,
    })
}

/// Number of allowed nodes reachable from `start`, counting no further than `limit`.
fn bounded_reach<F: Fn(NodeId) -> bool>(g: &Graph, start: NodeId, limit: usize, allowed: &F) -> usize {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start);
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        if seen.len() >= limit {
            break;
        }
        for &w in g.neighbors(u) {
            if allowed(w) && seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen.len()
}
