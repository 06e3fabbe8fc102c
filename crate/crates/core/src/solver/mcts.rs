//! UCT over session handles for perfect-information games.
//!
//! Nodes cache their handle, acting player and legal actions, so each tree
//! edge costs one `apply_action` the first time it is expanded. Rollouts
//! are uniformly random; the terminal reward vector is backed up and each
//! edge is credited with the reward of the player acting at its parent.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SearchConfig, SearchResult, SolverError};
use crate::model::{is_terminal_player, ActionId, GameSpec, PlayerId};
use crate::session::{Session, SessionExt, StateHandle};

struct Node {
    handle: StateHandle,
    player: PlayerId,
    chance: bool,
    actions: Vec<ActionId>,
    children: Vec<Option<usize>>,
    n: Vec<u32>,
    w: Vec<f64>,
    visits: u32,
    /// Terminal reward vector, for terminal nodes.
    rewards: Option<Vec<f64>>,
}

struct Tree<'a> {
    session: &'a mut dyn Session,
    spec: &'a GameSpec,
    nodes: Vec<Node>,
}

impl Tree<'_> {
    fn add(&mut self, handle: StateHandle) -> Result<usize, SolverError> {
        let player = self.session.current_player(handle)?;
        let (actions, rewards) = if is_terminal_player(player) {
            (Vec::new(), Some(self.session.rewards(handle)?))
        } else {
            (self.session.legal_actions(handle)?, None)
        };
        let chance = self.spec.is_chance_node(player, &actions);
        let k = actions.len();
        self.nodes.push(Node {
            handle,
            player,
            chance,
            actions,
            children: vec![None; k],
            n: vec![0; k],
            w: vec![0.0; k],
            visits: 0,
            rewards,
        });
        Ok(self.nodes.len() - 1)
    }

    fn child(&mut self, node: usize, idx: usize) -> Result<usize, SolverError> {
        if let Some(c) = self.nodes[node].children[idx] {
            return Ok(c);
        }
        let handle = self.nodes[node].handle;
        let action = self.nodes[node].actions[idx].clone();
        let next = self.session.apply_action(handle, &action)?.new_state;
        let c = self.add(next)?;
        self.nodes[node].children[idx] = Some(c);
        Ok(c)
    }

    fn rollout(&mut self, mut state: StateHandle, cfg: &SearchConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, SolverError> {
        for _ in 0..cfg.max_rollout_depth {
            if is_terminal_player(self.session.current_player(state)?) {
                break;
            }
            let legal = self.session.legal_actions(state)?;
            let Some(a) = legal.choose(rng) else {
                return Err(SolverError::NoLegalActions);
            };
            state = self.session.apply_action(state, a)?.new_state;
        }
        Ok(self.session.rewards(state)?)
    }
}

/// UCB1 index; unvisited edges are handled before this is used.
pub(crate) fn ucb(w: f64, n: u32, parent: f64, c: f64) -> f64 {
    let n = n as f64;
    w / n + c * (parent.ln() / n).sqrt()
}

pub fn mcts_search(
    session: &mut dyn Session,
    spec: &GameSpec,
    root: StateHandle,
    cfg: &SearchConfig,
) -> Result<SearchResult, SolverError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut tree = Tree {
        session,
        spec,
        nodes: Vec::new(),
    };
    tree.add(root)?;
    let root_node = &tree.nodes[0];
    if root_node.rewards.is_some() || root_node.chance {
        return Err(SolverError::NotADecision);
    }
    if root_node.actions.is_empty() {
        return Err(SolverError::NoLegalActions);
    }
    if root_node.actions.len() == 1 {
        return Ok(SearchResult::single(root_node.actions[0].clone()));
    }

    let mut path: Vec<(usize, usize)> = Vec::new();
    for _ in 0..cfg.n_simulations {
        path.clear();
        let mut node = 0usize;
        let rewards = loop {
            if let Some(r) = &tree.nodes[node].rewards {
                break r.clone();
            }
            let nd = &tree.nodes[node];
            if nd.actions.is_empty() {
                return Err(SolverError::NoLegalActions);
            }
            if nd.chance {
                let idx = rng.gen_range(0..nd.actions.len());
                path.push((node, idx));
                node = tree.child(node, idx)?;
                continue;
            }
            let untried: Vec<usize> = (0..nd.actions.len()).filter(|&i| nd.n[i] == 0).collect();
            if let Some(&idx) = untried.choose(&mut rng) {
                path.push((node, idx));
                let child = tree.child(node, idx)?;
                let handle = tree.nodes[child].handle;
                break match &tree.nodes[child].rewards {
                    Some(r) => r.clone(),
                    None => tree.rollout(handle, cfg, &mut rng)?,
                };
            }
            let parent = nd.visits.max(1) as f64;
            let idx = (0..nd.actions.len())
                .max_by(|&a, &b| {
                    ucb(nd.w[a], nd.n[a], parent, cfg.exploration)
                        .total_cmp(&ucb(nd.w[b], nd.n[b], parent, cfg.exploration))
                })
                .expect("non-empty actions");
            path.push((node, idx));
            node = tree.child(node, idx)?;
        };
        for &(node, idx) in &path {
            let nd = &mut tree.nodes[node];
            let credit = usize::try_from(nd.player)
                .ok()
                .and_then(|p| rewards.get(p))
                .copied()
                .unwrap_or(0.0);
            nd.n[idx] += 1;
            nd.w[idx] += credit;
            nd.visits += 1;
        }
    }
    let root = &tree.nodes[0];
    Ok(SearchResult::from_visits(
        root.actions.iter().cloned().zip(root.n.iter().copied()).collect(),
    ))
}

pub fn mcts_choose(
    session: &mut dyn Session,
    spec: &GameSpec,
    root: StateHandle,
    cfg: &SearchConfig,
) -> Result<ActionId, SolverError> {
    Ok(mcts_search(session, spec, root, cfg)?.action)
}
