//! Single-observer information-set MCTS.
//!
//! Every simulation asks the candidate for a trajectory consistent with the
//! observer's history, replays it to a concrete root and runs one UCT
//! iteration there. Statistics live in nodes keyed by (depth below the
//! root, acting player, observer's observation fingerprint), so
//! determinizations that look the same to the observer share a node.
//! Selection uses availability counts: an edge's exploration term grows
//! with the number of visits in which its action was legal.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SearchConfig, SearchResult, SolverError};
use crate::fingerprint::Fingerprint;
use crate::model::{is_terminal_player, ActionId, GameSpec, PlayerId};
use crate::session::{Session, SessionExt, StateHandle, WalkRecord};

type NodeKey = (usize, PlayerId, Fingerprint);

#[derive(Debug, Default, Clone, Copy)]
struct Edge {
    n: u32,
    w: f64,
    available: u32,
}

#[derive(Debug, Default)]
struct Node {
    edges: HashMap<ActionId, Edge>,
}

pub fn ismcts_search(
    session: &mut dyn Session,
    spec: &GameSpec,
    walk: &WalkRecord,
    player: PlayerId,
    cfg: &SearchConfig,
) -> Result<SearchResult, SolverError> {
    cfg.validate()?;
    let root = walk.final_state;
    if session.current_player(root)? != player {
        return Err(SolverError::NotADecision);
    }
    let root_actions = session.legal_actions(root)?;
    match root_actions.len() {
        0 => return Err(SolverError::NoLegalActions),
        1 => return Ok(SearchResult::single(root_actions[0].clone())),
        _ => {}
    }
    let seat = usize::try_from(player).map_err(|_| SolverError::NotADecision)?;
    let root_obs = walk
        .final_observations
        .get(seat)
        .cloned()
        .ok_or(SolverError::NotADecision)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut nodes: HashMap<NodeKey, Node> = HashMap::new();
    let mut failures = 0usize;
    let mut first_failure: Option<String> = None;
    let mut path: Vec<(NodeKey, ActionId, PlayerId)> = Vec::new();

    for _ in 0..cfg.n_simulations {
        let Some(state) = determinize(session, spec, walk, player, &root_obs, &mut rng, &mut first_failure)? else {
            failures += 1;
            continue;
        };
        path.clear();
        let rewards = simulate(session, spec, state, seat, &root_obs, cfg, &mut rng, &mut nodes, &mut path)?;
        for (key, action, actor) in &path {
            let credit = usize::try_from(*actor)
                .ok()
                .and_then(|p| rewards.get(p))
                .copied()
                .unwrap_or(0.0);
            let edge = nodes
                .get_mut(key)
                .and_then(|n| n.edges.get_mut(action))
                .expect("path edges exist");
            edge.n += 1;
            edge.w += credit;
        }
    }

    if failures * 2 > cfg.n_simulations {
        return Err(SolverError::SearchFailed(format!(
            "{failures} of {} determinizations failed; first: {}",
            cfg.n_simulations,
            first_failure.unwrap_or_default()
        )));
    }
    let root_node = nodes.get(&(0, player, root_obs.clone()));
    let visits = root_actions
        .iter()
        .map(|a| {
            let n = root_node.and_then(|n| n.edges.get(a)).map_or(0, |e| e.n);
            (a.clone(), n)
        })
        .collect();
    let mut result = SearchResult::from_visits(visits);
    result.failed_determinizations = failures;
    Ok(result)
}

/// Replays a resampled trajectory; `None` when it does not reproduce the
/// observer's current view.
///
/// A trajectory may legitimately stop at a chance node the observer cannot
/// tell apart from its decision point (a deal to the opponent, say); such
/// trajectories are completed with uniformly drawn chance outcomes.
fn determinize(
    session: &mut dyn Session,
    spec: &GameSpec,
    walk: &WalkRecord,
    player: PlayerId,
    root_obs: &Fingerprint,
    rng: &mut ChaCha8Rng,
    first_failure: &mut Option<String>,
) -> Result<Option<StateHandle>, SolverError> {
    let mut fail = |msg: String| {
        first_failure.get_or_insert(msg);
        Ok(None)
    };
    let proposed = match session.resample_for(walk, player) {
        Ok(p) => p,
        Err(e) if e.is_fatal() => return Err(e.into()),
        Err(e) => return fail(format!("resample failed: {e}")),
    };
    let mut state = session.initial_state()?.state;
    for action in &proposed {
        if !session.legal_actions(state)?.contains(action) {
            return fail(format!("resampled action {action} is illegal"));
        }
        state = session.apply_action(state, action)?.new_state;
    }
    for _ in 0..spec.max_walk_steps {
        let current = session.current_player(state)?;
        if current == player {
            break;
        }
        let legal = session.legal_actions(state)?;
        if !spec.is_chance_node(current, &legal) {
            break;
        }
        let outcome = legal.choose(rng).expect("chance nodes have outcomes");
        state = session.apply_action(state, outcome)?.new_state;
    }
    if session.current_player(state)? != player
        || session.observation_fingerprint(state, player)? != *root_obs
    {
        return fail("resampled trajectory does not reach the observed state".to_string());
    }
    Ok(Some(state))
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    session: &mut dyn Session,
    spec: &GameSpec,
    mut state: StateHandle,
    seat: usize,
    root_obs: &Fingerprint,
    cfg: &SearchConfig,
    rng: &mut ChaCha8Rng,
    nodes: &mut HashMap<NodeKey, Node>,
    path: &mut Vec<(NodeKey, ActionId, PlayerId)>,
) -> Result<Vec<f64>, SolverError> {
    let mut in_tree = true;
    for depth in 0..cfg.max_rollout_depth {
        let current = session.current_player(state)?;
        if is_terminal_player(current) {
            break;
        }
        let legal = session.legal_actions(state)?;
        if legal.is_empty() {
            return Err(SolverError::NoLegalActions);
        }
        let action = if !in_tree || spec.is_chance_node(current, &legal) {
            legal.choose(rng).expect("non-empty").clone()
        } else {
            // the determinized root was checked against the observer's view
            let fp = match depth {
                0 => root_obs.clone(),
                _ => session.observation_fingerprint(state, seat as PlayerId)?,
            };
            let key = (depth, current, fp);
            let node = nodes.entry(key.clone()).or_default();
            for a in &legal {
                node.edges.entry(a.clone()).or_default().available += 1;
            }
            let untried: Vec<&ActionId> = legal.iter().filter(|a| node.edges[*a].n == 0).collect();
            let chosen = if let Some(a) = untried.choose(rng) {
                in_tree = false;
                (*a).clone()
            } else {
                legal
                    .iter()
                    .max_by(|a, b| {
                        let ea = node.edges[*a];
                        let eb = node.edges[*b];
                        super::mcts::ucb(ea.w, ea.n, ea.available as f64, cfg.exploration)
                            .total_cmp(&super::mcts::ucb(eb.w, eb.n, eb.available as f64, cfg.exploration))
                    })
                    .expect("non-empty")
                    .clone()
            };
            path.push((key, chosen.clone(), current));
            chosen
        };
        state = session.apply_action(state, &action)?.new_state;
    }
    Ok(session.rewards(state)?)
}

pub fn ismcts_choose(
    session: &mut dyn Session,
    spec: &GameSpec,
    walk: &WalkRecord,
    player: PlayerId,
    cfg: &SearchConfig,
) -> Result<ActionId, SolverError> {
    Ok(ismcts_search(session, spec, walk, player, cfg)?.action)
}
