//! Exact history resampling for small reference games.
//!
//! Every trajectory consistent with a player's recorded history is
//! enumerated by depth-first search, pruned at each of the player's turns
//! by observation equality. Each trajectory is weighted by the probability
//! of its chance outcomes (opponent choices weigh 1), and one is drawn in
//! proportion to its weight.

use rand::Rng;
use rand::RngCore;

use super::Rules;
use crate::inprocess::{Fault, HistoryEntry};
use crate::model::{is_terminal_player, PlayerId};

/// Node budget for one enumeration.
pub const RESAMPLE_NODE_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Weighted {
    pub actions: Vec<String>,
    pub weight: f64,
}

pub fn consistent_trajectories<R: Rules>(
    rules: &R,
    history: &[HistoryEntry],
    player: PlayerId,
) -> Result<Vec<Weighted>, Fault> {
    if history.is_empty() {
        return Ok(vec![Weighted {
            actions: Vec::new(),
            weight: 1.0,
        }]);
    }
    let Ok(seat) = usize::try_from(player) else {
        return Err(Fault::new("ValueError", format!("invalid player {player}")));
    };
    let mut search = Search {
        rules,
        history,
        player,
        seat,
        visited: 0,
        out: Vec::new(),
    };
    let mut path = Vec::new();
    search.visit(&rules.initial(), &mut path, 0, 1.0)?;
    Ok(search.out)
}

pub fn sample_trajectory(candidates: &[Weighted], rng: &mut dyn RngCore) -> Option<Vec<String>> {
    let total: f64 = candidates.iter().map(|c| c.weight).sum();
    if candidates.is_empty() || total <= 0.0 {
        return None;
    }
    let mut target = rng.gen::<f64>() * total;
    for c in candidates {
        if target < c.weight {
            return Some(c.actions.clone());
        }
        target -= c.weight;
    }
    candidates.last().map(|c| c.actions.clone())
}

struct Search<'a, R: Rules> {
    rules: &'a R,
    history: &'a [HistoryEntry],
    player: PlayerId,
    seat: usize,
    visited: usize,
    out: Vec<Weighted>,
}

impl<R: Rules> Search<'_, R> {
    fn observation_matches(&self, state: &R::State, entry: usize) -> bool {
        self.rules.observation(state, self.seat) == self.history[entry].0
    }

    fn visit(
        &mut self,
        state: &R::State,
        path: &mut Vec<String>,
        entry: usize,
        weight: f64,
    ) -> Result<(), Fault> {
        self.visited += 1;
        if self.visited > RESAMPLE_NODE_BUDGET {
            return Err(Fault::new("RuntimeError", "resample search budget exceeded"));
        }
        let last = self.history.len() - 1;
        let current = self.rules.current_player(state);

        if current == self.player {
            if !self.observation_matches(state, entry) {
                return Ok(());
            }
            match &self.history[entry].1 {
                None => {
                    if entry == last {
                        self.emit(path, weight);
                    }
                }
                Some(action) => {
                    if !self.rules.legal_actions(state).iter().any(|a| a == action) {
                        return Ok(());
                    }
                    let next = self.rules.apply(state, action)?;
                    path.push(action.clone());
                    if entry == last {
                        self.emit(path, weight);
                    } else {
                        self.visit(&next, path, entry + 1, weight)?;
                    }
                    path.pop();
                }
            }
            return Ok(());
        }

        if entry == last && self.history[last].1.is_none() && self.observation_matches(state, last) {
            self.emit(path, weight);
        }
        if is_terminal_player(current) {
            return Ok(());
        }
        let chance = self.rules.chance_outcomes(state);
        let branches: Vec<(String, f64)> = if chance.is_empty() {
            self.rules
                .legal_actions(state)
                .into_iter()
                .map(|a| (a, 1.0))
                .collect()
        } else {
            chance
        };
        for (action, p) in branches {
            let next = self.rules.apply(state, &action)?;
            path.push(action);
            self.visit(&next, path, entry, weight * p)?;
            path.pop();
        }
        Ok(())
    }

    fn emit(&mut self, path: &[String], weight: f64) {
        self.out.push(Weighted {
            actions: path.to_vec(),
            weight,
        });
    }
}

/// Python rendering of the reference resampler, reported as its source.
pub const REFERENCE_RESAMPLER_SOURCE: &str = r#"def resample_history(obs_action_history, player_id):
    """Sample a trajectory consistent with the player's observations.

    Enumerates every consistent history depth-first, weights each one by the
    probability of its chance outcomes and draws one proportionally.
    """
    candidates = []
    last = len(obs_action_history) - 1

    def visit(state, path, entry, weight):
        current = get_current_player(state)
        obs = get_observations(state)[player_id]
        if current == player_id:
            if obs != obs_action_history[entry][0]:
                return
            action = obs_action_history[entry][1]
            if action is None:
                if entry == last:
                    candidates.append((list(path), weight))
                return
            if action not in get_legal_actions(state):
                return
            if entry == last:
                candidates.append((path + [action], weight))
            else:
                visit(apply_action(state, action), path + [action], entry + 1, weight)
            return
        if entry == last and obs_action_history[last][1] is None and obs == obs_action_history[last][0]:
            candidates.append((list(path), weight))
        if current == -4:
            return
        for action, p in _branches(state):
            visit(apply_action(state, action), path + [action], entry, weight * p)

    if not obs_action_history:
        return []
    visit(get_initial_state(), [], 0, 1.0)
    if not candidates:
        return []
    trajectories = [t for t, _ in candidates]
    weights = [w for _, w in candidates]
    return random.choices(trajectories, weights=weights)[0]
"#;
