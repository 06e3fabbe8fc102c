//! Brute-force depth-first enumeration of terminal histories.

use super::{GameError, Rules};
use crate::model::is_terminal_player;

#[derive(Debug, Clone, PartialEq)]
pub struct Terminal {
    pub actions: Vec<String>,
    pub rewards: Vec<f64>,
}

pub fn enumerate_terminals<R: Rules>(
    rules: &R,
    max_nodes: usize,
) -> Result<Vec<Terminal>, GameError> {
    enumerate_terminals_filtered(rules, max_nodes, |_, _| true)
}

/// Enumerates terminals reachable when only actions passing `keep` are taken.
pub fn enumerate_terminals_filtered<R, F>(
    rules: &R,
    max_nodes: usize,
    keep: F,
) -> Result<Vec<Terminal>, GameError>
where
    R: Rules,
    F: Fn(&R::State, &str) -> bool,
{
    let mut out = Vec::new();
    let mut visited = 0usize;
    let mut stack = vec![(rules.initial(), Vec::<String>::new())];
    while let Some((state, path)) = stack.pop() {
        visited += 1;
        if visited > max_nodes {
            return Err(GameError::BudgetExceeded(max_nodes));
        }
        if is_terminal_player(rules.current_player(&state)) {
            out.push(Terminal {
                rewards: rules.rewards(&state),
                actions: path,
            });
            continue;
        }
        // reversed so the stack pops in legal-action order
        for action in rules.legal_actions(&state).into_iter().rev() {
            if !keep(&state, &action) {
                continue;
            }
            let next = rules
                .apply(&state, &action)
                .map_err(|e| GameError::Fault(e.0))?;
            let mut p = path.clone();
            p.push(action);
            stack.push((next, p));
        }
    }
    Ok(out)
}
