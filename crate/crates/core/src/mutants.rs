//! Crafted faulty candidates, each breaking one property on purpose.
//!
//! Every mutant wraps a reference rule set and deviates in exactly one
//! place, so verification results can be attributed to a single defect.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use rand::RngCore;
use serde_json::{json, Value};

use crate::games::{KuhnPoker, Reference, Rules, TicTacToe};
use crate::inprocess::{Fault, GameModule, HistoryEntry, InProcessFactory, ModuleResult};
use crate::model::{is_terminal_player, PlayerId};
use crate::session::{ApiFunction, SessionFactory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutantKind {
    /// Writes the successor into the input state before returning it.
    Mutating,
    /// Raises a key lookup error from `rewards` once three moves are on the board.
    Crashing,
    /// Stamps a fresh nonce on every successor.
    Nondeterministic,
    /// Keeps reporting the empty cells as legal after a win.
    TerminalActions,
    /// Reports no legal actions after three moves while the game goes on.
    DeadEnd,
    /// `rewards` returns a bare number.
    ScalarRewards,
    /// Source fails to compile.
    SyntaxError,
    /// `apply_action` never returns.
    Hanging,
    /// `resample_history` returns an empty list.
    StubResampler,
    /// `resample_history` echoes the player's own recorded actions.
    EchoResampler,
    /// No `resample_history` at all.
    NoResampler,
    /// Observations reveal the full trajectory, which the resampler replays.
    LeakyResampler,
}

impl MutantKind {
    pub const ALL: [MutantKind; 12] = [
        MutantKind::Mutating,
        MutantKind::Crashing,
        MutantKind::Nondeterministic,
        MutantKind::TerminalActions,
        MutantKind::DeadEnd,
        MutantKind::ScalarRewards,
        MutantKind::SyntaxError,
        MutantKind::Hanging,
        MutantKind::StubResampler,
        MutantKind::EchoResampler,
        MutantKind::NoResampler,
        MutantKind::LeakyResampler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MutantKind::Mutating => "mutant_mutating",
            MutantKind::Crashing => "mutant_crashing",
            MutantKind::Nondeterministic => "mutant_nondeterministic",
            MutantKind::TerminalActions => "mutant_terminal_actions",
            MutantKind::DeadEnd => "mutant_dead_end",
            MutantKind::ScalarRewards => "mutant_scalar_rewards",
            MutantKind::SyntaxError => "mutant_syntax_error",
            MutantKind::Hanging => "mutant_hanging",
            MutantKind::StubResampler => "mutant_stub_resampler",
            MutantKind::EchoResampler => "mutant_echo_resampler",
            MutantKind::NoResampler => "mutant_no_resampler",
            MutantKind::LeakyResampler => "mutant_leaky_resampler",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// The reference game the mutant is derived from.
    pub fn base_game(self) -> &'static str {
        match self {
            MutantKind::StubResampler
            | MutantKind::EchoResampler
            | MutantKind::NoResampler
            | MutantKind::LeakyResampler => "kuhn_poker",
            _ => "tic_tac_toe",
        }
    }
}

pub const STUB_RESAMPLER_SOURCE: &str = r#"def resample_history(obs_action_history, player_id):
    # Resampling a consistent history is complex; simplified implementation.
    return []
"#;

pub const ECHO_RESAMPLER_SOURCE: &str = r#"def resample_history(obs_action_history, player_id):
    """Return the actions from the observed history."""
    return [action for _, action in obs_action_history]
"#;

pub const LEAKY_RESAMPLER_SOURCE: &str = r#"def resample_history(obs_action_history, player_id):
    latest_obs, _ = obs_action_history[-1]
    return list(latest_obs["history"])
"#;

/// Mutant state: the reference state, the full action trajectory and a nonce.
#[derive(Debug, Clone, PartialEq)]
pub struct MutantState<S> {
    pub inner: S,
    pub trajectory: Vec<String>,
    pub nonce: u64,
}

pub struct Mutant<R: Rules> {
    kind: MutantKind,
    reference: Reference<R>,
    nonces: AtomicU64,
}

impl<R: Rules> Mutant<R> {
    pub fn new(kind: MutantKind, rules: R) -> Self {
        Mutant {
            kind,
            reference: Reference::new(rules),
            nonces: AtomicU64::new(1),
        }
    }

    fn rules(&self) -> &R {
        self.reference.rules()
    }

    fn moves_made(&self, s: &MutantState<R::State>) -> usize {
        s.trajectory.len()
    }
}

impl<R: Rules> GameModule for Mutant<R> {
    type State = MutantState<R::State>;

    fn load_error(&self) -> Option<String> {
        (self.kind == MutantKind::SyntaxError)
            .then(|| "SyntaxError: invalid syntax (candidate.py, line 42)".to_string())
    }

    fn provides(&self, f: ApiFunction) -> bool {
        !(self.kind == MutantKind::NoResampler && f == ApiFunction::ResampleHistory)
    }

    fn initial_state(&self) -> ModuleResult<Self::State> {
        Ok(MutantState {
            inner: self.rules().initial(),
            trajectory: Vec::new(),
            nonce: 0,
        })
    }

    fn state_view(&self, s: &Self::State) -> Value {
        json!({
            "state": self.reference.state_view(&s.inner),
            "trajectory": s.trajectory,
            "nonce": s.nonce,
        })
    }

    fn apply_action(&self, state: &mut Self::State, action: &str) -> ModuleResult<Self::State> {
        if self.kind == MutantKind::Hanging {
            loop {
                std::thread::sleep(Duration::from_secs(3600));
            }
        }
        let mut trajectory = state.trajectory.clone();
        trajectory.push(action.to_string());
        let next = MutantState {
            inner: self.rules().apply(&state.inner, action)?,
            trajectory,
            nonce: match self.kind {
                MutantKind::Nondeterministic => self.nonces.fetch_add(1, Ordering::Relaxed),
                _ => 0,
            },
        };
        if self.kind == MutantKind::Mutating {
            *state = next.clone();
        }
        Ok(next)
    }

    fn current_player(&self, s: &Self::State) -> ModuleResult<Value> {
        Ok(json!(self.rules().current_player(&s.inner)))
    }

    fn legal_actions(&self, s: &Self::State) -> ModuleResult<Value> {
        let player = self.rules().current_player(&s.inner);
        match self.kind {
            MutantKind::TerminalActions if is_terminal_player(player) => {
                // recompute as if the game were still running
                let mut open = Vec::new();
                if let Ok(board) = serde_json::to_value(&s.inner) {
                    if let Some(rows) = board["board"].as_array() {
                        for (r, row) in rows.iter().enumerate() {
                            for (c, cell) in row.as_array().into_iter().flatten().enumerate() {
                                if cell.as_i64() == Some(-1) {
                                    open.push(format!("{r},{c}"));
                                }
                            }
                        }
                    }
                }
                Ok(json!(open))
            }
            MutantKind::DeadEnd if !is_terminal_player(player) && self.moves_made(s) == 3 => {
                Ok(json!([]))
            }
            _ => Ok(json!(self.rules().legal_actions(&s.inner))),
        }
    }

    fn rewards(&self, s: &Self::State) -> ModuleResult<Value> {
        match self.kind {
            MutantKind::ScalarRewards => Ok(json!(0.0)),
            MutantKind::Crashing if self.moves_made(s) >= 3 => {
                Err(Fault::new("KeyError", "'scores'"))
            }
            _ => Ok(json!(self.rules().rewards(&s.inner))),
        }
    }

    fn observations(&self, s: &Self::State) -> ModuleResult<Value> {
        let n = self.rules().spec().n_players;
        Ok(Value::Array(
            (0..n)
                .map(|p| {
                    let mut obs = self.rules().observation(&s.inner, p);
                    if self.kind == MutantKind::LeakyResampler {
                        obs["history"] = json!(s.trajectory);
                    }
                    obs
                })
                .collect(),
        ))
    }

    fn resample_history(
        &self,
        history: &[HistoryEntry],
        player: PlayerId,
        rng: &mut dyn RngCore,
    ) -> ModuleResult<Value> {
        match self.kind {
            MutantKind::StubResampler => Ok(json!([])),
            MutantKind::EchoResampler => Ok(json!(history
                .iter()
                .filter_map(|(_, a)| a.clone())
                .collect::<Vec<_>>())),
            MutantKind::LeakyResampler => history
                .last()
                .map(|(obs, _)| obs["history"].clone())
                .ok_or_else(|| Fault::new("IndexError", "list index out of range")),
            _ => self.reference.resample_history(history, player, rng),
        }
    }

    fn resample_source(&self) -> Option<String> {
        match self.kind {
            MutantKind::StubResampler => Some(STUB_RESAMPLER_SOURCE.to_string()),
            MutantKind::EchoResampler => Some(ECHO_RESAMPLER_SOURCE.to_string()),
            MutantKind::LeakyResampler => Some(LEAKY_RESAMPLER_SOURCE.to_string()),
            _ => self.reference.resample_source(),
        }
    }
}

pub fn mutant_factory(kind: MutantKind, seed: u64) -> Box<dyn SessionFactory> {
    let label = format!("builtin:{}", kind.name());
    match kind.base_game() {
        "kuhn_poker" => Box::new(InProcessFactory::new(
            Mutant::new(kind, KuhnPoker::new()),
            seed,
            label,
        )),
        _ => Box::new(InProcessFactory::new(
            Mutant::new(kind, TicTacToe::classic()),
            seed,
            label,
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ActionId;
    use crate::session::{SessionError, SessionExt};

    fn a(s: &str) -> ActionId {
        ActionId::new(s).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for k in MutantKind::ALL {
            assert_eq!(MutantKind::from_name(k.name()), Some(k));
        }
        assert_eq!(MutantKind::from_name("tic_tac_toe"), None);
    }

    #[test]
    fn mutating_mutant_reports_mutation() {
        let mut s = mutant_factory(MutantKind::Mutating, 0).open().unwrap();
        let root = s.initial_state().unwrap().state;
        let before = s.fingerprint(root).unwrap();
        let r = s.apply_action(root, &a("0,0")).unwrap();
        assert!(r.input_mutated);
        // the handle still denotes the original state
        assert_eq!(s.fingerprint(root).unwrap(), before);
    }

    #[test]
    fn crashing_mutant_raises_key_error() {
        let mut s = mutant_factory(MutantKind::Crashing, 0).open().unwrap();
        let mut h = s.initial_state().unwrap().state;
        assert!(s.rewards(h).is_ok());
        for m in ["0,0", "1,1", "2,2"] {
            h = s.apply_action(h, &a(m)).unwrap().new_state;
        }
        match s.rewards(h) {
            Err(SessionError::Crash(msg)) => assert!(msg.contains("KeyError")),
            other => panic!("expected crash, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_blocks_everything() {
        let mut s = mutant_factory(MutantKind::SyntaxError, 0).open().unwrap();
        let info = s.info().unwrap();
        assert!(!info.load_ok);
        assert!(info.load_error.unwrap().contains("SyntaxError"));
        assert!(matches!(s.initial_state(), Err(SessionError::Load(_))));
    }

    #[test]
    fn missing_resampler_is_reported() {
        let mut s = mutant_factory(MutantKind::NoResampler, 0).open().unwrap();
        let info = s.info().unwrap();
        assert!(info.load_ok);
        assert!(!info.has(ApiFunction::ResampleHistory));
        assert!(info.has(ApiFunction::PlayerName));
    }
}
