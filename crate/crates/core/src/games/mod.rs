//! Known-correct reference games, used as oracles, fixtures and solver
//! substrates.
//!
//! Each game implements [`Rules`] over a typed state; [`Reference`] lifts a
//! rule set into the dynamically typed [`GameModule`] contract.

pub mod enumerate;
pub mod kuhn;
pub mod leduc;
pub mod resample;
pub mod tic_tac_toe;

use std::collections::BTreeMap;
use std::sync::Mutex;

use rand::RngCore;
use serde::Serialize;
use serde_json::{json, Value};

use crate::inprocess::{Fault, GameModule, HistoryEntry, InProcessFactory, ModuleResult};
use crate::model::{GameSpec, PlayerId};
use crate::session::SessionFactory;

pub use enumerate::{enumerate_terminals, enumerate_terminals_filtered, Terminal};
pub use kuhn::KuhnPoker;
pub use leduc::LeducPoker;
pub use tic_tac_toe::TicTacToe;

/// Names accepted by [`make_game`].
pub const REGISTRY: [&str; 4] = [
    "tic_tac_toe",
    "generalized_tic_tac_toe",
    "kuhn_poker",
    "leduc_poker",
];

pub trait Rules: Send + Sync + 'static {
    type State: Clone + PartialEq + Serialize + Send + Sync + 'static;

    fn spec(&self) -> &GameSpec;
    fn initial(&self) -> Self::State;
    fn current_player(&self, state: &Self::State) -> PlayerId;
    fn legal_actions(&self, state: &Self::State) -> Vec<String>;
    /// Fails on actions outside the legal set.
    fn apply(&self, state: &Self::State, action: &str) -> Result<Self::State, Fault>;
    fn rewards(&self, state: &Self::State) -> Vec<f64>;
    fn observation(&self, state: &Self::State, player: usize) -> Value;
    /// Outcome probabilities at chance nodes; empty elsewhere.
    fn chance_outcomes(&self, _state: &Self::State) -> Vec<(String, f64)> {
        Vec::new()
    }
}

type ResampleCache = Option<(Value, PlayerId, Vec<resample::Weighted>)>;

/// A rule set exposed as a candidate module.
pub struct Reference<R: Rules> {
    rules: R,
    // last enumeration, reused while the same history is resampled repeatedly
    cache: Mutex<ResampleCache>,
}

impl<R: Rules> Reference<R> {
    pub fn new(rules: R) -> Self {
        Reference {
            rules,
            cache: Mutex::new(None),
        }
    }

    pub fn rules(&self) -> &R {
        &self.rules
    }
}

impl<R: Rules> GameModule for Reference<R> {
    type State = R::State;

    fn initial_state(&self) -> ModuleResult<R::State> {
        Ok(self.rules.initial())
    }

    fn state_view(&self, state: &R::State) -> Value {
        serde_json::to_value(state).unwrap_or(Value::Null)
    }

    fn apply_action(&self, state: &mut R::State, action: &str) -> ModuleResult<R::State> {
        self.rules.apply(state, action)
    }

    fn current_player(&self, state: &R::State) -> ModuleResult<Value> {
        Ok(json!(self.rules.current_player(state)))
    }

    fn legal_actions(&self, state: &R::State) -> ModuleResult<Value> {
        Ok(json!(self.rules.legal_actions(state)))
    }

    fn rewards(&self, state: &R::State) -> ModuleResult<Value> {
        Ok(json!(self.rules.rewards(state)))
    }

    fn observations(&self, state: &R::State) -> ModuleResult<Value> {
        let n = self.rules.spec().n_players;
        Ok(Value::Array(
            (0..n).map(|p| self.rules.observation(state, p)).collect(),
        ))
    }

    fn resample_history(
        &self,
        history: &[HistoryEntry],
        player: PlayerId,
        rng: &mut dyn RngCore,
    ) -> ModuleResult<Value> {
        let key = json!(history);
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        let hit = matches!(&*cache, Some((k, p, _)) if *k == key && *p == player);
        if !hit {
            let found = resample::consistent_trajectories(&self.rules, history, player)?;
            *cache = Some((key, player, found));
        }
        let candidates = &cache.as_ref().expect("filled above").2;
        Ok(json!(resample::sample_trajectory(candidates, rng).unwrap_or_default()))
    }

    fn resample_source(&self) -> Option<String> {
        Some(resample::REFERENCE_RESAMPLER_SOURCE.to_string())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GameError {
    #[error("unknown game {name:?}; known games: {}", REGISTRY.join(", "))]
    Unknown { name: String },
    #[error("invalid parameters for {game}: {message}")]
    InvalidParams { game: String, message: String },
    #[error("enumeration exceeded {0} nodes")]
    BudgetExceeded(usize),
    #[error("reference game fault: {0}")]
    Fault(String),
}

#[derive(Debug, Clone)]
pub enum GameRules {
    TicTacToe(TicTacToe),
    Kuhn(KuhnPoker),
    Leduc(LeducPoker),
}

/// A reference game plus the seed its sessions use for resampling.
#[derive(Debug, Clone)]
pub struct ReferenceGame {
    pub rules: GameRules,
    pub chance_seed: u64,
}

impl ReferenceGame {
    pub fn spec(&self) -> &GameSpec {
        match &self.rules {
            GameRules::TicTacToe(g) => g.spec(),
            GameRules::Kuhn(g) => g.spec(),
            GameRules::Leduc(g) => g.spec(),
        }
    }

    pub fn factory(&self) -> Box<dyn SessionFactory> {
        let label = format!("builtin:{}", self.spec().name);
        match &self.rules {
            GameRules::TicTacToe(g) => Box::new(InProcessFactory::new(
                Reference::new(g.clone()),
                self.chance_seed,
                label,
            )),
            GameRules::Kuhn(g) => Box::new(InProcessFactory::new(
                Reference::new(g.clone()),
                self.chance_seed,
                label,
            )),
            GameRules::Leduc(g) => Box::new(InProcessFactory::new(
                Reference::new(g.clone()),
                self.chance_seed,
                label,
            )),
        }
    }

    pub fn enumerate_terminals(&self, max_nodes: usize) -> Result<Vec<Terminal>, GameError> {
        match &self.rules {
            GameRules::TicTacToe(g) => enumerate_terminals(g, max_nodes),
            GameRules::Kuhn(g) => enumerate_terminals(g, max_nodes),
            GameRules::Leduc(g) => enumerate_terminals(g, max_nodes),
        }
    }
}

pub type GameParams = BTreeMap<String, i64>;

pub fn make_game(
    name: &str,
    params: &GameParams,
    chance_seed: Option<u64>,
) -> Result<ReferenceGame, GameError> {
    let invalid = |message: String| GameError::InvalidParams {
        game: name.to_string(),
        message,
    };
    let rules = match name {
        "tic_tac_toe" | "generalized_tic_tac_toe" => {
            let (rows, cols, line) = if name == "tic_tac_toe" { (3, 3, 3) } else { (6, 6, 4) };
            let mut dims = [("board_rows", rows), ("board_cols", cols), ("line_length", line)];
            for (key, value) in params {
                let slot = dims
                    .iter_mut()
                    .find(|(k, _)| k == key)
                    .ok_or_else(|| invalid(format!("unknown parameter {key:?}")))?;
                slot.1 = *value;
            }
            let [(_, rows), (_, cols), (_, line)] = dims;
            GameRules::TicTacToe(TicTacToe::new(name, rows, cols, line).map_err(invalid)?)
        }
        "kuhn_poker" | "leduc_poker" => {
            if let Some(key) = params.keys().next() {
                return Err(invalid(format!("unknown parameter {key:?}")));
            }
            if name == "kuhn_poker" {
                GameRules::Kuhn(KuhnPoker::new())
            } else {
                GameRules::Leduc(LeducPoker::new())
            }
        }
        _ => {
            return Err(GameError::Unknown {
                name: name.to_string(),
            })
        }
    };
    Ok(ReferenceGame {
        rules,
        chance_seed: chance_seed.unwrap_or(0),
    })
}

/// Descriptor of a registered game with default parameters.
pub fn game_spec(name: &str) -> Result<GameSpec, GameError> {
    make_game(name, &GameParams::new(), None).map(|g| g.spec().clone())
}

/// Shared helper: the rank order J < Q < K used by both poker games.
pub(crate) fn rank_value(rank: &str) -> u8 {
    match rank {
        "J" => 0,
        "Q" => 1,
        "K" => 2,
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_resolve() {
        for name in REGISTRY {
            let g = make_game(name, &GameParams::new(), None).unwrap();
            assert_eq!(g.spec().name, name);
            assert_eq!(g.spec().n_players, 2);
        }
    }

    #[test]
    fn unknown_game_lists_registry() {
        let err = make_game("chess", &GameParams::new(), None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("chess") && msg.contains("leduc_poker"), "{msg}");
    }

    #[test]
    fn params_validated() {
        let mut p = GameParams::new();
        p.insert("board_rows".into(), 0);
        assert!(make_game("generalized_tic_tac_toe", &p, None).is_err());
        let mut p = GameParams::new();
        p.insert("depth".into(), 2);
        assert!(make_game("tic_tac_toe", &p, None).is_err());
        assert!(make_game("kuhn_poker", &p, None).is_err());
        let mut p = GameParams::new();
        p.insert("line_length".into(), 5);
        let g = make_game("generalized_tic_tac_toe", &p, None).unwrap();
        match g.rules {
            GameRules::TicTacToe(t) => assert_eq!(t.line_length(), 5),
            _ => unreachable!(),
        }
    }
}
