//! The game-engine contract every candidate implements.
//!
//! States never leave the runtime that owns them: a [`Session`] hands out
//! [`StateHandle`]s and answers questions about them. The four queries whose
//! return shape is itself under test (`current_player`, `legal_actions`,
//! `rewards`, `observations`) return raw [`StructuredValue`]s; [`SessionExt`]
//! adds the typed views everything else uses.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::fingerprint::{canonical_fingerprint, Fingerprint};
use crate::model::{ActionId, PlayerId, StructuredValue};

/// Session-unique state identifier. Never reused within a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateHandle(pub u64);

impl fmt::Display for StateHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// The engine functions a candidate may expose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ApiFunction {
    InitialState,
    ApplyAction,
    CurrentPlayer,
    Rewards,
    LegalActions,
    Observations,
    PlayerName,
    ResampleHistory,
}

impl ApiFunction {
    pub const ALL: [ApiFunction; 8] = [
        ApiFunction::InitialState,
        ApiFunction::ApplyAction,
        ApiFunction::CurrentPlayer,
        ApiFunction::Rewards,
        ApiFunction::LegalActions,
        ApiFunction::Observations,
        ApiFunction::PlayerName,
        ApiFunction::ResampleHistory,
    ];

    /// The six functions Tier 1 requires.
    pub const CORE: [ApiFunction; 6] = [
        ApiFunction::InitialState,
        ApiFunction::ApplyAction,
        ApiFunction::CurrentPlayer,
        ApiFunction::Rewards,
        ApiFunction::LegalActions,
        ApiFunction::Observations,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ApiFunction::InitialState => "initial_state",
            ApiFunction::ApplyAction => "apply_action",
            ApiFunction::CurrentPlayer => "current_player",
            ApiFunction::Rewards => "rewards",
            ApiFunction::LegalActions => "legal_actions",
            ApiFunction::Observations => "observations",
            ApiFunction::PlayerName => "player_name",
            ApiFunction::ResampleHistory => "resample_history",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SessionInfo {
    pub api_present: BTreeMap<String, bool>,
    pub load_ok: bool,
    #[serde(default)]
    pub load_error: Option<String>,
    #[serde(default)]
    pub resample_source: Option<String>,
}

impl SessionInfo {
    pub fn has(&self, f: ApiFunction) -> bool {
        self.api_present.get(f.name()).copied().unwrap_or(false)
    }

    pub fn api_complete(&self) -> bool {
        self.load_ok && ApiFunction::CORE.iter().all(|f| self.has(*f))
    }
}

/// Result of `initial_state`: the handle plus whether the native state is a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRef {
    pub state: StateHandle,
    pub is_map: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyResult {
    pub new_state: StateHandle,
    pub input_mutated: bool,
}

/// One entry of a player's history handed to a resampler: the state whose
/// observation the player saw, and the action they took there (none for the
/// final, current state).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleRecord {
    pub state: StateHandle,
    pub action: Option<ActionId>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("candidate failed to load: {0}")]
    Load(String),
    #[error("candidate crashed: {0}")]
    Crash(String),
    #[error("candidate returned a malformed value: {0}")]
    Shape(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("call timed out: {0}")]
    Timeout(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("session is dead")]
    Dead,
}

impl SessionError {
    /// True when the session can no longer serve requests.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            SessionError::Dead | SessionError::Timeout(_) | SessionError::Protocol(_)
        )
    }
}

/// A live candidate game engine.
///
/// One session is a strictly sequential command stream; handles are only
/// meaningful inside the session that issued them.
pub trait Session: Send {
    fn info(&mut self) -> Result<SessionInfo, SessionError>;
    fn initial_state(&mut self) -> Result<StateRef, SessionError>;
    fn apply_action(
        &mut self,
        state: StateHandle,
        action: &ActionId,
    ) -> Result<ApplyResult, SessionError>;
    fn current_player_raw(&mut self, state: StateHandle) -> Result<Value, SessionError>;
    fn legal_actions_raw(&mut self, state: StateHandle) -> Result<Value, SessionError>;
    fn rewards_raw(&mut self, state: StateHandle) -> Result<Value, SessionError>;
    fn observations_raw(&mut self, state: StateHandle) -> Result<Value, SessionError>;
    fn player_name(&mut self, player: PlayerId) -> Result<String, SessionError>;
    /// Fingerprint of the full state content.
    fn fingerprint(&mut self, state: StateHandle) -> Result<Fingerprint, SessionError>;
    /// Calls the candidate's resampler with the native observations of the
    /// recorded states. Returns the raw proposed trajectory.
    fn resample(
        &mut self,
        records: &[ResampleRecord],
        player: PlayerId,
    ) -> Result<Value, SessionError>;
    /// Terminates the session. Idempotent.
    fn close(&mut self);
}

/// Opens fresh sessions for one candidate.
pub trait SessionFactory: Send + Sync {
    fn open(&self) -> Result<Box<dyn Session>, crate::Error>;
    fn describe(&self) -> String;
    /// Kills every live session opened by this factory. Used when a
    /// computation over the factory's sessions runs out of time.
    fn abort(&self) {}
}

pub fn parse_player(v: &Value) -> Result<PlayerId, SessionError> {
    v.as_i64()
        .ok_or_else(|| SessionError::Shape(format!("expected an integer player id, got {v}")))
}

pub fn parse_actions(v: &Value) -> Result<Vec<ActionId>, SessionError> {
    let items = v
        .as_array()
        .ok_or_else(|| SessionError::Shape(format!("expected a list of actions, got {}", short(v))))?;
    items
        .iter()
        .map(|item| match item.as_str() {
            Some(s) => ActionId::new(s).map_err(|e| SessionError::Shape(e.to_string())),
            None => Err(SessionError::Shape(format!("action {item} is not a string"))),
        })
        .collect()
}

pub fn parse_rewards(v: &Value) -> Result<Vec<f64>, SessionError> {
    let items = v
        .as_array()
        .ok_or_else(|| SessionError::Shape(format!("expected a list of rewards, got {}", short(v))))?;
    items
        .iter()
        .map(|item| {
            item.as_f64()
                .ok_or_else(|| SessionError::Shape(format!("reward {item} is not a number")))
        })
        .collect()
}

pub fn parse_observations(v: &Value) -> Result<Vec<StructuredValue>, SessionError> {
    v.as_array()
        .cloned()
        .ok_or_else(|| SessionError::Shape(format!("expected a list of observations, got {}", short(v))))
}

fn short(v: &Value) -> String {
    let s = v.to_string();
    if s.len() > 80 {
        format!("{}...", &s[..s.char_indices().nth(77).map_or(s.len(), |(i, _)| i)])
    } else {
        s
    }
}

/// Typed views over the raw session queries.
pub trait SessionExt: Session {
    fn current_player(&mut self, state: StateHandle) -> Result<PlayerId, SessionError> {
        parse_player(&self.current_player_raw(state)?)
    }

    fn legal_actions(&mut self, state: StateHandle) -> Result<Vec<ActionId>, SessionError> {
        parse_actions(&self.legal_actions_raw(state)?)
    }

    fn rewards(&mut self, state: StateHandle) -> Result<Vec<f64>, SessionError> {
        parse_rewards(&self.rewards_raw(state)?)
    }

    fn observations(&mut self, state: StateHandle) -> Result<Vec<StructuredValue>, SessionError> {
        parse_observations(&self.observations_raw(state)?)
    }

    fn observation_fingerprints(
        &mut self,
        state: StateHandle,
    ) -> Result<Vec<Fingerprint>, SessionError> {
        self.observations(state)?
            .iter()
            .map(|o| canonical_fingerprint(o).map_err(|e| SessionError::Shape(e.to_string())))
            .collect()
    }

    fn observation_fingerprint(
        &mut self,
        state: StateHandle,
        player: PlayerId,
    ) -> Result<Fingerprint, SessionError> {
        let raw = self.observations_raw(state)?;
        let all = raw.as_array().ok_or_else(|| {
            SessionError::Shape(format!("expected a list of observations, got {}", short(&raw)))
        })?;
        let one = usize::try_from(player)
            .ok()
            .and_then(|p| all.get(p))
            .ok_or_else(|| SessionError::Shape(format!("no observation for player {player}")))?;
        canonical_fingerprint(one).map_err(|e| SessionError::Shape(e.to_string()))
    }

    /// Display name, falling back to `player-<id>` when the candidate lacks
    /// the function.
    fn player_label(&mut self, player: PlayerId) -> String {
        match self.player_name(player) {
            Ok(name) if !name.is_empty() => name,
            _ => format!("player-{player}"),
        }
    }

    /// Asks the candidate for a trajectory explaining `player`'s view of `walk`.
    fn resample_for(
        &mut self,
        walk: &WalkRecord,
        player: PlayerId,
    ) -> Result<Vec<ActionId>, SessionError> {
        let records = walk.records_for(player);
        parse_actions(&self.resample(&records, player)?)
    }
}

impl<S: Session + ?Sized> SessionExt for S {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkStep {
    pub state: StateHandle,
    pub player: PlayerId,
    pub action: ActionId,
    /// Observation fingerprints of every player at `state`.
    pub observations: Vec<Fingerprint>,
}

/// A played trajectory from the initial state, in play order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkRecord {
    pub steps: Vec<WalkStep>,
    pub final_state: StateHandle,
    pub final_observations: Vec<Fingerprint>,
}

impl WalkRecord {
    /// Records one step per turn of `player` plus the final state.
    pub fn records_for(&self, player: PlayerId) -> Vec<ResampleRecord> {
        self.steps
            .iter()
            .filter(|s| s.player == player)
            .map(|s| ResampleRecord {
                state: s.state,
                action: Some(s.action.clone()),
            })
            .chain(std::iter::once(ResampleRecord {
                state: self.final_state,
                action: None,
            }))
            .collect()
    }

    /// Observation fingerprints `player` saw, aligned with [`Self::records_for`].
    pub fn observations_for(&self, player: PlayerId) -> Vec<Fingerprint> {
        let idx = player as usize;
        self.steps
            .iter()
            .filter(|s| s.player == player)
            .map(|s| s.observations[idx].clone())
            .chain(std::iter::once(self.final_observations[idx].clone()))
            .collect()
    }

    pub fn actions(&self) -> Vec<ActionId> {
        self.steps.iter().map(|s| s.action.clone()).collect()
    }
}

/// Plays `actions` from a fresh initial state, recording every step.
pub fn record_walk(
    session: &mut dyn Session,
    actions: &[ActionId],
) -> Result<WalkRecord, SessionError> {
    let mut state = session.initial_state()?.state;
    let mut steps = Vec::with_capacity(actions.len());
    for action in actions {
        let player = session.current_player(state)?;
        let observations = session.observation_fingerprints(state)?;
        let next = session.apply_action(state, action)?.new_state;
        steps.push(WalkStep {
            state,
            player,
            action: action.clone(),
            observations,
        });
        state = next;
    }
    let final_observations = session.observation_fingerprints(state)?;
    Ok(WalkRecord {
        steps,
        final_state: state,
        final_observations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn typed_parsers() {
        assert_eq!(parse_player(&json!(-4)).unwrap(), -4);
        assert!(matches!(parse_player(&json!("0")), Err(SessionError::Shape(_))));
        assert_eq!(parse_actions(&json!(["a", "b"])).unwrap().len(), 2);
        assert!(parse_actions(&json!(["a", 1])).is_err());
        assert!(parse_actions(&json!([""])).is_err());
        assert_eq!(parse_rewards(&json!([1, -0.5])).unwrap(), vec![1.0, -0.5]);
        assert!(parse_rewards(&json!(1.0)).is_err());
        assert!(parse_observations(&json!({})).is_err());
    }

    #[test]
    fn records_for_player() {
        let fp = canonical_fingerprint(&json!({})).unwrap();
        let step = |s: u64, p: PlayerId, a: &str| WalkStep {
            state: StateHandle(s),
            player: p,
            action: ActionId::new(a).unwrap(),
            observations: vec![fp.clone(), fp.clone()],
        };
        let walk = WalkRecord {
            steps: vec![step(0, -1, "deal:K"), step(1, 0, "Bet"), step(2, 1, "Call")],
            final_state: StateHandle(3),
            final_observations: vec![fp.clone(), fp.clone()],
        };
        let recs = walk.records_for(0);
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].state, StateHandle(1));
        assert_eq!(recs[1].action, None);
        assert_eq!(walk.observations_for(1).len(), 2);
    }
}
