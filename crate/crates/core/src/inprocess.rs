//! In-process candidates: engine modules that live in the harness process.
//!
//! A [`GameModule`] mirrors the dynamically typed function contract of a
//! candidate program. Queries return [`Value`]s so that crafted mutants can
//! return ill-shaped data, and `apply_action` receives the input state
//! mutably so that a mutating engine is expressible at all.

use std::sync::Arc;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::fingerprint::{canonical_fingerprint, Fingerprint};
use crate::model::{ActionId, PlayerId};
use crate::session::{
    ApiFunction, ApplyResult, ResampleRecord, Session, SessionError, SessionFactory, SessionInfo,
    StateHandle, StateRef,
};

/// An exception raised by candidate code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault(pub String);

impl Fault {
    pub fn new(kind: &str, message: impl std::fmt::Display) -> Self {
        Fault(format!("{kind}: {message}"))
    }
}

impl std::fmt::Display for Fault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub type ModuleResult<T> = Result<T, Fault>;

/// Native observation plus the action taken (none at the current state).
pub type HistoryEntry = (Value, Option<String>);

pub trait GameModule: Send + Sync + 'static {
    type State: Clone + PartialEq + Send + 'static;

    /// Simulated compile/import failure.
    fn load_error(&self) -> Option<String> {
        None
    }

    fn provides(&self, _f: ApiFunction) -> bool {
        true
    }

    fn initial_state(&self) -> ModuleResult<Self::State>;

    fn state_is_map(&self, _state: &Self::State) -> bool {
        true
    }

    /// Structured view of the full state, used for fingerprints.
    fn state_view(&self, state: &Self::State) -> Value;

    fn apply_action(&self, state: &mut Self::State, action: &str) -> ModuleResult<Self::State>;
    fn current_player(&self, state: &Self::State) -> ModuleResult<Value>;
    fn legal_actions(&self, state: &Self::State) -> ModuleResult<Value>;
    fn rewards(&self, state: &Self::State) -> ModuleResult<Value>;
    fn observations(&self, state: &Self::State) -> ModuleResult<Value>;

    fn player_name(&self, player: PlayerId) -> ModuleResult<Value> {
        Ok(json!(format!("Player {player}")))
    }

    fn resample_history(
        &self,
        history: &[HistoryEntry],
        player: PlayerId,
        rng: &mut dyn RngCore,
    ) -> ModuleResult<Value>;

    /// Source text of the resampler in candidate-language form, if known.
    fn resample_source(&self) -> Option<String> {
        None
    }
}

/// Session over an in-process module. States are held natively; every
/// `apply_action` snapshots its input and compares afterwards. A detected
/// mutation is reported and the handle is restored to the snapshot, so the
/// handle keeps denoting the state it was issued for.
pub struct InProcessSession<M: GameModule> {
    module: Arc<M>,
    states: Vec<M::State>,
    rng: ChaCha8Rng,
    closed: bool,
}

impl<M: GameModule> InProcessSession<M> {
    pub fn new(module: Arc<M>, seed: u64) -> Self {
        InProcessSession {
            module,
            states: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            closed: false,
        }
    }

    fn live(&self) -> Result<(), SessionError> {
        if self.closed {
            return Err(SessionError::Dead);
        }
        if let Some(err) = self.module.load_error() {
            return Err(SessionError::Load(err));
        }
        Ok(())
    }

    fn require(&self, f: ApiFunction) -> Result<(), SessionError> {
        self.live()?;
        if self.module.provides(f) {
            Ok(())
        } else {
            Err(SessionError::Unsupported(format!(
                "candidate does not define {}",
                f.name()
            )))
        }
    }

    fn state(&self, handle: StateHandle) -> Result<&M::State, SessionError> {
        usize::try_from(handle.0)
            .ok()
            .and_then(|i| self.states.get(i))
            .ok_or_else(|| SessionError::Protocol(format!("unknown state handle {handle}")))
    }

    fn push(&mut self, state: M::State) -> StateHandle {
        self.states.push(state);
        StateHandle(self.states.len() as u64 - 1)
    }

    fn query(
        &self,
        f: ApiFunction,
        handle: StateHandle,
        call: impl FnOnce(&M, &M::State) -> ModuleResult<Value>,
    ) -> Result<Value, SessionError> {
        self.require(f)?;
        let state = self.state(handle)?;
        call(&self.module, state).map_err(|e| SessionError::Crash(e.0))
    }
}

impl<M: GameModule> Session for InProcessSession<M> {
    fn info(&mut self) -> Result<SessionInfo, SessionError> {
        if self.closed {
            return Err(SessionError::Dead);
        }
        let load_error = self.module.load_error();
        let load_ok = load_error.is_none();
        let api_present = ApiFunction::ALL
            .iter()
            .map(|f| (f.name().to_string(), load_ok && self.module.provides(*f)))
            .collect();
        let resample_source = if load_ok && self.module.provides(ApiFunction::ResampleHistory) {
            self.module.resample_source()
        } else {
            None
        };
        Ok(SessionInfo {
            api_present,
            load_ok,
            load_error,
            resample_source,
        })
    }

    fn initial_state(&mut self) -> Result<StateRef, SessionError> {
        self.require(ApiFunction::InitialState)?;
        let state = self
            .module
            .initial_state()
            .map_err(|e| SessionError::Crash(e.0))?;
        let is_map = self.module.state_is_map(&state);
        Ok(StateRef {
            state: self.push(state),
            is_map,
        })
    }

    fn apply_action(
        &mut self,
        handle: StateHandle,
        action: &ActionId,
    ) -> Result<ApplyResult, SessionError> {
        self.require(ApiFunction::ApplyAction)?;
        // the stored state is the snapshot; the candidate only sees a copy
        let mut working = self.state(handle)?.clone();
        let next = self
            .module
            .apply_action(&mut working, action.as_str())
            .map_err(|e| SessionError::Crash(e.0))?;
        let input_mutated = working != *self.state(handle)?;
        Ok(ApplyResult {
            new_state: self.push(next),
            input_mutated,
        })
    }

    fn current_player_raw(&mut self, state: StateHandle) -> Result<Value, SessionError> {
        self.query(ApiFunction::CurrentPlayer, state, |m, s| m.current_player(s))
    }

    fn legal_actions_raw(&mut self, state: StateHandle) -> Result<Value, SessionError> {
        self.query(ApiFunction::LegalActions, state, |m, s| m.legal_actions(s))
    }

    fn rewards_raw(&mut self, state: StateHandle) -> Result<Value, SessionError> {
        self.query(ApiFunction::Rewards, state, |m, s| m.rewards(s))
    }

    fn observations_raw(&mut self, state: StateHandle) -> Result<Value, SessionError> {
        self.query(ApiFunction::Observations, state, |m, s| m.observations(s))
    }

    fn player_name(&mut self, player: PlayerId) -> Result<String, SessionError> {
        self.require(ApiFunction::PlayerName)?;
        let v = self
            .module
            .player_name(player)
            .map_err(|e| SessionError::Crash(e.0))?;
        v.as_str()
            .map(str::to_string)
            .ok_or_else(|| SessionError::Shape(format!("player name {v} is not a string")))
    }

    fn fingerprint(&mut self, handle: StateHandle) -> Result<Fingerprint, SessionError> {
        self.live()?;
        let view = self.module.state_view(self.state(handle)?);
        canonical_fingerprint(&view).map_err(|e| SessionError::Shape(e.to_string()))
    }

    fn resample(
        &mut self,
        records: &[ResampleRecord],
        player: PlayerId,
    ) -> Result<Value, SessionError> {
        self.require(ApiFunction::ResampleHistory)?;
        self.require(ApiFunction::Observations)?;
        let idx = usize::try_from(player)
            .map_err(|_| SessionError::Protocol(format!("bad player {player}")))?;
        let mut history = Vec::with_capacity(records.len());
        for rec in records {
            let obs = self
                .module
                .observations(self.state(rec.state)?)
                .map_err(|e| SessionError::Crash(e.0))?;
            let mine = obs
                .get(idx)
                .cloned()
                .ok_or_else(|| SessionError::Shape(format!("no observation for player {player}")))?;
            history.push((mine, rec.action.as_ref().map(|a| a.to_string())));
        }
        self.module
            .resample_history(&history, player, &mut self.rng)
            .map_err(|e| SessionError::Crash(e.0))
    }

    fn close(&mut self) {
        self.closed = true;
        self.states.clear();
    }
}

/// Factory producing in-process sessions over one shared module.
pub struct InProcessFactory<M: GameModule> {
    module: Arc<M>,
    seed: u64,
    label: String,
}

impl<M: GameModule> InProcessFactory<M> {
    pub fn new(module: M, seed: u64, label: impl Into<String>) -> Self {
        InProcessFactory {
            module: Arc::new(module),
            seed,
            label: label.into(),
        }
    }
}

impl<M: GameModule> SessionFactory for InProcessFactory<M> {
    fn open(&self) -> Result<Box<dyn Session>, crate::Error> {
        Ok(Box::new(InProcessSession::new(self.module.clone(), self.seed)))
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}
