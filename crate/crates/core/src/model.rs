//! Shared domain types: actions, player ids, game descriptors.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Transported structured value (maps, lists, strings, numbers, booleans, null).
///
/// States and observations cross session boundaries only in this form.
pub type StructuredValue = serde_json::Value;

/// Player id reported for terminal states.
pub const TERMINAL_PLAYER: PlayerId = -4;

/// Player id used for chance nodes.
pub const CHANCE_PLAYER: PlayerId = -1;

/// Candidate-reported player id. Acting players are `0..n_players`.
pub type PlayerId = i64;

pub fn is_terminal_player(p: PlayerId) -> bool {
    p == TERMINAL_PLAYER
}

pub fn is_chance_player(p: PlayerId) -> bool {
    p == CHANCE_PLAYER
}

/// A non-empty action token such as `"Fold"`, `"deal:K"` or `"2,3"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ActionId(String);

impl ActionId {
    pub fn new(text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        if text.is_empty() {
            return Err(ModelError::EmptyAction);
        }
        Ok(ActionId(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ActionId {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        ActionId::new(value)
    }
}

impl From<ActionId> for String {
    fn from(value: ActionId) -> Self {
        value.0
    }
}

impl AsRef<str> for ActionId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl PartialEq<str> for ActionId {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for ActionId {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoKind {
    Perfect,
    Imperfect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpec {
    pub name: String,
    pub n_players: usize,
    pub info_kind: InfoKind,
    #[serde(default = "default_chance_prefixes")]
    pub chance_action_prefixes: Vec<String>,
    pub max_walk_steps: usize,
}

pub fn default_chance_prefixes() -> Vec<String> {
    vec!["deal:".to_string(), "chance:".to_string()]
}

impl GameSpec {
    pub fn new(name: &str, n_players: usize, info_kind: InfoKind) -> Result<Self, ModelError> {
        let spec = GameSpec {
            name: name.to_string(),
            n_players,
            info_kind,
            chance_action_prefixes: default_chance_prefixes(),
            max_walk_steps: 200,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_players < 1 {
            return Err(ModelError::InvalidSpec("n_players must be at least 1".into()));
        }
        if self.max_walk_steps < 1 {
            return Err(ModelError::InvalidSpec("max_walk_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_imperfect(&self) -> bool {
        self.info_kind == InfoKind::Imperfect
    }

    /// A state is a chance node iff the candidate reports the chance player,
    /// or every legal action carries a configured chance prefix.
    pub fn is_chance_node(&self, current_player: PlayerId, legal: &[ActionId]) -> bool {
        if is_chance_player(current_player) {
            return true;
        }
        !legal.is_empty()
            && legal.iter().all(|a| {
                self.chance_action_prefixes
                    .iter()
                    .any(|prefix| a.as_str().starts_with(prefix.as_str()))
            })
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("action ids must be non-empty")]
    EmptyAction,
    #[error("invalid game spec: {0}")]
    InvalidSpec(String),
}
