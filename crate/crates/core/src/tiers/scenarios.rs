//! Tier 3: golden scenario traces.
//!
//! A scenario file is JSON:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "game": "leduc_poker",
//!   "scenarios": [
//!     {"name": "P0 folds preflop",
//!      "actions": ["deal:K", "deal:Q", "Fold"],
//!      "checks": {"terminal": true, "winner": 1}}
//!   ]
//! }
//! ```
//!
//! Supported checks: `terminal`, `current_player`, `rewards_sign`, `winner`
//! and `illegal_next` (an action that must not be legal at the end state).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Diagnostics, Tier, TierReport};
use crate::games::{game_spec, REGISTRY};
use crate::model::{is_terminal_player, ActionId, PlayerId};
use crate::session::{Session, SessionError, SessionExt, SessionFactory};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioChecks {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_player: Option<PlayerId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards_sign: Option<Vec<i8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winner: Option<PlayerId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub illegal_next: Option<ActionId>,
}

impl ScenarioChecks {
    pub fn is_empty(&self) -> bool {
        self.terminal.is_none()
            && self.current_player.is_none()
            && self.rewards_sign.is_none()
            && self.winner.is_none()
            && self.illegal_next.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub actions: Vec<ActionId>,
    pub checks: ScenarioChecks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub game: String,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario file parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario file: {0}")]
    Invalid(String),
}

pub fn parse_scenarios(bytes: &[u8]) -> Result<ScenarioFile, ScenarioError> {
    let file: ScenarioFile = serde_json::from_slice(bytes).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.validate()?;
    Ok(file)
}

impl ScenarioFile {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if self.format_version != SCENARIO_FORMAT_VERSION {
            return invalid(format!(
                "unsupported format_version {} (expected {SCENARIO_FORMAT_VERSION})",
                self.format_version
            ));
        }
        let spec = match game_spec(&self.game) {
            Ok(spec) => spec,
            Err(_) => {
                return invalid(format!(
                    "unknown game {:?}; registered: {}",
                    self.game,
                    REGISTRY.join(", ")
                ))
            }
        };
        let mut names = BTreeSet::new();
        for s in &self.scenarios {
            if !names.insert(s.name.as_str()) {
                return invalid(format!("duplicate scenario name {:?}", s.name));
            }
            if s.checks.is_empty() {
                return invalid(format!("scenario {:?} needs at least one check", s.name));
            }
            if let Some(signs) = &s.checks.rewards_sign {
                if signs.len() != spec.n_players {
                    return invalid(format!(
                        "scenario {:?}: rewards_sign has {} entries, game has {} players",
                        s.name,
                        signs.len(),
                        spec.n_players
                    ));
                }
                if let Some(bad) = signs.iter().find(|v| !(-1..=1).contains(*v)) {
                    return invalid(format!(
                        "scenario {:?}: rewards_sign value {bad} is not one of -1, 0, 1",
                        s.name
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Shipped fixture for a registered game.
pub fn builtin_scenarios(game: &str) -> Option<&'static str> {
    match game {
        "tic_tac_toe" => Some(include_str!("../../scenarios/tic_tac_toe.scenarios.json")),
        "generalized_tic_tac_toe" => Some(include_str!(
            "../../scenarios/generalized_tic_tac_toe.scenarios.json"
        )),
        "kuhn_poker" => Some(include_str!("../../scenarios/kuhn_poker.scenarios.json")),
        "leduc_poker" => Some(include_str!("../../scenarios/leduc_poker.scenarios.json")),
        _ => None,
    }
}

/// Parsed shipped fixture; panics only if a shipped file is broken.
pub fn builtin_scenario_file(game: &str) -> Option<ScenarioFile> {
    builtin_scenarios(game).map(|text| {
        parse_scenarios(text.as_bytes())
            .unwrap_or_else(|e| panic!("shipped scenarios for {game} are invalid: {e}"))
    })
}

/// Replays every scenario from a fresh initial state. A session that dies
/// is replaced before the next scenario.
pub fn run_scenarios(factory: &dyn SessionFactory, file: &ScenarioFile) -> TierReport {
    let mut diagnostics = Diagnostics::default();
    let mut results = Vec::with_capacity(file.scenarios.len());
    let mut session: Option<Box<dyn Session>> = None;
    for scenario in &file.scenarios {
        if session.is_none() {
            match factory.open() {
                Ok(s) => session = Some(s),
                Err(e) => {
                    diagnostics.push(format!("{}: could not open session: {e}", scenario.name));
                    results.push((scenario.name.as_str(), false));
                    continue;
                }
            }
        }
        let s = session.as_mut().expect("session opened above");
        let passed = match replay(s.as_mut(), scenario) {
            Ok(failures) => {
                for f in &failures {
                    diagnostics.push(format!("{}: {f}", scenario.name));
                }
                failures.is_empty()
            }
            Err(e) => {
                diagnostics.push(format!("{}: {e}", scenario.name));
                if e.is_fatal() {
                    if let Some(mut dead) = session.take() {
                        dead.close();
                    }
                }
                false
            }
        };
        results.push((scenario.name.as_str(), passed));
    }
    if let Some(mut s) = session {
        s.close();
    }
    TierReport::new(Tier::Scenarios, results, diagnostics.finish())
}

/// Returns the list of failed expectations; `Err` for candidate errors.
fn replay(session: &mut dyn Session, scenario: &Scenario) -> Result<Vec<String>, SessionError> {
    let mut state = session.initial_state()?.state;
    for (i, action) in scenario.actions.iter().enumerate() {
        let legal = session.legal_actions(state)?;
        if !legal.contains(action) {
            return Ok(vec![format!("action {i} ({action}) is not legal")]);
        }
        state = session.apply_action(state, action)?.new_state;
    }
    let checks = &scenario.checks;
    let mut failures = Vec::new();
    let player = session.current_player(state)?;
    if let Some(want) = checks.terminal {
        let got = is_terminal_player(player);
        if got != want {
            failures.push(format!("terminal is {got}, expected {want}"));
        }
    }
    if let Some(want) = checks.current_player {
        if player != want {
            failures.push(format!("current player is {player}, expected {want}"));
        }
    }
    if checks.rewards_sign.is_some() || checks.winner.is_some() {
        let rewards = session.rewards(state)?;
        if let Some(want) = &checks.rewards_sign {
            let got: Vec<i8> = rewards.iter().map(|r| sign(*r)).collect();
            if &got != want {
                failures.push(format!("reward signs are {got:?}, expected {want:?}"));
            }
        }
        if let Some(want) = checks.winner {
            if strict_winner(&rewards) != Some(want) {
                failures.push(format!("rewards {rewards:?} do not make player {want} the winner"));
            }
        }
    }
    if let Some(action) = &checks.illegal_next {
        if session.legal_actions(state)?.contains(action) {
            failures.push(format!("{action} is legal but should not be"));
        }
    }
    Ok(failures)
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// The player whose reward strictly exceeds every other player's.
pub fn strict_winner(rewards: &[f64]) -> Option<PlayerId> {
    let (best, &top) = rewards
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    rewards
        .iter()
        .enumerate()
        .all(|(i, r)| i == best || *r < top)
        .then_some(best as PlayerId)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{make_game, GameParams};

    #[test]
    fn shipped_fixtures_parse() {
        for game in REGISTRY {
            let f = builtin_scenario_file(game).unwrap();
            assert_eq!(f.game, game);
            assert!(!f.scenarios.is_empty());
        }
        assert_eq!(builtin_scenario_file("leduc_poker").unwrap().scenarios.len(), 6);
        assert_eq!(
            builtin_scenario_file("generalized_tic_tac_toe").unwrap().scenarios.len(),
            7
        );
    }

    #[test]
    fn references_saturate_their_fixtures() {
        for game in REGISTRY {
            let g = make_game(game, &GameParams::new(), None).unwrap();
            let r = run_scenarios(g.factory().as_ref(), &builtin_scenario_file(game).unwrap());
            assert_eq!(r.score, 1.0, "{game}: {:?}", r.diagnostics);
        }
    }

    #[test]
    fn empty_checks_rejected() {
        let text = br#"{"format_version":1,"game":"kuhn_poker","scenarios":[
            {"name":"a","actions":[],"checks":{}}]}"#;
        match parse_scenarios(text) {
            Err(ScenarioError::Invalid(m)) => assert!(m.contains("at least one check")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sign_domain_enforced() {
        let text = br#"{"format_version":1,"game":"kuhn_poker","scenarios":[
            {"name":"a","actions":[],"checks":{"rewards_sign":[2,0]}}]}"#;
        assert!(matches!(parse_scenarios(text), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = b"{\"format_version\":1,\"game\":\"kuhn_poker\",\"scenarios\":[\n{\"name\":\"a\",\"actions\":[],\"checks\":{\"loser\":1}}]}";
        match parse_scenarios(text) {
            Err(ScenarioError::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("loser"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_names_and_unknown_game() {
        let dup = br#"{"format_version":1,"game":"kuhn_poker","scenarios":[
            {"name":"a","actions":[],"checks":{"terminal":false}},
            {"name":"a","actions":[],"checks":{"terminal":false}}]}"#;
        assert!(matches!(parse_scenarios(dup), Err(ScenarioError::Invalid(m)) if m.contains("duplicate")));
        let unknown = br#"{"format_version":1,"game":"chess","scenarios":[]}"#;
        assert!(matches!(parse_scenarios(unknown), Err(ScenarioError::Invalid(m)) if m.contains("chess")));
        let version = br#"{"format_version":2,"game":"kuhn_poker","scenarios":[]}"#;
        assert!(parse_scenarios(version).is_err());
    }

    #[test]
    fn illegal_action_fails_only_its_scenario() {
        let text = br#"{"format_version":1,"game":"kuhn_poker","scenarios":[
            {"name":"bad","actions":["deal:K","deal:K"],"checks":{"terminal":false}},
            {"name":"good","actions":["deal:K","deal:Q"],"checks":{"current_player":0}},
            {"name":"reserved","actions":["deal:K","deal:Q"],"checks":{"illegal_next":"Fold"}}]}"#;
        let file = parse_scenarios(text).unwrap();
        let g = make_game("kuhn_poker", &GameParams::new(), None).unwrap();
        let r = run_scenarios(g.factory().as_ref(), &file);
        assert_eq!(r.check_vector(), vec![false, true, true]);
    }

    #[test]
    fn winner_is_strict_maximum() {
        assert_eq!(strict_winner(&[1.0, -1.0]), Some(0));
        assert_eq!(strict_winner(&[-2.0, 2.0]), Some(1));
        assert_eq!(strict_winner(&[0.0, 0.0]), None);
        assert_eq!(strict_winner(&[]), None);
    }
}
