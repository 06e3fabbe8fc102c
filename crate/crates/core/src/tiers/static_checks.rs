//! Tier 1: load status, API presence and return shapes, with cascading
//! aborts.

use super::{Tier, TierReport};
use crate::session::{
    parse_actions, parse_observations, parse_player, parse_rewards, ApiFunction, Session,
};

pub const STATIC_CHECKS: [&str; 7] = [
    "syntax_ok",
    "api_complete",
    "initial_is_map",
    "legal_actions_is_string_list",
    "rewards_is_number_list",
    "observations_is_list",
    "current_player_is_int",
];

pub fn run_static(session: &mut dyn Session) -> TierReport {
    let mut passed = [false; 7];
    let mut diagnostics = Vec::new();
    let report = |passed: [bool; 7], diagnostics| {
        TierReport::new(
            Tier::Static,
            STATIC_CHECKS.iter().copied().zip(passed).collect(),
            diagnostics,
        )
    };

    let info = match session.info() {
        Ok(info) => info,
        Err(e) => {
            diagnostics.push(format!("info failed: {e}"));
            return report(passed, diagnostics);
        }
    };
    passed[0] = info.load_ok;
    if !info.load_ok {
        diagnostics.push(format!(
            "load failed: {}",
            info.load_error.as_deref().unwrap_or("no message")
        ));
        return report(passed, diagnostics);
    }

    let missing: Vec<&str> = ApiFunction::CORE
        .iter()
        .filter(|f| !info.has(**f))
        .map(|f| f.name())
        .collect();
    passed[1] = missing.is_empty();
    if !info.has(ApiFunction::PlayerName) {
        diagnostics.push("player_name is not defined".to_string());
    }
    if !passed[1] {
        diagnostics.push(format!("missing functions: {}", missing.join(", ")));
        return report(passed, diagnostics);
    }

    let state = match session.initial_state() {
        Ok(r) => {
            passed[2] = r.is_map;
            if !r.is_map {
                diagnostics.push("initial state is not a map".to_string());
            }
            r.state
        }
        Err(e) => {
            diagnostics.push(format!("initial_state failed: {e}"));
            return report(passed, diagnostics);
        }
    };

    let mut probe = |name: &str, result: Result<(), String>| match result {
        Ok(()) => true,
        Err(msg) => {
            diagnostics.push(format!("{name}: {msg}"));
            false
        }
    };
    passed[3] = probe(
        "legal_actions",
        session
            .legal_actions_raw(state)
            .map_err(|e| e.to_string())
            .and_then(|v| parse_actions(&v).map(|_| ()).map_err(|e| e.to_string())),
    );
    passed[4] = probe(
        "rewards",
        session
            .rewards_raw(state)
            .map_err(|e| e.to_string())
            .and_then(|v| parse_rewards(&v).map(|_| ()).map_err(|e| e.to_string())),
    );
    passed[5] = probe(
        "observations",
        session
            .observations_raw(state)
            .map_err(|e| e.to_string())
            .and_then(|v| parse_observations(&v).map(|_| ()).map_err(|e| e.to_string())),
    );
    passed[6] = probe(
        "current_player",
        session
            .current_player_raw(state)
            .map_err(|e| e.to_string())
            .and_then(|v| parse_player(&v).map(|_| ()).map_err(|e| e.to_string())),
    );
    report(passed, diagnostics)
}

/// Only load, API presence and an initial map abort the pipeline; shape
/// failures lower the score but do not block later tiers.
pub fn static_gate(report: &TierReport) -> bool {
    debug_assert_eq!(report.tier, Tier::Static);
    ["syntax_ok", "api_complete", "initial_is_map"]
        .iter()
        .all(|name| report.passed(name) == Some(true))
}
