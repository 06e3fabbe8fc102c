//! Tier 4: epistemic consistency of `resample_history`.
//!
//! Each probe plays a random walk, cuts it at a uniformly chosen point and
//! hands the probed player's (observation, action) history to the
//! candidate's resampler. The proposed trajectory is replayed from a fresh
//! initial state and judged by four checks:
//!
//! - `resample_legal`: every proposed action was legal when applied
//! - `obs_reconstruction`: at every recorded turn, and at the final state,
//!   the replayed observation matches the recorded one
//! - `action_consistency`: at every recorded turn the replay takes the
//!   recorded action
//! - `resample_complete`: the replay consumes exactly the recorded turns
//!
//! Recorded turns the replay never reaches count against the
//! reconstruction and consistency checks.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Diagnostics, Tier, TierReport};
use crate::model::{is_terminal_player, ActionId, GameSpec, PlayerId};
use crate::session::{
    record_walk, ApiFunction, Session, SessionError, SessionExt, SessionFactory, WalkRecord,
};

pub const INFORMATION_CHECKS: [&str; 4] = [
    "resample_legal",
    "obs_reconstruction",
    "action_consistency",
    "resample_complete",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub n_probes: usize,
    pub rng_seed: u64,
    pub max_walk_steps: usize,
}

impl ProbeConfig {
    pub fn evaluation(seed: u64) -> Self {
        ProbeConfig {
            n_probes: 100,
            rng_seed: seed,
            max_walk_steps: 200,
        }
    }

    pub fn reward(seed: u64) -> Self {
        ProbeConfig {
            n_probes: 20,
            ..Self::evaluation(seed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ProbeVerdict {
    legal: bool,
    obs: bool,
    action: bool,
    complete: bool,
}

impl ProbeVerdict {
    const FAILED: ProbeVerdict = ProbeVerdict {
        legal: false,
        obs: false,
        action: false,
        complete: false,
    };
}

fn report(checks: [bool; 4], diagnostics: Diagnostics) -> TierReport {
    TierReport::new(
        Tier::Information,
        INFORMATION_CHECKS.iter().copied().zip(checks).collect(),
        diagnostics.finish(),
    )
}

pub fn run_information(factory: &dyn SessionFactory, cfg: &ProbeConfig, spec: &GameSpec) -> TierReport {
    let mut diagnostics = Diagnostics::default();
    let mut session = match factory.open() {
        Ok(s) => s,
        Err(e) => {
            diagnostics.push(format!("could not open session: {e}"));
            return report([false; 4], diagnostics);
        }
    };
    let r = probe_all(session.as_mut(), cfg, spec, diagnostics);
    session.close();
    r
}

fn probe_all(
    session: &mut dyn Session,
    cfg: &ProbeConfig,
    spec: &GameSpec,
    mut diagnostics: Diagnostics,
) -> TierReport {
    match session.info() {
        Ok(info) if !info.load_ok => {
            diagnostics.push(format!(
                "candidate failed to load: {}",
                info.load_error.unwrap_or_default()
            ));
            return report([false; 4], diagnostics);
        }
        Ok(info) if !info.has(ApiFunction::ResampleHistory) => {
            diagnostics.push("resample_history is not defined".to_string());
            return report([false; 4], diagnostics);
        }
        Ok(_) => {}
        Err(e) => {
            diagnostics.push(format!("info failed: {e}"));
            return report([false; 4], diagnostics);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut all = [true; 4];
    for i in 0..cfg.n_probes {
        let player = (i % spec.n_players.max(1)) as PlayerId;
        let v = match probe(session, cfg, player, &mut rng, &mut diagnostics, i) {
            Ok(v) => v,
            Err(e) => {
                diagnostics.push(format!("probe {i} (player {player}): {e}"));
                if e.is_fatal() {
                    diagnostics.push("session lost; remaining probes skipped".to_string());
                    return report([false; 4], diagnostics);
                }
                ProbeVerdict::FAILED
            }
        };
        all[0] &= v.legal;
        all[1] &= v.obs;
        all[2] &= v.action;
        all[3] &= v.complete;
    }
    report(all, diagnostics)
}

/// Random walk to a terminal state or the step cap.
fn random_walk(
    session: &mut dyn Session,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ActionId>, SessionError> {
    let mut state = session.initial_state()?.state;
    let mut actions = Vec::new();
    for _ in 0..max_steps {
        if is_terminal_player(session.current_player(state)?) {
            break;
        }
        let legal = session.legal_actions(state)?;
        if legal.is_empty() {
            break;
        }
        let a = legal[rng.gen_range(0..legal.len())].clone();
        state = session.apply_action(state, &a)?.new_state;
        actions.push(a);
    }
    Ok(actions)
}

fn probe(
    session: &mut dyn Session,
    cfg: &ProbeConfig,
    player: PlayerId,
    rng: &mut ChaCha8Rng,
    diagnostics: &mut Diagnostics,
    i: usize,
) -> Result<ProbeVerdict, SessionError> {
    let mut actions = random_walk(session, cfg.max_walk_steps, rng)?;
    if !actions.is_empty() {
        let cut = rng.gen_range(1..=actions.len());
        actions.truncate(cut);
    }
    let walk = record_walk(session, &actions)?;
    let proposed = session.resample_for(&walk, player)?;
    let v = judge(session, &walk, player, &proposed)?;
    if v != (ProbeVerdict { legal: true, obs: true, action: true, complete: true }) {
        diagnostics.push(format!(
            "probe {i} (player {player}): proposed {} action(s) for a {}-step history; \
             legal={} obs={} action={} complete={}",
            proposed.len(),
            walk.steps.len(),
            v.legal,
            v.obs,
            v.action,
            v.complete
        ));
    }
    Ok(v)
}

/// Replays `proposed` and scores it against `player`'s view of `walk`.
fn judge(
    session: &mut dyn Session,
    walk: &WalkRecord,
    player: PlayerId,
    proposed: &[ActionId],
) -> Result<ProbeVerdict, SessionError> {
    let records = walk.records_for(player);
    let recorded_obs = walk.observations_for(player);
    let turns = records.len() - 1;
    let mut v = ProbeVerdict {
        legal: true,
        obs: true,
        action: true,
        complete: true,
    };
    let mut state = session.initial_state()?.state;
    let mut consumed = 0usize;
    for action in proposed {
        let current = session.current_player(state)?;
        if current == player {
            if consumed < turns {
                if session.observation_fingerprint(state, player)? != recorded_obs[consumed] {
                    v.obs = false;
                }
                if records[consumed].action.as_ref() != Some(action) {
                    v.action = false;
                }
            } else {
                v.action = false;
                v.complete = false;
            }
            consumed += 1;
        }
        if !session.legal_actions(state)?.contains(action) {
            v.legal = false;
            v.complete = false;
            break;
        }
        state = session.apply_action(state, action)?.new_state;
    }
    if consumed < turns {
        v.obs = false;
        v.action = false;
        v.complete = false;
    }
    if v.legal && session.observation_fingerprint(state, player)? != recorded_obs[turns] {
        v.obs = false;
    }
    Ok(v)
}
