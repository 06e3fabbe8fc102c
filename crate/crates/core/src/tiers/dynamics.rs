//! Tier 2: random-walk fuzzing of engine invariants.
//!
//! Four checks, each passing iff it held on every trajectory:
//!
//! - `no_crash`: no candidate exception, and no non-terminal state without
//!   legal actions (a dead end)
//! - `immutable`: `apply_action` never changed its input
//! - `deterministic`: applying the same action to the same state twice
//!   gives fingerprint-equal successors (chance nodes exempt)
//! - `terminal_empty`: terminal states report no legal actions
//!
//! The determinism probe re-applies one (state, action) pair per walk,
//! chosen by reservoir sampling over the walk's non-chance steps so the
//! choice is uniform without knowing the walk length in advance.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Diagnostics, Tier, TierReport};
use crate::model::{is_terminal_player, GameSpec};
use crate::session::{Session, SessionError, SessionExt, SessionFactory, StateHandle};

pub const DYNAMICS_CHECKS: [&str; 4] = ["no_crash", "immutable", "deterministic", "terminal_empty"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub n_trajectories: usize,
    pub max_walk_steps: usize,
    pub rng_seed: u64,
}

impl FuzzConfig {
    /// Evaluation defaults: 100 trajectories.
    pub fn evaluation(seed: u64) -> Self {
        FuzzConfig {
            n_trajectories: 100,
            max_walk_steps: 200,
            rng_seed: seed,
        }
    }

    /// Reward-path defaults: 20 trajectories.
    pub fn reward(seed: u64) -> Self {
        FuzzConfig {
            n_trajectories: 20,
            ..Self::evaluation(seed)
        }
    }
}

#[derive(Debug)]
struct Verdict {
    no_crash: bool,
    immutable: bool,
    deterministic: bool,
    terminal_empty: bool,
    truncated: usize,
    diagnostics: Diagnostics,
}

impl Verdict {
    fn report(self) -> TierReport {
        let mut diagnostics = self.diagnostics;
        if self.truncated > 0 {
            diagnostics.push(format!(
                "possible non-termination: {} walk(s) hit the step cap",
                self.truncated
            ));
        }
        TierReport::new(
            Tier::Dynamics,
            vec![
                ("no_crash", self.no_crash),
                ("immutable", self.immutable),
                ("deterministic", self.deterministic),
                ("terminal_empty", self.terminal_empty),
            ],
            diagnostics.finish(),
        )
    }

    fn all_failed(message: String) -> TierReport {
        let mut d = Diagnostics::default();
        d.push(message);
        Verdict {
            no_crash: false,
            immutable: false,
            deterministic: false,
            terminal_empty: false,
            truncated: 0,
            diagnostics: d,
        }
        .report()
    }
}

pub fn run_dynamics(factory: &dyn SessionFactory, cfg: &FuzzConfig, spec: &GameSpec) -> TierReport {
    let mut session = match factory.open() {
        Ok(s) => s,
        Err(e) => return Verdict::all_failed(format!("could not open session: {e}")),
    };
    let report = fuzz(session.as_mut(), cfg, spec);
    session.close();
    report
}

/// Runs the fuzzer on an already open session.
pub fn fuzz(session: &mut dyn Session, cfg: &FuzzConfig, spec: &GameSpec) -> TierReport {
    match session.info() {
        Ok(info) if info.load_ok => {}
        Ok(info) => {
            return Verdict::all_failed(format!(
                "candidate failed to load: {}",
                info.load_error.unwrap_or_default()
            ))
        }
        Err(e) => return Verdict::all_failed(format!("info failed: {e}")),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut v = Verdict {
        no_crash: true,
        immutable: true,
        deterministic: true,
        terminal_empty: true,
        truncated: 0,
        diagnostics: Diagnostics::default(),
    };
    for t in 0..cfg.n_trajectories {
        if let Err(e) = walk(session, cfg, spec, &mut rng, &mut v, t) {
            v.no_crash = false;
            v.diagnostics.push(format!("trajectory {t}: {e}"));
            if e.is_fatal() {
                v.diagnostics.push("session lost; remaining trajectories skipped".to_string());
                break;
            }
        }
    }
    v.report()
}

fn walk(
    session: &mut dyn Session,
    cfg: &FuzzConfig,
    spec: &GameSpec,
    rng: &mut ChaCha8Rng,
    v: &mut Verdict,
    t: usize,
) -> Result<(), SessionError> {
    let mut state: StateHandle = session.initial_state()?.state;
    let mut decisions = 0usize;
    for step in 0..=cfg.max_walk_steps {
        let player = session.current_player(state)?;
        let legal = session.legal_actions(state)?;
        session.rewards_raw(state)?;
        session.observations_raw(state)?;
        if is_terminal_player(player) {
            if !legal.is_empty() {
                v.terminal_empty = false;
                v.diagnostics.push(format!(
                    "trajectory {t} step {step}: terminal state lists {} legal action(s)",
                    legal.len()
                ));
            }
            return Ok(());
        }
        if legal.is_empty() {
            v.no_crash = false;
            v.diagnostics.push(format!(
                "trajectory {t} step {step}: dead end (player {player} has no legal actions)"
            ));
            return Ok(());
        }
        if step == cfg.max_walk_steps {
            v.truncated += 1;
            return Ok(());
        }
        let action = legal[rng.gen_range(0..legal.len())].clone();
        let applied = session.apply_action(state, &action)?;
        if applied.input_mutated {
            v.immutable = false;
            v.diagnostics.push(format!(
                "trajectory {t} step {step}: apply_action({action}) mutated its input"
            ));
        }
        if !spec.is_chance_node(player, &legal) {
            decisions += 1;
            if rng.gen_range(0..decisions) == 0 {
                let again = session.apply_action(state, &action)?;
                let first = session.fingerprint(applied.new_state)?;
                let second = session.fingerprint(again.new_state)?;
                if first != second {
                    v.deterministic = false;
                    v.diagnostics.push(format!(
                        "trajectory {t} step {step}: apply_action({action}) is not deterministic"
                    ));
                }
            }
        }
        state = applied.new_state;
    }
    Ok(())
}
