//! Game-playing agents over candidate engines: UCT for perfect-information
//! games, single-observer ISMCTS for imperfect-information games, and a
//! match runner.

pub mod ismcts;
pub mod mcts;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ismcts::{ismcts_choose, ismcts_search};
pub use mcts::{mcts_choose, mcts_search};

use crate::model::{is_terminal_player, ActionId, GameSpec, InfoKind};
use crate::session::{Session, SessionError, SessionExt, SessionFactory, WalkRecord, WalkStep};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_simulations: usize,
    pub exploration: f64,
    pub rng_seed: u64,
    pub max_rollout_depth: usize,
}

impl SearchConfig {
    pub fn new(n_simulations: usize, rng_seed: u64) -> Self {
        SearchConfig {
            n_simulations,
            exploration: std::f64::consts::SQRT_2,
            rng_seed,
            max_rollout_depth: 200,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.n_simulations == 0 {
            return Err(SolverError::Config("n_simulations must be at least 1".into()));
        }
        if !(self.exploration.is_finite() && self.exploration >= 0.0) {
            return Err(SolverError::Config("exploration constant must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub action: ActionId,
    /// Root visit counts in legal-action order.
    pub visits: Vec<(ActionId, u32)>,
    pub failed_determinizations: usize,
}

impl SearchResult {
    fn single(action: ActionId) -> Self {
        SearchResult {
            visits: vec![(action.clone(), 0)],
            action,
            failed_determinizations: 0,
        }
    }

    /// Most visited action; ties go to the earliest legal action.
    fn from_visits(visits: Vec<(ActionId, u32)>) -> Self {
        let best = visits
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.1.cmp(&b.1).then(j.cmp(i)))
            .map(|(_, (a, _))| a.clone())
            .expect("at least one root action");
        SearchResult {
            action: best,
            visits,
            failed_determinizations: 0,
        }
    }

    pub fn visit_share(&self, action: &str) -> f64 {
        let total: u32 = self.visits.iter().map(|(_, n)| n).sum();
        let n = self.visits.iter().find(|(a, _)| a == action).map_or(0, |(_, n)| *n);
        if total == 0 {
            0.0
        } else {
            n as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("state is not a decision point")]
    NotADecision,
    #[error("non-terminal state without legal actions")]
    NoLegalActions,
    #[error("search failed: {0}")]
    SearchFailed(String),
    #[error("agent {agent} cannot play {game}: {reason}")]
    Mismatch {
        agent: String,
        game: String,
        reason: String,
    },
    #[error("invalid agent specifier {0:?}")]
    BadAgent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AgentSpec {
    Random,
    Mcts { sims: usize, c: f64 },
    Ismcts { sims: usize, c: f64 },
}

impl FromStr for AgentSpec {
    type Err = SolverError;

    /// `random`, `mcts:sims=N[,c=X]` or `ismcts:sims=N[,c=X]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SolverError::BadAgent(s.to_string());
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        if kind == "random" {
            return if rest.is_empty() { Ok(AgentSpec::Random) } else { Err(bad()) };
        }
        let mut sims = None;
        let mut c = std::f64::consts::SQRT_2;
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            match part.split_once('=') {
                Some(("sims", v)) => sims = Some(v.parse::<usize>().map_err(|_| bad())?),
                Some(("c", v)) => {
                    c = v.parse::<f64>().map_err(|_| bad())?;
                    if !(c.is_finite() && c >= 0.0) {
                        return Err(bad());
                    }
                }
                _ => return Err(bad()),
            }
        }
        let sims = sims.filter(|n| *n >= 1).ok_or_else(bad)?;
        match kind {
            "mcts" => Ok(AgentSpec::Mcts { sims, c }),
            "ismcts" => Ok(AgentSpec::Ismcts { sims, c }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Random => f.write_str("random"),
            AgentSpec::Mcts { sims, c } => write!(f, "mcts:sims={sims},c={c}"),
            AgentSpec::Ismcts { sims, c } => write!(f, "ismcts:sims={sims},c={c}"),
        }
    }
}

impl AgentSpec {
    /// Rejects search agents that do not match the game's information kind.
    pub fn check_game(&self, spec: &GameSpec) -> Result<(), SolverError> {
        let reason = match (self, spec.info_kind) {
            (AgentSpec::Mcts { .. }, InfoKind::Imperfect) => {
                "mcts needs a perfect-information game; use ismcts"
            }
            (AgentSpec::Ismcts { .. }, InfoKind::Perfect) => {
                "ismcts needs an imperfect-information game; use mcts"
            }
            _ => return Ok(()),
        };
        Err(SolverError::Mismatch {
            agent: self.to_string(),
            game: spec.name.clone(),
            reason: reason.to_string(),
        })
    }

    fn search_config(&self, seed: u64) -> Option<SearchConfig> {
        match *self {
            AgentSpec::Random => None,
            AgentSpec::Mcts { sims, c } | AgentSpec::Ismcts { sims, c } => Some(SearchConfig {
                exploration: c,
                ..SearchConfig::new(sims, seed)
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub game: String,
    pub agents: [String; 2],
    pub seed: u64,
    pub games_requested: usize,
    pub games_played: usize,
    /// Outcomes from agent 0's point of view.
    pub wins: usize,
    pub draws: usize,
    pub losses: usize,
    /// Mean reward per agent.
    pub mean_rewards: [f64; 2],
    /// Games won by whoever sat in seat 0 and seat 1.
    pub seat_wins: [usize; 2],
    pub incomplete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Plays `n_games` between two agents, alternating seats: agent 0 sits in
/// seat 0 in even-numbered games. Chance moves are drawn uniformly among
/// the legal chance actions. A session failure stops the match and flags
/// the report incomplete.
pub fn play_match(
    factory: &dyn SessionFactory,
    spec: &GameSpec,
    agents: [AgentSpec; 2],
    n_games: usize,
    seed: u64,
) -> Result<MatchReport, SolverError> {
    for a in &agents {
        a.check_game(spec)?;
    }
    let mut report = MatchReport {
        game: spec.name.clone(),
        agents: [agents[0].to_string(), agents[1].to_string()],
        seed,
        games_requested: n_games,
        games_played: 0,
        wins: 0,
        draws: 0,
        losses: 0,
        mean_rewards: [0.0; 2],
        seat_wins: [0; 2],
        incomplete: false,
        error: None,
    };
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut totals = [0.0f64; 2];
    for g in 0..n_games {
        let game_seed = master.next_u64();
        let rewards = factory
            .open()
            .map_err(|e| e.to_string())
            .and_then(|mut session| {
                let r = play_game(session.as_mut(), spec, &agents, g % 2, game_seed);
                session.close();
                r.map_err(|e| e.to_string())
            });
        let rewards = match rewards {
            Ok(r) => r,
            Err(e) => {
                report.incomplete = true;
                report.error = Some(format!("game {g}: {e}"));
                break;
            }
        };
        // seat s holds agent (s + g) % 2
        let seat_of = |agent: usize| (agent + g) % 2;
        let r0 = rewards.get(seat_of(0)).copied().unwrap_or(0.0);
        let r1 = rewards.get(seat_of(1)).copied().unwrap_or(0.0);
        totals[0] += r0;
        totals[1] += r1;
        match r0.total_cmp(&r1) {
            std::cmp::Ordering::Greater => report.wins += 1,
            std::cmp::Ordering::Equal => report.draws += 1,
            std::cmp::Ordering::Less => report.losses += 1,
        }
        let (s0, s1) = (rewards.first().copied().unwrap_or(0.0), rewards.get(1).copied().unwrap_or(0.0));
        if s0 > s1 {
            report.seat_wins[0] += 1;
        } else if s1 > s0 {
            report.seat_wins[1] += 1;
        }
        report.games_played += 1;
    }
    if report.games_played > 0 {
        let n = report.games_played as f64;
        report.mean_rewards = [totals[0] / n, totals[1] / n];
    }
    Ok(report)
}

/// Plays one game; agent `i` sits in seat `(i + offset) % 2`.
fn play_game(
    session: &mut dyn Session,
    spec: &GameSpec,
    agents: &[AgentSpec; 2],
    offset: usize,
    seed: u64,
) -> Result<Vec<f64>, SolverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = session.initial_state()?.state;
    let mut steps: Vec<WalkStep> = Vec::new();
    for _ in 0..spec.max_walk_steps {
        let player = session.current_player(state)?;
        if is_terminal_player(player) {
            break;
        }
        let legal = session.legal_actions(state)?;
        if legal.is_empty() {
            return Err(SolverError::NoLegalActions);
        }
        let needs_history = spec.is_imperfect();
        let observations = if needs_history {
            session.observation_fingerprints(state)?
        } else {
            Vec::new()
        };
        let action = if spec.is_chance_node(player, &legal) {
            legal.choose(&mut rng).expect("non-empty").clone()
        } else {
            let seat = usize::try_from(player).map_err(|_| SolverError::NotADecision)?;
            let agent = agents[(seat + 2 - offset) % 2];
            match agent.search_config(rng.next_u64()) {
                None => legal.choose(&mut rng).expect("non-empty").clone(),
                Some(cfg) => match agent {
                    AgentSpec::Mcts { .. } => mcts_choose(session, spec, state, &cfg)?,
                    _ => {
                        let walk = WalkRecord {
                            steps: steps.clone(),
                            final_state: state,
                            final_observations: observations.clone(),
                        };
                        ismcts_choose(session, spec, &walk, player, &cfg)?
                    }
                },
            }
        };
        let next = session.apply_action(state, &action)?.new_state;
        steps.push(WalkStep {
            state,
            player,
            action,
            observations,
        });
        state = next;
    }
    Ok(session.rewards(state)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agent_grammar() {
        assert_eq!("random".parse::<AgentSpec>().unwrap(), AgentSpec::Random);
        assert_eq!(
            "mcts:sims=2000".parse::<AgentSpec>().unwrap(),
            AgentSpec::Mcts { sims: 2000, c: std::f64::consts::SQRT_2 }
        );
        assert_eq!(
            "mcts:sims=10,c=0.5".parse::<AgentSpec>().unwrap(),
            AgentSpec::Mcts { sims: 10, c: 0.5 }
        );
        assert!(matches!("ismcts:sims=1000".parse::<AgentSpec>(), Ok(AgentSpec::Ismcts { sims: 1000, .. })));
        for bad in ["", "mcts", "mcts:sims=0", "mcts:n=3", "random:sims=1", "alphazero:sims=1", "mcts:sims=5,c=-1"] {
            assert!(bad.parse::<AgentSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["random", "mcts:sims=7,c=0.25", "ismcts:sims=3,c=1"] {
            let a: AgentSpec = s.parse().unwrap();
            assert_eq!(a.to_string().parse::<AgentSpec>().unwrap(), a);
        }
    }

    #[test]
    fn ties_break_to_first_action() {
        let a = |s: &str| ActionId::new(s).unwrap();
        let r = SearchResult::from_visits(vec![(a("x"), 3), (a("y"), 5), (a("z"), 5)]);
        assert_eq!(r.action, "y");
        assert!((r.visit_share("y") - 5.0 / 13.0).abs() < 1e-12);
    }
}
