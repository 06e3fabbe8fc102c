//! Leduc poker: six cards ({J, Q, K} × 2), ante 1, two betting rounds.
//!
//! Chance deals player 0's private card, then player 1's, then (after the
//! first round) the public card, as rank-only `deal:<rank>` actions. Each
//! round allows at most one raise; the raise size is 2 in the first round
//! and 4 in the second. `Call` with nothing outstanding is a check, and
//! `Fold` is always available. Player 0 acts first in both rounds.
//!
//! Showdown: a private card pairing the public card wins; otherwise the
//! higher private rank wins; equal ranks split the pot.

use serde::Serialize;
use serde_json::{json, Value};

use super::{rank_value, Rules};
use crate::inprocess::Fault;
use crate::model::{GameSpec, InfoKind, PlayerId, CHANCE_PLAYER, TERMINAL_PLAYER};

pub const RANKS: [&str; 3] = ["J", "Q", "K"];
pub const RAISE_SIZES: [f64; 2] = [2.0, 4.0];
pub const ANTE: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct LeducPoker {
    spec: GameSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LeducState {
    pub private: Vec<String>,
    pub public: Option<String>,
    /// Betting actions of each round started so far.
    pub rounds: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Deal,
    Bet { round: usize, player: usize },
    Over,
}

impl Default for LeducPoker {
    fn default() -> Self {
        Self::new()
    }
}

fn round_closed(actions: &[String]) -> bool {
    actions.len() >= 2 && actions.last().map(String::as_str) == Some("Call")
}

impl LeducPoker {
    pub fn new() -> Self {
        let mut spec = GameSpec::new("leduc_poker", 2, InfoKind::Imperfect).expect("valid spec");
        spec.max_walk_steps = 200;
        LeducPoker { spec }
    }

    fn folded(s: &LeducState) -> Option<usize> {
        s.rounds
            .last()
            .and_then(|r| r.iter().position(|a| a == "Fold"))
            .map(|i| i % 2)
    }

    fn phase(s: &LeducState) -> Phase {
        if s.private.len() < 2 {
            return Phase::Deal;
        }
        if Self::folded(s).is_some() {
            return Phase::Over;
        }
        let round = s.rounds.len() - 1;
        let acts = &s.rounds[round];
        if round_closed(acts) {
            if round == 0 {
                return Phase::Deal;
            }
            return Phase::Over;
        }
        Phase::Bet {
            round,
            player: acts.len() % 2,
        }
    }

    /// Chips each player has committed, antes included.
    pub fn contributions(s: &LeducState) -> [f64; 2] {
        let mut c = [ANTE, ANTE];
        for (round, acts) in s.rounds.iter().enumerate() {
            for (i, a) in acts.iter().enumerate() {
                let p = i % 2;
                match a.as_str() {
                    "Call" => c[p] = c[1 - p].max(c[p]),
                    "Raise" => c[p] = c[1 - p] + RAISE_SIZES[round],
                    _ => {}
                }
            }
        }
        c
    }

    fn remaining(s: &LeducState) -> Vec<(&'static str, usize)> {
        RANKS
            .iter()
            .map(|r| {
                let used = s.private.iter().filter(|c| c == r).count()
                    + usize::from(s.public.as_deref() == Some(*r));
                (*r, 2 - used)
            })
            .filter(|(_, n)| *n > 0)
            .collect()
    }

    fn hand_strength(private: &str, public: &str) -> (u8, u8) {
        (u8::from(private == public), rank_value(private))
    }
}

impl Rules for LeducPoker {
    type State = LeducState;

    fn spec(&self) -> &GameSpec {
        &self.spec
    }

    fn initial(&self) -> LeducState {
        LeducState {
            private: Vec::new(),
            public: None,
            rounds: Vec::new(),
        }
    }

    fn current_player(&self, s: &LeducState) -> PlayerId {
        match Self::phase(s) {
            Phase::Deal => CHANCE_PLAYER,
            Phase::Bet { player, .. } => player as PlayerId,
            Phase::Over => TERMINAL_PLAYER,
        }
    }

    fn legal_actions(&self, s: &LeducState) -> Vec<String> {
        match Self::phase(s) {
            Phase::Deal => Self::remaining(s)
                .into_iter()
                .map(|(r, _)| format!("deal:{r}"))
                .collect(),
            Phase::Bet { round, .. } => {
                let mut acts = vec!["Fold".to_string(), "Call".to_string()];
                if !s.rounds[round].iter().any(|a| a == "Raise") {
                    acts.push("Raise".to_string());
                }
                acts
            }
            Phase::Over => Vec::new(),
        }
    }

    fn apply(&self, s: &LeducState, action: &str) -> Result<LeducState, Fault> {
        if !self.legal_actions(s).iter().any(|a| a == action) {
            return Err(Fault::new("ValueError", format!("illegal action {action:?}")));
        }
        let mut next = s.clone();
        match action.strip_prefix("deal:") {
            Some(rank) if next.private.len() < 2 => {
                next.private.push(rank.to_string());
                if next.private.len() == 2 {
                    next.rounds.push(Vec::new());
                }
            }
            Some(rank) => {
                next.public = Some(rank.to_string());
                next.rounds.push(Vec::new());
            }
            None => next
                .rounds
                .last_mut()
                .expect("betting round open")
                .push(action.to_string()),
        }
        Ok(next)
    }

    fn rewards(&self, s: &LeducState) -> Vec<f64> {
        if Self::phase(s) != Phase::Over {
            return vec![0.0, 0.0];
        }
        let contrib = Self::contributions(s);
        let winner = match Self::folded(s) {
            Some(folder) => Some(1 - folder),
            None => {
                let public = s.public.as_deref().unwrap_or_default();
                let h0 = Self::hand_strength(&s.private[0], public);
                let h1 = Self::hand_strength(&s.private[1], public);
                match h0.cmp(&h1) {
                    std::cmp::Ordering::Greater => Some(0),
                    std::cmp::Ordering::Less => Some(1),
                    std::cmp::Ordering::Equal => None,
                }
            }
        };
        match winner {
            Some(w) => {
                let mut r = vec![0.0, 0.0];
                r[w] = contrib[1 - w];
                r[1 - w] = -contrib[1 - w];
                r
            }
            None => vec![0.0, 0.0],
        }
    }

    fn observation(&self, s: &LeducState, player: usize) -> Value {
        json!({
            "player": player,
            "private_card": s.private.get(player),
            "public_card": s.public,
            "betting": s.rounds,
            "contributions": Self::contributions(s),
        })
    }

    fn chance_outcomes(&self, s: &LeducState) -> Vec<(String, f64)> {
        if Self::phase(s) != Phase::Deal {
            return Vec::new();
        }
        let remaining = Self::remaining(s);
        let total: usize = remaining.iter().map(|(_, n)| n).sum();
        remaining
            .into_iter()
            .map(|(r, n)| (format!("deal:{r}"), n as f64 / total as f64))
            .collect()
    }
}
