//! Kuhn poker: three cards (J < Q < K), ante 1, one bet of 1.
//!
//! Two chance nodes deal player 0's card then player 1's (`deal:J` ...).
//! Betting uses `Check`/`Bet` when no bet is outstanding and `Fold`/`Call`
//! when facing one.

use serde::Serialize;
use serde_json::{json, Value};

use super::{rank_value, Rules};
use crate::inprocess::Fault;
use crate::model::{GameSpec, InfoKind, PlayerId, CHANCE_PLAYER, TERMINAL_PLAYER};

pub const RANKS: [&str; 3] = ["J", "Q", "K"];

#[derive(Debug, Clone)]
pub struct KuhnPoker {
    spec: GameSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct KuhnState {
    pub cards: Vec<String>,
    pub betting: Vec<String>,
}

impl Default for KuhnPoker {
    fn default() -> Self {
        Self::new()
    }
}

impl KuhnPoker {
    pub fn new() -> Self {
        let mut spec = GameSpec::new("kuhn_poker", 2, InfoKind::Imperfect).expect("valid spec");
        spec.max_walk_steps = 200;
        KuhnPoker { spec }
    }

    fn is_terminal(&self, s: &KuhnState) -> bool {
        let b: Vec<&str> = s.betting.iter().map(String::as_str).collect();
        matches!(
            b.as_slice(),
            ["Check", "Check"] | ["Bet", _] | ["Check", "Bet", _]
        )
    }

    fn facing_bet(s: &KuhnState) -> bool {
        s.betting.last().map(String::as_str) == Some("Bet")
    }

    /// Chips each player has put in.
    pub fn contributions(s: &KuhnState) -> [f64; 2] {
        let mut c = [1.0, 1.0];
        for (i, a) in s.betting.iter().enumerate() {
            if a == "Bet" || a == "Call" {
                c[i % 2] += 1.0;
            }
        }
        c
    }
}

impl Rules for KuhnPoker {
    type State = KuhnState;

    fn spec(&self) -> &GameSpec {
        &self.spec
    }

    fn initial(&self) -> KuhnState {
        KuhnState {
            cards: Vec::new(),
            betting: Vec::new(),
        }
    }

    fn current_player(&self, s: &KuhnState) -> PlayerId {
        if s.cards.len() < 2 {
            CHANCE_PLAYER
        } else if self.is_terminal(s) {
            TERMINAL_PLAYER
        } else {
            (s.betting.len() % 2) as PlayerId
        }
    }

    fn legal_actions(&self, s: &KuhnState) -> Vec<String> {
        if s.cards.len() < 2 {
            return RANKS
                .iter()
                .filter(|r| !s.cards.iter().any(|c| c == *r))
                .map(|r| format!("deal:{r}"))
                .collect();
        }
        if self.is_terminal(s) {
            return Vec::new();
        }
        let moves: [&str; 2] = if Self::facing_bet(s) {
            ["Fold", "Call"]
        } else {
            ["Check", "Bet"]
        };
        moves.iter().map(|m| m.to_string()).collect()
    }

    fn apply(&self, s: &KuhnState, action: &str) -> Result<KuhnState, Fault> {
        if !self.legal_actions(s).iter().any(|a| a == action) {
            return Err(Fault::new("ValueError", format!("illegal action {action:?}")));
        }
        let mut next = s.clone();
        if let Some(rank) = action.strip_prefix("deal:") {
            next.cards.push(rank.to_string());
        } else {
            next.betting.push(action.to_string());
        }
        Ok(next)
    }

    fn rewards(&self, s: &KuhnState) -> Vec<f64> {
        if !self.is_terminal(s) {
            return vec![0.0, 0.0];
        }
        let contrib = Self::contributions(s);
        let winner = match s.betting.iter().position(|a| a == "Fold") {
            Some(i) => 1 - i % 2,
            None => {
                if rank_value(&s.cards[0]) > rank_value(&s.cards[1]) {
                    0
                } else {
                    1
                }
            }
        };
        let loser = 1 - winner;
        let mut r = vec![0.0, 0.0];
        r[winner] = contrib[loser];
        r[loser] = -contrib[loser];
        r
    }

    fn observation(&self, s: &KuhnState, player: usize) -> Value {
        json!({
            "player": player,
            "card": s.cards.get(player),
            "betting": s.betting,
            "contributions": Self::contributions(s),
        })
    }

    fn chance_outcomes(&self, s: &KuhnState) -> Vec<(String, f64)> {
        if s.cards.len() >= 2 {
            return Vec::new();
        }
        let deals = self.legal_actions(s);
        let p = 1.0 / deals.len() as f64;
        deals.into_iter().map(|d| (d, p)).collect()
    }
}
