//! The four verification tiers and their common report type.

pub mod dynamics;
pub mod information;
pub mod scenarios;
pub mod static_checks;
pub mod stub;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use dynamics::{run_dynamics, FuzzConfig};
pub use information::{run_information, ProbeConfig};
pub use scenarios::{parse_scenarios, run_scenarios, Scenario, ScenarioChecks, ScenarioError, ScenarioFile};
pub use static_checks::{run_static, static_gate};
pub use stub::{detect_stub, is_stub, StubCheck};

/// Diagnostics kept per report; later messages are summarized.
pub const MAX_DIAGNOSTICS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Static,
    Dynamics,
    Scenarios,
    Information,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::Static => "static",
            Tier::Dynamics => "dynamics",
            Tier::Scenarios => "scenarios",
            Tier::Information => "information",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierReport {
    pub tier: Tier,
    pub checks: Vec<Check>,
    pub score: f64,
    pub diagnostics: Vec<String>,
}

impl TierReport {
    /// Builds a report whose score is the fraction of passed checks.
    pub fn new(tier: Tier, checks: Vec<(&str, bool)>, diagnostics: Vec<String>) -> Self {
        let checks: Vec<Check> = checks
            .into_iter()
            .map(|(name, passed)| Check {
                name: name.to_string(),
                passed,
            })
            .collect();
        let passed = checks.iter().filter(|c| c.passed).count();
        let score = if checks.is_empty() {
            0.0
        } else {
            passed as f64 / checks.len() as f64
        };
        TierReport {
            tier,
            checks,
            score,
            diagnostics,
        }
    }

    pub fn passed(&self, name: &str) -> Option<bool> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.passed)
    }

    pub fn check_vector(&self) -> Vec<bool> {
        self.checks.iter().map(|c| c.passed).collect()
    }

    pub fn passed_count(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }
}

/// Bounded, order-preserving diagnostic log.
#[derive(Debug, Default)]
pub(crate) struct Diagnostics {
    kept: Vec<String>,
    dropped: usize,
}

impl Diagnostics {
    pub fn push(&mut self, message: impl Into<String>) {
        if self.kept.len() < MAX_DIAGNOSTICS {
            self.kept.push(message.into());
        } else {
            self.dropped += 1;
        }
    }

    pub fn finish(mut self) -> Vec<String> {
        if self.dropped > 0 {
            self.kept.push(format!("... {} more diagnostics omitted", self.dropped));
        }
        self.kept
    }
}
