//! Machine-readable verification reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::candidate::Candidate;
use crate::model::GameSpec;
use crate::reward::{Evaluation, RewardBreakdown};
use crate::tiers::{StubCheck, TierReport};

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const HARNESS_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Echo of the knobs a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Where the scenarios came from: a path or `builtin:<game>`.
    pub scenarios: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuzz_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationReport {
    pub format_version: u32,
    pub harness_version: String,
    pub game: String,
    pub candidate: Candidate,
    pub config: RunConfig,
    pub load_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_error: Option<String>,
    /// Ungated per-tier results; empty for reward-only runs.
    #[serde(default)]
    pub tiers: Vec<TierReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stub: Option<StubCheck>,
    /// Unweighted mean of the tier scores; absent for reward-only runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    pub reward: RewardBreakdown,
    /// Wall-clock milliseconds by tier name, plus `total`.
    pub timings_ms: BTreeMap<String, u64>,
}

impl VerificationReport {
    pub fn from_evaluation(
        spec: &GameSpec,
        candidate: Candidate,
        config: RunConfig,
        eval: Evaluation,
        total_ms: u64,
    ) -> Self {
        let reward = eval.gated_reward(spec);
        let mut timings_ms: BTreeMap<String, u64> = eval
            .timings_ms
            .iter()
            .map(|(t, ms)| (t.name().to_string(), *ms))
            .collect();
        timings_ms.insert("total".to_string(), total_ms);
        VerificationReport {
            format_version: REPORT_FORMAT_VERSION,
            harness_version: HARNESS_VERSION.to_string(),
            game: spec.name.clone(),
            candidate,
            config,
            load_ok: eval.load_ok,
            load_error: eval.load_error,
            tiers: eval.tiers,
            stub: eval.stub,
            mean: Some(eval.mean),
            reward,
            timings_ms,
        }
    }

    pub fn from_reward(
        spec: &GameSpec,
        candidate: Candidate,
        config: RunConfig,
        reward: RewardBreakdown,
        total_ms: u64,
    ) -> Self {
        VerificationReport {
            format_version: REPORT_FORMAT_VERSION,
            harness_version: HARNESS_VERSION.to_string(),
            game: spec.name.clone(),
            candidate,
            config,
            load_ok: reward.load_ok,
            load_error: reward.load_error.clone(),
            tiers: Vec::new(),
            stub: None,
            mean: None,
            reward,
            timings_ms: BTreeMap::from([("total".to_string(), total_ms)]),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// The report with every timing zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for v in r.timings_ms.values_mut() {
            *v = 0;
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::make_game;
    use crate::reward::{evaluate, EvalConfig};
    use crate::tiers::scenarios::builtin_scenario_file;

    fn kuhn_report() -> VerificationReport {
        let g = make_game("kuhn_poker", &Default::default(), Some(3)).unwrap();
        let cfg = EvalConfig { fuzz_n: 10, info_n: 10, seed: 3 };
        let scen = builtin_scenario_file("kuhn_poker").unwrap();
        let eval = evaluate(g.factory().as_ref(), g.spec(), &scen, &cfg).unwrap();
        VerificationReport::from_evaluation(
            g.spec(),
            Candidate::Builtin { name: "kuhn_poker".into() },
            RunConfig {
                seed: 3,
                scenarios: "builtin:kuhn_poker".into(),
                fuzz_n: Some(10),
                info_n: Some(10),
                n: None,
                timeout_seconds: None,
            },
            eval,
            12,
        )
    }

    #[test]
    fn round_trips() {
        let r = kuhn_report();
        assert_eq!(r.mean, Some(1.0));
        assert_eq!(r.reward.reward, 1.0);
        assert_eq!(VerificationReport::parse(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn timings_are_the_only_volatile_part() {
        let mut a = kuhn_report();
        a.timings_ms.insert("static".into(), 999);
        let b = kuhn_report();
        assert_ne!(a, b);
        assert_eq!(a.without_timings(), b.without_timings());
    }
}
