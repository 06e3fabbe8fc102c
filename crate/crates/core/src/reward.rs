//! Tier combination: the unweighted evaluation mean and the gated,
//! weighted training reward.
//!
//! Weights are kept in hundredths so that the weighted sum is computed as
//! `(15 s1 + 25 s2 + 30 s3 + 30 s4) / D` with `D = 100` for imperfect and
//! `D = 70` for perfect information games.

use std::collections::BTreeMap;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::model::{GameSpec, InfoKind};
use crate::session::SessionFactory;
use crate::tiers::{
    detect_stub, run_dynamics, run_information, run_scenarios, run_static, static_gate,
    FuzzConfig, ProbeConfig, ScenarioFile, StubCheck, Tier, TierReport,
};

/// Tier weights in hundredths.
pub const WEIGHT_PERCENT: [(Tier, u32); 4] = [
    (Tier::Static, 15),
    (Tier::Dynamics, 25),
    (Tier::Scenarios, 30),
    (Tier::Information, 30),
];

/// Minimum dynamics score before scenarios and information are scored.
pub const DYNAMICS_GATE: f64 = 0.5;

fn applicable(kind: InfoKind) -> impl Iterator<Item = (Tier, u32)> {
    WEIGHT_PERCENT
        .into_iter()
        .filter(move |(t, _)| kind == InfoKind::Imperfect || *t != Tier::Information)
}

fn denominator(kind: InfoKind) -> f64 {
    applicable(kind).map(|(_, w)| w).sum::<u32>() as f64
}

pub fn effective_weights(spec: &GameSpec) -> BTreeMap<Tier, f64> {
    let d = denominator(spec.info_kind);
    applicable(spec.info_kind)
        .map(|(t, w)| (t, w as f64 / d))
        .collect()
}

/// Weighted sum over the tiers present in `scores`.
pub fn weighted_sum(kind: InfoKind, scores: &BTreeMap<Tier, f64>) -> f64 {
    let numerator: f64 = applicable(kind)
        .filter_map(|(t, w)| scores.get(&t).map(|s| w as f64 * s))
        .sum();
    numerator / denominator(kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gates {
    pub static_continue: bool,
    pub dynamics_gate: bool,
}

/// The scores that count towards the reward after gating, given the raw
/// score of every tier and the stub verdict.
pub fn gated_scores(
    kind: InfoKind,
    static_continue: bool,
    scores: [f64; 4],
    stub: bool,
) -> (BTreeMap<Tier, f64>, Gates) {
    let [s_static, s_dyn, s_scen, s_info] = scores;
    let mut used = BTreeMap::from([(Tier::Static, s_static)]);
    let mut gates = Gates {
        static_continue,
        dynamics_gate: false,
    };
    if !static_continue {
        return (used, gates);
    }
    used.insert(Tier::Dynamics, s_dyn);
    gates.dynamics_gate = s_dyn >= DYNAMICS_GATE;
    if !gates.dynamics_gate {
        return (used, gates);
    }
    used.insert(Tier::Scenarios, s_scen);
    if kind == InfoKind::Imperfect && !stub {
        used.insert(Tier::Information, s_info);
    }
    (used, gates)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub tier_scores: BTreeMap<Tier, f64>,
    pub weights_used: BTreeMap<Tier, f64>,
    pub gates: Gates,
    pub stub: bool,
    pub timed_out: bool,
    pub load_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    pub reward: f64,
}

impl RewardBreakdown {
    /// Zero reward for a candidate that could not be loaded.
    pub fn load_failure(message: impl Into<String>) -> Self {
        RewardBreakdown {
            load_error: Some(message.into()),
            ..Self::empty()
        }
    }

    fn empty() -> Self {
        RewardBreakdown {
            tier_scores: BTreeMap::new(),
            weights_used: BTreeMap::new(),
            gates: Gates {
                static_continue: false,
                dynamics_gate: false,
            },
            stub: false,
            timed_out: false,
            load_ok: false,
            load_error: None,
            diagnostics: Vec::new(),
            reward: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub n: usize,
    pub timeout: Duration,
    pub seed: u64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            n: 20,
            timeout: Duration::from_secs(60),
            seed: 0,
        }
    }
}

/// Gated reward, bounded by `cfg.timeout` of wall-clock time. On expiry
/// every session of the factory is aborted and the reward is 0.
pub fn compute_reward(
    factory: Arc<dyn SessionFactory>,
    spec: &GameSpec,
    scenarios: &ScenarioFile,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown, crate::Error> {
    let (tx, rx) = mpsc::channel();
    let worker = {
        let factory = Arc::clone(&factory);
        let spec = spec.clone();
        let scenarios = scenarios.clone();
        let cfg = *cfg;
        std::thread::Builder::new()
            .name("cwm-reward".to_string())
            .spawn(move || {
                let _ = tx.send(reward_pipeline(factory.as_ref(), &spec, &scenarios, &cfg));
            })?
    };
    match rx.recv_timeout(cfg.timeout) {
        Ok(result) => {
            let _ = worker.join();
            result
        }
        Err(_) => {
            factory.abort();
            log::warn!(
                "reward computation for {} exceeded {:?}",
                factory.describe(),
                cfg.timeout
            );
            // An in-process candidate stuck in a call cannot be interrupted;
            // its thread is left behind.
            Ok(RewardBreakdown {
                timed_out: true,
                diagnostics: vec![format!("timed out after {:?}", cfg.timeout)],
                ..RewardBreakdown::empty()
            })
        }
    }
}

/// The ungated-by-time pipeline.
pub fn reward_pipeline(
    factory: &dyn SessionFactory,
    spec: &GameSpec,
    scenarios: &ScenarioFile,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown, crate::Error> {
    let mut out = RewardBreakdown::empty();
    let mut session = factory.open()?;
    let info = session.info();
    let info = match info {
        Ok(info) => info,
        Err(e) => {
            session.close();
            out.load_error = Some(e.to_string());
            return Ok(out);
        }
    };
    out.load_ok = info.load_ok;
    if !info.load_ok {
        session.close();
        out.load_error = info.load_error;
        return Ok(out);
    }
    let static_report = run_static(session.as_mut());
    session.close();
    let static_continue = static_gate(&static_report);
    let mut scores = [static_report.score, 0.0, 0.0, 0.0];
    out.diagnostics.extend(static_report.diagnostics);

    if static_continue {
        let fuzz = FuzzConfig {
            n_trajectories: cfg.n,
            max_walk_steps: spec.max_walk_steps,
            rng_seed: cfg.seed,
        };
        let dyn_report = run_dynamics(factory, &fuzz, spec);
        scores[1] = dyn_report.score;
        out.diagnostics.extend(dyn_report.diagnostics);
        if scores[1] >= DYNAMICS_GATE {
            let scen = run_scenarios(factory, scenarios);
            scores[2] = scen.score;
            out.diagnostics.extend(scen.diagnostics);
            if spec.is_imperfect() {
                let stub = detect_stub(info.resample_source.as_deref());
                out.stub = stub.stub;
                out.diagnostics.extend(stub.diagnostic);
                if !stub.stub {
                    let probe = ProbeConfig {
                        n_probes: cfg.n,
                        rng_seed: cfg.seed.wrapping_add(1),
                        max_walk_steps: spec.max_walk_steps,
                    };
                    let info_report = run_information(factory, &probe, spec);
                    scores[3] = info_report.score;
                    out.diagnostics.extend(info_report.diagnostics);
                }
            }
        }
    }

    let (used, gates) = gated_scores(spec.info_kind, static_continue, scores, out.stub);
    let weights = effective_weights(spec);
    out.weights_used = used.keys().map(|t| (*t, weights[t])).collect();
    out.reward = weighted_sum(spec.info_kind, &used);
    out.tier_scores = used;
    out.gates = gates;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub fuzz_n: usize,
    pub info_n: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            fuzz_n: 100,
            info_n: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub load_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_error: Option<String>,
    pub tiers: Vec<TierReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stub: Option<StubCheck>,
    pub mean: f64,
    pub timings_ms: BTreeMap<Tier, u64>,
}

/// Runs every applicable tier without gating and averages their scores.
pub fn evaluate(
    factory: &dyn SessionFactory,
    spec: &GameSpec,
    scenarios: &ScenarioFile,
    cfg: &EvalConfig,
) -> Result<Evaluation, crate::Error> {
    let mut timings = BTreeMap::new();
    let mut timed = |tier: Tier, f: &mut dyn FnMut() -> TierReport| {
        let start = Instant::now();
        let r = f();
        timings.insert(tier, start.elapsed().as_millis() as u64);
        r
    };

    let mut session = factory.open()?;
    let info = session.info();
    let (load_ok, load_error, source) = match &info {
        Ok(i) => (i.load_ok, i.load_error.clone(), i.resample_source.clone()),
        Err(e) => (false, Some(e.to_string()), None),
    };
    let mut tiers = vec![timed(Tier::Static, &mut || run_static(session.as_mut()))];
    session.close();
    drop(session);

    let fuzz = FuzzConfig {
        n_trajectories: cfg.fuzz_n,
        max_walk_steps: spec.max_walk_steps,
        rng_seed: cfg.seed,
    };
    tiers.push(timed(Tier::Dynamics, &mut || run_dynamics(factory, &fuzz, spec)));
    tiers.push(timed(Tier::Scenarios, &mut || run_scenarios(factory, scenarios)));
    let mut stub = None;
    if spec.is_imperfect() {
        stub = Some(detect_stub(source.as_deref()));
        let probe = ProbeConfig {
            n_probes: cfg.info_n,
            rng_seed: cfg.seed.wrapping_add(1),
            max_walk_steps: spec.max_walk_steps,
        };
        tiers.push(timed(Tier::Information, &mut || run_information(factory, &probe, spec)));
    }
    let mean = tiers.iter().map(|t| t.score).sum::<f64>() / tiers.len() as f64;
    Ok(Evaluation {
        load_ok,
        load_error,
        tiers,
        stub,
        mean,
        timings_ms: timings,
    })
}

impl Evaluation {
    /// The training reward implied by these tier results, with gating
    /// applied after the fact.
    pub fn gated_reward(&self, spec: &GameSpec) -> RewardBreakdown {
        let mut out = RewardBreakdown {
            load_ok: self.load_ok,
            load_error: self.load_error.clone(),
            ..RewardBreakdown::empty()
        };
        if !self.load_ok {
            return out;
        }
        let score = |t: Tier| self.tiers.iter().find(|r| r.tier == t);
        let static_continue = score(Tier::Static).is_some_and(static_gate);
        let scores = [Tier::Static, Tier::Dynamics, Tier::Scenarios, Tier::Information]
            .map(|t| score(t).map_or(0.0, |r| r.score));
        out.stub = self.stub.as_ref().is_some_and(|s| s.stub);
        let (used, gates) = gated_scores(spec.info_kind, static_continue, scores, out.stub);
        let weights = effective_weights(spec);
        out.weights_used = used.keys().map(|t| (*t, weights[t])).collect();
        out.reward = weighted_sum(spec.info_kind, &used);
        out.tier_scores = used;
        out.gates = gates;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: InfoKind) -> GameSpec {
        GameSpec::new("g", 2, kind).unwrap()
    }

    #[test]
    fn weights() {
        let w = effective_weights(&spec(InfoKind::Imperfect));
        assert_eq!(w.values().copied().collect::<Vec<_>>(), vec![0.15, 0.25, 0.3, 0.3]);
        let w = effective_weights(&spec(InfoKind::Perfect));
        assert_eq!(w.len(), 3);
        assert_eq!(w[&Tier::Static], 3.0 / 14.0);
        assert_eq!(w[&Tier::Dynamics], 5.0 / 14.0);
        assert_eq!(w[&Tier::Scenarios], 3.0 / 7.0);
    }

    fn reward(kind: InfoKind, cont: bool, scores: [f64; 4], stub: bool) -> f64 {
        weighted_sum(kind, &gated_scores(kind, cont, scores, stub).0)
    }

    #[test]
    fn gated_examples() {
        assert_eq!(reward(InfoKind::Perfect, true, [1.0, 1.0, 1.0, 0.0], false), 1.0);
        assert_eq!(reward(InfoKind::Imperfect, true, [1.0, 0.4, 1.0, 1.0], false), 0.25);
        assert_eq!(reward(InfoKind::Imperfect, true, [1.0, 0.75, 0.6, 0.5], false), 0.6675);
        assert_eq!(reward(InfoKind::Imperfect, true, [1.0, 1.0, 1.0, 1.0], true), 0.7);
        let capped = reward(InfoKind::Imperfect, false, [3.0 / 7.0, 1.0, 1.0, 1.0], false);
        assert!((capped - 0.15 * 3.0 / 7.0).abs() < 1e-15);
    }
}
