//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cwm_core::games::{game_spec, make_game, GameParams, REGISTRY};
use cwm_core::model::InfoKind;
use cwm_core::mutants::{mutant_factory, MutantKind, ECHO_RESAMPLER_SOURCE, STUB_RESAMPLER_SOURCE};
use cwm_core::reward::{compute_reward, evaluate, gated_scores, weighted_sum, EvalConfig, RewardConfig};
use cwm_core::solver::{play_match, AgentSpec};
use cwm_core::tiers::scenarios::builtin_scenario_file;
use cwm_core::tiers::{is_stub, run_dynamics, run_scenarios, FuzzConfig, Tier};
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg.into()) }
}

fn reference_saturation() -> Outcome {
    let start = Instant::now();
    for game in REGISTRY {
        let g = make_game(game, &GameParams::new(), Some(42)).unwrap();
        let scen = builtin_scenario_file(game).unwrap();
        let cfg = EvalConfig { fuzz_n: 100, info_n: 100, seed: 42 };
        let e = evaluate(g.factory().as_ref(), g.spec(), &scen, &cfg).map_err(|e| e.to_string())?;
        let expected = if g.spec().is_imperfect() { 4 } else { 3 };
        ensure(e.tiers.len() == expected, format!("{game}: {} tiers", e.tiers.len()))?;
        for t in &e.tiers {
            ensure(
                t.score == 1.0 && t.passed_count() == t.checks.len(),
                format!("{game} {}: {}/{} {:?}", t.tier, t.passed_count(), t.checks.len(), t.diagnostics),
            )?;
        }
        let static_checks = e.tiers.iter().find(|t| t.tier == Tier::Static).unwrap().checks.len();
        ensure(static_checks == 7, format!("{game}: {static_checks} static checks"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("{} games score 1.0 on every tier in {secs:.1}s", REGISTRY.len()))
}

fn table_fidelity() -> Outcome {
    let mut counts = Vec::new();
    for (game, n) in [("leduc_poker", 6), ("generalized_tic_tac_toe", 7)] {
        let scen = builtin_scenario_file(game).unwrap();
        ensure(scen.scenarios.len() == n, format!("{game}: {} scenarios", scen.scenarios.len()))?;
        let g = make_game(game, &GameParams::new(), None).unwrap();
        let r = run_scenarios(g.factory().as_ref(), &scen);
        ensure(r.passed_count() == n, format!("{game}: {:?}", r.diagnostics))?;
        counts.push(format!("{game} {n}/{n}"));
    }
    Ok(counts.join(", "))
}

fn mutant_matrix() -> Outcome {
    let spec = game_spec("tic_tac_toe").unwrap();
    let cfg = FuzzConfig::evaluation(42);
    let mut lines = Vec::new();
    for (kind, target) in [
        (MutantKind::Mutating, "immutable"),
        (MutantKind::Crashing, "no_crash"),
        (MutantKind::Nondeterministic, "deterministic"),
        (MutantKind::TerminalActions, "terminal_empty"),
    ] {
        let r = run_dynamics(mutant_factory(kind, 42).as_ref(), &cfg, &spec);
        let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        ensure(failed == [target], format!("{}: failed {failed:?}, wanted [{target}]", kind.name()))?;
        lines.push(format!("{}->{target}", kind.name()));
    }
    Ok(lines.join(", "))
}

fn reward_arithmetic() -> Outcome {
    let r = |kind, scores| weighted_sum(kind, &gated_scores(kind, true, scores, false).0);
    let a = r(InfoKind::Imperfect, [1.0, 0.4, 1.0, 1.0]);
    ensure(a == 0.25, format!("(a) {a}"))?;
    let b = r(InfoKind::Perfect, [1.0, 1.0, 1.0, 0.0]);
    ensure(b == 1.0, format!("(b) {b}"))?;
    let c = weighted_sum(InfoKind::Imperfect, &gated_scores(InfoKind::Imperfect, true, [1.0; 4], true).0);
    ensure(c == 0.7, format!("(c) {c}"))?;

    // the same figures end to end
    let ttt = make_game("tic_tac_toe", &GameParams::new(), None).unwrap();
    let cfg = RewardConfig::default();
    let b2 = compute_reward(
        ttt.factory().into(),
        ttt.spec(),
        &builtin_scenario_file("tic_tac_toe").unwrap(),
        &cfg,
    )
    .unwrap()
    .reward;
    ensure(b2 == 1.0, format!("(b) end to end {b2}"))?;
    let stub = compute_reward(
        mutant_factory(MutantKind::StubResampler, 0).into(),
        &game_spec("kuhn_poker").unwrap(),
        &builtin_scenario_file("kuhn_poker").unwrap(),
        &cfg,
    )
    .unwrap();
    ensure(stub.stub && stub.reward == 0.7, format!("(c) end to end {stub:?}"))?;
    Ok(format!("(a) {a:.4} (b) {b:.4} (c) {c:.4}"))
}

fn timeout_containment() -> Outcome {
    let start = Instant::now();
    let o = common::cwm(&["reward", "--game", "tic_tac_toe", "--candidate", "builtin:mutant_hanging", "--timeout", "60"]);
    let secs = start.elapsed().as_secs_f64();
    ensure(o.status.success(), format!("exit {:?}", o.status.code()))?;
    let last = common::last_line(&o);
    ensure(last == "0.0", format!("printed {last:?}"))?;
    ensure(secs <= 65.0, format!("took {secs:.1}s"))?;
    Ok(format!("reward {last} after {secs:.1}s"))
}

fn stub_detection() -> Outcome {
    ensure(is_stub(STUB_RESAMPLER_SOURCE), "empty-list resampler not flagged")?;
    ensure(is_stub(ECHO_RESAMPLER_SOURCE), "echo resampler not flagged")?;
    let g = make_game("kuhn_poker", &GameParams::new(), None).unwrap();
    let mut s = g.factory().open().unwrap();
    let source = s.info().unwrap().resample_source.ok_or("no reference resampler source")?;
    ensure(!is_stub(&source), "reference resampler flagged")?;
    Ok("both trivial bodies flagged, reference not flagged".to_string())
}

fn solver_compatibility() -> Outcome {
    let ttt = make_game("tic_tac_toe", &GameParams::new(), None).unwrap();
    let start = Instant::now();
    let mcts = AgentSpec::Mcts { sims: 2000, c: std::f64::consts::SQRT_2 };
    let m = play_match(ttt.factory().as_ref(), ttt.spec(), [mcts, AgentSpec::Random], 100, 7)
        .map_err(|e| e.to_string())?;
    let mcts_secs = start.elapsed().as_secs_f64();
    ensure(!m.incomplete && m.games_played == 100, format!("mcts match incomplete: {:?}", m.error))?;
    ensure(m.losses == 0, format!("mcts lost {} games", m.losses))?;
    ensure(mcts_secs < 120.0, format!("mcts took {mcts_secs:.1}s"))?;

    let kuhn = make_game("kuhn_poker", &GameParams::new(), Some(7)).unwrap();
    let ismcts = AgentSpec::Ismcts { sims: 1000, c: std::f64::consts::SQRT_2 };
    let i = play_match(kuhn.factory().as_ref(), kuhn.spec(), [ismcts, AgentSpec::Random], 2000, 7)
        .map_err(|e| e.to_string())?;
    ensure(!i.incomplete, format!("ismcts match incomplete: {:?}", i.error))?;
    ensure(i.mean_rewards[0] >= 0.05, format!("ismcts mean {:+.4}", i.mean_rewards[0]))?;

    let r = play_match(kuhn.factory().as_ref(), kuhn.spec(), [AgentSpec::Random, AgentSpec::Random], 20_000, 7)
        .map_err(|e| e.to_string())?;
    ensure(r.mean_rewards[0].abs() <= 0.03, format!("random mean {:+.4}", r.mean_rewards[0]))?;
    Ok(format!(
        "mcts W/D/L {}/{}/{} in {mcts_secs:.1}s; ismcts mean {:+.4}; random baseline {:+.4}",
        m.wins, m.draws, m.losses, i.mean_rewards[0], r.mean_rewards[0]
    ))
}

fn brute_force_oracles() -> Outcome {
    let kuhn = make_game("kuhn_poker", &GameParams::new(), None).unwrap();
    let n = kuhn.enumerate_terminals(10_000).map_err(|e| e.to_string())?.len();
    ensure(n == 3 * 2 * 5, format!("kuhn has {n} terminal histories"))?;
    let mut total = 0;
    let small_board = GameParams::from([
        ("board_rows".to_string(), 2),
        ("board_cols".to_string(), 4),
        ("line_length".to_string(), 3),
    ]);
    for (game, params) in [
        ("tic_tac_toe", GameParams::new()),
        ("kuhn_poker", GameParams::new()),
        ("leduc_poker", GameParams::new()),
        ("generalized_tic_tac_toe", small_board),
    ] {
        let g = make_game(game, &params, None).unwrap();
        let terminals = g.enumerate_terminals(50_000_000).map_err(|e| format!("{game}: {e}"))?;
        for t in &terminals {
            ensure(t.rewards.iter().sum::<f64>() == 0.0, format!("{game}: {t:?} is not zero-sum"))?;
        }
        total += terminals.len();
    }
    Ok(format!("kuhn {n} terminals; {total} enumerated terminals all zero-sum"))
}

fn harness_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<(Vec<u8>, Value), String> {
        let out = dir.path().join(name);
        let o = common::cwm(&[
            "verify", "--game", "leduc_poker", "--candidate", "builtin:leduc_poker", "--seed", "42",
            "--json", out.to_str().unwrap(),
        ]);
        ensure(o.status.success(), format!("verify exit {:?}", o.status.code()))?;
        let bytes = std::fs::read(&out).map_err(|e| e.to_string())?;
        let mut v: Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
        common::check_schema(&v);
        v["timings_ms"] = Value::Null;
        Ok((bytes, v))
    };
    let (a_bytes, a) = run("a.json")?;
    let (b_bytes, b) = run("b.json")?;
    let strip = |v: &Value| serde_json::to_vec_pretty(v).unwrap();
    ensure(strip(&a) == strip(&b), "reports differ outside timings")?;
    Ok(format!("{} and {} byte reports identical modulo timings", a_bytes.len(), b_bytes.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("reference saturation", reference_saturation),
        ("scenario table fidelity", table_fidelity),
        ("mutant detection matrix", mutant_matrix),
        ("reward arithmetic", reward_arithmetic),
        ("timeout containment", timeout_containment),
        ("stub detection", stub_detection),
        ("solver compatibility", solver_compatibility),
        ("brute-force oracles", brute_force_oracles),
        ("harness determinism", harness_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".to_string()))
        });
        let took = Duration::from_millis(start.elapsed().as_millis() as u64);
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{took:?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{took:?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
