use std::collections::BTreeMap;

use proptest::prelude::*;
use serde_json::{json, Map, Value};

use cwm_core::fingerprint::{canonical_encoding, canonical_fingerprint};
use cwm_core::games::{make_game, GameParams, REGISTRY};
use cwm_core::model::InfoKind;
use cwm_core::protocol::{encode_frame, WireRequest};
use cwm_core::reward::{effective_weights, gated_scores, weighted_sum};
use cwm_core::tiers::scenarios::builtin_scenario_file;
use cwm_core::tiers::{
    is_stub, parse_scenarios, run_dynamics, run_information, run_scenarios, FuzzConfig, ProbeConfig,
    Tier,
};

fn json_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(|n| json!(n)),
        (-1e12f64..1e12).prop_map(|x| json!(x)),
        ".{0,12}".prop_map(Value::String),
    ];
    leaf.prop_recursive(4, 48, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..6).prop_map(Value::Array),
            prop::collection::vec((".{0,6}", inner), 0..6)
                .prop_map(|kv| Value::Object(kv.into_iter().collect())),
        ]
    })
}

/// Serializes objects with their keys in reverse order.
fn reversed_text(v: &Value) -> String {
    match v {
        Value::Object(m) => {
            let parts: Vec<String> = m
                .iter()
                .rev()
                .map(|(k, v)| format!("{}:{}", serde_json::to_string(k).unwrap(), reversed_text(v)))
                .collect();
            format!("{{{}}}", parts.join(","))
        }
        Value::Array(items) => {
            format!("[{}]", items.iter().map(reversed_text).collect::<Vec<_>>().join(","))
        }
        other => serde_json::to_string(other).unwrap(),
    }
}

proptest! {
    #[test]
    fn fingerprint_is_pure_and_ignores_key_order(v in json_value()) {
        let a = canonical_fingerprint(&v).unwrap();
        prop_assert_eq!(&a, &canonical_fingerprint(&v.clone()).unwrap());
        let reparsed: Value = serde_json::from_str(&reversed_text(&v)).unwrap();
        prop_assert_eq!(&a, &canonical_fingerprint(&reparsed).unwrap());
        prop_assert_eq!(a.as_str().len(), 64);
    }

    #[test]
    fn strings_encode_like_serde_json(s in any::<String>()) {
        prop_assert_eq!(
            canonical_encoding(&Value::String(s.clone())).unwrap(),
            serde_json::to_string(&s).unwrap()
        );
    }

    #[test]
    fn integral_floats_fingerprint_as_integers(n in -(1i64 << 52)..(1i64 << 52)) {
        prop_assert_eq!(
            canonical_fingerprint(&json!(n as f64)).unwrap(),
            canonical_fingerprint(&json!(n)).unwrap()
        );
    }

    #[test]
    fn distinct_lists_differ(a in prop::collection::vec(any::<i32>(), 0..6), b in prop::collection::vec(any::<i32>(), 0..6)) {
        prop_assume!(a != b);
        prop_assert_ne!(canonical_fingerprint(&json!(a)).unwrap(), canonical_fingerprint(&json!(b)).unwrap());
    }

    #[test]
    fn reward_is_bounded_and_monotone(
        scores in prop::array::uniform4(0.0f64..=1.0),
        bump in 0usize..4,
        delta in 0.0f64..=1.0,
        cont in any::<bool>(),
        stub in any::<bool>(),
        imperfect in any::<bool>(),
    ) {
        let kind = if imperfect { InfoKind::Imperfect } else { InfoKind::Perfect };
        let r = |s: [f64; 4], stub: bool| weighted_sum(kind, &gated_scores(kind, cont, s, stub).0);
        let base = r(scores, stub);
        prop_assert!((0.0..=1.0).contains(&base));
        let mut higher = scores;
        higher[bump] = (higher[bump] + delta).min(1.0);
        prop_assert!(r(higher, stub) >= base);
        prop_assert!(r(scores, true) <= r(scores, false));
        if !cont {
            let cap = if imperfect { 0.15 } else { 0.15 / 0.7 };
            prop_assert!(base <= cap + 1e-12);
        }
    }

    #[test]
    fn frames_are_single_lines(method in ".{0,20}", key in ".{0,8}", text in any::<String>()) {
        let mut params = Map::new();
        params.insert(key, Value::String(text));
        let frame = encode_frame(&WireRequest { id: 1, method, params });
        prop_assert_eq!(frame.iter().filter(|b| **b == b'\n').count(), 1);
        prop_assert_eq!(frame.last(), Some(&b'\n'));
    }

    #[test]
    fn constant_returns_are_stubs(items in prop::collection::vec("[A-Za-z:0-9]{1,6}", 0..5), comment in "[ a-z]{0,20}") {
        let list = items.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(", ");
        let src = format!("def resample_history(h, p):\n    # {comment}\n    return [{list}]\n");
        prop_assert!(is_stub(&src));
        let real = format!("def resample_history(h, p):\n    # {comment}\n    out = [{list}]\n    out.extend(sample(h))\n    return out\n");
        prop_assert!(!is_stub(&real));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn references_are_clean_for_any_seed(seed in any::<u64>(), game in 0usize..4) {
        let name = REGISTRY[game];
        let g = make_game(name, &GameParams::new(), Some(seed)).unwrap();
        let cfg = FuzzConfig { n_trajectories: 5, max_walk_steps: g.spec().max_walk_steps, rng_seed: seed };
        let r = run_dynamics(g.factory().as_ref(), &cfg, g.spec());
        prop_assert_eq!(r.score, 1.0, "{:?}", r.diagnostics);
        if g.spec().is_imperfect() {
            let cfg = ProbeConfig { n_probes: 5, rng_seed: seed, max_walk_steps: g.spec().max_walk_steps };
            let r = run_information(g.factory().as_ref(), &cfg, g.spec());
            prop_assert_eq!(r.score, 1.0, "{:?}", r.diagnostics);
        }
    }

    #[test]
    fn fuzzing_is_reproducible(seed in any::<u64>()) {
        let g = make_game("kuhn_poker", &GameParams::new(), Some(seed)).unwrap();
        let f = cwm_core::mutants::mutant_factory(cwm_core::mutants::MutantKind::Nondeterministic, seed);
        let cfg = FuzzConfig { n_trajectories: 8, max_walk_steps: 50, rng_seed: seed };
        prop_assert_eq!(run_dynamics(f.as_ref(), &cfg, g.spec()), run_dynamics(f.as_ref(), &cfg, g.spec()));
    }

    #[test]
    fn scenario_results_ignore_order(
        order in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
        corrupt in prop::collection::vec(any::<bool>(), 6),
    ) {
        let g = make_game("leduc_poker", &GameParams::new(), Some(0)).unwrap();
        let mut file = builtin_scenario_file("leduc_poker").unwrap();
        for (s, c) in file.scenarios.iter_mut().zip(&corrupt) {
            if *c {
                s.checks.terminal = Some(!s.checks.terminal.unwrap_or(false));
            }
        }
        let by_name = |f: &cwm_core::tiers::ScenarioFile| -> BTreeMap<String, bool> {
            run_scenarios(g.factory().as_ref(), f)
                .checks
                .into_iter()
                .map(|c| (c.name, c.passed))
                .collect()
        };
        let base = by_name(&file);
        let mut shuffled = file.clone();
        shuffled.scenarios = order.iter().map(|i| file.scenarios[*i].clone()).collect();
        prop_assert_eq!(&by_name(&shuffled), &base);
        // a flipped terminal expectation always fails, and nothing else does
        for (s, c) in file.scenarios.iter().zip(&corrupt) {
            prop_assert_eq!(base[&s.name], !c);
        }
    }
}

#[test]
fn shipped_scenarios_round_trip() {
    for game in REGISTRY {
        let file = builtin_scenario_file(game).unwrap();
        let text = serde_json::to_vec(&file).unwrap();
        assert_eq!(parse_scenarios(&text).unwrap(), file);
    }
}

#[test]
fn effective_weights_sum_to_one() {
    for game in REGISTRY {
        let spec = cwm_core::games::game_spec(game).unwrap();
        let w = effective_weights(&spec);
        let total: f64 = w.values().sum();
        assert!((total - 1.0).abs() < 1e-12, "{game}");
        assert_eq!(w.contains_key(&Tier::Information), spec.is_imperfect());
    }
}
