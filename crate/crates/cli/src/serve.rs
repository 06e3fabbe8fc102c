//! Long-running reward service: NDJSON requests on stdin, one response
//! line per request on stdout, at most `--parallel` requests in flight.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::{mpsc, Arc, Mutex};

use anyhow::Result;
use clap::Args;
use serde::Deserialize;
use serde_json::{json, Value};

use cwm_core::candidate::{candidate_factory, AdapterOptions, Candidate};
use cwm_core::protocol::LiveGauge;
use cwm_core::reward::{compute_reward, RewardBreakdown, RewardConfig};
use cwm_core::tiers::ScenarioFile;

use crate::{lookup_game, load_scenarios, seconds, usage, AdapterArgs};

#[derive(Args)]
pub struct ServeArgs {
    /// Directory relative candidate paths are resolved against.
    #[arg(long, value_name = "PATH")]
    games_dir: PathBuf,
    /// Directory holding `<game>.scenarios.json` files.
    #[arg(long, value_name = "PATH")]
    scenarios_dir: PathBuf,
    /// Requests processed concurrently.
    #[arg(long, value_name = "K", default_value_t = 1)]
    parallel: usize,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    adapter: AdapterArgs,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Request {
    id: Value,
    game: String,
    candidate_path: String,
}

struct Service {
    games_dir: PathBuf,
    scenarios_dir: PathBuf,
    adapter: AdapterOptions,
    cfg: RewardConfig,
    scenarios: Mutex<HashMap<String, Arc<ScenarioFile>>>,
}

impl Service {
    fn scenarios(&self, game: &str) -> Result<Arc<ScenarioFile>> {
        let mut cache = self.scenarios.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(f) = cache.get(game) {
            return Ok(Arc::clone(f));
        }
        let path = self.scenarios_dir.join(format!("{game}.scenarios.json"));
        let (file, _) = load_scenarios(Some(&path), game)?;
        let file = Arc::new(file);
        cache.insert(game.to_string(), Arc::clone(&file));
        Ok(file)
    }

    fn reward(&self, req: &Request) -> Result<RewardBreakdown> {
        let spec = lookup_game(&req.game)?;
        let scenarios = self.scenarios(&spec.name)?;
        let candidate = match req.candidate_path.parse::<Candidate>().map_err(crate::core_error)? {
            Candidate::File { path } => {
                let path = self.games_dir.join(path);
                if !path.is_file() {
                    return Ok(RewardBreakdown::load_failure(format!(
                        "candidate file not found: {}",
                        path.display()
                    )));
                }
                Candidate::File { path }
            }
            builtin => builtin,
        };
        let factory =
            candidate_factory(&candidate, self.cfg.seed, &self.adapter).map_err(crate::core_error)?;
        compute_reward(factory, &spec, &scenarios, &self.cfg).map_err(crate::core_error)
    }

    fn answer(&self, line: &str) -> Value {
        let req: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                let id = serde_json::from_str::<Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").cloned())
                    .unwrap_or(Value::Null);
                return json!({"id": id, "error": format!("malformed request: {e}")});
            }
        };
        match self.reward(&req) {
            Ok(b) => json!({"id": req.id, "reward": b.reward, "breakdown": b}),
            Err(e) => json!({"id": req.id, "error": format!("{e:#}")}),
        }
    }
}

pub fn cmd_serve(args: ServeArgs) -> Result<()> {
    if args.parallel == 0 {
        return Err(usage("--parallel must be at least 1"));
    }
    for dir in [&args.games_dir, &args.scenarios_dir] {
        if !dir.is_dir() {
            return Err(usage(format!("{} is not a directory", dir.display())));
        }
    }
    let gauge = LiveGauge::new();
    let mut adapter = args.adapter.options()?;
    adapter.gauge = Some(Arc::clone(&gauge));
    let service = Arc::new(Service {
        games_dir: args.games_dir,
        scenarios_dir: args.scenarios_dir,
        adapter,
        cfg: RewardConfig {
            n: args.n,
            timeout: seconds(args.timeout, "--timeout")?,
            seed: args.seed,
        },
        scenarios: Mutex::new(HashMap::new()),
    });
    let out = Arc::new(Mutex::new(std::io::stdout()));
    let (tx, rx) = mpsc::channel::<String>();
    let rx = Arc::new(Mutex::new(rx));
    let workers: Vec<_> = (0..args.parallel)
        .map(|_| {
            let (service, out, rx) = (Arc::clone(&service), Arc::clone(&out), Arc::clone(&rx));
            std::thread::spawn(move || loop {
                let line = match rx.lock().unwrap_or_else(|p| p.into_inner()).recv() {
                    Ok(l) => l,
                    Err(_) => return,
                };
                let response = service.answer(&line);
                let mut out = out.lock().unwrap_or_else(|p| p.into_inner());
                let _ = writeln!(out, "{response}").and_then(|_| out.flush());
            })
        })
        .collect();
    let mut served = 0usize;
    for line in std::io::stdin().lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        served += 1;
        tx.send(line)?;
    }
    drop(tx);
    for w in workers {
        let _ = w.join();
    }
    eprintln!(
        "served {served} request(s); peak live adapters {}",
        gauge.peak()
    );
    Ok(())
}
