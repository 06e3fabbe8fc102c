//! Candidate resolution: built-in engines run in-process, source files run
//! under a supervised adapter subprocess.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::games::{make_game, GameParams, REGISTRY};
use crate::mutants::{mutant_factory, MutantKind};
use crate::protocol::{default_adapter_command, LiveGauge, SubprocessFactory};
use crate::session::{Session, SessionFactory};

pub const BUILTIN_PREFIX: &str = "builtin:";

/// What the user asked to verify, as echoed in reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Candidate {
    /// A reference game or crafted mutant by name.
    Builtin { name: String },
    /// A source file hosted by an adapter process.
    File { path: PathBuf },
}

impl Candidate {
    pub fn builtin(name: &str) -> Result<Self, crate::Error> {
        if REGISTRY.contains(&name) || MutantKind::from_name(name).is_some() {
            Ok(Candidate::Builtin { name: name.to_string() })
        } else {
            Err(crate::Error::Usage(format!(
                "unknown builtin candidate {name:?}; known: {}, {}",
                REGISTRY.join(", "),
                MutantKind::ALL.map(|k| k.name()).join(", ")
            )))
        }
    }
}

impl FromStr for Candidate {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix(BUILTIN_PREFIX) {
            Some(name) => Candidate::builtin(name),
            None if s.is_empty() => Err(crate::Error::Usage("empty candidate".to_string())),
            None => Ok(Candidate::File { path: PathBuf::from(s) }),
        }
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Candidate::Builtin { name } => write!(f, "{BUILTIN_PREFIX}{name}"),
            Candidate::File { path } => write!(f, "{}", path.display()),
        }
    }
}

/// How file candidates are hosted.
#[derive(Debug, Clone)]
pub struct AdapterOptions {
    pub command: Vec<String>,
    pub preamble: Option<String>,
    pub call_timeout: Duration,
    pub gauge: Option<Arc<LiveGauge>>,
}

impl Default for AdapterOptions {
    fn default() -> Self {
        AdapterOptions {
            command: default_adapter_command(),
            preamble: Some(crate::protocol::DEFAULT_PREAMBLE.to_string()),
            call_timeout: crate::protocol::DEFAULT_CALL_TIMEOUT,
            gauge: None,
        }
    }
}

/// Opens sessions for `candidate`. `seed` seeds built-in resamplers.
pub fn candidate_factory(
    candidate: &Candidate,
    seed: u64,
    adapter: &AdapterOptions,
) -> Result<Arc<dyn SessionFactory>, crate::Error> {
    match candidate {
        Candidate::Builtin { name } => builtin_factory(name, seed).map(Arc::from),
        Candidate::File { path } => {
            let mut f = SubprocessFactory::new(adapter.command.clone(), path.clone())
                .with_preamble(adapter.preamble.clone())
                .with_call_timeout(adapter.call_timeout);
            if let Some(g) = &adapter.gauge {
                f = f.with_gauge(Arc::clone(g));
            }
            Ok(Arc::new(f))
        }
    }
}

fn builtin_factory(name: &str, seed: u64) -> Result<Box<dyn SessionFactory>, crate::Error> {
    if let Some(kind) = MutantKind::from_name(name) {
        return Ok(mutant_factory(kind, seed));
    }
    Ok(make_game(name, &GameParams::new(), Some(seed))?.factory())
}

/// Loader for adapter processes that host built-in engines. The candidate
/// file holds `builtin:NAME`, optionally followed by a resampler seed.
pub fn builtin_loader(path: &Path, _preamble: Option<&str>) -> Result<Box<dyn Session>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut words = text.split_whitespace();
    let name = words
        .next()
        .and_then(|w| w.strip_prefix(BUILTIN_PREFIX))
        .ok_or_else(|| format!("{}: not a builtin candidate file", path.display()))?;
    let seed = match words.next() {
        Some(w) => w.parse::<u64>().map_err(|e| format!("bad seed {w:?}: {e}"))?,
        None => 0,
    };
    let factory = builtin_factory(name, seed).map_err(|e| e.to_string())?;
    factory.open().map_err(|e| e.to_string())
}
