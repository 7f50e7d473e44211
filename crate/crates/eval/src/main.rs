use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evoscape_core::genome::validate_initial_prompt;
use evoscape_core::provider::{self, Backend, DirImageStore, ImageStore, MockFixtures, ProviderConfig, RateLimiter, SystemClock};
use evoscape_core::{AttributeKey, Gateway, ImageRef, Session};
use evoscape_eval::simulate::{BaselineSet, Transcript};
use evoscape_eval::{baseline, pairwise_novelty, rating_curves, session_gain, simulate_session, SelectorPolicy};
use serde_json::Value;

#[derive(Debug, Parser)]
#[command(name = "evoscape-eval", version, about = "Headless sessions and novelty metrics")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, global = true, env = provider::ENV_BACKEND, default_value = "mock")]
    backend: Backend,
    #[arg(long, global = true, env = provider::ENV_SEED, default_value_t = 0)]
    seed: u64,
    /// Mock vocabulary and tables; the built-in set is used when omitted.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cache for generated image bytes (needed to score live images later).
    /// Defaults to `images` for the live backend.
    #[arg(long, global = true)]
    image_dir: Option<PathBuf>,
    /// Image requests allowed per 60 s. Live defaults to 5; mock is unlimited unless set.
    #[arg(long, global = true)]
    images_per_minute: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyKind {
    Random,
    Greedy,
    Scripted,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a session headlessly and write the stored session.
    Simulate {
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value_t = 3)]
        iterations: usize,
        #[arg(long, value_enum, default_value_t = PolicyKind::Random)]
        policy: PolicyKind,
        /// Attribute the greedy policy rates Good.
        #[arg(long, default_value = "colors")]
        key: String,
        /// Decisions to replay (a transcript, or a stored session) for the scripted policy.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Render images from the bare prompt with no attributes.
    Baseline {
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value_t = 4)]
        count: u32,
    },
    /// Score every cross pair of two image sets.
    ///
    /// A set is a baseline file, a JSON list of image references, or a stored
    /// session with a generation suffix such as `run.json:0` or `run.json:last`.
    Novelty {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Novelty of a session's last generation against its first.
    Gain {
        #[arg(long)]
        session: PathBuf,
        /// Reference set for the first generation, e.g. a baseline file.
        #[arg(long)]
        baseline: Option<String>,
    },
    /// Mean Good/Bad counts per iteration over stored sessions, as CSV.
    Curves {
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
    },
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn gateway(common: &Common) -> Res<Gateway> {
    let mut config = ProviderConfig::from_env()?;
    config.backend = common.backend;
    config.validate()?;
    let fixtures = common.fixtures.as_deref().map(MockFixtures::load).transpose()?;
    let image_dir = common.image_dir.clone().or_else(|| (common.backend == Backend::Live).then(|| "images".into()));
    let store = image_dir.map(|dir| DirImageStore::new(dir).map(|s| Arc::new(s) as Arc<dyn ImageStore>)).transpose()?;
    let limiter = common
        .images_per_minute
        .map(|n| Arc::new(RateLimiter::new(n, Duration::from_secs(60), Arc::new(SystemClock::new()))));
    Ok(Gateway::from_config(&config, common.seed, fixtures, limiter, store)?)
}

fn read_json(path: &Path) -> Res<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn read_session(path: &Path) -> Res<Session> {
    let session: Session = serde_json::from_value(read_json(path)?)?;
    session.validate()?;
    Ok(session)
}

/// Resolves an image-set argument; see the `novelty` help.
fn image_set(arg: &str) -> Res<Vec<ImageRef>> {
    let (path, generation) = match arg.rsplit_once(':') {
        Some((path, g)) if g == "first" || g == "last" || g.parse::<usize>().is_ok() => (path, Some(g)),
        _ => (arg, None),
    };
    let value = read_json(Path::new(path))?;
    if value.get("generations").is_some() {
        let session: Session = serde_json::from_value(value)?;
        let generation = match generation.unwrap_or("last") {
            "first" => session.generations.first(),
            "last" => session.generations.last(),
            n => session.generations.get(n.parse::<usize>()?),
        }
        .ok_or_else(|| format!("{arg}: no such generation"))?;
        return Ok(generation.members.iter().map(|m| m.image.clone()).collect());
    }
    if value.get("images").is_some() {
        return Ok(serde_json::from_value::<BaselineSet>(value)?.images);
    }
    Ok(serde_json::from_value(value).map_err(|e| format!("{arg}: not a session, baseline or image list ({e})"))?)
}

fn emit(common: &Common, text: &str) -> Res<()> {
    match &common.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(common: &Common, value: &T) -> Res<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(common, &text)
}

fn run(cli: Cli) -> Res<()> {
    let common = &cli.common;
    match cli.command {
        Command::Simulate { prompt, iterations, policy, key, transcript } => {
            let prompt = validate_initial_prompt(&prompt)?;
            let policy = match policy {
                PolicyKind::Random => SelectorPolicy::Random { seed: common.seed },
                PolicyKind::Greedy => SelectorPolicy::GreedyFavorKey {
                    key: AttributeKey::parse(&key).ok_or_else(|| format!("unknown attribute `{key}`"))?,
                },
                PolicyKind::Scripted => {
                    let path = transcript.ok_or("--transcript is required for the scripted policy")?;
                    let value = read_json(&path)?;
                    let transcript = if value.get("generations").is_some() {
                        Transcript::from_session(&serde_json::from_value(value)?)
                    } else {
                        serde_json::from_value(value)?
                    };
                    SelectorPolicy::Scripted(transcript)
                }
            };
            let session = simulate_session(&prompt, iterations, &policy, &gateway(common)?, common.seed)?;
            emit_json(common, &session)
        }
        Command::Baseline { prompt, count } => {
            let prompt = validate_initial_prompt(&prompt)?;
            emit_json(common, &baseline(&prompt, count, &gateway(common)?)?)
        }
        Command::Novelty { a, b } => {
            let report = pairwise_novelty(&image_set(&a)?, &image_set(&b)?, &gateway(common)?)?;
            emit_json(common, &report)
        }
        Command::Gain { session, baseline } => {
            let session = read_session(&session)?;
            let reference = baseline.as_deref().map(image_set).transpose()?;
            let gain = session_gain(&session, reference.as_deref(), &gateway(common)?)?;
            emit_json(common, &gain)
        }
        Command::Curves { sessions } => {
            let sessions = sessions.iter().map(|p| read_session(p)).collect::<Res<Vec<_>>>()?;
            let curves = rating_curves(&sessions);
            eprint!("{}", curves.to_table());
            let mut csv = Vec::new();
            curves.write_csv(&mut csv)?;
            emit(common, &String::from_utf8(csv)?)
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
