use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use ddz_core::arena::{parse_config, run_match, winrate_matrix, AgentFactory, AgentKind, RunConfig};
use ddz_core::cql::{train, TrainMode};
use ddz_core::decomp::{decompositions, DEFAULT_SAMPLE_LIMIT};
use ddz_core::engine::{import_record, GameRecord};
use ddz_core::features::{GroupEncoder, LatentTable};
use ddz_core::{ActionCatalog, Seat};
use ddz_service::{RecordStore, Service};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "ddz", version, about = "Dou Di Zhu engine, agents and tournaments")]
struct Cli {
    /// Flat key=value run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the action catalog size per category.
    Enumerate,
    /// Run a tournament: one match with --roles, or a win-rate matrix.
    Play {
        /// Landlord, Peasant Down and Peasant Up kinds, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["agents", "opponent"])]
        roles: Option<Vec<AgentKind>>,
        /// Matrix rows, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "random,rhcp")]
        agents: Vec<AgentKind>,
        /// Kind filling the other two seats in matrix cells.
        #[arg(long, default_value = "random")]
        opponent: AgentKind,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Repeat k uses seed + k.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Train CQL agents against RHCP opponents, or against each other.
    Train {
        /// Checkpoint to write; adversarial runs add a seat suffix.
        #[arg(long)]
        checkpoint: PathBuf,
        /// `landlord`, `peasant-down`, `peasant-up` or `adversarial`.
        #[arg(long, default_value = "landlord")]
        mode: String,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve the HTTP game API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Model used by `cql` seats.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Validate a game record by replaying it.
    Replay {
        /// Table text, a JSON record, or a stored service record.
        record: PathBuf,
        /// Also list decompositions of each hand.
        #[arg(long)]
        decompose: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Usage(String),
    Record(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Record(_) => 3,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Record(m) | Failure::Runtime(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn enumerate() -> String {
    let catalog = ActionCatalog::global();
    let mut out = String::new();
    for (category, n) in catalog.category_counts() {
        let _ = writeln!(out, "{:<30} {n}", category.to_string());
    }
    let _ = writeln!(out, "{:<30} {}", "total", catalog.len());
    out
}

fn seeds(config: &RunConfig, seed: Option<u64>, repeats: usize) -> Vec<u64> {
    match seed {
        Some(s) => (0..repeats as u64).map(|k| s + k).collect(),
        None => config.seeds.clone(),
    }
}

#[allow(clippy::too_many_arguments)]
fn play(
    config: &RunConfig,
    roles: Option<Vec<AgentKind>>,
    agents: Vec<AgentKind>,
    opponent: AgentKind,
    episodes: Option<usize>,
    repeats: Option<usize>,
    seed: Option<u64>,
    json: bool,
) -> Result<String, Failure> {
    let episodes = episodes.unwrap_or(config.episodes);
    let repeats = repeats.unwrap_or(config.repeats);
    if episodes == 0 || repeats == 0 {
        return Err(Failure::Usage("episodes and repeats must be positive".into()));
    }
    let seeds = seeds(config, seed, repeats);
    let mut factory = AgentFactory::new(config.rhcp, config.training.clone());
    if let Some(roles) = roles {
        let roles: [AgentKind; 3] = roles
            .try_into()
            .map_err(|_| Failure::Usage("--roles takes three kinds".into()))?;
        factory.prepare(&roles).map_err(runtime)?;
        let report = run_match(&factory, &roles, episodes, repeats, &seeds).map_err(runtime)?;
        return Ok(if json {
            serde_json::to_string_pretty(&report).map_err(runtime)? + "\n"
        } else {
            report.to_text()
        });
    }
    let mut kinds = agents.clone();
    kinds.push(opponent.clone());
    factory.prepare(&kinds).map_err(runtime)?;
    let matrix = winrate_matrix(&factory, &agents, &opponent, episodes, repeats, &seeds).map_err(runtime)?;
    Ok(if json {
        serde_json::to_string_pretty(&matrix).map_err(runtime)? + "\n"
    } else {
        matrix.to_text()
    })
}

fn seat_path(base: &Path, seat: Seat) -> PathBuf {
    let stem = base
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let suffix = match seat {
        Seat::Landlord => "landlord",
        Seat::PeasantDown => "peasant-down",
        Seat::PeasantUp => "peasant-up",
    };
    let name = match base.extension() {
        Some(ext) => format!("{stem}-{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{suffix}"),
    };
    base.with_file_name(name)
}

fn train_cmd(
    mut config: RunConfig,
    checkpoint: &Path,
    mode: &str,
    epochs: Option<usize>,
    seed: Option<u64>,
) -> Result<String, Failure> {
    let mode = match mode {
        "landlord" => TrainMode::Single(Seat::Landlord),
        "peasant-down" => TrainMode::Single(Seat::PeasantDown),
        "peasant-up" => TrainMode::Single(Seat::PeasantUp),
        "adversarial" => TrainMode::Adversarial,
        other => return Err(Failure::Usage(format!("unknown training mode {other:?}"))),
    };
    if let Some(e) = epochs {
        config.training.epochs = e;
    }
    if let Some(s) = seed {
        config.training.seed = s;
    }
    config.training.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.training.seed);
    let catalog = ActionCatalog::global();
    let (encoder, report) = GroupEncoder::pretrain(catalog, &config.autoencoder, &mut rng).map_err(runtime)?;
    eprintln!(
        "autoencoder: {:.4} exact reconstruction after {} epochs",
        report.accuracy, report.epochs
    );
    let latents = LatentTable::build(&encoder, catalog);
    let outcome = train(&config.training, mode, Arc::new(encoder), Arc::new(latents), |p| {
        eprintln!("{}", serde_json::to_string(p).expect("curve points serialize"));
    });
    let mut out = String::new();
    for point in &outcome.curve {
        out.push_str(&serde_json::to_string(point).map_err(runtime)?);
        out.push('\n');
    }
    let single = outcome.models.len() == 1;
    for (seat, model) in &outcome.models {
        let path = if single {
            checkpoint.to_path_buf()
        } else {
            seat_path(checkpoint, *seat)
        };
        model.save(&path).map_err(runtime)?;
        eprintln!("saved {seat} model to {}", path.display());
    }
    Ok(out)
}

fn read_record(path: &Path) -> Result<GameRecord, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Record(format!("{}: {e}", path.display())))?;
    let trimmed = text.trim_start();
    let parsed = if trimmed.starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(trimmed).map_err(|e| Failure::Record(e.to_string()))?;
        let inner = value.get("record").cloned().unwrap_or(value);
        serde_json::from_value(inner).map_err(|e| e.to_string())
    } else {
        GameRecord::from_text(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Failure::Record(format!("{}: {e}", path.display())))
}

fn replay(path: &Path, decompose: bool, seed: Option<u64>) -> Result<String, Failure> {
    let record = read_record(path)?;
    let end = import_record(&record).map_err(|e| Failure::Record(format!("{}: {e}", path.display())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let mut out = String::new();
    for e in &record.entries {
        let _ = writeln!(out, "{} | {} | {} | {}", e.round, e.seat, e.hand, e.mv.notation());
        if decompose {
            let sample = decompositions(&e.hand, DEFAULT_SAMPLE_LIMIT, &mut rng);
            let _ = writeln!(
                out,
                "    {} decompositions{}",
                sample.decompositions.len(),
                if sample.truncated { " (sampled)" } else { "" }
            );
            for d in &sample.decompositions {
                let _ = writeln!(out, "    {d}");
            }
        }
    }
    let _ = writeln!(out, "valid: {} moves", record.entries.len());
    match end.winner() {
        Some(w) => {
            let _ = writeln!(out, "winner: {w}");
        }
        None => out.push_str("winner: none (game unfinished)\n"),
    }
    Ok(out)
}

fn serve(port: u16, data_dir: &Path, checkpoint: Option<PathBuf>, config: &RunConfig) -> Result<String, Failure> {
    let store = RecordStore::open(data_dir).map_err(|e| Failure::Usage(format!("{}: {e}", data_dir.display())))?;
    if store.skipped() > 0 {
        eprintln!("skipped {} unreadable record lines", store.skipped());
    }
    let mut factory = AgentFactory::new(config.rhcp, config.training.clone());
    if let Some(path) = &checkpoint {
        factory.prepare(&[AgentKind::Cql(path.clone())]).map_err(runtime)?;
    }
    let service = Arc::new(Service::new(store, factory, checkpoint));
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    eprintln!("listening on http://{addr}");
    rt.block_on(ddz_service::serve(addr, service)).map_err(runtime)?;
    Ok(String::new())
}

fn run(cli: Cli) -> Result<String, Failure> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Enumerate => Ok(enumerate()),
        Command::Play {
            roles,
            agents,
            opponent,
            episodes,
            repeats,
            seed,
            json,
        } => play(&config, roles, agents, opponent, episodes, repeats, seed, json),
        Command::Train {
            checkpoint,
            mode,
            epochs,
            seed,
        } => train_cmd(config, &checkpoint, &mode, epochs, seed),
        Command::Serve {
            port,
            data_dir,
            checkpoint,
        } => serve(port, &data_dir, checkpoint, &config),
        Command::Replay {
            record,
            decompose,
            seed,
        } => replay(&record, decompose, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    let result = run(cli).and_then(|report| match &out {
        Some(path) => std::fs::write(path, &report).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{report}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
