//! Command-line front end: `run`, `bench`, `validate` and `inspect`.
//!
//! Exit status is 0 on success, 1 when work started and failed (or a
//! validated file is invalid), and 2 for usage and configuration errors
//! detected before any work starts. API keys are read only from the
//! environment variable named by the backend config's `api_key_env`.
//!
//! `run` and `bench` write into `<out>/<timestamp>-<command>/` and record the
//! directory name in `<out>/latest`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::backend::{CompletionBackend, RecordingBackend, RemoteBackend, ScriptedBackend};
use crate::eval::{
    load_dataset, render_table, run_benchmark, BenchOptions, ConfigFingerprint, DatasetRecord, MatchOptions,
};
use crate::network::{CollaborationNetwork, NetworkConfig, Transcript};
use crate::prompt::HashingEmbedder;
use crate::schema::SchemaSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kgteam", version, about = "Collaborative NER/RE/EE expert agents")]
pub struct Cli {
    /// Log retries and per-agent failures to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one collaboration on an input sentence.
    Run(RunArgs),
    /// Score the team on a dataset over a sweep of round counts.
    Bench(BenchArgs),
    /// Check schema files.
    Validate(ValidateArgs),
    /// Show one (round, agent) cell of a transcript.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Network config file.
    #[arg(long)]
    pub config: PathBuf,
    /// `remote` or `scripted:<script.json>`.
    #[arg(long, default_value = "remote")]
    pub backend: String,
    /// Demonstrations per label for every agent; overrides the config.
    #[arg(long)]
    pub shots: Option<usize>,
    /// Sampling seed forwarded to the remote backend.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output root; each invocation writes a timestamped directory here.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Append every successful completion to this JSON-lines capture file.
    #[arg(long)]
    pub capture: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 4)]
    pub rounds: u32,
    /// Input sentence.
    #[arg(long, conflicts_with = "input_file", required_unless_present = "input_file")]
    pub input: Option<String>,
    #[arg(long)]
    pub input_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset file (JSON lines).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Round counts: `4`, `1..4` (inclusive) or `0,2,4`.
    #[arg(long, default_value = "4")]
    pub sweep: String,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Records run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Fold full-width characters before matching.
    #[arg(long)]
    pub fold_width: bool,
    #[arg(long)]
    pub case_insensitive: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(required = true)]
    pub schemas: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub transcript: PathBuf,
    #[arg(long)]
    pub round: u32,
    #[arg(long)]
    pub agent: String,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parses `4`, `1..4` or `0,2,4`.
pub fn parse_sweep(s: &str) -> Result<Vec<u32>, String> {
    let bad = || format!("invalid sweep `{s}`");
    let mut rounds: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    rounds.sort_unstable();
    rounds.dedup();
    Ok(rounds)
}

fn make_backend(common: &CommonArgs, config: &NetworkConfig) -> Result<Arc<dyn CompletionBackend>, CliError> {
    let backend: Box<dyn CompletionBackend> = if common.backend == "remote" {
        let mut cfg = config.backend.clone();
        if common.seed.is_some() {
            cfg.seed = common.seed;
        }
        Box::new(RemoteBackend::from_env(cfg).map_err(usage)?)
    } else if let Some(path) = common.backend.strip_prefix("scripted:") {
        Box::new(ScriptedBackend::load(path).map_err(usage)?)
    } else {
        return Err(usage(format!("unknown backend `{}` (expected remote or scripted:PATH)", common.backend)));
    };
    Ok(match &common.capture {
        Some(path) => Arc::new(
            RecordingBackend::new(backend, path).map_err(|e| usage(format!("capture {}: {e}", path.display())))?,
        ),
        None => Arc::from(backend),
    })
}

fn load_network(common: &CommonArgs) -> Result<CollaborationNetwork, CliError> {
    let config = NetworkConfig::load(&common.config).map_err(usage)?;
    let backend = make_backend(common, &config)?;
    config.build(backend, Arc::new(HashingEmbedder::default()), common.shots).map_err(usage)
}

/// Creates `<out>/<timestamp>-<label>` and points `<out>/latest` at it.
fn run_dir(out: &Path, label: &str) -> Result<PathBuf, CliError> {
    let io = |p: &Path, e: std::io::Error| runtime(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    let mut name = format!("{stamp}-{label}");
    let mut n = 1;
    while out.join(&name).exists() {
        n += 1;
        name = format!("{stamp}-{label}-{n}");
    }
    let dir = out.join(&name);
    std::fs::create_dir(&dir).map_err(|e| io(&dir, e))?;
    let latest = out.join("latest");
    std::fs::write(&latest, format!("{name}\n")).map_err(|e| io(&latest, e))?;
    Ok(dir)
}

fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let input = match (&args.input, &args.input_file) {
        (Some(text), _) => text.clone(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?
            .trim()
            .to_string(),
        (None, None) => return Err(usage("one of --input or --input-file is required")),
    };
    let network = load_network(&args.common)?;
    if args.rounds > network.max_rounds() {
        return Err(usage(format!("--rounds {} exceeds max_rounds {}", args.rounds, network.max_rounds())));
    }
    let transcript = network.run_collaboration(&input, args.rounds).map_err(runtime)?;
    let dir = run_dir(&args.common.out, "run")?;
    let path = dir.join("transcript.json");
    transcript.save(&path).map_err(runtime)?;
    let record = DatasetRecord { id: "input".into(), text: input.clone(), gold: Default::default() };
    let opts = BenchOptions { rounds_list: vec![args.rounds], repetitions: 1, seed: args.common.seed, ..Default::default() };
    let fingerprint = ConfigFingerprint::new(&network, &[record], &opts);
    let fp_path = dir.join("fingerprint.json");
    let body = serde_json::json!({"fingerprint": fingerprint.digest(), "config": fingerprint});
    std::fs::write(&fp_path, serde_json::to_string_pretty(&body).expect("fingerprint serializes"))
        .map_err(|e| runtime(format!("{}: {e}", fp_path.display())))?;
    for answer in &transcript.final_outputs {
        let _ = writeln!(stdout, "{} ({}): {}", answer.agent_id, answer.task.code(), answer.canonical_text);
    }
    let _ = writeln!(stdout, "transcript: {}", path.display());
    Ok(())
}

fn cmd_bench(args: &BenchArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let rounds_list = parse_sweep(&args.sweep).map_err(usage)?;
    let dataset = load_dataset(&args.dataset).map_err(usage)?;
    let network = load_network(&args.common)?;
    if let Some(&r) = rounds_list.iter().find(|&&r| r > network.max_rounds()) {
        return Err(usage(format!("sweep round {r} exceeds max_rounds {}", network.max_rounds())));
    }
    if args.repetitions == 0 || args.jobs == 0 {
        return Err(usage("--repetitions and --jobs must be at least 1"));
    }
    let opts = BenchOptions {
        rounds_list,
        repetitions: args.repetitions,
        jobs: args.jobs,
        match_options: MatchOptions { fold_width: args.fold_width, case_insensitive: args.case_insensitive },
        seed: args.common.seed,
    };
    let report = run_benchmark(&network, &dataset, &opts).map_err(runtime)?;
    let dir = run_dir(&args.common.out, "bench")?;
    report.save(&dir).map_err(runtime)?;
    let _ = write!(stdout, "{}", render_table(&report));
    let _ = writeln!(stdout, "report: {}", dir.display());
    Ok(())
}

fn cmd_validate(args: &ValidateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut failed = Vec::new();
    for path in &args.schemas {
        match SchemaSpec::load(path) {
            Ok(s) => {
                let _ = writeln!(stdout, "OK {}: {} schema `{}` with {} types", path.display(), s.task.code(), s.id, s.type_count());
            }
            Err(e) => {
                let _ = writeln!(stdout, "INVALID {}: {e}", path.display());
                failed.push(path.display().to_string());
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(runtime(format!("invalid schema(s): {}", failed.join(", "))))
    }
}

fn cmd_inspect(args: &InspectArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let transcript = Transcript::load(&args.transcript).map_err(usage)?;
    let cell = transcript.cell(args.round, &args.agent).ok_or_else(|| {
        usage(format!("no cell for agent `{}` in round {} (last round {})", args.agent, args.round, transcript.last_round()))
    })?;
    let mut out = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(out, "round {} agent {} ({})", args.round, cell.agent_id, cell.task.code());
    let _ = writeln!(out, "\n== prompt ({} messages) ==", cell.messages.len());
    for m in &cell.messages {
        let _ = writeln!(out, "[{:?}] {}", m.role, m.content);
    }
    let _ = writeln!(out, "\npeer replicas: {}", cell.peer_replicas.len());
    for p in &cell.peer_replicas {
        let _ = writeln!(out, "  {}: {}", p.agent_id, p.canonical_text);
    }
    let _ = writeln!(out, "\n== raw response ==\n{}", cell.raw_response);
    if let Some(f) = &cell.failure {
        let _ = writeln!(out, "failure after {} attempt(s): {f}", cell.attempts.len());
    }
    let _ = writeln!(out, "\n== replica ==\n{}", cell.replica.canonical_text);
    let _ = writeln!(out, "\n== rejected ({}) ==", cell.rejected.len());
    for r in &cell.rejected {
        let _ = writeln!(out, "  {}: {}", r.item, r.violation);
    }
    if !cell.parse_warnings.is_empty() {
        let _ = writeln!(out, "\n== parse warnings ==");
        for w in &cell.parse_warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    let _ = stdout.write_all(out.as_bytes());
    Ok(())
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, stdout),
        Command::Bench(a) => cmd_bench(a, stdout),
        Command::Validate(a) => cmd_validate(a, stdout),
        Command::Inspect(a) => cmd_inspect(a, stdout),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK { write!(stdout, "{rendered}") } else { write!(stderr, "{rendered}") };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps() {
        assert_eq!(parse_sweep("4").unwrap(), vec![4]);
        assert_eq!(parse_sweep("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_sweep("4, 0,2,2").unwrap(), vec![0, 2, 4]);
        assert!(parse_sweep("4..1").is_err());
        assert!(parse_sweep("x").is_err());
    }

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with_args(std::iter::once("kgteam").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = run(&["run", "--config", "/no/such/net.json", "--input", "x"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("/no/such/net.json"), "{err}");
        assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn validate_reports() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.json");
        std::fs::write(&good, r#"{"schema_version":1,"id":"g","task":"NER","entity_types":["PER","LOC"]}"#).unwrap();
        let bad = dir.path().join("bad.json");
        std::fs::write(&bad, r#"{"schema_version":1,"id":"b","task":"NER","entity_types":["PER","PER"]}"#).unwrap();
        let (code, out, _) = run(&["validate", good.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("OK") && out.contains("2 types"), "{out}");
        let (code, out, _) = run(&["validate", bad.to_str().unwrap()]);
        assert_eq!(code, EXIT_RUNTIME);
        assert!(out.contains("PER"), "{out}");
    }
}
