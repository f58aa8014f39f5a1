//! `rearrange`: generate datasets, run agents on episodes, score final
//! states and replay action logs.
//!
//! Exit status: 0 when every episode succeeds (or every dataset check
//! passes), 1 when some task fails, 2 on usage or input errors.

use std::collections::HashMap;
use std::io::{self, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rearrange_core::eval::{evaluate_final, Accounting, EvaluationReport};
use rearrange_core::gen::{
    generate_split, validate_solvable, DifficultyParams, GenGoalKind, NoisePreset, RoomLayout,
    Split,
};
use rearrange_core::harness::files::{
    dataset_root, read_episodes, read_json, write_dataset, write_json, DATASET_ROOT_VAR,
};
use rearrange_core::harness::link::{ClientError, LinkError};
use rearrange_core::harness::protocol::Phase;
use rearrange_core::harness::{
    replay_log, run_batch, serve_policy, ActionLog, Connector, Endpoint, OraclePolicy, Policy,
    ProtocolMessage, RandomPolicy, RunOptions, StreamLink,
};
use rearrange_core::scene::{StateDoc, WorldState};
use rearrange_core::sim::{Action, BoundEpisode, EpisodeConfig, Observation};

#[derive(Parser)]
#[command(
    name = "rearrange",
    version,
    about = "Rearrangement episodes: generate, run, score, replay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset split: a manifest plus one file per episode.
    Gen(GenArgs),
    /// Run an agent on one episode or a whole dataset and print reports.
    Run(RunArgs),
    /// Score a recorded final state against an episode.
    Eval(EvalArgs),
    /// Rebuild a report from an action log.
    Replay(ReplayArgs),
    /// Check that episodes are solvable.
    Validate(ValidateArgs),
    /// Act as a protocol agent over standard streams or a socket.
    Agent(AgentArgs),
}

#[derive(Args)]
struct DataRoot {
    /// Dataset root used to resolve relative paths.
    #[arg(long, env = DATASET_ROOT_VAR, global = true)]
    data_root: Option<PathBuf>,
}

impl DataRoot {
    /// `path` as given when it exists, else relative to the dataset root.
    fn resolve(&self, path: &Path) -> PathBuf {
        if path.exists() || path.is_absolute() {
            return path.to_path_buf();
        }
        let under_root = dataset_root(self.data_root.as_deref()).join(path);
        if under_root.exists() {
            under_root
        } else {
            path.to_path_buf()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Off,
    Low,
    Default,
    High,
}

#[derive(Clone, Copy, ValueEnum)]
enum GoalArg {
    Geometric,
    Predicate,
    Experience,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "train")]
    split: SplitArg,
    #[arg(long, default_value_t = 10)]
    count: u64,
    /// Output directory [default: <dataset root>/<split>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Difficulty parameters as a JSON document; flags override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long)]
    distractors: Option<usize>,
    #[arg(long)]
    articulated: Option<usize>,
    /// Number of rooms in a row; 1 for a single room.
    #[arg(long)]
    rooms: Option<usize>,
    #[arg(long)]
    clutter: Option<f64>,
    /// Chain task goals so that order matters.
    #[arg(long)]
    ordering: bool,
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    #[arg(long, value_enum)]
    goal: Option<GoalArg>,
    #[arg(long)]
    capacity: Option<usize>,
    /// Redact predicate thresholds from what agents see.
    #[arg(long)]
    hidden_params: bool,
    #[command(flatten)]
    root: DataRoot,
}

#[derive(Args)]
struct RunArgs {
    /// Episode file or dataset directory.
    #[arg(long)]
    episode: PathBuf,
    /// random[:SEED], oracle, exec:CMD or tcp:ADDR
    #[arg(long, default_value = "oracle")]
    agent: Endpoint,
    /// Directory for reports/<id>.json and logs/<id>.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Action log destination (single episode only).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seconds of agent silence before a run is aborted.
    #[arg(long, default_value_t = 30.0)]
    watchdog: f64,
    #[command(flatten)]
    root: DataRoot,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    episode: PathBuf,
    /// Recorded final state (objects and agent).
    #[arg(long)]
    state: PathBuf,
    #[command(flatten)]
    root: DataRoot,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    episode: PathBuf,
    #[arg(long)]
    log: PathBuf,
    #[command(flatten)]
    root: DataRoot,
}

#[derive(Args)]
struct ValidateArgs {
    /// Episode file or dataset directory.
    #[arg(long)]
    episode: PathBuf,
    #[command(flatten)]
    root: DataRoot,
}

#[derive(Args)]
struct AgentArgs {
    /// random[:SEED] or oracle
    #[arg(default_value = "random")]
    policy: Endpoint,
    /// Episodes the oracle may be asked to play (file or dataset).
    #[arg(long)]
    episode: Option<PathBuf>,
    /// Connect to a harness listening at ADDR instead of using stdio.
    #[arg(long)]
    connect: Option<String>,
    /// Seconds to wait for the harness.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    #[command(flatten)]
    root: DataRoot,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Replay(a) => replay(a),
        Command::Validate(a) => validate(a),
        Command::Agent(a) => agent(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg = format!("{msg}: {text}");
        }
    }
    msg
}

fn load(root: &DataRoot, path: &Path) -> Result<Vec<EpisodeConfig>> {
    let path = root.resolve(path);
    let eps = read_episodes(&path)?;
    if eps.is_empty() {
        bail!("{}: no episodes", path.display());
    }
    Ok(eps)
}

fn load_one(root: &DataRoot, path: &Path) -> Result<EpisodeConfig> {
    let mut eps = load(root, path)?;
    if eps.len() != 1 {
        bail!(
            "{}: expected one episode, found {}",
            path.display(),
            eps.len()
        );
    }
    Ok(eps.remove(0))
}

fn bind(ep: &EpisodeConfig) -> Result<Arc<BoundEpisode>> {
    Ok(Arc::new(
        ep.bind().with_context(|| format!("episode `{}`", ep.id))?,
    ))
}

fn print_json(value: &impl serde::Serialize, pretty: bool) -> Result<()> {
    let text = if pretty {
        serde_json::to_string_pretty(value)?
    } else {
        serde_json::to_string(value)?
    };
    writeln!(io::stdout().lock(), "{text}")?;
    Ok(())
}

fn gen(a: GenArgs) -> Result<bool> {
    let mut params: DifficultyParams = match &a.params {
        Some(p) => read_json(p)?,
        None => DifficultyParams::default(),
    };
    if let Some(n) = a.tasks {
        params.n_task_objects = n;
    }
    if let Some(n) = a.distractors {
        params.n_distractors = n;
    }
    if let Some(n) = a.articulated {
        params.n_articulated = n;
    }
    if let Some(n) = a.rooms {
        params.room = if n <= 1 {
            RoomLayout::Single
        } else {
            RoomLayout::Multi { rooms: n }
        };
    }
    if let Some(c) = a.clutter {
        params.clutter_density = c;
    }
    if let Some(c) = a.capacity {
        params.carry_capacity = c;
    }
    params.require_ordering |= a.ordering;
    params.hidden_params |= a.hidden_params;
    if let Some(n) = a.noise {
        params.noise = match n {
            NoiseArg::Off => NoisePreset::Off,
            NoiseArg::Low => NoisePreset::Low,
            NoiseArg::Default => NoisePreset::Default,
            NoiseArg::High => NoisePreset::High,
        };
    }
    if let Some(g) = a.goal {
        params.goal_kind = match g {
            GoalArg::Geometric => GenGoalKind::Geometric,
            GoalArg::Predicate => GenGoalKind::Predicate,
            GoalArg::Experience => GenGoalKind::Experience,
        };
    }
    let split = Split::from(a.split);
    let out = a.out.unwrap_or_else(|| {
        dataset_root(a.root.data_root.as_deref()).join(format!("{split:?}").to_lowercase())
    });
    let episodes = generate_split(split, a.count, &params)?;
    let manifest = write_dataset(&out, split, &params, &episodes)?;
    eprintln!(
        "wrote {} episodes to {}",
        manifest.episodes.len(),
        out.display()
    );
    Ok(true)
}

fn run(a: RunArgs) -> Result<bool> {
    if !(a.watchdog.is_finite() && a.watchdog > 0.0) {
        bail!("--watchdog must be a positive number of seconds");
    }
    let configs = load(&a.root, &a.episode)?;
    if a.log.is_some() && configs.len() != 1 {
        bail!("--log needs a single episode; use --out for datasets");
    }
    let episodes = configs.iter().map(bind).collect::<Result<Vec<_>>>()?;
    let watchdog = Duration::from_secs_f64(a.watchdog);
    let connector = Connector::new(a.agent.clone(), watchdog)
        .with_context(|| format!("agent `{}`", a.agent))?;
    // A socket endpoint serves one agent connection at a time.
    let threads = if matches!(a.agent, Endpoint::Tcp(_)) {
        1
    } else {
        a.threads.max(1)
    };
    let results = run_batch(&episodes, &connector, &RunOptions { watchdog }, threads);
    let single = episodes.len() == 1;
    let mut all_ok = true;
    let mut reports = Vec::new();
    for (ep, r) in episodes.iter().zip(results) {
        let out = r.with_context(|| format!("episode `{}`", ep.config.id))?;
        if let Some(dir) = &a.out {
            write_json(
                &dir.join("reports").join(format!("{}.json", ep.config.id)),
                &out.report,
            )?;
            write_json(
                &dir.join("logs").join(format!("{}.json", ep.config.id)),
                &out.log,
            )?;
        }
        if let Some(path) = &a.log {
            write_json(path, &out.log)?;
        }
        print_json(&out.report, single)?;
        all_ok &= out.report.success;
        reports.push(out.report);
    }
    if !single {
        summarize(&reports);
    }
    Ok(all_ok)
}

fn summarize(reports: &[EvaluationReport]) {
    let n = reports.len() as f64;
    let mean = |f: fn(&EvaluationReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    eprintln!(
        "{} episodes: success {:.3}, completion {:.3}, spl {:.3}, aborted {}",
        reports.len(),
        mean(|r| f64::from(u8::from(r.success))),
        mean(|r| r.completion),
        mean(|r| r.spl),
        reports.iter().filter(|r| r.aborted).count()
    );
}

fn eval(a: EvalArgs) -> Result<bool> {
    let ep = bind(&load_one(&a.root, &a.episode)?)?;
    let doc: StateDoc = read_json(&a.root.resolve(&a.state))?;
    let state = WorldState::from_doc(ep.scene.clone(), doc).context("final state")?;
    let report = evaluate_final(
        &ep,
        &state,
        Accounting {
            ticks: 0,
            energy: 0.0,
            path_length: 0.0,
        },
    )?;
    print_json(&report, true)?;
    Ok(report.success)
}

fn replay(a: ReplayArgs) -> Result<bool> {
    let ep = bind(&load_one(&a.root, &a.episode)?)?;
    let log: ActionLog = read_json(&a.root.resolve(&a.log))?;
    let out = replay_log(ep, &log)?;
    print_json(&out.report, true)?;
    Ok(out.report.success)
}

fn validate(a: ValidateArgs) -> Result<bool> {
    let mut all_ok = true;
    for ep in load(&a.root, &a.episode)? {
        let s = validate_solvable(&ep);
        all_ok &= s.solvable;
        print_json(
            &serde_json::json!({ "id": ep.id, "solvable": s.solvable, "problems": s.problems }),
            false,
        )?;
    }
    Ok(all_ok)
}

/// Oracle that picks its episode from the harness greeting.
struct OracleByHello {
    episodes: HashMap<String, EpisodeConfig>,
    inner: Option<OraclePolicy>,
}

impl Policy for OracleByHello {
    fn start(&mut self, hello: &ProtocolMessage) {
        self.inner = match hello {
            ProtocolMessage::Hello {
                episode: Some(e), ..
            } => self
                .episodes
                .get(&e.id)
                .and_then(|cfg| cfg.bind().ok())
                .map(|b| OraclePolicy::new(Arc::new(b))),
            _ => None,
        };
        if self.inner.is_none() {
            eprintln!("oracle: episode not among those loaded; stopping");
        }
    }

    fn act(&mut self, phase: Phase, obs: &Observation) -> Action {
        match &mut self.inner {
            Some(p) => p.act(phase, obs),
            None => Action::Stop,
        }
    }
}

fn agent(a: AgentArgs) -> Result<bool> {
    let timeout = Duration::from_secs_f64(a.timeout.max(0.001));
    let mut policy: Box<dyn Policy> = match &a.policy {
        Endpoint::Random(seed) => Box::new(RandomPolicy::new(*seed)),
        Endpoint::Oracle => {
            let Some(path) = &a.episode else {
                bail!("the oracle needs --episode")
            };
            let episodes = load(&a.root, path)?
                .into_iter()
                .map(|e| (e.id.clone(), e))
                .collect();
            Box::new(OracleByHello {
                episodes,
                inner: None,
            })
        }
        other => bail!("`{other}` is not an agent policy; use random[:SEED] or oracle"),
    };
    let Some(addr) = &a.connect else {
        let mut link = StreamLink::new(io::stdin(), io::stdout());
        serve_policy(&mut policy, &mut link, timeout)?;
        return Ok(true);
    };
    // Serve one episode per connection until the harness goes away.
    let mut wait = timeout;
    let mut served = false;
    loop {
        let Some(stream) = connect_within(addr, wait) else {
            return Ok(true);
        };
        let mut link = StreamLink::from_tcp(stream)?;
        match serve_policy(&mut policy, &mut link, timeout) {
            Ok(_) => {}
            // A harness that finished its batch may accept and then exit.
            Err(ClientError::Link(LinkError::Closed | LinkError::Io(_))) if served => {
                return Ok(true)
            }
            Err(e) => return Err(e.into()),
        }
        served = true;
        wait = Duration::from_secs(2);
    }
}

fn connect_within(addr: &str, wait: Duration) -> Option<TcpStream> {
    let deadline = Instant::now() + wait;
    loop {
        if let Ok(s) = TcpStream::connect(addr) {
            return Some(s);
        }
        if Instant::now() >= deadline {
            return None;
        }
        thread::sleep(Duration::from_millis(20));
    }
}
