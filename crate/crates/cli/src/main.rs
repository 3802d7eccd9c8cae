use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hyposel::games::{
    replay_dual, replay_primal, run_dual_game, run_primal_game, ArbitraryTestPlayer, DualAdversary, DualPlayer,
    GreedyDiameterAdversary, MaxEntropyDualPlayer, MaxEntropyPrimalPlayer, OracleAdversary, RandomDirectionAdversary,
};
use hyposel::harness::{
    brute_force_opt, generate_instance, read_instance, run_experiment_with, run_summary, write_csv, write_csv_file,
    write_instance, Execution, ExperimentConfig, InstanceKind,
};
use hyposel::model::{tv_distance, Distribution, HypothesisClass};
use hyposel::sampling::{OracleMode, SampleOracle};
use hyposel::selectors::{Algorithm, RefinedParams};

#[derive(Parser)]
#[command(name = "hyposel", version, about = "Agnostic hypothesis selection over finite domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one selector on an instance file or a generated instance.
    Select(SelectArgs),
    /// Play a primal or dual game, or replay a transcript.
    Game(GameArgs),
    /// Run an experiment grid and write per-trial CSV rows.
    Bench(BenchArgs),
    /// Run an experiment grid and report PASS/FAIL for its guarantee checks.
    Check(BenchArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance file (JSON with `domain_size`, `hypotheses`, `target`).
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Number of hypotheses of a generated instance.
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    domain_size: usize,
    #[arg(long, default_value_t = InstanceKind::RandomDirichlet)]
    kind: InstanceKind,
    /// Also write the instance used to this path.
    #[arg(long)]
    save_instance: Option<PathBuf>,
}

impl InstanceArgs {
    fn load(&self, seed: u64) -> Result<(HypothesisClass, Distribution)> {
        let inst = match &self.instance {
            Some(path) => read_instance(path).with_context(|| format!("reading {}", path.display()))?,
            None => generate_instance(seed, self.n, self.domain_size, self.kind)?,
        };
        if let Some(path) = &self.save_instance {
            write_instance(path, &inst.0, &inst.1)?;
        }
        Ok(inst)
    }
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = Algorithm::Select)]
    algo: Algorithm,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = OracleMode::Sampled)]
    mode: OracleMode,
    /// JSON file of refined-algorithm constants.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the run report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GameKind {
    Primal,
    Dual,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlayerKind {
    MaxEntropy,
    Arbitrary,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdversaryKind {
    Greedy,
    Random,
}

#[derive(Args)]
struct GameArgs {
    #[arg(long, value_enum, default_value_t = GameKind::Dual)]
    game: GameKind,
    /// Replay and validate this transcript instead of playing.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[command(flatten)]
    instance: InstanceArgs,
    /// Dual-game player.
    #[arg(long, value_enum, default_value_t = PlayerKind::MaxEntropy)]
    player: PlayerKind,
    /// Dual-game adversary.
    #[arg(long, value_enum, default_value_t = AdversaryKind::Greedy)]
    adversary: AdversaryKind,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Failure probability of the sampled primal adversary.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = OracleMode::Exact)]
    mode: OracleMode,
    #[arg(long, default_value_t = 100_000)]
    max_rounds: usize,
    /// Write the transcript here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config (JSON); command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Selector to run; repeat for several.
    #[arg(long)]
    algo: Vec<Algorithm>,
    #[arg(long)]
    mode: Option<OracleMode>,
    #[arg(long)]
    trials: Option<usize>,
    /// CSV output (bench) or run summary JSON (check); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run trials one after another instead of on the thread pool.
    #[arg(long)]
    sequential: bool,
}

fn default_config() -> ExperimentConfig {
    ExperimentConfig {
        master_seed: 0,
        n: 8,
        domain_size: 16,
        eps: 0.2,
        delta: 0.1,
        algorithms: vec![Algorithm::Yatracos, Algorithm::Basic, Algorithm::Select],
        trials: 10,
        instance_kind: InstanceKind::RandomDirichlet,
        params: RefinedParams::default(),
        oracle_mode: OracleMode::Exact,
        instances: None,
        record_timing: true,
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_select(args: SelectArgs) -> Result<bool> {
    let params: RefinedParams = match &args.config {
        Some(path) => serde_json::from_str(&read_text(path)?).context("parsing refined parameters")?,
        None => RefinedParams::default(),
    };
    let (class, target) = args.instance.load(args.seed)?;
    let mut oracle = SampleOracle::new(target.clone(), args.seed, args.mode);
    let report = args.algo.run(&class, &mut oracle, args.eps, args.delta, &params)?;
    let tv = tv_distance(&report.output, &target)?;
    let opt = brute_force_opt(&target, &class)?;
    let ok = tv <= args.algo.factor() * opt + args.eps + 1e-6;
    let mut json = serde_json::to_value(&report)?;
    json["tv_out"] = tv.into();
    json["opt"] = opt.into();
    json["guarantee_ok"] = ok.into();
    emit(&args.out, &format!("{}\n", serde_json::to_string_pretty(&json)?))?;
    Ok(ok)
}

fn cmd_game(args: GameArgs) -> Result<bool> {
    if let Some(path) = &args.replay {
        let text = read_text(path)?;
        let rounds = match args.game {
            GameKind::Dual => replay_dual(&text),
            GameKind::Primal => {
                let (class, _) = args.instance.load(args.seed)?;
                replay_primal(&text, &class)
            }
        };
        return match rounds {
            Ok(r) => {
                println!("PASS replay: {r} legal rounds");
                Ok(true)
            }
            Err(e) => {
                println!("FAIL replay: {e}");
                Ok(false)
            }
        };
    }
    match args.game {
        GameKind::Dual => {
            let n = match &args.instance.instance {
                Some(path) => read_instance(path)?.0.len(),
                None => args.instance.n,
            };
            let mut player: Box<dyn DualPlayer> = match args.player {
                PlayerKind::MaxEntropy => Box::new(MaxEntropyDualPlayer::new()),
                PlayerKind::Arbitrary => Box::new(ArbitraryTestPlayer),
            };
            let mut adversary: Box<dyn DualAdversary> = match args.adversary {
                AdversaryKind::Greedy => Box::new(GreedyDiameterAdversary),
                AdversaryKind::Random => Box::new(RandomDirectionAdversary::new(args.seed)),
            };
            let t = run_dual_game(n, args.eps, player.as_mut(), adversary.as_mut(), args.max_rounds)?;
            emit(&args.out, &t.to_text())?;
            eprintln!("{} rounds, universe emptied: {}", t.rounds, t.emptied);
            Ok(t.emptied)
        }
        GameKind::Primal => {
            let (class, target) = args.instance.load(args.seed)?;
            let oracle = SampleOracle::new(target, args.seed, args.mode);
            let mut player = MaxEntropyPrimalPlayer::new(&class, args.eps / 8.0);
            let mut adversary = OracleAdversary::new(oracle, args.delta);
            let t = run_primal_game(&class, args.eps, &mut player, &mut adversary, args.max_rounds)?;
            emit(&args.out, &t.to_text())?;
            eprintln!("{} rounds, finished: {}", t.rounds, t.finished);
            Ok(t.finished)
        }
    }
}

fn build_config(args: &BenchArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_json(&read_text(path)?)?,
        None => default_config(),
    };
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(e) = args.eps {
        cfg.eps = e;
    }
    if let Some(d) = args.delta {
        cfg.delta = d;
    }
    if !args.algo.is_empty() {
        cfg.algorithms = args.algo.clone();
    }
    if let Some(m) = args.mode {
        cfg.oracle_mode = m;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execution(args: &BenchArgs) -> Execution {
    if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn cmd_bench(args: BenchArgs) -> Result<bool> {
    let cfg = build_config(&args)?;
    let records = run_experiment_with(&cfg, execution(&args))?;
    match &args.out {
        Some(path) => write_csv_file(&records, path)?,
        None => write_csv(&records, std::io::stdout().lock())?,
    }
    let summary = run_summary(&cfg, &records);
    for c in &summary.checks {
        eprintln!("{}", c.line());
    }
    Ok(summary.all_passed)
}

fn cmd_check(args: BenchArgs) -> Result<bool> {
    let cfg = build_config(&args)?;
    let records = run_experiment_with(&cfg, execution(&args))?;
    let summary = run_summary(&cfg, &records);
    for c in &summary.checks {
        println!("{}", c.line());
    }
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(summary.all_passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Game(a) => cmd_game(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
