//! Command-line interface. Every subcommand writes to the given sink and is a
//! deterministic function of its flags and seed.

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use qefg::angelgame::{run_batch, AngelStrategySpec, DevilPolicySpec, MatchConfig};
use qefg::equilibrium::{check_theorem1, find_nash, StrategySpace};
use qefg::gametree::{builders, QuantumGame};
use qefg::interference::{
    annihilating_partner, classical_two_step, first_step, grover_game, quantum_two_step, GroverInstance, TwoStageSystem,
};
use qefg::qsim::{RandomSource, UnitaryMatrix};
use qefg::walker::{position_distribution, step, Boundary, CoinMatrix, WalkerConfig, WalkerState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "qefg", version, about = "Quantum extensive-form games and the quantum Angel problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Small worked demonstrations.
    #[command(subcommand)]
    Demo(Demo),
    /// Position distribution of a power-k walk, as CSV `n,x,mu`.
    Walk(WalkArgs),
    /// Angel-vs-Devil batch matches.
    #[command(subcommand)]
    Angel(AngelCommand),
    /// Grid Nash equilibria of a game, as JSON.
    Nash(NashArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum Demo {
    /// Outcome probabilities of a two-step system, as CSV
    /// `outcome,first_step,classical,quantum`.
    TwoStage(TwoStageArgs),
    /// Grover success probability per iteration, as CSV `t,probability`.
    Grover(GroverArgs),
}

#[derive(Debug, Args)]
pub struct TwoStageArgs {
    /// Use the Hadamard gate for both steps.
    #[arg(long, conflicts_with_all = ["u1", "u2"])]
    pub hadamard: bool,
    /// First-step unitary as JSON rows of `[re, im]` pairs.
    #[arg(long)]
    pub u1: Option<String>,
    /// Second-step unitary; defaults to the adjoint of the first.
    #[arg(long, requires = "u1")]
    pub u2: Option<String>,
    /// Seed for a random first step when no unitary is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// With a random first step, draw an independent random second step
    /// instead of the adjoint.
    #[arg(long)]
    pub independent: bool,
}

#[derive(Debug, Args)]
pub struct GroverArgs {
    /// Search space size (a power of two).
    #[arg(long)]
    pub n: usize,
    /// Marked item.
    #[arg(long)]
    pub w: usize,
    /// Number of Grover iterations.
    #[arg(long)]
    pub iters: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CoinName {
    Identity,
    Grover,
    Dft,
    CyclicShift,
    /// `k = 1` only; the walk starts in `(|-1> + i|+1>)/√2`.
    HadamardType,
    /// A fresh seeded Haar-random coin every step.
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BoundaryName {
    Wall,
    Periodic,
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    /// Maximum hop length.
    #[arg(long)]
    pub k: usize,
    /// Number of sites.
    #[arg(long)]
    pub l: usize,
    /// Number of steps.
    #[arg(long)]
    pub steps: usize,
    #[arg(long, value_enum, default_value = "grover")]
    pub coin: CoinName,
    #[arg(long, value_enum, default_value = "wall")]
    pub boundary: BoundaryName,
    /// Starting site; defaults to the middle.
    #[arg(long)]
    pub x0: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum AngelCommand {
    /// Play a batch; prints a JSON summary and optionally writes transcripts.
    Run(AngelRunArgs),
}

#[derive(Debug, Args)]
pub struct AngelRunArgs {
    /// JSON file with `match`, `angel` and `devil` entries.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub matches: usize,
    /// Overrides the seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write one JSON transcript per line here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of an `angel run` config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngelRunConfig {
    #[serde(rename = "match")]
    pub match_config: MatchConfig,
    pub angel: AngelStrategySpec,
    pub devil: DevilPolicySpec,
}

#[derive(Debug, Args)]
pub struct NashArgs {
    /// A bundled game name or a path to a game JSON file.
    #[arg(long)]
    pub game: String,
    /// Grid points per Euler angle.
    #[arg(long)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub eps: f64,
    /// Also check every equilibrium against its subgames.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "QEFG_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Seconds of inactivity before a session is dropped.
    #[arg(long, default_value_t = 1800)]
    pub idle_timeout: u64,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Demo(Demo::TwoStage(a)) => two_stage(a, out),
        Command::Demo(Demo::Grover(a)) => grover(a, out),
        Command::Walk(a) => walk(a, out),
        Command::Angel(AngelCommand::Run(a)) => angel_run(a, out),
        Command::Nash(a) => nash(a, out),
        Command::Serve(a) => {
            tracing_subscriber::fmt()
                .with_writer(std::io::stderr)
                .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
                .init();
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::service::serve(a.port, Duration::from_secs(a.idle_timeout)))
        }
    }
}

fn parse_unitary(text: &str) -> anyhow::Result<UnitaryMatrix> {
    let u: UnitaryMatrix = serde_json::from_str(text).context("unitary must be JSON rows of [re, im] pairs")?;
    if u.dim() != 2 {
        bail!("expected a 2x2 unitary, got {0}x{0}", u.dim());
    }
    Ok(u)
}

fn two_stage(a: TwoStageArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let (u1, u2) = if a.hadamard {
        (UnitaryMatrix::hadamard(), UnitaryMatrix::hadamard())
    } else if let Some(text) = &a.u1 {
        let u1 = parse_unitary(text)?;
        let u2 = match &a.u2 {
            Some(t) => parse_unitary(t)?,
            None => annihilating_partner(&u1),
        };
        (u1, u2)
    } else {
        let mut rng = RandomSource::new(a.seed);
        let u1 = UnitaryMatrix::random(2, &mut rng)?;
        let u2 = if a.independent { UnitaryMatrix::random(2, &mut rng)? } else { annihilating_partner(&u1) };
        (u1, u2)
    };
    let sys = TwoStageSystem::new(u1, u2)?;
    let f = first_step(&sys);
    let cl = classical_two_step(&sys);
    let q = quantum_two_step(&sys);
    writeln!(out, "outcome,first_step,classical,quantum")?;
    writeln!(out, "0,{:.12},{:.12},{:.12}", f.0, cl.0, q.0)?;
    writeln!(out, "1,{:.12},{:.12},{:.12}", f.1, cl.1, q.1)?;
    Ok(())
}

fn grover(a: GroverArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let trace = grover_game(&GroverInstance::new(a.n, a.w, a.iters)?)?;
    writeln!(out, "t,probability")?;
    for (t, p) in trace.iter().enumerate() {
        writeln!(out, "{t},{p:.12}")?;
    }
    Ok(())
}

fn walk(a: WalkArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let boundary = match a.boundary {
        BoundaryName::Wall => Boundary::Wall,
        BoundaryName::Periodic => Boundary::Periodic,
    };
    let x0 = a.x0.unwrap_or(a.l / 2);
    let cfg = match a.coin {
        CoinName::HadamardType => {
            if a.k != 1 {
                bail!("the hadamard-type coin needs --k 1");
            }
            let h = std::f64::consts::FRAC_1_SQRT_2;
            WalkerConfig::new(1, a.l, boundary, x0, vec![Complex64::new(h, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, h)])?
        }
        _ => WalkerConfig::localized(a.k, a.l, boundary, x0)?,
    };
    let mut rng = RandomSource::new(a.seed);
    let fixed = match a.coin {
        CoinName::Identity => Some(CoinMatrix::identity(a.k)),
        CoinName::Grover => Some(CoinMatrix::grover(a.k)),
        CoinName::Dft => Some(CoinMatrix::dft(a.k)),
        CoinName::CyclicShift => Some(CoinMatrix::cyclic_shift(a.k)),
        CoinName::HadamardType => Some(CoinMatrix::hadamard_type()),
        CoinName::Random => None,
    };
    let id = UnitaryMatrix::identity(cfg.coin_dim());
    let mut s = WalkerState::initial(&cfg)?;
    writeln!(out, "n,x,mu")?;
    for n in 0..=a.steps {
        if n > 0 {
            let coin = fixed.clone().unwrap_or_else(|| CoinMatrix::random(a.k, &mut rng));
            s = step(&s, &cfg, &coin, &id)?;
        }
        for (x, mu) in position_distribution(&s).iter().enumerate() {
            writeln!(out, "{n},{x},{mu:.12}")?;
        }
    }
    Ok(())
}

fn angel_run(a: AngelRunArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut run: AngelRunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    if let Some(seed) = a.seed {
        run.match_config.seed = seed;
    }
    let (records, summary) = run_batch(&run.match_config, &run.angel, &run.devil, a.matches)?;
    if let Some(path) = &a.out {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
        for r in &records {
            serde_json::to_writer(&mut file, r)?;
            writeln!(file)?;
        }
        file.flush()?;
    }
    serde_json::to_writer_pretty(&mut *out, &summary)?;
    writeln!(out)?;
    Ok(())
}

fn load_game(name: &str) -> anyhow::Result<QuantumGame> {
    if let Some(game) = builders::bundled(name) {
        return Ok(game?);
    }
    let text = std::fs::read_to_string(name)
        .with_context(|| format!("{name:?} is neither a bundled game ({}) nor a readable file", builders::BUNDLED.join(", ")))?;
    Ok(QuantumGame::from_json(&text)?)
}

#[derive(Serialize)]
struct NashOutput {
    game: String,
    grid: usize,
    epsilon: f64,
    count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    subgame_checks_passed: Option<usize>,
    equilibria: Vec<qefg::equilibrium::EquilibriumReport>,
}

fn nash(a: NashArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let game = load_game(&a.game)?;
    let space = StrategySpace::new(a.grid)?;
    let equilibria = find_nash(&game, &space, a.eps)?;
    let subgame_checks_passed = if a.check {
        let mut passed = 0;
        for r in &equilibria {
            passed += usize::from(check_theorem1(&game, r, &space, a.eps)?.holds);
        }
        Some(passed)
    } else {
        None
    };
    let report = NashOutput {
        game: game.name().unwrap_or(&a.game).to_string(),
        grid: a.grid,
        epsilon: a.eps,
        count: equilibria.len(),
        subgame_checks_passed,
        equilibria,
    };
    serde_json::to_writer(&mut *out, &report)?;
    writeln!(out)?;
    Ok(())
}
