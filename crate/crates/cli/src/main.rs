use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use covrisk_core::costmap::read_label_stack;
use covrisk_core::fixtures::AssignmentDemoFixture;
use covrisk_core::harness::{
    environment_side, generate_trial_world, run_assignment_demo_on, write_monte_carlo, AssignmentDemoResult,
    OutputFormat,
};
use covrisk_core::team::coverage_value;
use covrisk_core::{fixtures, run_monte_carlo, BenchConfig, Cell, Error, LabelCosts, Planner, Robot, Target};

#[derive(Parser)]
#[command(name = "covrisk", version, about = "Multi-robot coverage planning and risk-aware path assignment")]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Output directory. Results go to stdout when omitted.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Planner(s): random, optimal, greedy, decentralized, sequential.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_planner)]
    planner: Vec<Planner>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a coverage world: density field, targets and robots.
    GenWorld {
        #[arg(long, default_value_t = 4)]
        robots: usize,
        /// Fraction of cells holding a target.
        #[arg(long)]
        density: Option<f64>,
    },
    /// Plan one joint action on a world file (or a freshly generated world).
    PlanCoverage {
        #[arg(long, value_name = "JSON", conflicts_with = "robots")]
        world: Option<PathBuf>,
        #[arg(long)]
        robots: Option<usize>,
    },
    /// Risk-aware assignment of vehicles to demands over candidate paths.
    AssignPaths {
        /// Problem description; the built-in corridor fixture is used when omitted.
        #[arg(long, value_name = "JSON")]
        problem: Option<PathBuf>,
        /// Risk level in (0, 1].
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
    },
    /// Monte Carlo coverage benchmark across planners and team sizes.
    BenchCoverage {
        #[arg(long, value_delimiter = ',')]
        robots: Vec<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Assignment demo on the corridor fixture at every configured risk level.
    BenchAssignment,
}

fn parse_planner(s: &str) -> Result<Planner, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A generated coverage world as written by `gen-world`.
#[derive(Serialize, Deserialize)]
struct WorldFile {
    seed: u64,
    side: usize,
    robots: Vec<Robot>,
    targets: Vec<Target>,
}

/// Problem file for `assign-paths`.
#[derive(Deserialize)]
struct ProblemFile {
    /// Binary label stack, relative to the problem file.
    label_stack: PathBuf,
    /// Per-class traversal cost; `null` marks an impassable class.
    label_costs: LabelCosts,
    vehicles: Vec<(usize, Cell)>,
    demands: Vec<(usize, Cell)>,
    lambdas: Option<Vec<f64>>,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io(PathBuf, io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Capacity { .. }) => 3,
            CliError::Core(Error::Io { .. }) | CliError::Io(..) => 1,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

struct Ctx {
    config: BenchConfig,
    out: Option<PathBuf>,
    format: OutputFormat,
}

impl Ctx {
    fn from_cli(cli: &Cli) -> CliResult<Self> {
        let mut config = match &cli.config {
            Some(path) => BenchConfig::load(path)?,
            None => BenchConfig::default(),
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if !cli.planner.is_empty() {
            config.planners = cli.planner.clone();
        }
        if let Some(f) = cli.format {
            config.format = f.into();
        }
        if cli.out.is_some() {
            config.output_dir = cli.out.clone();
        }
        Ok(Ctx { out: config.output_dir.clone(), format: config.format, config })
    }

    fn planner(&self) -> Planner {
        self.config.planners.first().copied().unwrap_or(Planner::Greedy)
    }

    /// Writes `body` to `<out>/<stem>.<ext>` or to stdout.
    fn emit(&self, stem: &str, body: &str) -> CliResult {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.clone(), e))?;
                let ext = match self.format {
                    OutputFormat::Csv => "csv",
                    OutputFormat::Json => "json",
                };
                let path = dir.join(format!("{stem}.{ext}"));
                fs::write(&path, body).map_err(|e| CliError::Io(path.clone(), e))?;
                eprintln!("wrote {}", path.display());
                Ok(())
            }
            None => {
                let mut stdout = io::stdout().lock();
                stdout.write_all(body.as_bytes()).map_err(|e| CliError::Io("<stdout>".into(), e))
            }
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

fn to_csv<F>(header: &[&str], fill: F) -> CliResult<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(Error::from)?;
    fill(&mut w).map_err(Error::from)?;
    let bytes = w.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn gen_world(ctx: &Ctx, robots: usize, density: Option<f64>) -> CliResult {
    let density = density.unwrap_or(ctx.config.density);
    if robots == 0 {
        return Err(Error::Input("robots must be at least 1".into()).into());
    }
    let world = generate_trial_world(robots, density, ctx.config.seed)?;
    let file =
        WorldFile { seed: world.seed, side: environment_side(robots), robots: world.robots, targets: world.targets };
    let body = match ctx.format {
        OutputFormat::Json => to_json(&file)?,
        OutputFormat::Csv => to_csv(&["kind", "id", "x", "y"], |w| {
            for r in &file.robots {
                w.serialize(("robot", r.id, r.position.x, r.position.y))?;
            }
            for t in &file.targets {
                w.serialize(("target", t.id, t.position.x, t.position.y))?;
            }
            Ok(())
        })?,
    };
    ctx.emit("world", &body)
}

#[derive(Serialize)]
struct PlanOutput {
    planner: Planner,
    seed: u64,
    coverage: usize,
    runtime_ms: f64,
    actions: Vec<PlannedAction>,
}

#[derive(Serialize)]
struct PlannedAction {
    robot: usize,
    action: usize,
    kind: String,
}

fn plan_coverage(ctx: &Ctx, world: Option<&Path>, robots: Option<usize>) -> CliResult {
    let file = match world {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
            serde_json::from_str::<WorldFile>(&text).map_err(Error::from)?
        }
        None => {
            let n = robots.unwrap_or(4);
            let w = generate_trial_world(n, ctx.config.density, ctx.config.seed)?;
            WorldFile { seed: w.seed, side: environment_side(n), robots: w.robots, targets: w.targets }
        }
    };
    let planner = ctx.planner();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
    let (joint, elapsed) = planner.plan_timed(&file.robots, &file.targets, ctx.config.optimal_cap, &mut rng)?;
    let coverage = coverage_value(&joint, &file.robots, &file.targets)?;
    let actions = joint
        .choice
        .iter()
        .map(|(&robot, &action)| {
            let kind = file
                .robots
                .iter()
                .find(|r| r.id == robot)
                .and_then(|r| r.actions.get(action))
                .map(|a| format!("{:?}", a.kind).to_lowercase())
                .unwrap_or_default();
            PlannedAction { robot, action, kind }
        })
        .collect();
    let out = PlanOutput { planner, seed: ctx.config.seed, coverage, runtime_ms: elapsed.as_secs_f64() * 1e3, actions };
    eprintln!("{planner}: {coverage} targets covered");
    let body = match ctx.format {
        OutputFormat::Json => to_json(&out)?,
        OutputFormat::Csv => to_csv(&["robot", "action", "kind"], |w| {
            out.actions.iter().try_for_each(|a| w.serialize((a.robot, a.action, &a.kind)))
        })?,
    };
    ctx.emit("plan", &body)
}

fn load_problem(path: &Path) -> CliResult<(AssignmentDemoFixture, Option<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let problem: ProblemFile = serde_json::from_str(&text).map_err(Error::from)?;
    let stack_path = path.parent().unwrap_or(Path::new(".")).join(&problem.label_stack);
    let reader = File::open(&stack_path).map_err(|e| CliError::Io(stack_path.clone(), e))?;
    let map = read_label_stack(BufReader::new(reader), problem.label_costs)?;
    Ok((AssignmentDemoFixture { map, vehicles: problem.vehicles, demands: problem.demands }, problem.lambdas))
}

fn assignment_csv(result: &AssignmentDemoResult) -> CliResult<String> {
    to_csv(&["alpha", "tau_star", "H_hat", "i", "j", "k", "lambda", "mean_efficiency"], |w| {
        for run in &result.runs {
            for p in &run.selected {
                w.serialize((
                    run.alpha,
                    run.assignment.tau_star,
                    run.assignment.h_hat,
                    p.triple.vehicle,
                    p.triple.demand,
                    p.triple.path,
                    p.lambda,
                    p.efficiency.mean(),
                ))?;
            }
        }
        Ok(())
    })
}

fn assign_paths(ctx: &Ctx, problem: Option<&Path>, alpha: f64) -> CliResult {
    let mut config = ctx.config.clone();
    let fixture = match problem {
        Some(path) => {
            let (fixture, lambdas) = load_problem(path)?;
            if let Some(l) = lambdas {
                config.assignment.lambdas = l;
            }
            fixture
        }
        None => fixtures::assignment_demo(),
    };
    config.assignment.alphas = vec![alpha];
    let result = run_assignment_demo_on(&fixture, &config)?;
    let body = match ctx.format {
        OutputFormat::Json => to_json(&result.runs[0])?,
        OutputFormat::Csv => assignment_csv(&result)?,
    };
    ctx.emit("assignment", &body)
}

fn bench_coverage(ctx: &Ctx, robots: &[usize], trials: Option<usize>) -> CliResult {
    let mut config = ctx.config.clone();
    if !robots.is_empty() {
        config.robot_counts = robots.to_vec();
    }
    if let Some(t) = trials {
        config.trials = t;
    }
    config.validate()?;
    let result = run_monte_carlo(&config)?;
    match &ctx.out {
        Some(dir) => {
            for path in write_monte_carlo(&result, dir, ctx.format)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        None => {
            let body = match ctx.format {
                OutputFormat::Csv => result.table.to_csv()?,
                OutputFormat::Json => result.table.to_json()? + "\n",
            };
            ctx.emit("coverage_summary", &body)
        }
    }
}

fn bench_assignment(ctx: &Ctx) -> CliResult {
    let result = run_assignment_demo_on(&fixtures::assignment_demo(), &ctx.config)?;
    let body = match ctx.format {
        OutputFormat::Json => to_json(&result)?,
        OutputFormat::Csv => assignment_csv(&result)?,
    };
    ctx.emit("assignment_demo", &body)
}

fn run(cli: Cli) -> CliResult {
    let ctx = Ctx::from_cli(&cli)?;
    match &cli.command {
        Command::GenWorld { robots, density } => gen_world(&ctx, *robots, *density),
        Command::PlanCoverage { world, robots } => plan_coverage(&ctx, world.as_deref(), *robots),
        Command::AssignPaths { problem, alpha } => assign_paths(&ctx, problem.as_deref(), *alpha),
        Command::BenchCoverage { robots, trials } => bench_coverage(&ctx, robots, *trials),
        Command::BenchAssignment => bench_assignment(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
