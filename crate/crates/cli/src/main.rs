//! Command-line front end: data ingestion, fit/test reporting, and the
//! simulation harness.

mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use corrtest::{
    all_methods, constrained_mle, estimate_power, estimate_type_i_error, Dependence, Error,
    SimConfig, SweepConfig, TestMethod,
};

use input::read_data_file;

#[derive(Parser)]
#[command(
    name = "corrtest",
    about = "Homogeneity tests for combined unilateral and bilateral binary data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit constrained and unconstrained MLEs from a CSV data file
    Fit(FitArgs),
    /// Run homogeneity tests on a CSV data file
    Test(TestArgs),
    /// Monte Carlo studies of type I error and power
    #[command(subcommand)]
    Simulate(SimulateCmd),
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with header group,m0,m1,m2,n0,n1
    path: PathBuf,
    /// Emit machine-readable JSON at full precision
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TestArgs {
    path: PathBuf,
    /// lr | wald | score | donner | all
    #[arg(long, default_value = "all")]
    method: String,
    /// Add a pairwise Wald test for two groups (1-based indices)
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pair: Option<Vec<usize>>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum SimulateCmd {
    /// Empirical type I error under a common proportion
    Alpha(AlphaArgs),
    /// Empirical power under unequal proportions
    Power(PowerArgs),
    /// Per-pair type I error for (pi0, rho0) drawn uniformly from (0,1)^2
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonSimArgs {
    /// Number of groups (validated against the size lists)
    #[arg(long)]
    g: Option<usize>,
    /// Bilateral subjects per group, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<u64>,
    /// Unilateral subjects per group, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
    /// Monte Carlo replicates
    #[arg(long)]
    reps: u64,
    /// Nominal level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// RNG seed (echoed in the report)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subset of tests: lr,wald,score,donner (default all)
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Also write the per-method CSV table to this path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AlphaArgs {
    #[command(flatten)]
    common: CommonSimArgs,
    /// Common proportion under the null
    #[arg(long)]
    pi0: f64,
    /// Intraclass correlation rho0 (R0 is derived)
    #[arg(long, conflicts_with = "r0")]
    rho0: Option<f64>,
    /// Dependence parameter R0, given directly
    #[arg(long = "R0")]
    r0: Option<f64>,
}

#[derive(Args)]
struct PowerArgs {
    #[command(flatten)]
    common: CommonSimArgs,
    /// Per-group proportions under the alternative, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    pi: Vec<f64>,
    /// Dependence parameter R, given directly
    #[arg(long = "R", conflicts_with = "rho")]
    r: Option<f64>,
    /// Intraclass correlation (R is derived at the first proportion)
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonSimArgs,
    /// Number of (pi0, rho0) pairs
    #[arg(long)]
    pairs: u64,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NegativeCount { .. }
            | Error::EmptyStudy
            | Error::EmptyGroup(_)
            | Error::InvalidConfig(_) => 2,
            _ => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<input::ParseError> for Failure {
    fn from(e: input::ParseError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Test(args) => cmd_test(args),
        Command::Simulate(cmd) => with_thread_pool(|| match cmd {
            SimulateCmd::Alpha(args) => cmd_alpha(args),
            SimulateCmd::Power(args) => cmd_power(args),
            SimulateCmd::Sweep(args) => cmd_sweep(args),
        }),
    }
}

/// Runs `body` inside a rayon pool sized by CORRTEST_THREADS (0 or unset:
/// library default).
fn with_thread_pool<T>(body: impl FnOnce() -> Result<T, Failure> + Send) -> Result<T, Failure>
where
    T: Send,
{
    let threads = match std::env::var("CORRTEST_THREADS") {
        Ok(raw) => raw
            .parse::<usize>()
            .map_err(|_| Failure::usage(format!("CORRTEST_THREADS must be an integer, got `{raw}`")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::usage(e.to_string()))?;
    pool.install(body)
}

fn cmd_fit(args: FitArgs) -> Result<(), Failure> {
    let file = read_data_file(&args.path)?;
    let con = constrained_mle(&file.study)?;
    let unc = corrtest::unconstrained_mle(&file.study)?;
    if args.json {
        println!("{}", report::fit_json(&file, &con, &unc)?);
    } else {
        print!("{}", report::fit_table(&file, &con, &unc));
    }
    Ok(())
}

fn parse_methods(raw: Option<&[String]>) -> Result<Vec<TestMethod>, Failure> {
    let Some(raw) = raw else {
        return Ok(all_methods());
    };
    raw.iter()
        .map(|s| match s.as_str() {
            "lr" => Ok(TestMethod::Lr),
            "wald" => Ok(TestMethod::Wald),
            "score" => Ok(TestMethod::Score),
            "donner" => Ok(TestMethod::DonnerAdjusted),
            other => Err(Failure::usage(format!(
                "unknown method `{other}` (expected lr, wald, score, donner)"
            ))),
        })
        .collect()
}

fn cmd_test(args: TestArgs) -> Result<(), Failure> {
    let file = read_data_file(&args.path)?;
    if file.study.g() < 2 {
        return Err(Failure::usage("need at least 2 groups"));
    }
    let methods = match args.method.as_str() {
        "all" => all_methods(),
        "lr" => vec![TestMethod::Lr],
        "wald" => vec![TestMethod::Wald],
        "score" => vec![TestMethod::Score],
        "donner" => vec![TestMethod::DonnerAdjusted],
        other => {
            return Err(Failure::usage(format!(
                "unknown method `{other}` (expected lr, wald, score, donner, all)"
            )))
        }
    };
    let mut results = Vec::new();
    for (_, res) in corrtest::run_selected(&file.study, &methods) {
        results.push(res?);
    }
    if let Some(pair) = &args.pair {
        let (i, j) = (pair[0], pair[1]);
        if i == 0 || j == 0 || i > file.study.g() || j > file.study.g() {
            return Err(Failure::usage(format!(
                "--pair indices are 1-based group numbers up to {}",
                file.study.g()
            )));
        }
        results.push(corrtest::pairwise_wald(&file.study, i - 1, j - 1)?);
    }
    if args.json {
        println!("{}", report::tests_json(&results)?);
    } else {
        print!("{}", report::tests_table(&file.labels, &results));
    }
    Ok(())
}

fn build_config(
    common: &CommonSimArgs,
    pi_true: Vec<f64>,
    dependence: Dependence,
) -> Result<SimConfig, Failure> {
    if let Some(g) = common.g {
        if g != common.m.len() {
            return Err(Failure::usage(format!(
                "--g {} does not match {} m-sizes",
                g,
                common.m.len()
            )));
        }
    }
    let config = SimConfig {
        m_sizes: common.m.clone(),
        n_sizes: common.n.clone(),
        pi_true,
        dependence,
        replicates: common.reps,
        alpha: common.alpha,
        seed: common.seed,
        methods: parse_methods(common.methods.as_deref())?,
    };
    config.validate()?;
    Ok(config)
}

fn emit_report(report: &corrtest::SimReport, out: Option<&PathBuf>) -> Result<(), Failure> {
    println!(
        "{}",
        serde_json::to_string_pretty(report).map_err(|e| Failure::numerical(e.to_string()))?
    );
    if let Some(path) = out {
        std::fs::write(path, report.to_csv())?;
    }
    Ok(())
}

fn cmd_alpha(args: AlphaArgs) -> Result<(), Failure> {
    let g = args.common.m.len();
    let dependence = match (args.rho0, args.r0) {
        (Some(rho), None) => Dependence::Rho(rho),
        (None, Some(r)) => Dependence::R(r),
        _ => return Err(Failure::usage("give exactly one of --rho0 and --R0")),
    };
    let config = build_config(&args.common, vec![args.pi0; g], dependence)?;
    let report = estimate_type_i_error(&config)?;
    emit_report(&report, args.common.out.as_ref())
}

fn cmd_power(args: PowerArgs) -> Result<(), Failure> {
    let dependence = match (args.r, args.rho) {
        (Some(r), None) => Dependence::R(r),
        (None, Some(rho)) => Dependence::Rho(rho),
        _ => return Err(Failure::usage("give exactly one of --R and --rho")),
    };
    let config = build_config(&args.common, args.pi.clone(), dependence)?;
    let report = estimate_power(&config)?;
    emit_report(&report, args.common.out.as_ref())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let config = SweepConfig {
        m_sizes: args.common.m.clone(),
        n_sizes: args.common.n.clone(),
        n_pairs: args.pairs,
        replicates: args.common.reps,
        alpha: args.common.alpha,
        seed: args.common.seed,
        methods: parse_methods(args.common.methods.as_deref())?,
    };
    if config.replicates == 0 {
        return Err(Failure::usage("replicates must be positive"));
    }
    let report = corrtest::sweep_uniform(&config)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "config": report.config,
            "infeasible_redraws": report.infeasible_redraws,
            "rows": report.rows.len(),
            "wall_ms": report.wall_ms,
        }))
        .map_err(|e| Failure::numerical(e.to_string()))?
    );
    match args.common.out.as_ref() {
        Some(path) => std::fs::write(path, report.to_csv())?,
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}
