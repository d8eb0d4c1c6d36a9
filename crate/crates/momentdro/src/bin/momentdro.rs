//! Command-line front end: solve a problem file, test convexity of its
//! pieces, or run the portfolio simulation harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use momentdro::io::{ProblemFile, ResultFile};
use momentdro::portfolio::{
    simulate, write_rows_csv, DistributionSpec, PortfolioKind, SimulationConfig,
};
use momentdro::sos::{is_robust_sos_concave, is_sos_convex};
use momentdro::{run, CertificateKind, DriverOptions, Error};

#[derive(Parser)]
#[command(name = "momentdro", version, about = "Moment-SOS solver for distributionally robust optimization")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Last relaxation order to try.
    #[arg(long, global = true)]
    max_order: Option<u32>,
    /// Cap on the moment-extension order k1.
    #[arg(long, global = true)]
    max_k1: Option<u32>,
    /// Relative singular-value cutoff for numeric rank decisions.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol_rank: f64,
    /// Seed for every randomized ingredient; equal seeds give identical runs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Conic solver backend.
    #[arg(long, global = true, default_value = "clarabel")]
    solver: String,
    /// Write every conic program solved to this directory in the text
    /// interchange format.
    #[arg(long, global = true, value_name = "DIR")]
    dump_conic: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and print the result as JSON.
    Solve {
        /// Problem file (JSON).
        file: PathBuf,
    },
    /// Report which convexity certificates hold for a problem file.
    CheckConvexity {
        /// Problem file (JSON).
        file: PathBuf,
    },
    /// Portfolio experiment harness.
    Portfolio {
        #[command(subcommand)]
        command: PortfolioCommand,
    },
}

#[derive(Subcommand)]
enum PortfolioCommand {
    /// Run seeded simulations of the data-driven portfolio models and
    /// print an aggregated CSV row.
    Simulate(SimulateOpts),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Linear,
    Mv,
}

#[derive(Args)]
struct SimulateOpts {
    /// Portfolio model.
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Number of assets.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Samples per simulation (75% train the ambiguity set, 25% score).
    #[arg(long = "M", default_value_t = 400)]
    samples: usize,
    /// Moment degree of the ambiguity set.
    #[arg(long, default_value_t = 2)]
    d: u32,
    /// Number of independent simulations.
    #[arg(long, default_value_t = 10)]
    sims: usize,
    /// Batches for the box ambiguity construction.
    #[arg(long, default_value_t = 5)]
    batches: usize,
}

fn driver_options(g: &GlobalOpts) -> DriverOptions {
    DriverOptions {
        max_order: g.max_order,
        max_k1: g.max_k1,
        rank_tol: g.tol_rank,
        seed: g.seed,
        dump_dir: g.dump_conic.clone(),
        ..DriverOptions::default()
    }
}

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::Parse { .. }
        | Error::Semantic(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::DimensionMismatch { .. }
        | Error::DegreeOverflow { .. }
        | Error::Unsupported(_) => ExitCode::from(3),
        Error::Solver(_) | Error::Extraction(_) | Error::DimensionCap { .. } => ExitCode::from(4),
    }
}

fn cmd_solve(g: &GlobalOpts, file: &PathBuf) -> Result<ExitCode, Error> {
    let problem = ProblemFile::read(file)?.to_problem()?;
    let result = run(&problem, &driver_options(g))?;
    println!("{}", ResultFile::from_result(&result).to_json()?);
    let code = match result.certificate.kind {
        CertificateKind::LowerBoundOnly => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    };
    Ok(code)
}

fn cmd_check_convexity(file: &PathBuf) -> Result<ExitCode, Error> {
    let problem = ProblemFile::read(file)?.to_problem()?;
    let objective = is_sos_convex(&problem.f)?;
    let mut constraints = true;
    for ci in &problem.c {
        // X = { c >= 0 } is convex when each -c_i is SOS-convex
        constraints &= is_sos_convex(&ci.scale(-1.0))?;
    }
    let k_prime = problem.h.degree().div_ceil(2).max(1);
    let robust = is_robust_sos_concave(&problem.h, problem.n, problem.p, &problem.g, k_prime)?
        .is_certified();
    println!("objective sos-convex:        {objective}");
    println!("constraints sos-convex:      {constraints}");
    println!("robust sos-concave in x:     {robust}");
    Ok(ExitCode::SUCCESS)
}

fn table1_specs(n: usize) -> Vec<DistributionSpec> {
    (1..=n)
        .map(|i| DistributionSpec::TruncatedNormal {
            mean: 0.05 * i as f64,
            var: 0.03 * i as f64,
            a: -1.0,
            b: 1.0,
        })
        .collect()
}

fn cmd_simulate(g: &GlobalOpts, opts: &SimulateOpts) -> Result<ExitCode, Error> {
    let cfg = SimulationConfig {
        model: match opts.model {
            ModelArg::Linear => PortfolioKind::Linear,
            ModelArg::Mv => PortfolioKind::MeanVariance,
        },
        specs: table1_specs(opts.n),
        samples: opts.samples,
        degree: opts.d,
        sims: opts.sims,
        seed: g.seed,
        batches: opts.batches,
        support: (-1.0, 1.0),
    };
    let row = simulate(&cfg)?;
    let stdout = std::io::stdout();
    write_rows_csv(stdout.lock(), &[row])?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.global.solver != "clarabel" {
        eprintln!("error: unknown solver backend `{}`", cli.global.solver);
        return ExitCode::from(3);
    }
    let outcome = match &cli.command {
        Command::Solve { file } => cmd_solve(&cli.global, file),
        Command::CheckConvexity { file } => cmd_check_convexity(file),
        Command::Portfolio {
            command: PortfolioCommand::Simulate(opts),
        } => cmd_simulate(&cli.global, opts),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_for(&err)
        }
    }
}
