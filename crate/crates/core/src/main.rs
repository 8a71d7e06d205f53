use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use apnet::analysis::{closed_loop_matrix, f_matrix};
use apnet::graph::{algebraic_connectivity, laplacian};
use apnet::layout::build_derived;
use apnet::linalg::{general_eigenvalues, symmetric_eigendecomposition};
use apnet::scenario::{load_scenario, load_scenario_with, run, Overrides};
use apnet::verify::{run_suite, Suite};
use apnet::Error;

#[derive(Parser)]
#[command(name = "apnet", version, about = "Active-passive consensus network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectory, certificate and summary.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t-final")]
        t_final: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Run the randomized property suite.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::Quick)]
        suite: SuiteArg,
    },
    /// Print lambda2, lambda_min(F) and the closed-loop eigenvalues.
    Spectrum { scenario: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Quick,
    Full,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            dt,
            t_final,
            alpha,
            gamma,
        } => {
            let overrides = Overrides {
                dt,
                t_final,
                alpha,
                gamma,
            };
            load_scenario_with(&scenario, &overrides)
                .and_then(|s| run(&s, &out))
                .map(|(summary, _)| {
                    println!("{summary}");
                    ExitCode::SUCCESS
                })
        }
        Command::Verify { suite } => {
            let suite = match suite {
                SuiteArg::Quick => Suite::Quick,
                SuiteArg::Full => Suite::Full,
            };
            let report = run_suite(suite);
            println!("{report}");
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Spectrum { scenario } => spectrum(&scenario),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code())
    })
}

fn spectrum(path: &std::path::Path) -> Result<ExitCode, Error> {
    let s = load_scenario(path)?;
    let l = laplacian(&s.graph);
    let f = f_matrix(&l, &build_derived(&s.inputs)?);
    println!("lambda2        {}", algebraic_connectivity(&l)?);
    println!("lambda_min(F)  {}", symmetric_eigendecomposition(&f)?.eigenvalues[0]);
    println!("closed-loop eigenvalues (alpha = {}, gamma = {}):", s.params.alpha, s.params.gamma);
    for z in general_eigenvalues(&closed_loop_matrix(&l, &f, s.params.alpha, s.params.gamma))? {
        println!("  {:+.12e} {:+.12e}i", z.re, z.im);
    }
    Ok(ExitCode::SUCCESS)
}
