//! Thin command-line front end over the library: runs sweeps, prints cost
//! reports, regressions and the fast-vs-reference verification suite.
//!
//! Exit codes: 0 success, 1 configuration error, 2 verification failure,
//! 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use convprim::bench::{
    self, load_plan, regress, run_experiment, run_sweep, verify_bitexact, ExperimentPlan,
    FixedParams, RegressionX, SweepConfig,
};
use convprim::cost::cost;
use convprim::instrument::ExecPath;
use convprim::layer::PrimitiveKind;
use convprim::Error;

#[derive(Parser)]
#[command(name = "bench", about = "Quantized convolution primitive benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one built-in experiment for one primitive and path.
    Run {
        /// Experiment id, 1..=5.
        #[arg(long)]
        experiment: u32,
        /// standard | grouped | dwsep | shift | add
        #[arg(long)]
        primitive: String,
        /// ref | fast
        #[arg(long)]
        path: String,
        #[arg(long, default_value_t = 50)]
        repeats: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full grid described by a TOML plan file.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ordinary least squares over a benchmark CSV.
    Regress {
        #[arg(long = "in")]
        input: PathBuf,
        /// macs | latency
        #[arg(long)]
        x: String,
        /// latency (the only supported response)
        #[arg(long, default_value = "latency")]
        y: String,
    },
    /// Print the cost report for one layer configuration.
    Cost {
        /// standard | grouped | dwsep | shift | add
        #[arg(long)]
        kind: String,
        #[arg(long)]
        kernel: usize,
        /// Input (= output) spatial width.
        #[arg(long)]
        width: usize,
        #[arg(long = "in-ch")]
        in_ch: usize,
        #[arg(long = "out-ch")]
        out_ch: usize,
        #[arg(long, default_value_t = 1)]
        groups: usize,
    },
    /// Run the fast-vs-reference bit-exactness suite.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        cases: usize,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 3,
        _ => 1,
    }
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run { experiment, primitive, path, repeats, seed, out } => {
            let plan = ExperimentPlan::table2(experiment)?;
            let primitive = PrimitiveKind::parse(&primitive)?;
            let path = ExecPath::parse(&path)?;
            let (records, warnings) = run_experiment(&plan, primitive, path, repeats, seed)?;
            print_warnings(&warnings);
            bench::write_csv_file(&records, &out)?;
            println!("wrote {} records to {}", records.len(), out.display());
            Ok(0)
        }
        Command::Sweep { plan, out } => {
            let cfg: SweepConfig = load_plan(&plan)?;
            let (records, warnings) = run_sweep(&cfg)?;
            print_warnings(&warnings);
            bench::write_csv_file(&records, &out)?;
            println!("wrote {} records to {}", records.len(), out.display());
            Ok(0)
        }
        Command::Regress { input, x, y } => {
            if !matches!(y.as_str(), "latency" | "latency_mean_ns") {
                return Err(Error::Configuration(format!(
                    "only latency is supported as the response, got '{y}'"
                )));
            }
            let records = bench::read_csv_file(&input)?;
            let x = RegressionX::parse(&x)?;
            let fit = regress(&records, x)?;
            println!("n         = {}", records.iter().filter(|r| !r.is_skip()).count());
            println!("x         = {}", fit.x_name);
            println!("y         = {}", fit.y_name);
            println!("slope     = {:.6e}", fit.slope);
            println!("intercept = {:.6e}", fit.intercept);
            println!("r2        = {:.6}", fit.r2);
            Ok(0)
        }
        Command::Cost { kind, kernel, width, in_ch, out_ch, groups } => {
            let kind = PrimitiveKind::parse(&kind)?;
            let params = FixedParams {
                groups,
                kernel,
                input_width: width,
                in_channels: in_ch,
                out_channels: out_ch,
                ..FixedParams::default()
            };
            let spec = bench::build_spec(kind, &params)?;
            let report = cost(&spec)?;
            println!("primitive       = {kind}");
            println!("params          = {}", report.params);
            println!("theoretical MACs= {}", report.macs);
            println!(
                "param gain      = {} ({:.6})",
                report.param_gain,
                *report.param_gain.numer() as f64 / *report.param_gain.denom() as f64
            );
            println!(
                "complexity gain = {} ({:.6})",
                report.complexity_gain,
                *report.complexity_gain.numer() as f64 / *report.complexity_gain.denom() as f64
            );
            Ok(0)
        }
        Command::Verify { seed, cases } => {
            let report = verify_bitexact(seed, cases)?;
            for f in &report.failures {
                eprintln!("mismatch: {f}");
            }
            if report.passed() {
                println!("verify: {} cases, 0 mismatches: PASS", report.cases);
                Ok(0)
            } else {
                println!(
                    "verify: {} cases, {} mismatches: FAIL",
                    report.cases, report.mismatches
                );
                Ok(2)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
