use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lbsim::harness::exp::{run_exp1_with_workers, run_exp2_with_workers, run_scenario};
use lbsim::harness::{emit_csv, Comparison, ExperimentSpec, DEFAULT_SEEDS};
use lbsim::{Error, PolicyKind, Scenario};

#[derive(Parser)]
#[command(name = "lbsim", version, about = "802.11 load-balancing and SNR-guarded handoff simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Association policy: strongest-snr, lba or snr-lba
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// Load-balancing criterion β
    #[arg(long)]
    beta: Option<f64>,
    /// Simulated seconds per run
    #[arg(long)]
    duration: Option<f64>,
    /// Worker threads for sweeps (defaults to all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and print per-station QoS rows
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// QoS versus video-link SNR and background load
    Exp1 {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        snr: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        load: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Unbalanced vs LBA vs SNR-guarded LBA across target-AP SNRs
    Exp2 {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        snr: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn load(path: &Path, o: &Overrides) -> Result<Scenario, Error> {
    let mut sc = Scenario::from_file(path)?;
    if let Some(p) = o.policy {
        sc.policy.kind = p;
    }
    if let Some(b) = o.beta {
        sc.policy.beta = b;
    }
    if let Some(d) = o.duration {
        sc.sim.duration_s = d;
    }
    sc.validate()?;
    Ok(sc)
}

fn seeds_or_default(seeds: Vec<u64>) -> Vec<u64> {
    if seeds.is_empty() {
        DEFAULT_SEEDS.to_vec()
    } else {
        seeds
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { scenario, seed, out, overrides } => {
            let sc = load(&scenario, &overrides)?;
            let rows = run_scenario(&sc, seed.unwrap_or(sc.sim.seed))?;
            write_out(out.as_deref(), &emit_csv(&rows))
        }
        Command::Exp1 { scenario, snr, load: loads, seeds, out, overrides } => {
            let sc = load(&scenario, &overrides)?;
            let spec = ExperimentSpec {
                base: sc,
                snr_db: snr,
                load_kbps: loads,
                seeds: seeds_or_default(seeds),
                comparison: Comparison::None,
            };
            let rows = run_exp1_with_workers(&spec, overrides.jobs)?;
            write_out(Some(&out), &emit_csv(&rows))
        }
        Command::Exp2 { scenario, snr, seeds, out, overrides } => {
            let sc = load(&scenario, &overrides)?;
            let spec = ExperimentSpec {
                base: sc,
                snr_db: snr,
                load_kbps: Vec::new(),
                seeds: seeds_or_default(seeds),
                comparison: Comparison::BalancedVsUnbalanced,
            };
            let rows = run_exp2_with_workers(&spec, overrides.jobs)?;
            write_out(Some(&out), &emit_csv(&rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Scenario(_) | Error::Spec(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
