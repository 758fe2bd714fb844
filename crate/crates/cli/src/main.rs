use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, anyhow};
use clap::{Parser, Subcommand};
use granular_cli::Failure;
use granular_cli::config::{ExperimentConfig, SEED_ENV};
use granular_cli::runner::{execute, read_trajectory, write_outputs};
use granular_cli::verify::{self, Fault};
use granular_core::moments::{classify_cooling, haff_fit};

#[derive(Parser)]
#[command(name = "granular", version, about = "Granular-gas experiments and verification batteries")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory.csv, moments.csv and summary.json.
    Run {
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        config: Option<PathBuf>,
        /// Bundled scenario name.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's `output_dir`, else `out/<scenario>`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an acceptance battery and print a pass/fail table.
    Verify {
        /// collision-identities, geometry-lemmas, orlicz-appendix, moments-povzner, cooling-criteria or all.
        suite: String,
        /// Stop at the first failing criterion.
        #[arg(long)]
        fail_fast: bool,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// Print the cooling verdict for a configuration without simulating.
    Classify {
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Fit E(t) = E₀ (1 + t/τ)^{-κ} to the `t` and `E` columns of a CSV.
    Fit { csv: PathBuf },
}

fn load(config: Option<PathBuf>, scenario: Option<String>) -> Result<ExperimentConfig, Failure> {
    match (config, scenario) {
        (Some(p), _) => ExperimentConfig::load(&p),
        (None, Some(s)) => ExperimentConfig::bundled(&s),
        (None, None) => Err(anyhow!("pass --config or --scenario")),
    }
    .map_err(Failure::Config)
}

fn main_inner(cli: Cli) -> Result<(), Failure> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Run { config, scenario, seed, out } => {
            let mut cfg = load(config, scenario)?;
            let env = std::env::var(SEED_ENV).ok();
            let seed = cfg.resolve_seed(seed, env.as_deref()).map_err(Failure::Config)?;
            let dir = out
                .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out").join(&cfg.scenario));
            if !quiet {
                eprintln!("running {} (seed {seed}, n = {}, horizon {})", cfg.scenario, cfg.n, cfg.horizon);
            }
            let output = execute(&cfg, seed)?;
            write_outputs(&dir, &output).map_err(Failure::Numeric)?;
            if !quiet {
                let s = &output.summary;
                println!("verdict: {} ({})", s.verdict.verdict, s.verdict.rationale);
                println!("final E = {:.6e} at t = {}", s.final_energy, s.final_time);
                if let Some(h) = &s.haff_fit {
                    println!("Haff fit: kappa = {:.4}, tau = {:.4}", h.kappa, h.tau);
                }
                println!("wrote {}", dir.display());
            }
            Ok(())
        }
        Command::Verify { suite, fail_fast, inject_fault } => {
            let ids = verify::suite(&suite).map_err(Failure::Config)?;
            let mut first_failure = None;
            for id in ids {
                let r = verify::run_criterion(id, inject_fault);
                if !quiet || !r.passed {
                    println!("{r}");
                }
                if !r.passed && !r.soft && first_failure.is_none() {
                    first_failure = Some(r);
                    if fail_fast {
                        break;
                    }
                }
            }
            match first_failure {
                None => Ok(()),
                Some(r) => {
                    let ce = r.counterexample.clone().unwrap_or_else(|| serde_json::to_value(&r.checks).unwrap_or_default());
                    println!("counterexample: {}", serde_json::to_string(&ce).unwrap_or_default());
                    Err(Failure::Verify(anyhow!("criterion {} ({}) failed", r.id, r.name)))
                }
            }
        }
        Command::Classify { config, scenario } => {
            let cfg = load(config, scenario)?;
            let kernel = cfg.kernel().map_err(Failure::Config)?;
            let v = classify_cooling(&kernel, cfg.tail(), cfg.initial_energy).map_err(|e| Failure::Config(anyhow!(e)))?;
            match v.bound {
                Some(b) => println!("{} ({}) bound = {b:.16e}", v.verdict.tag(), v.rationale.tag()),
                None => println!("{} ({})", v.verdict.tag(), v.rationale.tag()),
            }
            Ok(())
        }
        Command::Fit { csv } => {
            let text = std::fs::read_to_string(&csv)
                .with_context(|| format!("reading {}", csv.display()))
                .map_err(Failure::Config)?;
            let (t, e) = read_trajectory(&text).map_err(Failure::Config)?;
            let (t, e): (Vec<f64>, Vec<f64>) = t.into_iter().zip(e).filter(|(_, e)| *e > 0.0).unzip();
            let fit = haff_fit(&t, &e).map_err(|e| Failure::Numeric(anyhow!(e)))?;
            println!("e0 = {:.16e}\ntau = {:.16e}\nkappa = {:.16e}\nresidual = {:.16e}", fit.e0, fit.tau, fit.kappa, fit.residual);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
