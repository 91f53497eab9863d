use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use harnack_lab::cli::{run_experiment, ExperimentConfig, RunMode};
use harnack_lab::verify::CheckName;

/// Simulate SDEs with singular drift and check Harnack-type inequalities
/// by coupling and change of measure.
#[derive(Parser)]
#[command(name = "harnack-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `paths.bin` with raw simulated paths.
    #[arg(long)]
    dump_paths: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check integrability and ellipticity hypotheses.
    Hypotheses(Common),
    /// Estimate the Krylov constant from the default probe family.
    EstimateKappa(Common),
    /// Run only the configured checks with the given name.
    Verify {
        check: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the configured parameter sweeps.
    Sweep(Common),
    /// Run hypotheses, kappa, all checks and all sweeps.
    Run(Common),
}

fn load(c: &Common) -> harnack_lab::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.samples {
        cfg.n_samples = n;
    }
    if let Some(n) = c.steps {
        cfg.n_steps = n;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    cfg.dump_paths |= c.dump_paths;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> harnack_lab::Result<i32> {
    let (common, mode) = match &cli.command {
        Command::Hypotheses(c) => (c, RunMode::Hypotheses),
        Command::EstimateKappa(c) => (c, RunMode::Kappa),
        Command::Verify { check, common } => (common, RunMode::Verify(check.parse::<CheckName>()?)),
        Command::Sweep(c) => (c, RunMode::Sweep),
        Command::Run(c) => (c, RunMode::Full),
    };
    let cfg = load(common)?;
    let outcome = run_experiment(&cfg, mode)?;
    let r = &outcome.report;
    match mode {
        RunMode::Hypotheses => println!("{}", serde_json::to_string_pretty(&r.hypotheses)?),
        RunMode::Kappa => println!("{}", serde_json::to_string_pretty(&r.kappa)?),
        _ => {
            for c in &r.checks {
                let margin = c.margin.map(|m| format!("{:+.4e} (se {:.2e})", m.value, m.stderr));
                println!(
                    "{:<24} {:<20} {:<20} {}",
                    c.name.as_str(),
                    c.label,
                    c.verdict.as_str(),
                    margin.unwrap_or_default()
                );
            }
            for s in &r.sweeps {
                println!("sweep {}: {} points", s.name, s.rows.len());
            }
            if !r.violated.is_empty() {
                println!("violated beyond CI: {}", r.violated.join(", "));
            }
        }
    }
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(outcome.exit_status)
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("HARNACK_LAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("harnack-lab: cannot size thread pool: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("harnack-lab: HARNACK_LAB_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("harnack-lab: {e}");
            ExitCode::from(2)
        }
    }
}
