use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use dsr_sim::harness::{
    as_sweep, find_preset, parse_config, run_config, ExperimentConfig, RunOutput, PRESETS,
};

#[derive(Parser)]
#[command(
    name = "dsr-sim",
    version,
    about = "Delayed self-reinforcement experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file or a named preset.
    Run(Source),
    /// Stability verdicts over a list of alignment strengths.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Comma-separated Ks values; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<f64>>,
    },
    /// Print the available presets.
    ListPresets,
}

#[derive(Args)]
struct Source {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Master seed; overrides the config's.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                parse_config(&text)?
            }
            (None, Some(name)) => find_preset(name)
                .with_context(|| format!("unknown preset `{name}` (see list-presets)"))?
                .config(),
            (None, None) => unreachable!("clap requires one source"),
        };
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        Ok(cfg)
    }
}

fn report(run: &RunOutput, out: &Path) {
    let m = &run.metrics;
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!("output: {}", out.display());
    println!("  diverged:           {}", m.diverged);
    if let Some(t) = m.divergence_time_s {
        println!("  divergence time:    {t:.3} s");
    }
    println!("  settling time:      {} s", show(m.settling_time_s));
    println!("  overshoot:          {}", show(m.overshoot));
    println!("  transfer speed:     {} m/s", show(m.transfer_speed_mps));
    println!("  scaling exponent:   {}", show(m.scaling_exponent));
}

fn finish(run: RunOutput, out: &Path) -> ExitCode {
    report(&run, out);
    if run.as_expected() {
        ExitCode::SUCCESS
    } else if run.metrics.diverged {
        eprintln!("error: run diverged unexpectedly");
        ExitCode::FAILURE
    } else {
        eprintln!("error: run was expected to diverge but stayed bounded");
        ExitCode::FAILURE
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::ListPresets => {
            for p in PRESETS {
                println!("{:<22} {}", p.name, p.description);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(src) => {
            let cfg = src.load()?;
            let run = run_config(&cfg, &src.out)?;
            Ok(finish(run, &src.out))
        }
        Command::Sweep { source, ks } => {
            let cfg = as_sweep(&source.load()?, ks)?;
            let run = run_config(&cfg, &source.out)?;
            println!(
                "{}",
                fs::read_to_string(source.out.join("stability.csv"))?.trim_end()
            );
            Ok(finish(run, &source.out))
        }
    }
}
