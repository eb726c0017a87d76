use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use cv_nucleation::experiment::{self, Dataset, ExperimentConfig, OUTPUT_DIR_ENV};
use cv_nucleation::io;
use cv_nucleation::quantum::SubspaceMask;

#[derive(Parser)]
#[command(name = "cvnucleate", version, about = "Maximum-likelihood subspace nucleation for CV tomography")]
struct Cli {
    /// Cap on worker threads for candidate and bootstrap evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// N=1e5, M=200, D_lim=8, B=100.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if self.quick {
            config.apply_quick();
        }
        if let Some(seed) = self.seed {
            config.rng_seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate data for the configured true state and write a counts file.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Defaults to <output-dir>/data.txt.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Nucleate on a counts file.
    Nucleate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        no_bootstrap: bool,
    },
    /// Cross-validate one mask on a counts file and print JSON.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated basis indices.
        #[arg(long, value_delimiter = ',', required = true)]
        mask: Vec<usize>,
        #[arg(long)]
        no_bootstrap: bool,
    },
    /// Simulate (or ingest `data`), nucleate, bootstrap and write everything.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        no_bootstrap: bool,
    },
    /// Parse a counts file and report whether it is valid.
    IngestCheck { path: PathBuf },
}

fn report(out: &experiment::RunOutput) {
    for s in &out.trace.steps {
        let prerr = s.prerr.map_or("-".to_string(), |p| format!("{p:.6e}"));
        println!("D_rec={:>3}  mask={}  logL={:.6}  PrErr={prerr}", s.recon_dim, s.mask, s.log_likelihood);
    }
    println!("artifacts in {}", out.artifacts.trace_json.parent().unwrap_or(&PathBuf::new()).display());
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    match cli.command {
        Command::Simulate { common, output } => {
            let config = common.load()?;
            let data = experiment::simulate(&config)?;
            let path = output.unwrap_or_else(|| config.output_dir.join("data.txt"));
            io::write_counts(&path, &data.pom, &data.counts)?;
            println!("wrote {} outcomes, N={} to {}", data.pom.len(), data.counts.total(), path.display());
        }
        Command::Nucleate { common, data, no_bootstrap } => {
            let mut config = common.load()?;
            config.data = Some(data);
            report(&experiment::run_experiment(&config, !no_bootstrap)?);
        }
        Command::Validate { common, data, mask, no_bootstrap } => {
            let config = common.load()?;
            let (pom, counts) = io::ingest_counts(&data)?;
            let data = Dataset { pom, counts }.truncated(config.limit_dim)?;
            let mask = SubspaceMask::new(config.limit_dim, mask)?;
            let basis = experiment::working_basis(&config)?;
            let pom = experiment::to_working_basis(&data.pom, basis.as_ref())?;
            let (prerr, stats) = experiment::validate_mask(&config, &pom, &data.counts, &mask, !no_bootstrap)?;
            let value = serde_json::json!({
                "mask": mask.indices(),
                "prerr": io::Real(prerr),
                "stats": stats,
            });
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Command::Run { common, no_bootstrap } => {
            let config = common.load()?;
            report(&experiment::run_experiment(&config, !no_bootstrap)?);
        }
        Command::IngestCheck { path } => {
            let (pom, counts) = io::ingest_counts(&path)?;
            if pom.is_empty() {
                bail!("no outcomes");
            }
            println!("ok: M={} D_lim={} N={}", pom.len(), pom.dim(), counts.total());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
