use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use phase_ensemble::experiments::{self, ExperimentConfig, Overrides, Reproduction};
use phase_ensemble::{Error, Model};

#[derive(Parser)]
#[command(name = "phasens", version, about = "Run, scan and reproduce real-ensemble phase dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one config and write trajectory, report and manifest.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Classify every cell of the config's (c, dphi0) scan.
    Scan {
        config: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run a named preset.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(experiments::PRESETS))]
        preset: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Check a config and list every problem found.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct Opts {
    /// Output directory; defaults to the config's output_dir, then `out/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for scans and multi-run presets.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_model)]
    model: Option<Model>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Opts {
    fn overrides(&self) -> Overrides {
        Overrides { model: self.model, seed: self.seed }
    }

    fn out_dir(&self, cfg_dir: Option<&Path>, name: &str) -> PathBuf {
        self.out.clone().or_else(|| cfg_dir.map(Path::to_path_buf)).unwrap_or_else(|| Path::new("out").join(name))
    }
}

fn load(path: &Path, opts: &Opts) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    opts.overrides().apply(&mut cfg);
    Ok(cfg)
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if let Error::Config(list) = e {
        if list.len() > 1 {
            for v in list {
                eprintln!("  - {v}");
            }
        }
    }
    ExitCode::from(experiments::exit_code(e) as u8)
}

fn run(cmd: Command, out: &mut impl Write) -> anyhow::Result<ExitCode> {
    let code = match cmd {
        Command::Validate { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return Ok(fail(&e)),
            };
            let v = cfg.violations();
            if v.is_empty() {
                writeln!(out, "{}: ok (hash {})", config.display(), cfg.hash())?;
                ExitCode::SUCCESS
            } else {
                for m in &v {
                    writeln!(out, "{m}")?;
                }
                ExitCode::from(1)
            }
        }
        Command::Run { config, opts } => {
            let cfg = match load(&config, &opts) {
                Ok(c) => c,
                Err(e) => return Ok(fail(&e)),
            };
            let dir = opts.out_dir(cfg.output_dir.as_deref(), &cfg.name);
            match experiments::run_experiment(&cfg, &dir) {
                Ok(r) => {
                    writeln!(out, "{}: {} (decay {:?}, n at horizon {:?})", r.name, r.classification, r.decay_class, r.n_at_horizon)?;
                    writeln!(out, "artifacts in {}", dir.display())?;
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Scan { config, opts } => {
            let cfg = match load(&config, &opts) {
                Ok(c) => c,
                Err(e) => return Ok(fail(&e)),
            };
            let dir = opts.out_dir(cfg.output_dir.as_deref(), &cfg.name);
            match experiments::run_scan(&cfg, &dir, opts.jobs) {
                Ok(scan) => {
                    let failed = scan.failures();
                    writeln!(out, "{} cells, {failed} failed; table in {}", scan.rows.len(), dir.join("scan.csv").display())?;
                    if failed > 0 {
                        ExitCode::from(3)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::Reproduce { preset, opts } => {
            let dir = opts.out.clone().unwrap_or_else(|| Path::new("out").join(&preset));
            let outcome = match experiments::reproduce(&preset, &dir, opts.jobs, opts.overrides()) {
                Ok(o) => o,
                Err(e) => return Ok(fail(&e)),
            };
            match &outcome {
                Reproduction::Runs(runs) => {
                    for (name, r) in runs {
                        match r {
                            Ok(r) => writeln!(
                                out,
                                "{name}: {} (decay {:?}, n at horizon {:?})",
                                r.classification, r.decay_class, r.n_at_horizon
                            )?,
                            Err(e) => writeln!(out, "{name}: error: {e}")?,
                        }
                    }
                }
                Reproduction::Scan(s) => {
                    writeln!(out, "{} cells, {} failed", s.rows.len(), s.failures())?;
                }
            }
            writeln!(out, "artifacts in {}", dir.display())?;
            ExitCode::from(outcome.exit_code() as u8)
        }
    };
    out.flush().context("writing to stdout")?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command, &mut std::io::stdout().lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
