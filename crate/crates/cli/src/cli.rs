use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use pso_esn::data;

use crate::config::{ExperimentConfig, MethodConfig};
use crate::emit::{self, Summary};
use crate::error::CliError;
use crate::experiment::{self, write_atomic};

/// Overrides the directory that relative output paths are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "PSO_ESN_OUTPUT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "pso-esn", version, about = "Echo state network and PSO-ESN benchmark sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run (or resume) a multi-seed sweep described by a config file.
    Run {
        config: PathBuf,
        /// First seed of the sweep.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of seeds.
        #[arg(long)]
        seeds: Option<usize>,
        /// Results directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the summary and CSV files of a results directory.
    Summarize { dir: PathBuf },
    /// Compare two results directories by their 95% confidence intervals.
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        /// Where to write the comparison document.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a NARMA series as CSV with columns `s,b`.
    GenNarma {
        k: usize,
        length: usize,
        seed: u64,
        out: PathBuf,
        /// Comma-separated `c1,c2,c3,c4`; defaults to 0.3,0.05,1.5,0.1.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        coefficients: Option<Vec<f64>>,
    },
    /// Write one pso-esn config per (subset, particles) grid point.
    Sweep {
        config: PathBuf,
        /// Comma-separated subset sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        subset: Vec<usize>,
        /// Comma-separated swarm sizes; defaults to the template's.
        #[arg(long, value_delimiter = ',')]
        particles: Vec<usize>,
        /// Directory for the generated configs.
        #[arg(long)]
        out: PathBuf,
    },
}

fn output_root() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ROOT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Relative paths land under `$PSO_ESN_OUTPUT_ROOT` when it is set.
pub fn resolve_output(path: &Path) -> PathBuf {
    match output_root() {
        Some(root) if path.is_relative() => root.join(path),
        _ => path.to_path_buf(),
    }
}

fn print_summary(summary: &Summary, dir: &Path) {
    let mut out = String::new();
    let _ = writeln!(out, "{} ({}) in {}", summary.name, summary.method, dir.display());
    let _ = writeln!(out, "seeds: {} ok, {} failed", summary.succeeded, summary.failed);
    for (name, s) in [("train_mse", &summary.stats.train_mse), ("test_mse", &summary.stats.test_mse)] {
        let _ = writeln!(
            out,
            "{name}: mean {} stdev {} variance {} ci95 [{}, {}]",
            s.mean, s.stdev, s.variance, s.ci_low, s.ci_high
        );
    }
    print!("{out}");
}

fn run(config_path: &Path, seed: Option<u64>, seeds: Option<usize>, out: Option<PathBuf>) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(s) = seed {
        config.base_seed = s;
    }
    if let Some(n) = seeds {
        config.n_seeds = n;
    }
    if let Some(o) = out {
        config.output_dir = o;
    }
    config.validate()?;
    let dir = resolve_output(&config.output_dir);
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let results = experiment::run_experiment(&config, &dir, base_dir)?;
    let summary = emit::emit(&dir, &config, &results)?;
    print_summary(&summary, &dir);
    Ok(())
}

fn summarize(dir: &Path) -> Result<(), CliError> {
    let (config, results) = emit::load_results(dir)?;
    let summary = emit::emit(dir, &config, &results)?;
    print_summary(&summary, dir);
    Ok(())
}

fn compare(a: &Path, b: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let report = emit::compare_summaries(&emit::read_summary(a)?, &emit::read_summary(b)?);
    for (name, c) in [("train_mse", &report.train_mse), ("test_mse", &report.test_mse)] {
        println!(
            "{name}: {} (mean {} - {} = {})",
            c.verdict.as_str(),
            report.a,
            report.b,
            c.mean_difference
        );
    }
    if let Some(path) = out {
        emit::write_comparison(&resolve_output(&path), &report)?;
    }
    Ok(())
}

fn gen_narma(k: usize, length: usize, seed: u64, out: &Path, coefficients: Option<Vec<f64>>) -> Result<(), CliError> {
    let coefficients = match coefficients.as_deref() {
        None => None,
        Some(&[c1, c2, c3, c4]) => Some([c1, c2, c3, c4]),
        Some(c) => return Err(CliError::Config(format!("--coefficients takes 4 values, got {}", c.len()))),
    };
    let series = data::generate_narma(&experiment::narma_params(k, length, seed, coefficients))?;
    let mut text = String::from("s,b\n");
    for (s, b) in series.drive.values().iter().zip(series.output.values()) {
        let _ = writeln!(text, "{s},{b}");
    }
    write_atomic(&resolve_output(out), text.as_bytes())
}

fn sweep(template: &Path, subsets: &[usize], particles: &[usize], out: &Path) -> Result<(), CliError> {
    let base = ExperimentConfig::load(template)?;
    let MethodConfig::PsoEsn(pso) = &base.method else {
        return Err(CliError::Config(format!("{}: sweep needs a pso-esn template", template.display())));
    };
    let swarm_sizes = if particles.is_empty() {
        vec![pso.particles]
    } else {
        particles.to_vec()
    };
    let out = resolve_output(out);
    for &m in subsets {
        for &n in &swarm_sizes {
            let tag = format!("{}-m{m}-n{n}", base.name);
            let mut config = base.clone();
            let mut p = pso.clone();
            p.subset = Some(m);
            p.alpha = None;
            p.particles = n;
            config.method = MethodConfig::PsoEsn(p);
            config.output_dir = base.output_dir.join(&tag);
            config.name = tag.clone();
            config.validate()?;
            let path = out.join(format!("{tag}.toml"));
            write_atomic(&path, config.to_toml().as_bytes())?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            seed,
            seeds,
            out,
        } => run(&config, seed, seeds, out),
        Command::Summarize { dir } => summarize(&resolve_output(&dir)),
        Command::Compare { dir_a, dir_b, out } => compare(&resolve_output(&dir_a), &resolve_output(&dir_b), out),
        Command::GenNarma {
            k,
            length,
            seed,
            out,
            coefficients,
        } => gen_narma(k, length, seed, &out, coefficients),
        Command::Sweep {
            config,
            subset,
            particles,
            out,
        } => sweep(&config, &subset, &particles, &out),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on failure, 2 on usage errors.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
