use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use screwbench::analysis::{AnalysisConfig, FtSeries};
use screwbench::controller::{calibrate_force, ControllerConfig};
use screwbench::csvlog::{read_log_file, read_pairs, write_log_file};
use screwbench::reports::{analyze, compare, to_toml};
use screwbench::{run_scenario, Scenario};

#[derive(Parser)]
#[command(name = "screwbench", version, about = "Screw fastening simulator and force/torque log analysis")]
struct Cli {
    /// Directory searched for `<name>.toml` when a scenario is given by name.
    #[arg(long, env = "SCREWBENCH_CONFIG_DIR", default_value = "scenarios", global = true)]
    config_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its sensor log and run report.
    Simulate {
        /// Scenario file, a name in the config directory, or a built-in preset.
        scenario: String,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV log destination.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report destination (stdout if omitted).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Force/torque ratio, strokes, peaks and slips of one log.
    Analyze {
        log: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rank test between the ratios of two directories of logs.
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Fit a potentiometer calibration from `pot_reading,ref_force` pairs.
    Calibrate {
        pairs: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print a built-in scenario, or list them.
    Preset { name: Option<String> },
}

fn emit(report: &Option<PathBuf>, text: &str) -> Result<()> {
    match report {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn resolve_scenario(arg: &str, config_dir: &Path) -> Result<Scenario> {
    let direct = Path::new(arg);
    if direct.is_file() {
        return Ok(Scenario::load(direct)?);
    }
    let named = config_dir.join(format!("{arg}.toml"));
    if named.is_file() {
        return Ok(Scenario::load(&named)?);
    }
    Scenario::preset(arg).with_context(|| {
        format!(
            "no scenario `{arg}`: not a file, not in {}, not a preset ({})",
            config_dir.display(),
            Scenario::PRESETS.join(", ")
        )
    })
}

fn load_dir(dir: &Path) -> Result<Vec<(String, FtSeries)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("{} contains no .csv logs", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let name = p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            let series = read_log_file(p).with_context(|| p.display().to_string())?;
            Ok((name, series))
        })
        .collect()
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scenario, seed, out, report } => {
            let mut sc = resolve_scenario(&scenario, &cli.config_dir)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            let run = run_scenario(&sc)?;
            if let Some(out) = &out {
                write_log_file(out, &run.log())?;
            }
            emit(&report, &to_toml(&run.report))
        }
        Command::Analyze { log, report } => {
            let series = read_log_file(&log)?;
            let body = analyze(&series, &AnalysisConfig::default(), &ControllerConfig::default())
                .with_context(|| log.display().to_string())?;
            emit(&report, &to_toml(&body))
        }
        Command::Compare { dir_a, dir_b, report } => {
            let (a, b) = (load_dir(&dir_a)?, load_dir(&dir_b)?);
            let body = compare(
                (&dir_a.display().to_string(), &a),
                (&dir_b.display().to_string(), &b),
            )?;
            emit(&report, &to_toml(&body))
        }
        Command::Calibrate { pairs, report } => {
            let file = std::fs::File::open(&pairs).with_context(|| format!("cannot open {}", pairs.display()))?;
            let data = read_pairs(file).with_context(|| pairs.display().to_string())?;
            emit(&report, &to_toml(&calibrate_force(&data)?))
        }
        Command::Preset { name: None } => {
            for name in Scenario::PRESETS {
                println!("{name}");
            }
            Ok(())
        }
        Command::Preset { name: Some(name) } => {
            let sc = Scenario::preset(&name).with_context(|| format!("unknown preset `{name}`"))?;
            print!("{}", sc.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
