//! Command-line front end: `generate`, `run` and `localize`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{DatasetSource, RunConfig};
use crate::datamodel::write_csv;
use crate::error::{Error, Result};
use crate::evaluation::{run_trials, TrialOutcome};
use crate::heuristics::write_corrections_jsonl;
use crate::localization::{group_by_family, localize, LocalizationReport};
use crate::oracles::{read_events_jsonl, write_events_jsonl, FaultType, FaultTypeSet};
use crate::repair::Strategy;
use crate::slicing::{read_slices_csv, write_slices_csv};
use crate::synthgen::{gen_continuous, gen_discrete, Generated};

#[derive(Debug, Parser)]
#[command(name = "faultrepair", version, about = "Fault detection, localization and repair for prediction streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and its manifest.
    Generate(CommonArgs),
    /// Run the configured trials.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of trials to run concurrently.
        #[arg(long, default_value_t = 1)]
        parallel_trials: usize,
        /// Comma-separated strategies overriding the config.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
    },
    /// Localize faults from an events file and a slices file.
    Localize {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        slices: PathBuf,
        /// Comma-separated fault types; all types when omitted.
        #[arg(long, value_delimiter = ',')]
        fault_types: Option<Vec<String>>,
        /// Output family to derive task distributions from.
        #[arg(long)]
        task_family: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Written next to a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub length: usize,
    pub sha256: String,
    pub parameters: DatasetSource,
    pub artifact_indices: Vec<usize>,
}

/// Config errors map to exit code 1, everything else to 2.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

fn config_err(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(m),
        Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
        e => Error::Config(format!("{}: {e}", path.display())),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn load_source(path: &Path) -> Result<DatasetSource> {
    let text = fs::read_to_string(path).map_err(|e| config_err(path, e.into()))?;
    // Either a full run config or a bare dataset source.
    if let Ok(cfg) = RunConfig::from_json(&text) {
        return Ok(cfg.dataset);
    }
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Writes `dataset.csv` and `manifest.json` into `out`.
pub fn cmd_generate(config: &Path, seed: Option<u64>, out: &Path) -> Result<Manifest> {
    let mut source = load_source(config)?;
    let generated: Generated<f64> = match &mut source {
        DatasetSource::SyntheticDiscrete(s) => {
            if let Some(seed) = seed {
                s.seed = seed;
            }
            gen_discrete(s).map_err(|e| Error::Config(e.to_string()))?
        }
        DatasetSource::SyntheticContinuous(s) => {
            if let Some(seed) = seed {
                s.seed = seed;
            }
            gen_continuous(s).map_err(|e| Error::Config(e.to_string()))?
        }
        DatasetSource::Csv { .. } => return Err(Error::Config("generate needs a synthetic dataset source".into())),
    };
    let seed = match &source {
        DatasetSource::SyntheticDiscrete(s) => s.seed,
        DatasetSource::SyntheticContinuous(s) => s.seed,
        DatasetSource::Csv { .. } => unreachable!(),
    };
    fs::create_dir_all(out)?;
    let mut bytes = Vec::new();
    write_csv(&generated.dataset, &mut bytes)?;
    fs::write(out.join("dataset.csv"), &bytes)?;
    let manifest = Manifest {
        seed,
        length: generated.dataset.len(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        parameters: source,
        artifact_indices: generated.artifact_indices,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Runs all trials and writes `experiment.json`, `localization.json` and
/// per-trial sidecars under `trials/<seed>/`. Returns the number of failed
/// trials.
pub fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
    parallel_trials: usize,
    strategies: Option<&[String]>,
) -> Result<usize> {
    let mut cfg = RunConfig::from_path(config).map_err(|e| config_err(config, e))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(s) = strategies {
        cfg.acquisition.strategies = s
            .iter()
            .map(|n| Strategy::parse(n.trim()).map_err(|e| Error::Config(e.to_string())))
            .collect::<Result<_>>()?;
    }
    let base = config.parent().unwrap_or(Path::new("."));
    let out = out.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf);
    let exp = cfg.resolve()?;
    let dataset = exp.load_dataset(base)?;
    let (report, artifacts) = run_trials(&exp, &dataset, parallel_trials.max(1))?;

    fs::create_dir_all(&out)?;
    write_json(&out.join("experiment.json"), &report)?;
    let localization: BTreeMap<String, &LocalizationReport> = report
        .outcomes
        .iter()
        .filter_map(TrialOutcome::report)
        .map(|r| (r.seed.to_string(), &r.localization))
        .collect();
    write_json(&out.join("localization.json"), &localization)?;
    for a in artifacts.iter().flatten() {
        let dir = out.join("trials").join(a.seed.to_string());
        fs::create_dir_all(&dir)?;
        write_events_jsonl(&a.events, BufWriter::new(File::create(dir.join("events.jsonl"))?))?;
        write_corrections_jsonl(&a.corrections, BufWriter::new(File::create(dir.join("corrections.jsonl"))?))?;
        write_slices_csv(&a.slices, BufWriter::new(File::create(dir.join("slices.csv"))?))?;
    }
    let failed = report.outcomes.iter().filter(|o| o.report().is_none()).count();
    Ok(failed)
}

/// Standalone localization from sidecar files.
pub fn cmd_localize(
    events: &Path,
    slices: &Path,
    fault_types: Option<&[String]>,
    task_family: Option<&str>,
    floor: f64,
    out: &Path,
) -> Result<LocalizationReport> {
    let types: FaultTypeSet = match fault_types {
        Some(names) => names
            .iter()
            .map(|n| FaultType::parse(n.trim()).map_err(|e| Error::Config(e.to_string())))
            .collect::<Result<_>>()?,
        None => FaultType::ALL.into_iter().collect(),
    };
    let ev = read_events_jsonl(BufReader::new(File::open(events)?), &events.display().to_string())?;
    let sl = read_slices_csv(BufReader::new(File::open(slices)?), &slices.display().to_string())?;
    let report = localize(&ev, &group_by_family(&sl, &BTreeMap::new()), &types, task_family, floor)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("localization.json"), &report)?;
    Ok(report)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Generate(c) => {
            let out = c.out.unwrap_or_else(|| PathBuf::from("."));
            let m = cmd_generate(&c.config, c.seed, &out)?;
            println!("wrote {} samples to {} (sha256 {})", m.length, out.join("dataset.csv").display(), m.sha256);
            Ok(0)
        }
        Command::Run {
            common,
            parallel_trials,
            strategies,
        } => {
            let failed = cmd_run(
                &common.config,
                common.seed,
                common.out.as_deref(),
                parallel_trials,
                strategies.as_deref(),
            )?;
            if failed > 0 {
                eprintln!("{failed} trial(s) failed; see experiment.json");
                return Ok(2);
            }
            Ok(0)
        }
        Command::Localize {
            events,
            slices,
            fault_types,
            task_family,
            floor,
            out,
        } => {
            let r = cmd_localize(&events, &slices, fault_types.as_deref(), task_family.as_deref(), floor, &out)?;
            println!("{} tables written to {}", r.entries.len(), out.join("localization.json").display());
            Ok(0)
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            match &e {
                Error::Config(msg) => {
                    for line in msg.lines() {
                        eprintln!("config error: {line}");
                    }
                }
                e => eprintln!("error: {e}"),
            }
            exit_code(&e)
        }
    }
}
