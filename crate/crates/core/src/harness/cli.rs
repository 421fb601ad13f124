//! Command-line entry point.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::error::Result;

use super::config::ConfigFile;
use super::experiment::{run_experiment, write_results, Algorithm, ExperimentResult, ExperimentSpec, Sweep};

/// Monte-Carlo secrecy-rate experiments for RIS-aided downlinks with hardware impairments.
#[derive(Debug, Parser)]
#[command(name = "ris-secrecy", version)]
struct Args {
    /// TOML configuration file (defaults are used when omitted).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// bcd-mm, bcd-socp, non-robust, bcd-mm-rand, bcd-mm-no-ris or bcd-mm-2bit.
    #[arg(long, value_name = "NAME")]
    algorithm: Option<String>,
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Seed of the first trial; trial t uses seed + t.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Sweep one parameter, e.g. `m_ris=8,16,32` or `p_dbm=20,30`.
    #[arg(long, value_name = "KEY=V1,V2,...")]
    sweep: Option<String>,
    /// Result CSV (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Directory for per-trial convergence traces.
    #[arg(long, value_name = "PATH")]
    trace_dir: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, value_name = "N", default_value_t = 0)]
    threads: usize,
    /// Write 0 in all wall-time columns so output is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

enum Failure {
    Config(String),
    Runtime(String),
}

/// Run the CLI and return the process exit code: 0 success, 1 configuration
/// error, 2 runtime failure (including any failed trial).
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&args) {
        Ok(()) => 0,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}

fn build(args: &Args) -> Result<(crate::scenario::SystemConfig, ExperimentSpec)> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let config = file.system_config()?;
    let mut spec = file.experiment_spec(&config)?;
    if let Some(a) = &args.algorithm {
        spec.algorithm = a.parse::<Algorithm>()?;
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(s) = args.seed {
        spec.seed_base = s;
    }
    if let Some(s) = &args.sweep {
        spec.sweep = Sweep::parse(s)?;
    }
    spec.validate(&config)?;
    Ok((config, spec))
}

fn run(args: &Args) -> std::result::Result<(), Failure> {
    let (config, spec) = build(args).map_err(|e| Failure::Config(e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| Failure::Runtime(format!("cannot start worker pool: {e}")))?;
    let result = pool
        .install(|| run_experiment(&spec, &config))
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let timing = !args.no_timing;
    let io_err = |what: &str, p: &Path, e: io::Error| Failure::Runtime(format!("{what} {}: {e}", p.display()));
    match &args.out {
        Some(p) => {
            let f = File::create(p).map_err(|e| io_err("cannot create", p, e))?;
            write_results(&result.rows, BufWriter::new(f), timing).map_err(|e| io_err("cannot write", p, e))?;
        }
        None => write_results(&result.rows, io::stdout().lock(), timing)
            .map_err(|e| Failure::Runtime(format!("cannot write results: {e}")))?,
    }
    if let Some(dir) = &args.trace_dir {
        write_traces(&result, dir, timing).map_err(|e| io_err("cannot write traces to", dir, e))?;
    }
    report(&spec, &result);
    let failed: Vec<_> = result.rows.iter().filter_map(|r| r.error.as_ref().map(|e| (r.trial, e))).collect();
    if let Some((trial, e)) = failed.first() {
        return Err(Failure::Runtime(format!(
            "{} of {} trials failed; first (trial {trial}): {e}",
            failed.len(),
            result.rows.len()
        )));
    }
    Ok(())
}

fn write_traces(result: &ExperimentResult, dir: &Path, timing: bool) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in &result.rows {
        if let Some(t) = &r.trace {
            let name = format!("{}_{}={}_trial{}.csv", r.algorithm, r.sweep_key, r.sweep_value, r.trial);
            t.write_csv(BufWriter::new(File::create(dir.join(name))?), timing)?;
        }
    }
    Ok(())
}

fn report(spec: &ExperimentSpec, result: &ExperimentResult) {
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "{} over {} trials", spec.algorithm, spec.trials);
    for s in &result.summary {
        let _ = writeln!(
            err,
            "  {}={}: mean WMSR {:.6} nats (stderr {:.6}, {} ok, {} failed)",
            spec.sweep.key, s.sweep_value, s.mean, s.std_error, s.count, s.failed
        );
    }
}
