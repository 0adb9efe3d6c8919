mod config;
mod experiments;
mod report;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{parse_assignment, parse_bool, read_config_file, ExperimentConfig, Format, Params, UsageError, RUN_KEYS};
use experiments::{find, Ctx, RunError, CATALOG};
use report::{write_csv, write_json};

const EXIT_ENVELOPE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser)]
#[command(name = "liouville-lab", version, about = "Desk-scale experiments on the Liouville function")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print every experiment with its anchor and default parameters.
    List,
    #[command(name = "sieve-check")]
    SieveCheck(RunArgs),
    Squarefree(RunArgs),
    Tnp(RunArgs),
    #[command(name = "mean-value")]
    MeanValue(RunArgs),
    Halasz(RunArgs),
    #[command(name = "large-values")]
    LargeValues(RunArgs),
    Factorization(RunArgs),
    Variance(RunArgs),
    #[command(name = "parseval-link")]
    ParsevalLink(RunArgs),
    Expsum(RunArgs),
    Arcs(RunArgs),
    Characters(RunArgs),
    #[command(name = "chowla-avg")]
    ChowlaAvg(RunArgs),
    #[command(name = "prime-shift")]
    PrimeShift(RunArgs),
    Goldbach(RunArgs),
    Entropy(RunArgs),
    #[command(name = "log-chowla")]
    LogChowla(RunArgs),
    #[command(name = "decrement-trace")]
    DecrementTrace(RunArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Plain key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Result file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default 1).
    #[arg(long)]
    threads: Option<usize>,
    /// Fill the wall_time_s column (makes output run-dependent).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    x: Option<String>,
    /// One value or a comma-separated list.
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    w: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    /// Any other experiment parameter.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

impl Command {
    fn split(self) -> Option<(&'static str, RunArgs)> {
        use Command::*;
        Some(match self {
            List => return None,
            SieveCheck(a) => ("sieve-check", a),
            Squarefree(a) => ("squarefree", a),
            Tnp(a) => ("tnp", a),
            MeanValue(a) => ("mean-value", a),
            Halasz(a) => ("halasz", a),
            LargeValues(a) => ("large-values", a),
            Factorization(a) => ("factorization", a),
            Variance(a) => ("variance", a),
            ParsevalLink(a) => ("parseval-link", a),
            Expsum(a) => ("expsum", a),
            Arcs(a) => ("arcs", a),
            Characters(a) => ("characters", a),
            ChowlaAvg(a) => ("chowla-avg", a),
            PrimeShift(a) => ("prime-shift", a),
            Goldbach(a) => ("goldbach", a),
            Entropy(a) => ("entropy", a),
            LogChowla(a) => ("log-chowla", a),
            DecrementTrace(a) => ("decrement-trace", a),
        })
    }
}

fn build_config(name: &str, args: RunArgs) -> Result<ExperimentConfig, UsageError> {
    let exp = find(name).ok_or_else(|| UsageError(format!("unknown experiment {name}")))?;
    let mut merged: BTreeMap<String, String> = match &args.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    let named = [
        ("x", &args.x),
        ("h", &args.h),
        ("w", &args.w),
        ("epsilon", &args.epsilon),
        ("delta", &args.delta),
        ("grid", &args.grid),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            merged.insert(k.to_string(), v.clone());
        }
    }
    for a in &args.params {
        let (k, v) = parse_assignment(a)?;
        merged.insert(k, v);
    }
    let mut run: BTreeMap<String, String> = BTreeMap::new();
    for key in RUN_KEYS {
        if let Some(v) = merged.remove(key) {
            run.insert(key.to_string(), v);
        }
    }
    let seed = match (args.seed, run.get("seed")) {
        (Some(s), _) => s,
        (None, Some(s)) => s.parse().map_err(|_| UsageError(format!("seed: {s:?} is not an integer")))?,
        (None, None) => 0,
    };
    let threads = match (args.threads, run.get("threads")) {
        (Some(t), _) => t,
        (None, Some(t)) => t.parse().map_err(|_| UsageError(format!("threads: {t:?} is not an integer")))?,
        (None, None) => 1,
    };
    if threads == 0 {
        return Err(UsageError("threads must be at least 1".into()));
    }
    let format = match (args.format, run.get("format").map(String::as_str)) {
        (Some(f), _) => f,
        (None, Some("csv")) | (None, None) => Format::Csv,
        (None, Some("json")) => Format::Json,
        (None, Some(f)) => return Err(UsageError(format!("format: {f:?} is not csv or json"))),
    };
    let timing = args.timing || run.get("timing").map(|v| parse_bool("timing", v)).transpose()?.unwrap_or(false);
    Ok(ExperimentConfig {
        experiment: name.to_string(),
        params: Params::merge(name, exp.defaults, &merged)?,
        seed,
        out: args.out.or_else(|| run.get("out").map(PathBuf::from)),
        format,
        threads,
        timing,
    })
}

fn list() -> io::Result<()> {
    let mut out = io::stdout().lock();
    for e in CATALOG {
        let defaults: Vec<String> = e.defaults.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(out, "{}\n  anchor: {}\n  defaults: {}", e.name, e.anchor, defaults.join(" "))?;
    }
    Ok(())
}

fn run(cfg: ExperimentConfig) -> ExitCode {
    let exp = find(&cfg.experiment).expect("validated");
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start {} threads: {e}", cfg.threads);
            return ExitCode::from(EXIT_RESOURCE);
        }
    };
    let ctx = Ctx {
        name: exp.name,
        params: cfg.params.clone(),
        seed: cfg.seed,
    };
    let start = Instant::now();
    let outcome = pool.install(|| (exp.run)(&ctx));
    let elapsed = start.elapsed().as_secs_f64();
    let mut rows = match outcome {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("{}: {e}", cfg.experiment);
            return ExitCode::from(match e {
                RunError::Usage(_) => EXIT_USAGE,
                RunError::Resource(_) => EXIT_RESOURCE,
                RunError::Failed(_) => EXIT_ENVELOPE,
            });
        }
    };
    if cfg.timing {
        for r in rows.iter_mut() {
            r.wall_time_s = Some(elapsed);
        }
    }
    let written = match &cfg.out {
        Some(path) => File::create(path).and_then(|f| emit(&rows, cfg.format, BufWriter::new(f))),
        None => emit(&rows, cfg.format, io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("cannot write results: {e}");
        return ExitCode::from(EXIT_RESOURCE);
    }
    let failed: Vec<&str> = rows.iter().filter(|r| r.failed()).map(|r| r.quantity.as_str()).collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{}: envelope failed for {}", cfg.experiment, failed.join("; "));
        ExitCode::from(EXIT_ENVELOPE)
    }
}

fn emit<W: Write>(rows: &[report::ResultRow], format: Format, mut out: W) -> io::Result<()> {
    match format {
        Format::Csv => write_csv(rows, &mut out).map_err(io::Error::other)?,
        Format::Json => write_json(rows, &mut out)?,
    }
    out.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some((name, args)) = cli.command.split() else {
        return match list() {
            Ok(()) => ExitCode::SUCCESS,
            Err(_) => ExitCode::from(EXIT_RESOURCE),
        };
    };
    match build_config(name, args) {
        Ok(cfg) => run(cfg),
        Err(e) => {
            eprintln!("usage error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_valid() {
        Cli::command().debug_assert();
    }

    #[test]
    fn every_catalog_entry_has_a_subcommand() {
        let cmd = Cli::command();
        for e in CATALOG {
            assert!(cmd.find_subcommand(e.name).is_some(), "{}", e.name);
        }
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        std::fs::write(&path, "x = 1e5\nseed = 9\nformat = json\n").unwrap();
        let args = RunArgs {
            config: Some(path.clone()),
            x: Some("1e4".into()),
            ..Default::default()
        };
        let cfg = build_config("squarefree", args).unwrap();
        assert_eq!(cfg.params.u64("x").unwrap(), 10_000);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.format, Format::Json);
        let args = RunArgs {
            config: Some(path),
            params: vec!["nonsense=1".into()],
            ..Default::default()
        };
        assert!(build_config("squarefree", args).is_err());
    }
}
