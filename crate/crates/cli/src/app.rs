//! Command-line verbs `run`, `list` and `verify`, and their exit codes.

use crate::catalog::{self, Context};
use crate::config::{self, ConfigError, Default};
use crate::record;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "qwass", version, about = "Run and verify quantum Wasserstein experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one experiment and write <out>/<experiment>.csv and .json.
    Run {
        /// Experiment name; overrides `experiment` in the config file.
        experiment: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Keep solver residual histories and log at trace level.
        #[arg(long)]
        trace: bool,
        /// Parameter override `key=value`, applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List experiments with the claim each one reproduces.
    List {
        /// Also print parameters with defaults and ranges.
        #[arg(long)]
        params: bool,
    },
    /// Recompute pass/fail from stored CSV records.
    Verify {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

fn config_exit(e: &ConfigError) -> i32 {
    eprintln!("config error: {e}");
    EXIT_CONFIG
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Run { experiment, config, out, seed, trace, set } => run_experiment(experiment, config, out, seed, trace, &set),
        Command::List { params } => {
            list(params);
            EXIT_OK
        }
        Command::Verify { csv } => verify(&csv),
    }
}

fn run_experiment(experiment: Option<String>, config: Option<PathBuf>, out: Option<PathBuf>, seed: Option<u64>, trace: bool, set: &[String]) -> i32 {
    let file = match &config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) => return config_exit(&ConfigError::Io { path: path.display().to_string(), msg: e.to_string() }),
        },
        None => String::new(),
    };
    let parsed = match config::parse(&file) {
        Ok(c) => c,
        Err(e) => return config_exit(&e),
    };
    let mut rc = match config::resolve(&parsed, experiment.as_deref(), seed, out) {
        Ok(rc) => rc,
        Err(e) => return config_exit(&e),
    };
    let exp = catalog::find(&rc.experiment).expect("resolved experiment exists");
    for kv in set {
        let Some((k, v)) = kv.split_once('=') else {
            return config_exit(&ConfigError::Syntax { line: 0, msg: format!("--set expects key=value, got `{kv}`") });
        };
        if let Err(e) = rc.params.set(exp.params, k.trim(), v.trim()) {
            return config_exit(&e);
        }
    }
    log::info!("running {} with {}", exp.name, rc.params.summary());
    let ctx = Context { seed: rc.seed, trace };
    let summary = match catalog::execute(exp, &rc.params, &ctx) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", exp.name);
            return match e {
                qwass::Error::Numerical(_) | qwass::Error::DegenerateGroundState { .. } => EXIT_NONCONVERGENCE,
                _ => EXIT_CONFIG,
            };
        }
    };
    let (csv_path, json_path) = match record::write_outputs(&rc.out, &summary) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot write results to {}: {e}", rc.out.display());
            return EXIT_IO;
        }
    };
    for r in &summary.checks {
        println!("{:<4} {:<40} value={:<14.8e} bound={:<14.8e} tol={:.2e}", if r.passed { "ok" } else { "FAIL" }, r.check, r.value, r.bound, r.tolerance);
    }
    println!("{}: {} ({:.1} s) -> {}, {}", summary.experiment, if summary.passed { "passed" } else { "FAILED" }, summary.runtime_s, csv_path.display(), json_path.display());
    if !summary.converged {
        eprintln!("{}: solver did not converge", summary.experiment);
        EXIT_NONCONVERGENCE
    } else if summary.passed {
        EXIT_OK
    } else {
        EXIT_ASSERTION
    }
}

fn list(params: bool) {
    for e in catalog::catalog() {
        println!("{:<24} {}", e.name, e.claim);
        if params {
            for s in e.params {
                let d = match s.default {
                    Default::Num(x) => x.to_string(),
                    Default::Int(k) => k.to_string(),
                    Default::List(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                };
                println!("    {:<20} default {:<18} range [{}, {}]  {}", s.key, d, s.min, s.max, s.doc);
            }
        }
    }
}

fn verify(paths: &[PathBuf]) -> i32 {
    let mut code = EXIT_OK;
    for path in paths {
        let records = match record::read_csv(path) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                return EXIT_CONFIG;
            }
        };
        let rep = record::verify(&records);
        for r in &rep.inconsistent {
            println!("{}: {} stored passed={} but recomputes to {}", path.display(), r.check, r.passed, !r.passed);
        }
        for r in &rep.failing {
            println!("{}: {} fails: value={:e} bound={:e} tol={:e} ({:?})", path.display(), r.check, r.value, r.bound, r.tolerance, r.relation);
        }
        println!("{}: {} rows, {} inconsistent, {} failing", path.display(), rep.rows, rep.inconsistent.len(), rep.failing.len());
        if !rep.consistent() || !rep.failing.is_empty() || rep.rows == 0 {
            code = EXIT_ASSERTION;
        }
    }
    code
}
