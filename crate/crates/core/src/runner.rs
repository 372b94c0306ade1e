//! Command-line front end: argument parsing, run directories and exit codes.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::pipeline::{self, Command, Report, RunError};

#[derive(Parser, Debug)]
#[command(
    name = "wach-forge",
    version,
    about = "Builds and verifies families of two-dimensional crystalline representations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root; each run writes to <out>/<config hash>/.
    #[arg(long, global = true, default_value = "runs")]
    pub out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "WACHFORGE_JOBS")]
    pub jobs: Option<usize>,
    /// Print only the JSON report.
    #[arg(long, global = true)]
    pub json_only: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmd {
    /// Family data, filtration and exponents.
    Build,
    /// Wach module solve and axiom checks.
    Solve,
    /// Full verification suite.
    Verify,
    /// Configuration-free exhaustive checks.
    Selftest,
}

fn to_json<T: Serialize>(x: &T) -> String {
    let mut s = serde_json::to_string_pretty(x).expect("report serializes");
    s.push('\n');
    s
}

fn io(path: &Path, e: std::io::Error) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|e| io(path, e))
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig, RunError> {
    let path = path.ok_or_else(|| RunError::Validation("--config is required".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Validation(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_json(&text).map_err(|e| RunError::Validation(e.0))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Checks a stored baseline against its digest and against the freshly computed one,
/// then (re)writes both.
fn check_baseline(dir: &Path, fresh: &str) -> Result<(), RunError> {
    let json = dir.join("baseline.json");
    let digest = dir.join("baseline.sha256");
    if json.exists() {
        let stored = fs::read_to_string(&json).map_err(|e| io(&json, e))?;
        let want = fs::read_to_string(&digest).map_err(|e| io(&digest, e))?;
        if sha256_hex(&stored) != want.trim() {
            return Err(RunError::Verification(format!(
                "integrity: {} does not match {}",
                json.display(),
                digest.display()
            )));
        }
        if stored != fresh {
            return Err(RunError::Verification(format!(
                "integrity: stored baseline in {} differs from the recomputed one",
                dir.display()
            )));
        }
    }
    write(&json, fresh)?;
    write(&digest, &format!("{}\n", sha256_hex(fresh)))
}

pub struct Outcome {
    pub dir: PathBuf,
    pub report: Report,
}

/// Runs a configured command and persists its artifacts.
pub fn execute(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    let report = pipeline::run(cmd, cfg)?;
    let dir = out.join(&report.config_hash);
    fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
    write(&dir.join("config.json"), &to_json(cfg))?;
    let name = cmd.name();
    if let Some(v) = &report.verify {
        check_baseline(&dir, &to_json(&v.baseline_residual))?;
    }
    write(&dir.join(format!("{name}.json")), &to_json(&report))?;
    write(
        &dir.join(format!("{name}.txt")),
        &pipeline::summary(&report),
    )?;
    Ok(Outcome { dir, report })
}

fn first_failure(r: &Report) -> String {
    if let Some(v) = &r.verify {
        if let Some(c) = v.checks.iter().find(|c| !c.pass) {
            return c.name.to_string();
        }
    }
    "solver axioms".into()
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let jobs = cli.jobs.unwrap_or(0);
    crate::par::with_jobs(jobs, || run_cli(&cli))
}

fn run_cli(cli: &Cli) -> i32 {
    let cmd = match cli.command {
        Cmd::Selftest => {
            let r = crate::selftest::run();
            if cli.json_only {
                print!("{}", to_json(&r));
            } else {
                for c in &r.checks {
                    let status = match (c.pass, c.gating) {
                        (true, _) => "pass",
                        (false, true) => "FAIL",
                        (false, false) => "fail (not gating)",
                    };
                    println!("{:<22} {:>5} cases  {status}", c.name, c.cases);
                    if let Some(f) = &c.failure {
                        println!("    {f}");
                    }
                }
                println!("verdict: {}", if r.verdict { "pass" } else { "FAIL" });
            }
            return if r.verdict { 0 } else { 4 };
        }
        Cmd::Build => Command::Build,
        Cmd::Solve => Command::Solve,
        Cmd::Verify => Command::Verify,
    };
    let result =
        load_config(cli.config.as_deref(), cli.seed).and_then(|cfg| execute(cmd, &cfg, &cli.out));
    match result {
        Ok(o) => {
            if cli.json_only {
                print!("{}", to_json(&o.report));
            } else {
                print!("{}", pipeline::summary(&o.report));
                println!("artifacts: {}", o.dir.display());
            }
            if o.report.verdict {
                0
            } else {
                eprintln!("verification failure: {}", first_failure(&o.report));
                4
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
