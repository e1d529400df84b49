//! `qsthermo`: run built-in or configured thermodynamics scenarios and write
//! CSV tables plus a JSON residual report.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail checks

mod config;
mod output;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::{ConfigFile, Overrides, Scenario, ScenarioKind};
use output::{Report, ScenarioReport};

#[derive(Debug, Parser)]
#[command(name = "qsthermo", version, about = "Quasi-static NEGF thermodynamics scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a config file and/or built-in scenarios.
    Run(RunArgs),
    /// List the built-in scenarios.
    List,
    /// Print the full default config of a built-in scenario.
    Config {
        /// Scenario name, see `qsthermo list`.
        scenario: String,
    },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// JSON scenario config.
    config: Option<PathBuf>,
    /// Built-in scenario to run; repeatable, `all` runs every one.
    #[arg(long = "scenario", value_name = "NAME")]
    scenarios: Vec<String>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Gauss-Legendre order per energy panel.
    #[arg(long)]
    n_theta: Option<usize>,
    /// Integration steps per protocol segment.
    #[arg(long)]
    u_steps: Option<usize>,
    /// Alpha values as start:end:step (inclusive).
    #[arg(long, value_name = "START:END:STEP")]
    alpha_grid: Option<String>,
    /// Exit with status 2 if any residual check fails.
    #[arg(long)]
    check: bool,
    /// Worker threads, defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(args) => run(args),
        Command::List => {
            for k in ScenarioKind::ALL {
                println!("{:<20}{}", k.name(), k.summary());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Config { scenario } => print_config(&scenario),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn print_config(name: &str) -> Result<ExitCode> {
    let kind: ScenarioKind = name.parse().map_err(anyhow::Error::msg)?;
    println!("{}", serde_json::to_string_pretty(&ConfigFile::builtin(kind))?);
    Ok(ExitCode::SUCCESS)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let ov = Overrides {
        n_theta: args.n_theta,
        u_steps: args.u_steps,
        alphas: args.alpha_grid.as_deref().map(config::parse_range).transpose().context("--alpha-grid")?,
    };
    let list = config::load(args.config.as_ref(), &args.scenarios, &ov)?;
    let mut names: Vec<&str> = list.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        anyhow::bail!("two scenarios would write `{}`; set distinct `name`s", w[0]);
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("thread pool")?;
    let results: Vec<Result<scenarios::Run>> = pool.install(|| list.par_iter().map(run_one).collect());

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut runs = Vec::new();
    for (s, r) in list.iter().zip(results) {
        let r = r.with_context(|| format!("scenario {}", s.name))?;
        runs.push(r);
    }
    let mut reports = Vec::new();
    for (s, r) in list.iter().zip(&runs) {
        let mut files = Vec::new();
        for t in &r.output.tables {
            let f = t.file_name(&s.name);
            t.write(&args.out.join(&f))?;
            files.push(f);
        }
        let pass = r.output.checks.iter().all(|c| c.pass);
        for c in r.output.checks.iter().filter(|c| !c.pass) {
            eprintln!("{}: check {} failed: {:e} vs {:e}", s.name, c.name, c.value, c.tolerance);
        }
        reports.push(ScenarioReport {
            name: &s.name,
            scenario: s.kind.name(),
            files,
            pass,
            checks: &r.output.checks,
            quantities: &r.quantities,
        });
    }
    let report = Report { pass: reports.iter().all(|r| r.pass), scenarios: reports };
    report.write(&args.out.join("report.json"))?;
    if args.check && !report.pass {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_one(s: &Scenario) -> Result<scenarios::Run> {
    let t = Instant::now();
    let r = scenarios::run(s)?;
    eprintln!("{} done in {:.1}s", s.name, t.elapsed().as_secs_f64());
    Ok(r)
}
