use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mtwv::config::{RunConfig, Suite};
use mtwv::run;

#[derive(Parser)]
#[command(name = "mtwv", version, about = "Numerical checks of MTW-type conditions for transport costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured suites and write a JSON report.
    Run {
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Catalog cost name (overrides the config).
        #[arg(long)]
        cost: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated suites: structural, loeper, qqconv, a3, lemmas, all.
        #[arg(long, value_delimiter = ',')]
        suites: Option<Vec<String>>,
        /// Report path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV path for the level-set grid of the first probe.
        #[arg(long)]
        export_grid: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    let Command::Run { config, cost, seed, suites, out, export_grid } = cli.command;
    let mut cfg = match (&config, &cost) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::new(name),
        (None, None) => anyhow::bail!("either --config or --cost is required"),
    };
    if let Some(name) = cost {
        if name != cfg.cost.name {
            cfg.cost.name = name;
            cfg.cost.epsilon = None;
            cfg.domains = None;
        }
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(list) = suites {
        cfg.suites = list.iter().map(|s| Suite::parse(s.trim())).collect::<Result<_, _>>()?;
    }
    if let Some(o) = out {
        cfg.output = o;
    }
    if let Some(g) = export_grid {
        cfg.export.grid = Some(g);
    }
    let report = run(&cfg)?;
    report.write(&cfg.output).with_context(|| format!("writing {}", cfg.output.display()))?;
    for (suite, reports) in &report.verdicts {
        for r in reports {
            let label = r.label.as_deref().map(|l| format!(" [{l}]")).unwrap_or_default();
            println!("{suite:>10}  {:<22} {:?}{label}", r.condition, r.verdict);
        }
    }
    for l in &report.lemmas {
        println!("{:>10}  {:<22} {:?}", "lemmas", l.lemma_id, l.status);
    }
    for e in &report.errors {
        eprintln!("error in {}: {}", e.suite, e.message);
    }
    println!("overall: {:?} -> {}", report.overall, cfg.output.display());
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
