use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use apiscope::config::RunConfig;
use apiscope::runner;
use apiscope::synth::SynthSpec;
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "apiscope", version, about = "Find discussion threads that refer to a Java API method")]
struct Cli {
    /// Run configuration (flat TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `hash` or `external:<host>:<port>`.
    #[arg(long, global = true)]
    provider: Option<String>,
    /// Weight of the syntactic score in the joint score.
    #[arg(long, global = true)]
    x: Option<f64>,
    /// Relevance threshold on the joint score.
    #[arg(long, global = true)]
    t: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the corpus and API database and write normalized copies.
    Ingest,
    /// Train the relevance classifier and tune x on the training split.
    Train,
    /// Re-tune x for an existing model.
    Tune,
    /// Rank the potential threads of one API method.
    Search {
        #[arg(long)]
        api: String,
        /// Emit per-scope score breakdowns to stderr.
        #[arg(long)]
        debug: bool,
    },
    /// Evaluate fused, syntactic-only and semantic-only classification.
    Eval {
        /// Print human-readable tables instead of records.
        #[arg(long)]
        table: bool,
    },
    /// Write a seeded synthetic corpus, API database, labels and config.
    GenSynthetic {
        #[arg(long, default_value_t = 8)]
        apis: usize,
        #[arg(long, default_value_t = 12)]
        threads_per_api: usize,
        #[arg(long, default_value_t = 1)]
        ambiguity: usize,
        #[arg(long, default_value_t = 0.7)]
        syntactic: f64,
        #[arg(long, default_value_t = 0.7)]
        semantic: f64,
    },
}

fn config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = &cli.provider {
        cfg.provider = p.clone();
    }
    if let Some(x) = cli.x {
        cfg.x = x;
    }
    if let Some(t) = cli.t {
        cfg.t = t;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit<T: Serialize>(out: &mut impl Write, row: &T) -> anyhow::Result<()> {
    serde_json::to_writer(&mut *out, row)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct GridRow {
    x: f64,
    f1: f64,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Ingest => {
            let cfg = config(&cli)?;
            let s = runner::ingest(&cfg)?;
            writeln!(out, "{} threads ingested", s.threads)?;
            writeln!(out, "{} API methods ingested", s.apis)?;
        }
        Command::Train => {
            let cfg = config(&cli)?;
            let o = runner::train(&cfg)?;
            for (x, f1) in &o.tune.scores {
                emit(&mut out, &GridRow { x: *x, f1: *f1 })?;
            }
            emit(&mut out, &o)?;
        }
        Command::Tune => {
            let cfg = config(&cli)?;
            let (tune, path) = runner::tune(&cfg)?;
            for (x, f1) in &tune.scores {
                emit(&mut out, &GridRow { x: *x, f1: *f1 })?;
            }
            emit(&mut out, &serde_json::json!({ "x": tune.x, "f1": tune.f1, "config": path }))?;
        }
        Command::Search { api, debug } => {
            let cfg = config(&cli)?;
            let (ds, hits) = runner::search(&cfg, api)?;
            if *debug {
                let mut err = io::stderr().lock();
                for h in &hits {
                    for trace in runner::scope_traces(&ds, api, h.thread_id)? {
                        emit(&mut err, &trace)?;
                    }
                }
            }
            for h in &hits {
                emit(&mut out, h)?;
            }
        }
        Command::Eval { table } => {
            let cfg = config(&cli)?;
            let r = runner::eval(&cfg)?;
            let reports = [
                (&r.fused, "fused"),
                (&r.syntactic_only, "syntactic-only"),
                (&r.semantic_only, "semantic-only"),
            ];
            for (report, label) in reports {
                if *table {
                    writeln!(out, "{}", report.to_table(label))?;
                } else {
                    out.write_all(report.to_jsonl(label).as_bytes())?;
                }
            }
        }
        Command::GenSynthetic {
            apis,
            threads_per_api,
            ambiguity,
            syntactic,
            semantic,
        } => {
            let Some(dir) = &cli.out else {
                bail!("gen-synthetic needs --out <dir>");
            };
            let spec = SynthSpec {
                n_apis: *apis,
                n_threads_per_api: *threads_per_api,
                ambiguity: *ambiguity,
                syntactic_signal: *syntactic,
                semantic_signal: *semantic,
                seed: cli.seed.unwrap_or(0),
            };
            runner::write_synthetic(&spec, dir)
                .with_context(|| format!("writing synthetic corpus to {}", dir.display()))?;
            emit(&mut out, &serde_json::json!({ "dir": dir, "spec": spec }))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
