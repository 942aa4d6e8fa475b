use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cliptbp::gradcheck::{run_suite, SuiteConfig};
use cliptbp::io::{self, Settings};
use cliptbp::metrics::evaluate;
use cliptbp::toy::{generate_dataset, query_objective, run_experiment};
use cliptbp::QueryId;

mod report;

#[derive(Parser)]
#[command(name = "cliptbp", version, about = "Clip-pair boundary losses and moment-retrieval evaluation")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` file; applied before `--set`.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set lambda_clip=0`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Score a prediction file against ground truth
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Predictions kept per query after ranking
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Finite-difference check of every analytic loss gradient
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Loss terms of one query from CTB1 embeddings
    Loss {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        qid: u64,
    },
    /// Write a synthetic dataset: gt.jsonl and features/<qid>.ctb
    GenData {
        #[arg(long, value_name = "CONFIG")]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the toy model; writes loss_trace.csv and eval.json
    TrainToy {
        #[arg(long, value_name = "CONFIG")]
        spec: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn settings(args: &ConfigArgs, spec: Option<&Path>) -> Result<Settings> {
    let mut s = Settings::default();
    for path in args.config.iter().map(PathBuf::as_path).chain(spec) {
        s.apply_file(path)?;
    }
    for o in &args.overrides {
        s.apply_override(o)?;
    }
    s.validate()?;
    Ok(s)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Returns whether the command succeeded (only `gradcheck` can fail softly).
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Eval { gt, pred, cap, json } => {
            let s = settings(&cli.config, None)?;
            let cap = cap.unwrap_or(s.cap);
            let gts = io::parse_ground_truth(&gt)?;
            let preds = io::parse_predictions(&pred, cap)?;
            let result = evaluate(&preds, &gts, cap)?;
            if json {
                print!("{}", report::eval_json(&result));
            } else {
                print!("{}", report::eval_table(&result));
            }
        }
        Command::Gradcheck { seed, trials } => {
            let report = run_suite(&SuiteConfig {
                first_seed: seed,
                trials,
                ..SuiteConfig::default()
            })?;
            print!("{}", report::gradcheck_table(&report));
            return Ok(report.passed());
        }
        Command::Loss { features, gt, qid } => {
            let s = settings(&cli.config, None)?;
            let emb = io::read_ctb1(&features)?;
            let gts = io::parse_ground_truth(&gt)?;
            let entry = gts
                .iter()
                .find(|g| g.query_id() == QueryId(qid))
                .with_context(|| format!("qid {qid} not found in {}", gt.display()))?;
            let obj = query_objective(&emb, entry, &s.train.objective)?;
            print!("{}", report::loss_table(&obj.components, obj.total));
        }
        Command::GenData { spec, out } => {
            let s = settings(&cli.config, spec.as_deref())?;
            let data = generate_dataset(&s.dataset)?;
            let features = out.join("features");
            fs::create_dir_all(&features).with_context(|| format!("creating {}", features.display()))?;
            io::write_ground_truth(out.join("gt.jsonl"), &data.ground_truth())?;
            for q in &data.queries {
                io::write_ctb1(features.join(format!("{}.ctb", q.ground_truth.query_id())), &q.features)?;
            }
            write(&out.join("spec.cfg"), &s.to_config_string())?;
            println!("wrote {} queries to {}", data.queries.len(), out.display());
        }
        Command::TrainToy { spec, steps, out } => {
            let mut s = settings(&cli.config, spec.as_deref())?;
            if let Some(steps) = steps {
                s.train.steps = steps;
            }
            if s.train.steps == 0 {
                bail!("--steps must be at least 1");
            }
            let exp = run_experiment(&s.dataset, &s.train, s.cap)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write(&out.join("loss_trace.csv"), &report::trace_csv(&exp.trace))?;
            let eval = format!(
                "{{\n\"threshold\": {:.4},\n\"untrained\": {},\n\"trained\": {}\n}}\n",
                exp.trained_threshold,
                report::eval_json(&exp.untrained).trim_end(),
                report::eval_json(&exp.trained).trim_end()
            );
            write(&out.join("eval.json"), &eval)?;
            let first = exp.trace.first().map_or(0.0, |r| r.total);
            let last = exp.trace.last().map_or(0.0, |r| r.total);
            println!("steps      {}", exp.trace.len());
            println!("loss       {first:.4} -> {last:.4}");
            println!(
                "R1@0.7     {:.2} -> {:.2}",
                exp.untrained.r1(0.7).unwrap_or(0.0),
                exp.trained.r1(0.7).unwrap_or(0.0)
            );
            println!("mAP@Avg    {:.2} -> {:.2}", exp.untrained.map_avg, exp.trained.map_avg);
        }
    }
    Ok(true)
}

/// The error chain, skipping causes the outer message already spells out.
fn message(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.ends_with(&c) {
            msg.push_str(": ");
            msg.push_str(&c);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", message(&e));
            ExitCode::from(2)
        }
    }
}
