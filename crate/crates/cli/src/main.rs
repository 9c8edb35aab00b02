use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dtgspl_core::harness::{
    ablate, evaluate, metric_spec, predict_all, report, train, write_json_lines, write_json_pretty, write_run,
    AblationMode, OracleAudit, PredictionRecord, PseudoLabelAudit, PseudoLabelRecord, RunConfig,
};
use dtgspl_core::harness::{join_records, read_json_lines};
use dtgspl_core::kernel::Checkpoint;
use dtgspl_core::lattice::build_lattice;
use dtgspl_core::metrics::{metric_table, EvalRecord, MetricReport};
use dtgspl_core::synth::{gen_split, read_oracle, read_training, write_jsonl, Split};
use dtgspl_core::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "dtgspl", version, about = "Diverse temporal grounding from single positive labels")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark.
    Gen(Common),
    /// Train the joint model.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training file (no hidden labels needed).
        #[arg(long)]
        data: PathBuf,
        /// Oracle for the training samples; enables pseudo-label auditing.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Held-out oracle file to evaluate on after training.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Estimate pseudo-positive moments with a trained checkpoint.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Emit the decoder's N moment predictions per sample.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Score predictions against oracle labels.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Pre-joined records: JSON lines of {id, predictions, annotations}, scored as multi-label.
        #[arg(long, conflicts_with_all = ["predictions", "checkpoint"])]
        records: Option<PathBuf>,
        #[arg(long, conflicts_with = "checkpoint")]
        predictions: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        oracle: Option<PathBuf>,
    },
    /// Train the full model and one ablated variant with matched seeds.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// no_epr, no_matching, no_reconstruction or no_augmenting.
        #[arg(long)]
        mode: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        oracle: Option<PathBuf>,
    },
    /// Build CSV curves and a JSON summary from a run directory.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        run: PathBuf,
    },
    /// Inspect the proposal lattice.
    Lattice {
        #[command(subcommand)]
        cmd: LatticeCommand,
    },
}

#[derive(Subcommand)]
enum LatticeCommand {
    /// Print every proposal as JSON.
    Dump {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Resolution at which dense enumeration stops; defaults to the configured one.
        #[arg(long)]
        base: Option<usize>,
    },
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .ok_or_else(|| Error::InvalidArgument("--out is required".into()))?;
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

fn load_model(path: &Path) -> Result<dtgspl_core::harness::Model> {
    dtgspl_core::harness::Model::from_checkpoint(&Checkpoint::load(path)?)
}

fn write_metrics(dir: &Path, rows: &[MetricReport]) -> Result<()> {
    write_json_pretty(&dir.join("metrics.json"), &rows)?;
    let mut w = csv::Writer::from_path(dir.join("metrics_table.csv")).map_err(std::io::Error::other)?;
    w.write_record(["metric", "n", "g", "alpha", "beta", "value", "samples"])
        .map_err(std::io::Error::other)?;
    for m in rows {
        w.write_record([
            m.metric.clone(),
            m.n.to_string(),
            m.g.map(|g| g.to_string()).unwrap_or_default(),
            m.alpha.to_string(),
            m.beta.map(|b| b.to_string()).unwrap_or_default(),
            m.value.to_string(),
            m.samples.to_string(),
        ])
        .map_err(std::io::Error::other)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(c) => {
            let cfg = c.run_config()?;
            let dir = c.out_dir()?;
            let train_set = gen_split(&cfg.data, cfg.seed, Split::Train, cfg.data.samples)?;
            let test_set = gen_split(&cfg.data, cfg.seed, Split::Test, cfg.eval.test_samples)?;
            write_jsonl(&dir.join("train.jsonl"), &train_set.samples, false)?;
            write_jsonl(&dir.join("train_oracle.jsonl"), &train_set.samples, true)?;
            write_jsonl(&dir.join("test_oracle.jsonl"), &test_set.samples, true)?;
            fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
        }
        Command::Train {
            common,
            data,
            oracle,
            test,
        } => {
            let cfg = common.run_config()?;
            let dir = common.out_dir()?;
            let samples = read_training(&data)?;
            let audit = oracle
                .map(|p| read_oracle(&p).map(|o| OracleAudit::new(&o, cfg.eval.pseudo_iou)))
                .transpose()?;
            let outcome = train(&cfg, &samples, audit.as_ref().map(|a| a as &dyn PseudoLabelAudit), |log| {
                eprintln!(
                    "epoch {:>3}  loss {:.4}  pme {:.4}  dmr {:.4}  pseudo {}",
                    log.epoch, log.l_total, log.l_pme, log.l_dmr, log.pseudo_count
                );
            })?;
            let metrics = test
                .map(|p| evaluate(&outcome.model, &read_oracle(&p)?, &cfg.eval))
                .transpose()?;
            write_run(&dir, &cfg, &samples, &outcome, metrics.as_deref())?;
        }
        Command::Estimate {
            common,
            checkpoint,
            data,
        } => {
            let dir = common.out_dir()?;
            let model = load_model(&checkpoint)?;
            let samples = read_training(&data)?;
            let epoch = model.cfg.optim.epochs;
            let rows = samples
                .iter()
                .map(|s| Ok(PseudoLabelRecord::new(&s.id, &model.estimate(s, epoch)?)))
                .collect::<Result<Vec<_>>>()?;
            write_json_lines(&dir.join("pseudo_labels.jsonl"), &rows)?;
        }
        Command::Predict {
            common,
            checkpoint,
            data,
        } => {
            let dir = common.out_dir()?;
            let model = load_model(&checkpoint)?;
            let rows = predict_all(&model, &read_training(&data)?)?;
            write_json_lines(&dir.join("predictions.jsonl"), &rows)?;
        }
        Command::Eval {
            common,
            records,
            predictions,
            checkpoint,
            oracle,
        } => {
            let cfg = common.run_config()?;
            let dir = common.out_dir()?;
            let rows = if let Some(p) = records {
                let multi: Vec<EvalRecord> = read_json_lines(&p)?;
                metric_table(&[], &multi, &metric_spec(&cfg.eval))?
            } else {
                let oracle = oracle.ok_or_else(|| Error::InvalidArgument("--oracle is required".into()))?;
                let oracle = read_oracle(&oracle)?;
                if let Some(p) = predictions {
                    let preds: Vec<PredictionRecord> = read_json_lines(&p)?;
                    let (single, multi) = join_records(&preds, &oracle)?;
                    metric_table(&single, &multi, &metric_spec(&cfg.eval))?
                } else {
                    let ck = checkpoint.ok_or_else(|| {
                        Error::InvalidArgument("one of --records, --predictions or --checkpoint is required".into())
                    })?;
                    let model = load_model(&ck)?;
                    evaluate(&model, &oracle, &model.cfg.eval)?
                }
            };
            write_metrics(&dir, &rows)?;
        }
        Command::Ablate {
            common,
            mode,
            data,
            test,
            oracle,
        } => {
            let cfg = common.run_config()?;
            let dir = common.out_dir()?;
            let mode: AblationMode = mode.parse()?;
            let samples = read_training(&data)?;
            let test = read_oracle(&test)?;
            let oracle = oracle.map(|p| read_oracle(&p)).transpose()?;
            let rep = ablate(&cfg, mode, &samples, &test, oracle.as_deref())?;
            write_json_pretty(&dir.join("ablation.json"), &rep)?;
            let mut w = csv::Writer::from_path(dir.join("ablation.csv")).map_err(std::io::Error::other)?;
            w.write_record(["metric", "n", "g", "alpha", "beta", "full", mode.name(), "delta_points"])
                .map_err(std::io::Error::other)?;
            for r in &rep.comparison {
                w.write_record([
                    r.metric.clone(),
                    r.n.to_string(),
                    r.g.map(|g| g.to_string()).unwrap_or_default(),
                    r.alpha.to_string(),
                    r.beta.map(|b| b.to_string()).unwrap_or_default(),
                    r.full.to_string(),
                    r.variant.to_string(),
                    r.delta.to_string(),
                ])
                .map_err(std::io::Error::other)?;
            }
            w.flush()?;
        }
        Command::Report { common, run } => {
            let out = common.out.clone().unwrap_or_else(|| run.clone());
            report(&run, &out)?;
        }
        Command::Lattice {
            cmd: LatticeCommand::Dump { common, n, base },
        } => {
            let cfg = common.run_config()?;
            let set = build_lattice(n, base.unwrap_or(cfg.model.lattice_base))?;
            let doc = json!({
                "n": n,
                "base": set.base(),
                "count": set.len(),
                "proposals": set
                    .cells()
                    .iter()
                    .zip(set.proposals())
                    .map(|(&(a, b), p)| json!({"cell": [a, b], "start": p.start(), "end": p.end()}))
                    .collect::<Vec<_>>(),
            });
            match &common.out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    write_json_pretty(&dir.join("lattice.json"), &doc)?;
                }
                None => {
                    let mut out = std::io::stdout().lock();
                    match writeln!(out, "{}", serde_json::to_string_pretty(&doc)?) {
                        // a closed pipe (`| head`) is not an error for a dump
                        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                        r => r?,
                    }
                }
            }
        }
    }
    Ok(())
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({"error": {"kind": kind, "message": message}}));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail("usage", e.to_string().trim().to_string()),
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}

