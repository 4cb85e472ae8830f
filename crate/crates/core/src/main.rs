//! Command-line entry point for corpus ingestion, feature export, weak
//! labeling, training, evaluation, prediction and feature importance.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use convsat::data::{parse_dbdc3, parse_jsonl, split_dataset, write_jsonl, Conversation, SatLabel};
use convsat::features::{FeatureExtractor, FeatureSchema, IntentRuleSet};
use convsat::harness::{
    evaluate, evaluate_folds, heuristic_baseline_eval, importance_table, train, MetricsReport, TrainConfig,
};
use convsat::model::{predict_online, read_embeddings, ConvSatModel, ModelConfig, OutputMode, Task};
use convsat::nn::Head;
use convsat::weak::label_conversation;

#[derive(Parser)]
#[command(name = "convsat", version, about = "Conversational satisfaction and breakdown prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Dbdc3,
    Jsonl,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a DBDC3 directory or a JSONL file into canonical JSONL.
    Ingest {
        #[arg(long, value_enum)]
        format: InputFormat,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export per-turn behavioral features as CSV.
    Features {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Feature schema JSON; defaults to all features.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Write unscaled values instead of online-scaled ones.
        #[arg(long)]
        raw: bool,
    },
    /// Attach rule-based satisfaction labels to every turn.
    Weaklabel {
        #[arg(long)]
        data: PathBuf,
        /// CSV of `conversation_id,rating` overriding ratings in the data.
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// CSV recording which rule labeled each turn.
        #[arg(long)]
        provenance: PathBuf,
    },
    /// Train a model and write the bundle, training log and resolved config.
    Train {
        #[arg(long, value_enum)]
        task: Task,
        /// JSON with optional `model` and `train` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Starting preset: convsat, dbdc3, lstm or clstm.
        #[arg(long, default_value = "convsat")]
        preset: String,
        #[arg(long)]
        train: PathBuf,
        /// Validation data; when absent a share of the training data is held out.
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Pretrained word vectors, one `token v1 … vd` per line.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model, or the heuristic-labeling baseline with `--heuristic`.
    Eval {
        #[arg(long, required_unless_present = "heuristic")]
        model: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        task: Task,
        /// Report mean and std over k disjoint folds of the data.
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long, default_value_t = 0)]
        fold_seed: u64,
        #[arg(long)]
        heuristic: bool,
        /// Metrics JSON destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write predictions as TSV: conversation_id, turn, label, probability.
    /// Without `--online` the model's own output mode decides which turns appear.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// One row per turn, stepping the streaming predictor.
        #[arg(long)]
        online: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank features by permutation importance and write CSV.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Training run configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    model: Option<ModelConfig>,
    #[serde(default)]
    train: TrainConfig,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Ingest { format, input, out } => ingest(format, &input, &out),
        Command::Features { data, out, schema, raw } => features(&data, &out, schema.as_deref(), raw),
        Command::Weaklabel {
            data,
            ratings,
            out,
            provenance,
        } => weaklabel(&data, ratings.as_deref(), &out, &provenance),
        Command::Train {
            task,
            config,
            preset,
            train,
            val,
            seed,
            epochs,
            embeddings,
            out,
        } => run_train(TrainArgs {
            task,
            config,
            preset,
            train,
            val,
            seed,
            epochs,
            embeddings,
            out,
        }),
        Command::Eval {
            model,
            data,
            task,
            folds,
            fold_seed,
            heuristic,
            out,
        } => run_eval(model.as_deref(), &data, task, folds, fold_seed, heuristic, out.as_deref()),
        Command::Predict {
            model,
            data,
            online,
            out,
        } => run_predict(&model, &data, online, out.as_deref()),
        Command::Importance {
            model,
            data,
            repeats,
            seed,
            out,
        } => run_importance(&model, &data, repeats, seed, out.as_deref()),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn load_data(path: &Path) -> Result<Vec<Conversation>> {
    parse_jsonl(path).with_context(|| format!("reading {}", path.display()))
}

fn ingest(format: InputFormat, input: &Path, out: &Path) -> Result<()> {
    let convs = match format {
        InputFormat::Dbdc3 => parse_dbdc3(input)?,
        InputFormat::Jsonl => parse_jsonl(input)?,
    };
    write_jsonl(out, &convs)?;
    let turns: usize = convs.iter().map(Conversation::len).sum();
    log::info!("wrote {} conversations ({turns} turns) to {}", convs.len(), out.display());
    Ok(())
}

fn features(data: &Path, out: &Path, schema: Option<&Path>, raw: bool) -> Result<()> {
    let schema = match schema {
        Some(p) => FeatureSchema::load(p)?,
        None => FeatureSchema::full(),
    };
    let convs = load_data(data)?;
    let extractor = FeatureExtractor::new(schema);
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    extractor.write_csv(BufWriter::new(file), &convs, !raw)?;
    Ok(())
}

fn read_ratings(path: &Path) -> Result<HashMap<String, f64>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = HashMap::new();
    for row in reader.deserialize::<(String, f64)>() {
        let (id, rating) = row?;
        out.insert(id, rating);
    }
    Ok(out)
}

fn weaklabel(data: &Path, ratings: Option<&Path>, out: &Path, provenance: &Path) -> Result<()> {
    let mut convs = load_data(data)?;
    let ratings = ratings.map(read_ratings).transpose()?.unwrap_or_default();
    let intents = IntentRuleSet::default();
    let mut prov = csv::Writer::from_path(provenance)?;
    prov.write_record(["conversation_id", "turn", "label", "rule"])?;
    for conv in &mut convs {
        if let Some(r) = ratings.get(&conv.id) {
            conv.final_rating = Some(*r);
        }
        let (labels, rules) = label_conversation(conv, None, &intents)
            .with_context(|| format!("labeling conversation `{}`", conv.id))?;
        for ((turn, label), rule) in conv.turns.iter_mut().zip(&labels).zip(&rules) {
            turn.gold_sat = Some(*label);
            prov.write_record([
                conv.id.as_str(),
                &turn.index.to_string(),
                label.as_str(),
                rule.as_str(),
            ])?;
        }
    }
    prov.flush()?;
    write_jsonl(out, &convs)?;
    let sat = convs
        .iter()
        .flat_map(|c| &c.turns)
        .filter(|t| t.gold_sat == Some(SatLabel::Sat))
        .count();
    let total: usize = convs.iter().map(Conversation::len).sum();
    log::info!("labeled {total} turns, {sat} SAT");
    Ok(())
}

struct TrainArgs {
    task: Task,
    config: Option<PathBuf>,
    preset: String,
    train: PathBuf,
    val: Option<PathBuf>,
    seed: Option<u64>,
    epochs: Option<usize>,
    embeddings: Option<PathBuf>,
    out: PathBuf,
}

fn run_train(args: TrainArgs) -> Result<()> {
    let run: RunConfig = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    let model_config = match run.model {
        Some(m) => m,
        None => ModelConfig::preset(&args.preset, args.task)?,
    };
    let mut tc = run.train;
    if let Some(s) = args.seed {
        tc.seed = s;
    }
    if let Some(e) = args.epochs {
        tc.epochs = e;
    }
    let all = load_data(&args.train)?;
    let (train_set, val_set) = match &args.val {
        Some(v) => (all, load_data(v)?),
        None => {
            let split = split_dataset(&all, tc.val_fraction, tc.seed)?;
            (split.train, split.validation)
        }
    };
    let embeddings = args.embeddings.as_deref().map(read_embeddings).transpose()?;
    let (model, log) = train(&model_config, &train_set, &val_set, args.task, &tc, embeddings.as_ref())?;
    model.save(&args.out)?;
    let resolved = RunConfig {
        model: Some(model_config),
        train: tc,
    };
    fs::write(args.out.join("run_config.json"), serde_json::to_string_pretty(&resolved)?)?;
    fs::write(args.out.join("train_log.json"), serde_json::to_string_pretty(&log)?)?;
    log::info!(
        "best epoch {} with validation macro-F1 {:.4} ({})",
        log.best_epoch,
        log.best_val_macro_f1,
        log.stop_reason
    );
    Ok(())
}

fn print_report(report: &MetricsReport, out: Option<&Path>) -> Result<()> {
    print!("{}", report.to_table());
    if let Some(p) = out {
        fs::write(p, serde_json::to_string_pretty(report)?)?;
    }
    Ok(())
}

fn run_eval(
    model: Option<&Path>,
    data: &Path,
    task: Task,
    folds: Option<usize>,
    fold_seed: u64,
    heuristic: bool,
    out: Option<&Path>,
) -> Result<()> {
    let convs = load_data(data)?;
    if heuristic {
        if task != Task::SatOnline {
            bail!("the heuristic baseline only predicts the sat-online task");
        }
        return print_report(&heuristic_baseline_eval(&convs, &IntentRuleSet::default())?, out);
    }
    let model = ConvSatModel::load(model.expect("clap requires --model"))?;
    match folds {
        None => print_report(&evaluate(&model, &convs, task)?, out),
        Some(k) => {
            let report = evaluate_folds(&model, &convs, task, k, fold_seed)?;
            println!("{} folds ({})", report.k, report.note);
            println!("AC {:.4} ± {:.4}", report.accuracy.mean, report.accuracy.std);
            println!("macro F1 {:.4} ± {:.4}", report.macro_f1.mean, report.macro_f1.std);
            for (label, s) in &report.class_f1 {
                println!("F1({label}) {:.4} ± {:.4}", s.mean, s.std);
            }
            if let Some(p) = out {
                fs::write(p, serde_json::to_string_pretty(&report)?)?;
            }
            Ok(())
        }
    }
}

fn run_predict(model: &Path, data: &Path, online: bool, out: Option<&Path>) -> Result<()> {
    let model = ConvSatModel::load(model)?;
    let convs = load_data(data)?;
    let mut w = output(out)?;
    writeln!(w, "conversation_id\tturn\tlabel\tprobability")?;
    for conv in &convs {
        let preds = if online {
            predict_online(&model, conv)?
        } else {
            model.predict(conv)?
        };
        for p in preds {
            writeln!(w, "{}\t{}\t{}\t{:.6}", conv.id, p.turn, p.label.as_str(), p.probability)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn model_task(model: &ConvSatModel) -> Task {
    match (model.config.head, model.config.mode) {
        (Head::Softmax3, _) => Task::Breakdown,
        (Head::Sigmoid1, OutputMode::Online) => Task::SatOnline,
        (Head::Sigmoid1, OutputMode::Offline) => Task::SatOffline,
    }
}

fn run_importance(model: &Path, data: &Path, repeats: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let model = ConvSatModel::load(model)?;
    let convs = load_data(data)?;
    let rows = importance_table(&model, &convs, model_task(&model), seed, repeats)?;
    let mut w = csv::Writer::from_writer(output(out)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
