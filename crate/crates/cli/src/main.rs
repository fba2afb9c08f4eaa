//! `astdefect`: file-based front end for the defect-prediction pipeline.
//!
//! Exit codes: 0 success, 1 metrics flagged undefined, 2 usage or input
//! error, 3 internal error.

mod config;
mod ingest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use astdefect::classifiers::{
    bow_featurize, featurize_corpus, read_classifier, read_features, train_classifier, write_classifier,
    write_features, FeatureMatrix,
};
use astdefect::corpus::{build_vocabulary, load_ast_document, write_ast_document, FileRecord, Vocabulary};
use astdefect::eval::{
    dataset_stats, run_experiment, stats_csv, stats_table, ExperimentDescriptor, ExperimentReport, FeatureMethod,
    MetricsReport,
};
use astdefect::model_file::{read_model, write_model};
use astdefect::pretrain::{log_to_csv, pretrain};
use astdefect::synth::{synthetic_corpus, SynthConfig};
use astdefect::{json, Error, Result};
use clap::{Parser, Subcommand};

use config::{
    check_output, read_input, write_output, ClassifierArgs, FeatureArgs, GlobalArgs, PretrainArgs, VocabArgs,
};
use ingest::{ingest, read_labels, IngestOptions};

#[derive(Debug, Parser)]
#[command(name = "astdefect", version, about = "Tree-LSTM defect prediction over abstract syntax trees")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    /// Log progress (per-epoch losses and warnings) to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse source directories or validate AST documents into one corpus.
    Ingest {
        /// Directories of source files, single source files, or `.json` AST documents.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Project name for source inputs; the directory name by default.
        #[arg(long)]
        project: Option<String>,
        /// Version name for source inputs.
        #[arg(long, default_value = "1")]
        project_version: String,
        /// Extension of source files inside directories.
        #[arg(long, default_value = "mini")]
        ext: String,
        /// CSV of `file_id,label` (label 0 clean, 1 defective).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Drop unparseable inputs instead of failing.
        #[arg(long)]
        skip_bad: bool,
    },
    /// Build a label vocabulary from a corpus.
    Vocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        vocab: VocabArgs,
    },
    /// Pretrain a Tree-LSTM on a corpus; writes the model and its epoch log.
    Pretrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Epoch log CSV; `<output>.log.csv` by default.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        train: PretrainArgs,
    },
    /// Turn corpus records into feature vectors.
    Featurize {
        #[arg(long)]
        corpus: PathBuf,
        /// Pretrained model; required for `--method tree`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Vocabulary for `--method bow`; the model's vocabulary otherwise.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Fit a classifier on labeled features.
    TrainClassifier {
        #[arg(long)]
        features: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        classifier: ClassifierArgs,
    },
    /// Score labeled features with a classifier and report metrics.
    Evaluate {
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Report CSV; printed to stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value = "train")]
        train_name: String,
        #[arg(long, default_value = "test")]
        test_name: String,
    },
    /// Run a cross-validation or version-pair experiment end to end.
    Experiment {
        #[arg(long)]
        corpus: PathBuf,
        /// JSON descriptor: `{"kind":"cv","k":10}` or `{"kind":"pairs","pairs":[...]}`.
        #[arg(long)]
        descriptor: PathBuf,
        /// Report CSV; printed to stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        train: PretrainArgs,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        classifier: ClassifierArgs,
    },
    /// Per-project dataset statistics.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// CSV instead of the aligned table.
        #[arg(long)]
        csv: bool,
    },
    /// Write a labeled synthetic corpus for demos and smoke tests.
    Synth {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 400)]
        files: usize,
    },
}

enum Status {
    Success,
    Undefined,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Undefined) => {
            eprintln!("warning: some metrics are undefined; see the report flags");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 3 } else { 2 })
        }
    }
}

fn load_corpus(path: &Path) -> Result<Vec<FileRecord>> {
    load_ast_document(&read_input(path)?).map_err(|e| match e {
        Error::Io { .. } => e,
        e if e.is_internal() => e,
        e => Error::Input(format!("{}: {e}", path.display())),
    })
}

fn emit_report(report: &ExperimentReport, csv: Option<&Path>, json_path: Option<&Path>) -> Result<Status> {
    let text = report.to_csv();
    match csv {
        Some(p) => write_output(p, &text)?,
        None => print!("{text}"),
    }
    if let Some(p) = json_path {
        write_output(p, &report.to_json()?)?;
    }
    Ok(if report.has_undefined() { Status::Undefined } else { Status::Success })
}

fn run(cli: Cli) -> Result<Status> {
    if cli.global.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs)
        .build_global()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let mut cfg = cli.global.base_config()?;

    match cli.command {
        Command::Ingest {
            inputs,
            output,
            project,
            project_version,
            ext,
            labels,
            skip_bad,
        } => {
            check_output(&output)?;
            let opts = IngestOptions {
                project,
                version: project_version,
                extension: ext,
                labels: labels.as_deref().map(read_labels).transpose()?.unwrap_or_default(),
                skip_bad,
            };
            let got = ingest(&inputs, &opts)?;
            for s in &got.skipped {
                eprintln!("skipped {s}");
            }
            if !got.skipped.is_empty() {
                eprintln!("warning: skipped {} unparseable input(s)", got.skipped.len());
            }
            write_output(&output, &write_ast_document(&got.records)?)?;
            print!("{}", stats_table(&dataset_stats(&got.records)));
        }

        Command::Vocab { corpus, output, vocab } => {
            check_output(&output)?;
            vocab.apply(&mut cfg);
            let records = load_corpus(&corpus)?;
            let v = build_vocabulary(records.iter().map(|r| &r.tree), cfg.pretrain.vocab_size, cfg.pretrain.min_count)?;
            write_output(&output, &json::to_string(&v)?)?;
            println!("vocabulary: {} tokens", v.len());
        }

        Command::Pretrain {
            corpus,
            output,
            log,
            train,
        } => {
            let log_path = log.unwrap_or_else(|| output.with_extension("log.csv"));
            check_output(&output)?;
            check_output(&log_path)?;
            train.apply(&mut cfg);
            cfg.pretrain.train.seed = cfg.seed;
            let records = load_corpus(&corpus)?;
            let out = pretrain(&records, &cfg.pretrain)?;
            write_output(&output, &write_model(&out.model, Some(&out.head))?)?;
            write_output(&log_path, &log_to_csv(&out.log))?;
            let [n_train, n_val, n_test] = out.split_sizes;
            println!("split: {n_train} train, {n_val} validation, {n_test} test");
            println!("vocabulary: {} tokens", out.model.vocab().len());
            match out.best_epoch {
                Some(e) => println!("best epoch: {e} of {}", out.log.len()),
                None => println!("best epoch: none (initial model)"),
            }
            println!("validation perplexity: {:.4}", out.val_perplexity);
            println!("test perplexity: {:.4}", out.test_perplexity);
        }

        Command::Featurize {
            corpus,
            model,
            vocab,
            output,
            features,
        } => {
            check_output(&output)?;
            features.apply(&mut cfg);
            let model = model.as_deref().map(|p| read_input(p).and_then(|t| read_model(&t))).transpose()?;
            let records = load_corpus(&corpus)?;
            let fm: FeatureMatrix = match cfg.method {
                FeatureMethod::Tree => {
                    let (m, _) = model.ok_or_else(|| Error::Input("--method tree needs --model".into()))?;
                    featurize_corpus(&records, &m)?
                }
                FeatureMethod::Bow => {
                    let v: Vocabulary = match (vocab, model) {
                        (Some(p), _) => json::from_str(&read_input(&p)?)?,
                        (None, Some((m, _))) => m.vocab().clone(),
                        (None, None) => return Err(Error::Input("--method bow needs --vocab or --model".into())),
                    };
                    bow_featurize(&records, &v, cfg.bow_threshold)?
                }
            };
            write_output(&output, &write_features(&fm)?)?;
            println!("features: {} rows, dimension {}", fm.len(), fm.dim());
        }

        Command::TrainClassifier {
            features,
            output,
            classifier,
        } => {
            check_output(&output)?;
            classifier.apply(&mut cfg);
            cfg.classifier.forest.seed = cfg.seed;
            let fm = read_features(&read_input(&features)?)?;
            let labels = fm.labels()?;
            let c = train_classifier(&fm.vectors(), &labels, &cfg.classifier)?;
            write_output(&output, &write_classifier(&c)?)?;
            println!("classifier: {} on {} rows", c.kind(), fm.len());
        }

        Command::Evaluate {
            classifier,
            features,
            output,
            json: json_path,
            train_name,
            test_name,
        } => {
            for p in output.iter().chain(&json_path) {
                check_output(p)?;
            }
            let c = read_classifier(&read_input(&classifier)?)?;
            let fm = read_features(&read_input(&features)?)?;
            if c.dim() != fm.dim() {
                return Err(Error::Input(format!(
                    "classifier expects dimension {}, features have {}",
                    c.dim(),
                    fm.dim()
                )));
            }
            let labels = fm.labels()?;
            let scores: Vec<f64> = fm.vectors().iter().map(|x| c.predict_proba(x)).collect();
            let row = MetricsReport::from_scores(&train_name, &test_name, &scores, &labels)?;
            return emit_report(&ExperimentReport::cells(vec![row]), output.as_deref(), json_path.as_deref());
        }

        Command::Experiment {
            corpus,
            descriptor,
            output,
            json: json_path,
            train,
            features,
            classifier,
        } => {
            for p in output.iter().chain(&json_path) {
                check_output(p)?;
            }
            train.apply(&mut cfg);
            features.apply(&mut cfg);
            classifier.apply(&mut cfg);
            let d = ExperimentDescriptor::from_json(&read_input(&descriptor)?)?;
            let records = load_corpus(&corpus)?;
            let outcome = run_experiment(&d, &records, &cfg)?;
            return emit_report(&outcome.report, output.as_deref(), json_path.as_deref());
        }

        Command::Stats { corpus, csv } => {
            let rows = dataset_stats(&load_corpus(&corpus)?);
            print!("{}", if csv { stats_csv(&rows) } else { stats_table(&rows) });
        }

        Command::Synth { output, files } => {
            check_output(&output)?;
            let sc = SynthConfig {
                files,
                seed: cfg.seed,
                ..SynthConfig::default()
            };
            let records = synthetic_corpus(&sc)?;
            write_output(&output, &write_ast_document(&records)?)?;
            print!("{}", stats_table(&dataset_stats(&records)));
        }
    }
    Ok(Status::Success)
}
