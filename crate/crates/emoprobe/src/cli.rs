//! The `emoprobe` command line.
//!
//! Exit codes: 0 success, 1 `validate` found problems, 2 usage error,
//! 3 validation, alignment or I/O failure, 4 numerical failure.
//!
//! `--out` may be omitted when `EMOPROBE_OUT` is set; output then goes to
//! `$EMOPROBE_OUT/<subcommand>`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use emoprobe_core::corpus::{Corpus, DistributionSummary, Split};
use emoprobe_core::embedding::{AlignmentReport, EmbeddingSet};
use emoprobe_core::metrics::{evaluate_all, EvalOptions, DEFAULT_KS};
use emoprobe_core::probe::{
    train, OptimizerKind, TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE, DEFAULT_TEMPERATURE,
};
use emoprobe_core::report::{merge, EvaluationReport};
use emoprobe_core::retrieval::Ranker;
use emoprobe_core::synth::{generate_synthetic, SynthConfig};

use crate::checkpoint::{checkpoint_files, load_checkpoint, save_checkpoint};
use crate::corpus_io::{categories_path_for, load_corpus, save_corpus};
use crate::error::{exit, Error, Result};
use crate::manifest::{digest_inputs, digest_outputs, sha256_bytes, sha256_file, RunManifest};
use crate::matrix_io::{embedding_files, load_embeddings, save_embeddings, MODEL_TAG_FILE};
use crate::render::{self, RenderFormat};

pub const OUT_ENV: &str = "EMOPROBE_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "emoprobe",
    version,
    about = "Contrastive probing of frozen embeddings for emotion retrieval"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with Gaussian-cluster embeddings.
    Synth(SynthArgs),
    /// Train a probe and write a checkpoint directory.
    Train(TrainArgs),
    /// Rank the pool for every emotion and write reports.
    Evaluate(EvaluateArgs),
    /// Check that embeddings cover the corpus exactly. Exits 1 on findings.
    Validate(ValidateArgs),
    /// Combine reports from several models into one comparison table.
    Merge(MergeArgs),
    /// Print event counts per emotion and split.
    Summary(SummaryArgs),
    /// Re-run a command from its run.json and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub categories: usize,
    #[arg(long, default_value_t = 100)]
    pub per_category: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub duplicate_fraction: f64,
    #[arg(long, default_value_t = 0.4)]
    pub explicit_fraction: f64,
    /// Train, valid and test fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.2, 0.2])]
    pub split_ratios: Vec<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus JSON-lines file.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Category sidecar; defaults to categories.json beside the corpus.
    #[arg(long)]
    pub categories_file: Option<PathBuf>,
}

impl CorpusArgs {
    fn categories_path(&self) -> PathBuf {
        self.categories_file
            .clone()
            .unwrap_or_else(|| categories_path_for(&self.corpus))
    }

    fn load(&self) -> Result<Corpus> {
        load_corpus(&self.corpus, Some(&self.categories_path()))
    }

    fn files(&self) -> Vec<PathBuf> {
        vec![self.corpus.clone(), self.categories_path()]
    }

    fn push_args(&self, args: &mut Vec<String>) -> Result<()> {
        push(args, "--corpus", absolute(&self.corpus)?);
        push(
            args,
            "--categories-file",
            absolute(&self.categories_path())?,
        );
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Embeddings directory.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Defaults to min(d, 256).
    #[arg(long)]
    pub projection_dim: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_EPOCHS)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = DEFAULT_PATIENCE)]
    pub patience: usize,
    /// sgd or adam.
    #[arg(long, default_value_t = OptimizerKind::Sgd)]
    pub optimizer: OptimizerKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Comma-separated cutoffs.
    #[arg(long = "k", value_delimiter = ',', default_values_t = DEFAULT_KS)]
    pub ks: Vec<usize>,
    /// Split whose events form the candidate pool.
    #[arg(long, default_value_t = Split::Test)]
    pub pool: Split,
    /// Recorded in the report verbatim. Omitted by default so reruns are
    /// byte-identical.
    #[arg(long)]
    pub timestamp: Option<String>,
    /// Also write the full ranking of every query to rankings.jsonl.
    #[arg(long)]
    pub rankings: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Print the alignment report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// report.json files, one per model.
    #[arg(long = "report", required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummaryArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// text, tsv or json.
    #[arg(long, default_value = "text")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A run.json written by an earlier command.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Merge(a) => cmd_merge(a),
        Command::Summary(a) => cmd_summary(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn absolute(p: &Path) -> Result<String> {
    std::path::absolute(p)
        .map(|p| p.to_string_lossy().into_owned())
        .map_err(|e| Error::io(p, e))
}

fn push(args: &mut Vec<String>, flag: &str, value: impl ToString) {
    args.push(flag.to_string());
    args.push(value.to_string());
}

fn out_dir(out: Option<PathBuf>, subcommand: &str) -> Result<PathBuf> {
    let dir = match out {
        Some(d) => d,
        None => match std::env::var_os(OUT_ENV) {
            Some(base) if !base.is_empty() => PathBuf::from(base).join(subcommand),
            _ => {
                return Err(Error::Usage(format!(
                    "--out is required when {OUT_ENV} is not set"
                )))
            }
        },
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn embedding_inputs(dir: &Path) -> Vec<PathBuf> {
    let mut files = embedding_files(dir).to_vec();
    let tag = dir.join(MODEL_TAG_FILE);
    if tag.exists() {
        files.push(tag);
    }
    files
}

fn load_aligned(corpus: &CorpusArgs, embeddings: &Path) -> Result<(Corpus, EmbeddingSet)> {
    let corpus = corpus.load()?;
    let set = load_embeddings(embeddings)?;
    let report = set.validate_alignment(&corpus);
    if !report.passed() {
        return Err(Error::Alignment(report));
    }
    Ok((corpus, set))
}

fn finish(
    mut manifest: RunManifest,
    out: &Path,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> Result<()> {
    let absolute_inputs = inputs
        .iter()
        .map(|p| absolute(p).map(PathBuf::from))
        .collect::<Result<Vec<_>>>()?;
    manifest.inputs = digest_inputs(&absolute_inputs)?;
    manifest.outputs = digest_outputs(out, outputs)?;
    manifest.write(out)?;
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("serializable")
}

pub fn cmd_synth(a: SynthArgs) -> Result<u8> {
    let ratios: [f64; 3] = a
        .split_ratios
        .as_slice()
        .try_into()
        .map_err(|_| Error::Usage("--split-ratios takes exactly three values".into()))?;
    let config = SynthConfig {
        n_categories: a.categories,
        events_per_category: a.per_category,
        dim: a.dim,
        cluster_separation: a.separation,
        noise_std: a.noise,
        duplicate_fraction: a.duplicate_fraction,
        explicit_fraction: a.explicit_fraction,
        split_ratios: ratios,
    };
    config.validate()?;
    let (corpus, set) = generate_synthetic(&config, a.seed)?;
    let out = out_dir(a.out, "synth")?;
    let (corpus_path, cat_path) = save_corpus(&corpus, &out)?;
    let mut outputs = vec![corpus_path, cat_path];
    outputs.extend(save_embeddings(&set, &out)?);

    let mut args = Vec::new();
    push(&mut args, "--categories", a.categories);
    push(&mut args, "--per-category", a.per_category);
    push(&mut args, "--dim", a.dim);
    push(&mut args, "--separation", a.separation);
    push(&mut args, "--noise", a.noise);
    push(&mut args, "--duplicate-fraction", a.duplicate_fraction);
    push(&mut args, "--explicit-fraction", a.explicit_fraction);
    push(
        &mut args,
        "--split-ratios",
        ratios.map(|r| r.to_string()).join(","),
    );
    push(&mut args, "--seed", a.seed);
    let manifest = RunManifest::new("synth", args, to_json(&config), Some(a.seed));
    finish(manifest, &out, &[], &outputs)?;
    println!(
        "wrote {} events in {} categories, dim {}, to {}",
        corpus.events().len(),
        corpus.categories().len(),
        config.dim,
        out.display()
    );
    Ok(exit::SUCCESS)
}

pub fn cmd_train(a: TrainArgs) -> Result<u8> {
    let config = TrainConfig {
        projection_dim: a.projection_dim,
        temperature: a.temperature,
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        max_epochs: a.max_epochs,
        patience: a.patience,
        seed: a.seed,
        optimizer: a.optimizer,
    };
    config.validate()?;
    let (corpus, set) = load_aligned(&a.corpus, &a.embeddings)?;
    let probe = train(&config, &corpus, &set)?;
    let out = out_dir(a.out, "train")?;
    let outputs = save_checkpoint(&probe, &out)?;

    let mut args = Vec::new();
    a.corpus.push_args(&mut args)?;
    push(&mut args, "--embeddings", absolute(&a.embeddings)?);
    push(&mut args, "--seed", a.seed);
    if let Some(dp) = a.projection_dim {
        push(&mut args, "--projection-dim", dp);
    }
    push(&mut args, "--temperature", a.temperature);
    push(&mut args, "--learning-rate", a.learning_rate);
    push(&mut args, "--batch-size", a.batch_size);
    push(&mut args, "--max-epochs", a.max_epochs);
    push(&mut args, "--patience", a.patience);
    push(&mut args, "--optimizer", a.optimizer);
    let mut inputs = a.corpus.files();
    inputs.extend(embedding_inputs(&a.embeddings));
    let manifest = RunManifest::new("train", args, to_json(&probe.config), Some(a.seed));
    finish(manifest, &out, &inputs, &outputs)?;
    println!(
        "stopped after epoch {}, kept epoch {}; {} loss {:.6} -> {:.6}; checkpoint in {}",
        probe.stopped_epoch,
        probe.selected_epoch,
        probe.monitor_split,
        probe.initial_valid_loss,
        probe.selected_valid_loss(),
        out.display()
    );
    Ok(exit::SUCCESS)
}

/// Content-addressed name for a checkpoint, independent of where it sits.
pub fn checkpoint_reference(dir: &Path) -> Result<String> {
    let mut joined = String::new();
    for f in checkpoint_files(dir) {
        joined.push_str(&sha256_file(&f)?);
    }
    let name = std::path::absolute(dir)
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "checkpoint".into());
    Ok(format!(
        "{name}@sha256:{}",
        &sha256_bytes(joined.as_bytes())[..16]
    ))
}

pub fn cmd_evaluate(a: EvaluateArgs) -> Result<u8> {
    let probe = load_checkpoint(&a.checkpoint)?;
    let (corpus, set) = load_aligned(&a.corpus, &a.embeddings)?;
    if probe.model_tag != set.model_tag {
        eprintln!(
            "warning: checkpoint was trained on {:?} embeddings, evaluating on {:?}",
            probe.model_tag, set.model_tag
        );
    }
    let options = EvalOptions {
        ks: a.ks.clone(),
        pool: a.pool,
        checkpoint: checkpoint_reference(&a.checkpoint)?,
    };
    let mut report = evaluate_all(&probe, &corpus, &set, &options)?;
    report.timestamp = a.timestamp.clone();

    let out = out_dir(a.out, "evaluate")?;
    let mut outputs = Vec::new();
    for format in RenderFormat::ALL {
        let bytes = render::render(&report, format).map_err(|e| Error::Usage(e.to_string()))?;
        let path = out.join(format!("report.{}", format.extension()));
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        outputs.push(path);
    }
    if a.rankings {
        let ranker = Ranker::for_split(&probe.parameters, &set, &corpus, a.pool)
            .map_err(|e| Error::Eval(e.into()))?;
        let mut bytes = Vec::new();
        for c in corpus.categories() {
            let list = ranker.rank(&c.name).map_err(|e| Error::Eval(e.into()))?;
            bytes.extend(render::render_ranking(&list));
        }
        let path = out.join("rankings.jsonl");
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        outputs.push(path);
    }

    let mut args = Vec::new();
    push(&mut args, "--checkpoint", absolute(&a.checkpoint)?);
    a.corpus.push_args(&mut args)?;
    push(&mut args, "--embeddings", absolute(&a.embeddings)?);
    push(
        &mut args,
        "--k",
        a.ks.iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    push(&mut args, "--pool", a.pool);
    if let Some(ts) = &a.timestamp {
        push(&mut args, "--timestamp", ts);
    }
    if a.rankings {
        args.push("--rankings".into());
    }
    let mut inputs = checkpoint_files(&a.checkpoint).to_vec();
    inputs.extend(a.corpus.files());
    inputs.extend(embedding_inputs(&a.embeddings));
    let config = serde_json::json!({
        "ks": a.ks,
        "pool": a.pool,
        "checkpoint": options.checkpoint,
        "timestamp": a.timestamp,
    });
    let manifest = RunManifest::new("evaluate", args, config, None);
    finish(manifest, &out, &inputs, &outputs)?;
    let text =
        render::render(&report, RenderFormat::Text).map_err(|e| Error::Usage(e.to_string()))?;
    std::io::stdout()
        .write_all(&text)
        .map_err(|e| Error::io("<stdout>", e))?;
    Ok(exit::SUCCESS)
}

/// Human-readable findings, one line per kind of problem.
pub fn describe_alignment(r: &AlignmentReport) -> String {
    if r.passed() {
        return format!("aligned: dim {}\n", r.event_dim);
    }
    let mut out = String::new();
    for (label, ids) in [
        ("missing events", &r.missing_events),
        ("orphan events", &r.orphan_events),
        ("missing labels", &r.missing_labels),
        ("orphan labels", &r.orphan_labels),
    ] {
        if !ids.is_empty() {
            out.push_str(&format!("{label} ({}): {}\n", ids.len(), ids.join(", ")));
        }
    }
    if !r.dims_match() {
        out.push_str(&format!(
            "dimension mismatch: events {}, labels {}\n",
            r.event_dim, r.label_dim
        ));
    }
    out
}

pub fn cmd_validate(a: ValidateArgs) -> Result<u8> {
    let corpus = a.corpus.load()?;
    let set = load_embeddings(&a.embeddings)?;
    let report = set.validate_alignment(&corpus);
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("serializable")
        );
    } else {
        print!("{}", describe_alignment(&report));
    }
    Ok(if report.passed() {
        exit::SUCCESS
    } else {
        exit::FINDINGS
    })
}

fn read_report(path: &Path) -> Result<EvaluationReport> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    render::parse_json(&bytes).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn cmd_merge(a: MergeArgs) -> Result<u8> {
    let reports = a
        .reports
        .iter()
        .map(|p| read_report(p))
        .collect::<Result<Vec<_>>>()?;
    let table = merge(&reports)?;
    let out = out_dir(a.out, "merge")?;
    let mut outputs = Vec::new();
    for format in RenderFormat::ALL {
        let path = out.join(format!("comparison.{}", format.extension()));
        std::fs::write(&path, render::render_comparison(&table, format))
            .map_err(|e| Error::io(&path, e))?;
        outputs.push(path);
    }
    let mut args = Vec::new();
    for p in &a.reports {
        push(&mut args, "--report", absolute(p)?);
    }
    let models: Vec<&str> = reports.iter().map(|r| r.model_tag.as_str()).collect();
    let manifest = RunManifest::new("merge", args, serde_json::json!({ "models": models }), None);
    finish(manifest, &out, &a.reports, &outputs)?;
    std::io::stdout()
        .write_all(&render::render_comparison(&table, RenderFormat::Text))
        .map_err(|e| Error::io("<stdout>", e))?;
    Ok(exit::SUCCESS)
}

pub fn render_summary(s: &DistributionSummary, format: RenderFormat) -> String {
    let rows = s.rows.iter().chain(std::iter::once(&s.totals));
    match format {
        RenderFormat::Json => {
            let mut text = serde_json::to_string_pretty(s).expect("serializable");
            text.push('\n');
            text
        }
        RenderFormat::Tsv => {
            let mut out = String::from("emotion\ttrain\tvalid\ttest\ttotal\texplicit\n");
            for r in rows {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    r.category,
                    r.train,
                    r.valid,
                    r.test,
                    r.total(),
                    r.explicit
                ));
            }
            out
        }
        RenderFormat::Text => {
            let width = rows
                .clone()
                .map(|r| r.category.chars().count())
                .max()
                .unwrap_or(0)
                .max(7);
            let mut out = format!(
                "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>8}\n",
                "emotion", "train", "valid", "test", "total", "explicit"
            );
            for r in rows {
                let pad = width - r.category.chars().count();
                out.push_str(&format!(
                    "{}{}  {:>7}  {:>7}  {:>7}  {:>7}  {:>8}\n",
                    r.category,
                    " ".repeat(pad),
                    r.train,
                    r.valid,
                    r.test,
                    r.total(),
                    r.explicit
                ));
            }
            out
        }
    }
}

pub fn cmd_summary(a: SummaryArgs) -> Result<u8> {
    let format: RenderFormat = a
        .format
        .parse()
        .map_err(|e: render::RenderError| Error::Usage(e.to_string()))?;
    let corpus = a.corpus.load()?;
    print!("{}", render_summary(&corpus.distribution_summary(), format));
    Ok(exit::SUCCESS)
}

pub fn cmd_replay(a: ReplayArgs) -> Result<u8> {
    let recorded = RunManifest::read(&a.manifest)?;
    recorded.verify_inputs()?;
    let out = out_dir(a.out, "replay")?;
    let mut argv = vec!["emoprobe".to_string(), recorded.subcommand.clone()];
    argv.extend(recorded.args.iter().cloned());
    argv.push("--out".into());
    argv.push(out.to_string_lossy().into_owned());
    let cli = Cli::try_parse_from(&argv)
        .map_err(|e| Error::Usage(format!("recorded arguments no longer parse: {e}")))?;
    let code = dispatch(cli.command)?;
    if code != exit::SUCCESS {
        return Ok(code);
    }
    let mut differing = Vec::new();
    for output in &recorded.outputs {
        let actual = sha256_file(&out.join(&output.path))?;
        if actual != output.sha256 {
            differing.push(output.path.clone());
        }
    }
    if differing.is_empty() {
        println!("replay reproduced all {} outputs", recorded.outputs.len());
        Ok(exit::SUCCESS)
    } else {
        eprintln!("error: replay outputs differ: {}", differing.join(", "));
        Ok(exit::VALIDATION)
    }
}
