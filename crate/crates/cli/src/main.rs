//! `docread`: data preparation, retrieval, training and decoding from one binary.

mod config;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use docread_core::corpus::*;
use docread_core::docstore::*;
use docread_core::evaltrain::*;
use docread_core::model::SearchMode;
use docread_core::neural::Checkpoint;
use docread_core::Model64;

#[derive(Parser)]
#[command(name = "docread", version, about = "Documentation-grounded code generation")]
struct Cli {
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deduplicate a JSON-lines document file.
    IngestDocs {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus and document set.
    Synth(SynthArgs),
    /// Partition a dataset into train/dev/test.
    Split {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "library")]
        split: SplitArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        dev_size: usize,
        #[arg(long, default_value_t = 499)]
        test_size: usize,
        /// Standard-library module list (one per line).
        #[arg(long)]
        allowlist: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print split sizes and dev-set OOV counts.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 1)]
        min_freq: usize,
        /// Also write the statistics as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the tf-idf index on training intents and document descriptions.
    FitRetriever {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recall@k of the fitted index on a partition.
    EvalRetriever {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, value_enum, default_value = "dev")]
        part: Part,
    },
    /// Train a model and save its best checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: TrainOpts,
        /// Output directory for model.ckpt and train.log.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a partition with a trained checkpoint and score it.
    Generate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "dev")]
        part: Part,
        #[arg(long, default_value_t = 15)]
        beam: usize,
        #[arg(long)]
        k: Option<usize>,
        /// Output directory for the report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train, then evaluate dev and test.
    Experiment {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: TrainOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid search over encoder width and dropout.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: TrainOpts,
        /// Comma-separated encoder widths.
        #[arg(long, value_delimiter = ',', default_values_t = [128, 256, 384])]
        hidden: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5])]
        dropout: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read intents from stdin; print retrieved entries and the decoded snippet.
    Query {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 15)]
        beam: usize,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n_train: usize,
    #[arg(long, default_value_t = 200)]
    n_dev: usize,
    #[arg(long, default_value_t = 200)]
    n_test: usize,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Document set; required for the partial setting.
    #[arg(long)]
    docs: Option<PathBuf>,
    /// Fitted tf-idf index; required for the partial setting.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "oracle")]
    setting: SettingArg,
}

#[derive(Args)]
struct TrainOpts {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting point before the config file and overrides are applied.
    #[arg(long, value_enum, default_value = "full")]
    preset: Preset,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    beam: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Random,
    Library,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Part {
    Dev,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum SettingArg {
    Baseline,
    Oracle,
    Partial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Full-size layers and the long training schedule.
    Full,
    /// Small layers and a short schedule for a single CPU.
    Desk,
}

impl From<SettingArg> for Setting {
    fn from(s: SettingArg) -> Self {
        match s {
            SettingArg::Baseline => Setting::Baseline,
            SettingArg::Oracle => Setting::Oracle,
            SettingArg::Partial => Setting::Partial,
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} {} does not exist", path.display());
    }
    Ok(())
}

fn require_optional(path: Option<&PathBuf>, what: &str) -> Result<()> {
    path.map_or(Ok(()), |p| require_file(p, what))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

impl TrainOpts {
    fn validate(&self) -> Result<()> {
        require_optional(self.config.as_ref(), "config file")
    }

    /// Preset, then config file, then `--set`, then the dedicated flags.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let base = match self.preset {
            Preset::Full => ExperimentConfig::default(),
            Preset::Desk => ExperimentConfig {
                train: TrainConfig::desk(),
                ..ExperimentConfig::default()
            },
        };
        let mut pairs = match &self.config {
            Some(p) => config::read_pairs(p)?,
            None => Vec::new(),
        };
        for s in &self.set {
            pairs.push(config::parse_assignment(s)?);
        }
        if let Some(seed) = self.seed {
            pairs.push(("seed".into(), seed.to_string()));
        }
        if let Some(k) = self.k {
            pairs.push(("k".into(), k.to_string()));
        }
        if let Some(b) = self.beam {
            pairs.push(("beam_size".into(), b.to_string()));
        }
        config::apply(&base, &pairs)
    }
}

/// Loaded dataset, manifest and optional retrieval inputs.
struct Data {
    dataset: Dataset,
    manifest: SplitManifest,
    documents: Option<DocumentSet>,
    index: Option<TfIdfIndex>,
    setting: Setting,
}

impl DataArgs {
    fn validate(&self) -> Result<()> {
        require_file(&self.dataset, "dataset")?;
        require_file(&self.manifest, "manifest")?;
        require_optional(self.docs.as_ref(), "document set")?;
        require_optional(self.index.as_ref(), "index")?;
        if matches!(self.setting, SettingArg::Partial) && (self.docs.is_none() || self.index.is_none()) {
            bail!("the partial setting needs --docs and --index");
        }
        Ok(())
    }

    fn load(&self) -> Result<Data> {
        let dataset = Dataset::read_jsonl(&self.dataset)?;
        let manifest = SplitManifest::read(&self.manifest)?;
        manifest.validate(&dataset)?;
        let documents = match &self.docs {
            Some(p) => Some(DocumentSet::read_jsonl(p)?.0),
            None => None,
        };
        let index = match &self.index {
            Some(p) => Some(TfIdfIndex::load(p)?),
            None => None,
        };
        Ok(Data {
            dataset,
            manifest,
            documents,
            index,
            setting: self.setting.into(),
        })
    }
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::IngestDocs { input, out } => ingest(&input, &out),
        Command::Synth(args) => synth(&args),
        Command::Split {
            dataset,
            split,
            seed,
            dev_size,
            test_size,
            allowlist,
            out,
        } => {
            require_file(&dataset, "dataset")?;
            require_optional(allowlist.as_ref(), "allowlist")?;
            let ds = Dataset::read_jsonl(&dataset)?;
            let al = match &allowlist {
                Some(p) => Allowlist::load(p)?,
                None => Allowlist::default(),
            };
            let kind = match split {
                SplitArg::Random => SplitKind::Random,
                SplitArg::Library => SplitKind::Library,
            };
            let m = plan_split(&ds, kind, seed, &al, SplitConfig { dev_size, test_size })?;
            m.write(&out)?;
            println!("train: {}\ndev: {}\ntest: {}", m.train.len(), m.dev.len(), m.test.len());
            Ok(())
        }
        Command::Stats {
            dataset,
            manifest,
            min_freq,
            out,
        } => {
            require_file(&dataset, "dataset")?;
            require_file(&manifest, "manifest")?;
            let ds = Dataset::read_jsonl(&dataset)?;
            let m = SplitManifest::read(&manifest)?;
            m.validate(&ds)?;
            let vocab = build_vocabulary(&ds.select(&m.train)?, min_freq)?;
            let stats = compute_oov_stats(&ds, &m, &vocab)?;
            print!("{stats}");
            if let Some(p) = out {
                std::fs::write(&p, serde_json::to_string_pretty(&stats)? + "\n")?;
            }
            Ok(())
        }
        Command::FitRetriever {
            dataset,
            manifest,
            docs,
            out,
        } => {
            require_file(&dataset, "dataset")?;
            require_file(&manifest, "manifest")?;
            require_file(&docs, "document set")?;
            let ds = Dataset::read_jsonl(&dataset)?;
            let m = SplitManifest::read(&manifest)?;
            m.validate(&ds)?;
            let (documents, _) = DocumentSet::read_jsonl(&docs)?;
            let train = ds.select(&m.train)?;
            let intents: Vec<&str> = train.iter().map(|e| e.intent.as_str()).collect();
            let index = fit_index(&intents, &documents, TfIdfConfig::default())?;
            index.save(&out)?;
            println!("features: {}\ndocuments: {}", index.num_features(), index.num_documents());
            Ok(())
        }
        Command::EvalRetriever {
            dataset,
            manifest,
            docs,
            index,
            k,
            part,
        } => {
            require_file(&dataset, "dataset")?;
            require_file(&manifest, "manifest")?;
            require_file(&docs, "document set")?;
            require_file(&index, "index")?;
            let ds = Dataset::read_jsonl(&dataset)?;
            let m = SplitManifest::read(&manifest)?;
            m.validate(&ds)?;
            let (documents, _) = DocumentSet::read_jsonl(&docs)?;
            let index = TfIdfIndex::load(&index)?;
            let examples = ds.select(partition(&m, part))?;
            let results: Vec<RetrievalResult> = examples
                .iter()
                .map(|e| retrieve_topk(&e.id, &e.intent, &documents, &index, k))
                .collect();
            let gold: Vec<Vec<String>> = examples
                .iter()
                .map(|e| e.apis.iter().map(|a| a.key()).collect())
                .collect();
            println!("Recall@{k}: {:.2}", 100.0 * recall_at_k(&results, &gold)?);
            Ok(())
        }
        Command::Train { data, opts, out } => {
            data.validate()?;
            opts.validate()?;
            let cfg = opts.resolve()?;
            let d = data.load()?;
            create_dir(&out)?;
            let (src, _) = setting_sources(d.setting, &cfg, d.documents.as_ref(), d.index.as_ref())?;
            let train_set = d.dataset.select(&d.manifest.train)?;
            let dev = d.dataset.select(&d.manifest.dev)?;
            let descs = descriptions(d.documents.as_ref());
            let mut tc = cfg.train.clone();
            tc.doc_mode = src.mode;
            let outcome = train::<f64>(&train_set, &dev, src, src, &descs, &tc, Some(&out.join("train.log")))?;
            outcome.checkpoint(&tc)?.save(&out.join("model.ckpt"))?;
            println!(
                "best epoch: {}\ndev BLEU: {:.2}",
                outcome.best_epoch, outcome.best_dev_bleu
            );
            Ok(())
        }
        Command::Generate {
            data,
            checkpoint,
            part,
            beam,
            k,
            out,
        } => {
            data.validate()?;
            require_file(&checkpoint, "checkpoint")?;
            let d = data.load()?;
            let (model, _) = Model64::from_checkpoint(&Checkpoint::load(&checkpoint)?)?;
            let mut eval_cfg = ExperimentConfig::default();
            eval_cfg.train.model.k = k.unwrap_or(model.config().k);
            let (_, src) = setting_sources(d.setting, &eval_cfg, d.documents.as_ref(), d.index.as_ref())?;
            let examples = d.dataset.select(partition(&d.manifest, part))?;
            let name = part_name(part);
            let report = evaluate(&model, name, &examples, src, SearchMode::Beam(beam))?;
            create_dir(&out)?;
            write_report(&out, &report)?;
            println!("{name} BLEU: {:.2}\n{name} OOV recall: {:.2}", report.bleu, report.oov_recall);
            Ok(())
        }
        Command::Experiment { data, opts, out } => {
            data.validate()?;
            opts.validate()?;
            let cfg = opts.resolve()?;
            let d = data.load()?;
            create_dir(&out)?;
            let res = run_experiment::<f64>(
                &d.dataset,
                &d.manifest,
                d.documents.as_ref(),
                d.index.as_ref(),
                d.setting,
                &cfg,
                Some(&out.join("train.log")),
            )?;
            let mut tc = cfg.train.clone();
            tc.doc_mode = trained_doc_mode(d.setting, &cfg);
            res.outcome.checkpoint(&tc)?.save(&out.join("model.ckpt"))?;
            write_report(&out, &res.dev)?;
            write_report(&out, &res.test)?;
            let summary = serde_json::json!({
                "setting": res.setting,
                "best_epoch": res.outcome.best_epoch,
                "dev": {"bleu": res.dev.bleu, "oov_recall": res.dev.oov_recall},
                "test": {"bleu": res.test.bleu, "oov_recall": res.test.oov_recall},
                "config": cfg,
            });
            std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            println!(
                "dev BLEU: {:.2}  OOV recall: {:.2}\ntest BLEU: {:.2}  OOV recall: {:.2}",
                res.dev.bleu, res.dev.oov_recall, res.test.bleu, res.test.oov_recall
            );
            Ok(())
        }
        Command::Sweep {
            data,
            opts,
            hidden,
            dropout,
            out,
        } => {
            data.validate()?;
            opts.validate()?;
            let cfg = opts.resolve()?;
            let d = data.load()?;
            let grid = SweepGrid { hidden, dropout };
            let points = sweep::<f64>(
                &d.dataset,
                &d.manifest,
                d.documents.as_ref(),
                d.index.as_ref(),
                d.setting,
                &cfg,
                &grid,
            )?;
            println!("hidden dropout train_docs dev_bleu dev_oov");
            for p in &points {
                println!(
                    "{:>6} {:>7} {:>10} {:>8.2} {:>7.2}",
                    p.encoder_hidden,
                    p.dropout,
                    format!("{:?}", p.partial_train_docs).to_lowercase(),
                    p.dev_bleu,
                    p.dev_oov_recall
                );
            }
            std::fs::write(&out, serde_json::to_string_pretty(&points)? + "\n")?;
            Ok(())
        }
        Command::Query {
            checkpoint,
            docs,
            index,
            k,
            beam,
        } => {
            require_file(&checkpoint, "checkpoint")?;
            require_file(&docs, "document set")?;
            require_file(&index, "index")?;
            let (model, _) = Model64::from_checkpoint(&Checkpoint::load(&checkpoint)?)?;
            let (documents, _) = DocumentSet::read_jsonl(&docs)?;
            let index = TfIdfIndex::load(&index)?;
            query_loop(&model, &documents, &index, k, beam)
        }
    }
}

/// Document mode the model is trained with under `setting`.
fn trained_doc_mode(setting: Setting, cfg: &ExperimentConfig) -> DocMode {
    match setting {
        Setting::Baseline => DocMode::None,
        Setting::Oracle => DocMode::Oracle,
        Setting::Partial => cfg.partial_train_docs,
    }
}

fn partition(m: &SplitManifest, part: Part) -> &[String] {
    match part {
        Part::Dev => &m.dev,
        Part::Test => &m.test,
    }
}

fn part_name(part: Part) -> &'static str {
    match part {
        Part::Dev => "dev",
        Part::Test => "test",
    }
}

fn descriptions(docs: Option<&DocumentSet>) -> Vec<&str> {
    docs.map(|d| d.entries().iter().map(|e| e.description.as_str()).collect())
        .unwrap_or_default()
}

fn write_report(dir: &Path, report: &EvalReport) -> Result<()> {
    report.write_json(&dir.join(format!("{}_report.json", report.split)))?;
    std::fs::write(dir.join(format!("{}_side_by_side.txt", report.split)), report.side_by_side())?;
    Ok(())
}

fn ingest(input: &Path, out: &Path) -> Result<()> {
    require_file(input, "input")?;
    let (set, report) = DocumentSet::read_jsonl(input)?;
    if set.is_empty() {
        log::warn!("{} holds no usable entries", input.display());
        eprintln!("warning: empty document set");
    }
    set.write_jsonl(out)?;
    println!(
        "kept: {}\ndropped: {}\ndeduped: {}",
        report.kept, report.dropped_empty, report.deduped
    );
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let config = SyntheticConfig {
        n_train: args.n_train,
        n_dev: args.n_dev,
        n_test: args.n_test,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    let corpus = generate_synthetic_corpus(&config)?;
    create_dir(&args.out)?;
    corpus.dataset.write_jsonl(&args.out.join("dataset.jsonl"))?;
    corpus.documents.write_jsonl(&args.out.join("docs.jsonl"))?;
    std::fs::write(
        args.out.join("expected_oov.json"),
        serde_json::to_string_pretty(&corpus.expected_oov)? + "\n",
    )?;
    println!("examples: {}\ndocuments: {}", corpus.dataset.len(), corpus.documents.len());
    Ok(())
}

fn query_loop(model: &Model64, docs: &DocumentSet, index: &TfIdfIndex, k: usize, beam: usize) -> Result<()> {
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    let steps = model.config().max_decode_steps;
    let mut n = 0usize;
    loop {
        write!(stdout, "> ")?;
        stdout.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            writeln!(stdout)?;
            return Ok(());
        }
        let intent = line.trim();
        let tokens = tokenize_nl(intent);
        if tokens.is_empty() {
            continue;
        }
        n += 1;
        let result = retrieve_topk(&format!("q{n}"), intent, docs, index, k);
        let entries: Vec<ApiEntry> = result.keys().filter_map(|key| docs.get(key).cloned()).collect();
        for (e, s) in entries.iter().zip(&result.entries) {
            writeln!(stdout, "  [{:.3}] {}\n          {}", s.score, e.signature, e.description)?;
        }
        let decoded = model.decode(&tokens, &entries, SearchMode::Beam(beam), steps)?;
        writeln!(stdout, "  => {}", decoded.tokens.join(" "))?;
    }
}
