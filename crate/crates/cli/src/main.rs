mod config;
mod output;

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use config::{BackendKind, Config, FileConfig, DEFAULT_K, DEFAULT_SEED, DEFAULT_WINDOW};
use lexsimp::candidates::{generate_candidates, is_valid_candidate};
use lexsimp::evaluation::{evaluate_scored, load_dataset, score_instances, sweep_scored, DatasetFormat};
use lexsimp::mlm::{BertBackend, MaskedLanguageModel, MockBackend, ModelDescriptor, Vocab};
use lexsimp::ranking::{rank_candidates, score_target, Resources, SimplifyConfig};
use lexsimp::resources::{
    build_frequency_table, load_embeddings, load_frequency_table, open_corpus, save_frequency_table,
};

const SWEEP_MAX_K: usize = 15;

#[derive(Parser)]
#[command(
    name = "lexsimp",
    version,
    about = "Lexical simplification with a masked language model"
)]
struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Model directory with vocab.txt, config.json and model.safetensors.
    #[arg(long, global = true, env = "LEXSIMP_MODEL_DIR")]
    model_dir: Option<PathBuf>,
    /// Word vectors in text format.
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Frequency table; repeat for several corpora.
    #[arg(long = "freq", global = true)]
    frequencies: Vec<PathBuf>,
    /// Number of candidates per target.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Context words on each side of the target for the language-model feature.
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    /// Seed for the mock backend.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// One JSON record per output line.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Target {
    #[arg(long)]
    sentence: String,
    /// Target word; its first occurrence is used.
    #[arg(long, conflicts_with = "index", required_unless_present = "index")]
    word: Option<String>,
    /// 0-based index of the target among whitespace-separated tokens.
    #[arg(long)]
    index: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Replace one word with its best-ranked candidate.
    Simplify(Target),
    /// List the generated candidates for one word.
    Candidates(Target),
    /// Evaluate on a benchmark file.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "lexmturk")]
        format: DatasetFormat,
        /// Also report metrics for k = 1..=15.
        #[arg(long)]
        sweep: bool,
    },
    /// Count word frequencies in a text corpus (plain or gzip).
    BuildFreq {
        #[arg(long)]
        corpus: PathBuf,
        /// Read at most this many lines.
        #[arg(long)]
        limit: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Identifier stored in the table; defaults to the corpus file name.
        #[arg(long)]
        source_id: Option<String>,
    },
}

/// Errors that exit with status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn resolve_config(cli: &Cli) -> anyhow::Result<Config> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    let config = Config {
        model_dir: cli.model_dir.clone().or(file.model_dir),
        embeddings: cli.embeddings.clone().or(file.embeddings),
        frequencies: if cli.frequencies.is_empty() {
            file.frequencies
        } else {
            cli.frequencies.clone()
        },
        k: cli.k.or(file.k).unwrap_or(DEFAULT_K),
        window: cli.window.or(file.window).unwrap_or(DEFAULT_WINDOW),
        backend: cli.backend.or(file.backend).unwrap_or(BackendKind::Real),
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
    };
    if config.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    if config.window == 0 {
        return Err(usage("--window must be at least 1"));
    }
    Ok(config)
}

fn load_backend(config: &Config) -> anyhow::Result<Arc<dyn MaskedLanguageModel>> {
    match config.backend {
        BackendKind::Real => {
            let Some(dir) = &config.model_dir else {
                return Err(usage(
                    "the real backend needs --model-dir or LEXSIMP_MODEL_DIR (or use --backend mock)",
                ));
            };
            let backend =
                BertBackend::load(dir).with_context(|| format!("cannot load model from {}", dir.display()))?;
            Ok(Arc::new(backend))
        }
        BackendKind::Mock => {
            let vocab_file = config
                .model_dir
                .as_ref()
                .map(|d| d.join(Vocab::FILE_NAME))
                .filter(|p| p.exists());
            let backend = match vocab_file {
                Some(path) => {
                    let descriptor = ModelDescriptor::load_dir(path.parent().unwrap_or(Path::new(".")))?;
                    MockBackend::new(Arc::new(Vocab::load(&path, &descriptor)?), config.seed)
                        .with_max_length(descriptor.max_length)
                }
                None => MockBackend::builtin(config.seed),
            };
            Ok(Arc::new(backend))
        }
    }
}

/// Backend plus whatever optional resources are configured. Only vectors for
/// candidate-shaped vocabulary words and `extra` words are kept in memory.
fn load_resources(config: &Config, extra: &[String]) -> anyhow::Result<Resources> {
    let backend = load_backend(config)?;
    let mut resources = Resources::new(backend.clone());
    if let Some(path) = &config.embeddings {
        let mut filter: HashSet<String> = backend
            .vocab()
            .tokens()
            .iter()
            .filter(|t| is_valid_candidate(t))
            .cloned()
            .collect();
        filter.extend(extra.iter().map(|w| w.to_lowercase()));
        let table = load_embeddings(path, Some(&filter))
            .with_context(|| format!("cannot load embeddings {}", path.display()))?;
        log::info!("loaded {} vectors of dimension {}", table.len(), table.dimension());
        resources = resources.with_embeddings(table);
    }
    let tables = config
        .frequencies
        .iter()
        .map(|p| load_frequency_table(p).with_context(|| format!("cannot load frequency table {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(resources.with_frequencies(tables))
}

fn target_index(backend: &dyn MaskedLanguageModel, target: &Target) -> anyhow::Result<usize> {
    let tokenizer = backend.tokenizer();
    match (&target.word, target.index) {
        (Some(word), _) => tokenizer
            .find_word(&target.sentence, word)
            .ok_or_else(|| usage(format!("target not found: '{word}' does not occur in the sentence"))),
        (None, Some(i)) => tokenizer
            .word_for_whitespace_index(&target.sentence, i)
            .ok_or_else(|| usage(format!("target not found: the sentence has no token {i}"))),
        (None, None) => Err(usage("give --word or --index")),
    }
}

fn run(cli: Cli) -> anyhow::Result<String> {
    let config = resolve_config(&cli)?;
    let pipeline = SimplifyConfig {
        k: config.k,
        window_half_width: config.window,
    };
    match &cli.command {
        Command::Simplify(target) => {
            let extra: Vec<String> = target.word.iter().cloned().collect();
            let resources = load_resources(&config, &extra)?;
            let index = target_index(resources.backend.as_ref(), target)?;
            let scored = score_target(&target.sentence, index, &pipeline, &resources)?;
            let replacement = rank_candidates(&scored.original, &scored.set, scored.scores.clone())?;
            let record = output::replacement_record(&target.sentence, index, &replacement);
            Ok(if cli.json {
                output::Record::Replacement(record).line() + "\n"
            } else {
                output::replacement_table(&record)
            })
        }
        Command::Candidates(target) => {
            let backend = load_backend(&config)?;
            let index = target_index(backend.as_ref(), target)?;
            let set = generate_candidates(&target.sentence, index, config.k, backend.as_ref())?;
            Ok(output::candidate_lines(&set, cli.json))
        }
        Command::Eval { dataset, format, sweep } => {
            let instances = load_dataset(dataset, *format)?;
            let targets: Vec<String> = instances.iter().map(|i| i.target.clone()).collect();
            let resources = load_resources(&config, &targets)?;
            let widest = SimplifyConfig {
                k: if *sweep { config.k.max(SWEEP_MAX_K) } else { config.k },
                ..pipeline
            };
            let scored = score_instances(&instances, &widest, &resources)?;
            let eval = evaluate_scored(&instances, &scored, config.k)?;
            let mut out = output::evaluation_text(&eval, cli.json);
            if *sweep {
                let rows = sweep_scored(&instances, &scored, 1..=SWEEP_MAX_K)?;
                if !cli.json {
                    out.push('\n');
                }
                out.push_str(&output::sweep_text(&rows, cli.json));
            }
            Ok(out)
        }
        Command::BuildFreq {
            corpus,
            limit,
            out,
            source_id,
        } => {
            if *limit == Some(0) {
                bail!(usage("--limit must be at least 1"));
            }
            let source = source_id.clone().unwrap_or_else(|| {
                corpus
                    .file_name()
                    .map_or_else(|| corpus.display().to_string(), |n| n.to_string_lossy().into_owned())
            });
            let reader = open_corpus(corpus)?;
            let table = build_frequency_table(reader, *limit, &source)
                .with_context(|| format!("reading {}", corpus.display()))?;
            save_frequency_table(&table, out)?;
            Ok(format!(
                "{} distinct words, {} tokens -> {}\n",
                table.len(),
                table.total(),
                out.display()
            ))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<UsageError>() {
        return 2;
    }
    match err.downcast_ref::<lexsimp::Error>() {
        Some(
            lexsimp::Error::ZeroK | lexsimp::Error::TargetNotFound(_) | lexsimp::Error::WordIndexOutOfRange { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
