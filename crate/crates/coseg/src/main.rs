//! Operator surface tying the pipeline together: data preparation,
//! experience extraction, training, generation, evaluation, and the
//! breakpoint-combination ablation sweep.
//!
//! Exit codes are a stable contract: 0 success, 2 input or configuration
//! error, 3 numeric failure (divergence, non-finite gradients).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use coseg::corpus::{
    build_splits, ground_truth_character, ground_truth_count, identify_characters, load_conllu,
    load_pretrained_embeddings, load_stories_jsonl, stories_from_conllu, write_stories_jsonl,
    SplitConfig, Splits, Story, Vocabulary,
};
use coseg::evaluation::{evaluate_split, generate_all, GenerationRecord, MetricsReport};
use coseg::extraction::experience_records;
use coseg::fixture::write_fixture;
use coseg::model::{AttentionQuery, CosegModel, FusionMode, ModelConfig};
use coseg::numerics::{config_fingerprint, load_checkpoint};
use coseg::training::{examples_for_split, TrainConfig, Trainer, BEST_CHECKPOINT, LAST_CHECKPOINT};
use coseg::{CosegError, Result};

const DEFAULT_SEED: u64 = 7;
const SEED_ENV: &str = "COSEG_SEED";

const STORIES_FILE: &str = "stories.jsonl";
const VOCAB_FILE: &str = "vocab.tsv";
const EXPERIENCES_FILE: &str = "experiences.jsonl";
const SPLITS_DIR: &str = "splits";
const MODEL_CONFIG_FILE: &str = "model.toml";
const METRICS_FILE: &str = "metrics.csv";
const ABLATION_FILE: &str = "ablation.csv";
const GENERATIONS_FILE: &str = "generations.jsonl";

const SPLIT_NAMES: [&str; 4] = ["train", "validation", "sufficient_test", "inadequate_test"];

#[derive(Parser)]
#[command(
    name = "coseg",
    version,
    about = "Character-oriented story ending generation",
    long_about = "Generates story endings conditioned on one character's extracted \
                  experiences, fused with the story context by vector breaking and forming."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a story corpus, build the vocabulary, extract experiences.
    Prepare(PrepareArgs),
    /// Extract per-character experience records from a stories file.
    Extract(ExtractArgs),
    /// Train a model on prepared data.
    Train(TrainArgs),
    /// Generate endings from a trained checkpoint.
    Generate(GenerateArgs),
    /// Score a checkpoint on held-out splits.
    Evaluate(EvaluateArgs),
    /// Train each breakpoint combination and rank them by validation PPL.
    Ablate(AblateArgs),
    /// Write the bundled 64-story synthetic corpus.
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Story corpus as JSONL, one story per line.
    #[arg(long, value_name = "FILE", required_unless_present = "conllu", conflicts_with = "conllu")]
    stories: Option<PathBuf>,
    /// Dependency parses in CoNLL-U; consecutive sentences group into stories.
    #[arg(long, value_name = "FILE")]
    conllu: Option<PathBuf>,
    /// Sentences per story when reading CoNLL-U (context plus ending).
    #[arg(long, default_value_t = 5, value_name = "N")]
    per_story: usize,
    /// Output directory for splits, vocabulary, and experiences.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = 0.1, value_name = "F")]
    val_fraction: f64,
    /// Fraction of experience-sufficient stories held out as sufficient_test.
    #[arg(long, default_value_t = 0.1, value_name = "F")]
    test_fraction: f64,
    /// Train-split tokens rarer than this map to the unknown token.
    #[arg(long, default_value_t = 2, value_name = "N")]
    min_count: u64,
    /// Defaults to $COSEG_SEED, then 7.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, value_name = "FILE")]
    stories: PathBuf,
    /// Experiences JSONL destination.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Prepared data directory (output of prepare).
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output directory for checkpoints, config, and the training log.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Base model configuration TOML; desk-scale defaults when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    hidden: Option<usize>,
    #[arg(long, value_name = "N")]
    embed: Option<usize>,
    /// Breakpoint list like "0-16-32-48-64".
    #[arg(long, value_name = "LIST")]
    breakpoints: Option<String>,
    /// Hidden size the breakpoint list is expressed against; it is rescaled
    /// to the actual hidden size. Omit to use the list verbatim.
    #[arg(long, value_name = "N")]
    ref_hidden: Option<usize>,
    /// vbf, add, or cat.
    #[arg(long, value_name = "MODE")]
    fusion: Option<FusionMode>,
    /// "final" or a 1-based experience index to use as the attention query.
    #[arg(long, value_name = "WHICH")]
    attention_query: Option<String>,
    #[arg(long, value_name = "N")]
    max_decode_len: Option<usize>,
    /// Pretrained embedding vectors: token then values, one token per line.
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 10, value_name = "N")]
    epochs: u64,
    #[arg(long, default_value_t = 0.1, value_name = "F")]
    lr: f64,
    #[arg(long, default_value_t = 0.9, value_name = "F")]
    momentum: f64,
    #[arg(long, default_value_t = 5.0, value_name = "F")]
    clip_norm: f64,
    #[arg(long, default_value_t = 32, value_name = "N")]
    batch_size: usize,
    /// Non-improving validation epochs tolerated before early stop.
    #[arg(long, default_value_t = 2, value_name = "N")]
    patience: u64,
    /// Continue from <out>/last.ck instead of starting fresh.
    #[arg(long)]
    resume: bool,
    /// Defaults to $COSEG_SEED, then 7.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Prepared data directory holding stories and the vocabulary.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// Model configuration TOML; defaults to model.toml beside the checkpoint.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "ID", required_unless_present = "all", conflicts_with = "all")]
    story_id: Option<String>,
    /// Generate for every story in the corpus.
    #[arg(long)]
    all: bool,
    /// Only emit endings for this character (canonical id or surface form).
    #[arg(long, value_name = "NAME")]
    character: Option<String>,
    /// Generations JSONL; defaults to generations.jsonl beside the checkpoint.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Prepared data directory.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Trained model directory (model.toml plus checkpoints).
    #[arg(long = "model", value_name = "DIR")]
    model_dir: PathBuf,
    /// Checkpoint to score; defaults to <model>/best.ck.
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    /// Comma-separated split names, or "all" for every non-train split.
    #[arg(long, default_value = "all", value_name = "LIST")]
    splits: String,
    /// Report per-order n-gram precisions instead of cumulative BLEU.
    #[arg(long)]
    individual_bleu: bool,
    /// Metrics CSV; defaults to <model>/metrics.csv.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also dump every generation record as JSONL.
    #[arg(long, value_name = "FILE")]
    generations: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    /// Prepared data directory.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output directory; each combination trains in its own subdirectory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Comma-separated breakpoint combinations, e.g. "0,128,0-256-512".
    #[arg(long, default_value = "0,128,256,0-256-512,0-128-256-384-512", value_name = "LIST")]
    combinations: String,
    /// Hidden size the combinations are expressed against, so published
    /// combinations can be replayed at any hidden size that divides evenly.
    #[arg(long, default_value_t = 512, value_name = "N")]
    ref_hidden: usize,
    #[arg(long, default_value_t = 64, value_name = "N")]
    hidden: usize,
    #[arg(long, default_value_t = 32, value_name = "N")]
    embed: usize,
    #[arg(long, default_value_t = 20, value_name = "N")]
    max_decode_len: usize,
    #[arg(long, default_value_t = 10, value_name = "N")]
    epochs: u64,
    #[arg(long, default_value_t = 0.1, value_name = "F")]
    lr: f64,
    #[arg(long, default_value_t = 0.9, value_name = "F")]
    momentum: f64,
    #[arg(long, default_value_t = 5.0, value_name = "F")]
    clip_norm: f64,
    #[arg(long, default_value_t = 32, value_name = "N")]
    batch_size: usize,
    #[arg(long, default_value_t = 2, value_name = "N")]
    patience: u64,
    /// Defaults to $COSEG_SEED, then 7.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct FixtureArgs {
    /// Destination for the 64-story JSONL corpus.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(args) => cmd_prepare(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Train(args) => cmd_train(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Fixture(args) => cmd_fixture(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing

fn io_err(path: &Path, source: std::io::Error) -> CosegError {
    CosegError::Io { path: path.to_path_buf(), source }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text.trim().parse().map_err(|_| {
            CosegError::Config(format!("{SEED_ENV}={text:?} is not an unsigned integer seed"))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Run record written next to each command's outputs. The timestamp is the
/// one field that varies between otherwise identical runs; every data
/// artifact is byte-stable under a fixed seed.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    seed: u64,
    config: serde_json::Value,
    /// Input path to SHA-256 of its bytes.
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    /// Unix seconds at completion.
    timestamp: u64,
}

impl RunManifest {
    fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_hex(path)?);
        Ok(())
    }

    fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CosegError::InvalidInput(format!("serializing manifest: {e}")))?;
        write_text(path, &(text + "\n"))
    }
}

/// Prepared data directory contents: stories, vocabulary, split id lists.
struct DataDir {
    root: PathBuf,
    stories: Vec<Story>,
    vocab: Vocabulary,
    splits: Splits,
}

impl DataDir {
    fn load(root: &Path) -> Result<Self> {
        let stories = load_stories_jsonl(&root.join(STORIES_FILE))?;
        let vocab = Vocabulary::load(&root.join(VOCAB_FILE))?;
        let splits = Splits {
            train: read_split_file(&split_path(root, "train"))?,
            validation: read_split_file(&split_path(root, "validation"))?,
            sufficient_test: read_split_file(&split_path(root, "sufficient_test"))?,
            inadequate_test: read_split_file(&split_path(root, "inadequate_test"))?,
        };
        Ok(DataDir { root: root.to_path_buf(), stories, vocab, splits })
    }

    fn split(&self, name: &str) -> Option<&[String]> {
        match name {
            "train" => Some(&self.splits.train),
            "validation" => Some(&self.splits.validation),
            "sufficient_test" => Some(&self.splits.sufficient_test),
            "inadequate_test" => Some(&self.splits.inadequate_test),
            _ => None,
        }
    }

    /// Hash the corpus inputs into a manifest.
    fn record_inputs(&self, manifest: &mut RunManifest) -> Result<()> {
        manifest.input(&self.root.join(STORIES_FILE))?;
        manifest.input(&self.root.join(VOCAB_FILE))?;
        for name in SPLIT_NAMES {
            manifest.input(&split_path(&self.root, name))?;
        }
        Ok(())
    }
}

fn split_path(root: &Path, name: &str) -> PathBuf {
    root.join(SPLITS_DIR).join(format!("{name}.jsonl"))
}

/// One JSON string (a story id) per line.
fn read_split_file(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut ids = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let id: String = serde_json::from_str(line).map_err(|e| CosegError::Malformed {
            file: path.display().to_string(),
            line: i + 1,
            message: format!("expected a JSON string story id: {e}"),
        })?;
        ids.push(id);
    }
    Ok(ids)
}

fn write_split_file(path: &Path, ids: &[String]) -> Result<()> {
    let mut text = String::new();
    for id in ids {
        text.push_str(&serde_json::to_string(id).expect("string serializes"));
        text.push('\n');
    }
    write_text(path, &text)
}

fn write_records_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut text = String::new();
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| CosegError::InvalidInput(format!("serializing record: {e}")))?;
        text.push_str(&line);
        text.push('\n');
    }
    write_text(path, &text)
}

/// Checkpoint plus its config, with the fingerprint cross-check.
fn load_model(config_path: &Path, checkpoint_path: &Path) -> Result<CosegModel> {
    let config = ModelConfig::load(config_path)?;
    let ck = load_checkpoint(checkpoint_path)?;
    let expected = config_fingerprint(&config.canonical_string());
    if ck.config_hash != expected {
        return Err(CosegError::Checkpoint(format!(
            "{} was written by a different configuration than {}",
            checkpoint_path.display(),
            config_path.display()
        )));
    }
    CosegModel::from_parts(config, ck.params)
}

fn parse_attention_query(text: &str) -> Result<AttentionQuery> {
    if text.eq_ignore_ascii_case("final") {
        return Ok(AttentionQuery::FinalExperience);
    }
    match text.parse::<usize>() {
        Ok(index) if index >= 1 => Ok(AttentionQuery::Experience { index }),
        _ => Err(CosegError::Config(format!(
            "attention query must be \"final\" or a 1-based experience index, got {text:?}"
        ))),
    }
}

fn parse_breakpoint_list(raw: &str) -> Result<Vec<usize>> {
    let bad = |msg: String| CosegError::Config(format!("combination {raw:?}: {msg}"));
    if raw.trim().is_empty() {
        return Err(bad("empty breakpoint list".into()));
    }
    raw.trim()
        .split('-')
        .map(|part| {
            part.parse::<usize>()
                .map_err(|_| bad(format!("{part:?} is not an unsigned integer")))
        })
        .collect()
}

/// Rescales a breakpoint list expressed against `ref_hidden` onto `hidden`.
/// Every point must land on an integer position or the list is rejected.
fn scale_breakpoints(raw: &str, hidden: usize, ref_hidden: usize) -> Result<Vec<usize>> {
    let points = parse_breakpoint_list(raw)?;
    if ref_hidden == 0 {
        return Err(CosegError::Config("reference hidden size must be positive".into()));
    }
    points
        .into_iter()
        .map(|k| {
            if k > ref_hidden {
                return Err(CosegError::Config(format!(
                    "breakpoint {k} exceeds reference hidden size {ref_hidden}"
                )));
            }
            if (k * hidden) % ref_hidden != 0 {
                return Err(CosegError::Config(format!(
                    "breakpoint {k}/{ref_hidden} does not land on an integer position at hidden size {hidden}"
                )));
            }
            Ok(k * hidden / ref_hidden)
        })
        .collect()
}

/// Five evenly spaced points from 0 to `hidden`, the default layout.
fn quarter_breakpoints(hidden: usize) -> Result<Vec<usize>> {
    if hidden % 4 != 0 {
        return Err(CosegError::Config(format!(
            "hidden size {hidden} is not divisible by 4; pass --breakpoints explicitly"
        )));
    }
    Ok(vec![0, hidden / 4, hidden / 2, 3 * hidden / 4, hidden])
}

// ---------------------------------------------------------------------------
// prepare

fn cmd_prepare(args: PrepareArgs) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let mut manifest = RunManifest::new(
        "prepare",
        seed,
        serde_json::json!({
            "per_story": args.per_story,
            "val_fraction": args.val_fraction,
            "test_fraction": args.test_fraction,
            "min_count": args.min_count,
        }),
    );

    let mut warnings = Vec::new();
    let loaded: Vec<Story> = if let Some(path) = &args.stories {
        manifest.input(path)?;
        load_stories_jsonl(path)?
    } else {
        let path = args.conllu.as_ref().expect("clap enforces stories or conllu");
        manifest.input(path)?;
        let load = load_conllu(path)?;
        warnings.extend(load.warnings.iter().cloned());
        let (stories, story_warnings) = stories_from_conllu(&load, args.per_story, "story")?;
        warnings.extend(story_warnings);
        stories
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if loaded.is_empty() {
        return Err(CosegError::InvalidInput("no stories in input".into()));
    }

    // A story whose experience extraction fails is dropped from the corpus
    // entirely so every split id is guaranteed trainable.
    let mut stories = Vec::with_capacity(loaded.len());
    let mut counted = Vec::with_capacity(loaded.len());
    let mut experiences = Vec::new();
    for story in loaded {
        let characters = identify_characters(&story);
        let gt = ground_truth_character(&story, &characters);
        match experience_records(&story, &characters) {
            Ok(records) => {
                counted.push((story.id.clone(), ground_truth_count(&gt, &characters)));
                experiences.extend(records);
                stories.push(story);
            }
            Err(e) => eprintln!("warning: story {:?} dropped: {e}", story.id),
        }
    }
    if stories.is_empty() {
        return Err(CosegError::InvalidInput("every story failed experience extraction".into()));
    }

    let split_config = SplitConfig {
        val_fraction: args.val_fraction,
        test_fraction: args.test_fraction,
        seed,
    };
    let (splits, split_warnings) = build_splits(&counted, &split_config)?;
    for w in &split_warnings {
        eprintln!("warning: {w}");
    }

    // Vocabulary comes from the train split only, so the held-out splits
    // exercise the unknown-token path honestly.
    let by_id: HashMap<&str, &Story> = stories.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut streams: Vec<&[String]> = Vec::new();
    for id in &splits.train {
        let story = by_id[id.as_str()];
        for sentence in &story.sentences {
            streams.push(sentence);
        }
        streams.push(&story.ending);
    }
    let vocab = Vocabulary::build(streams, args.min_count)?;

    create_dir(&args.out)?;
    create_dir(&args.out.join(SPLITS_DIR))?;

    let stories_path = args.out.join(STORIES_FILE);
    write_stories_jsonl(&stories_path, &stories)?;
    manifest.output(&stories_path);

    for name in SPLIT_NAMES {
        let path = split_path(&args.out, name);
        let ids = match name {
            "train" => &splits.train,
            "validation" => &splits.validation,
            "sufficient_test" => &splits.sufficient_test,
            _ => &splits.inadequate_test,
        };
        write_split_file(&path, ids)?;
        manifest.output(&path);
    }

    let vocab_path = args.out.join(VOCAB_FILE);
    vocab.save(&vocab_path)?;
    manifest.output(&vocab_path);

    let experiences_path = args.out.join(EXPERIENCES_FILE);
    write_records_jsonl(&experiences_path, &experiences)?;
    manifest.output(&experiences_path);

    manifest.write(&args.out.join("prepare_manifest.json"))?;

    println!("prepared {} stories, vocabulary {} tokens", stories.len(), vocab.len());
    println!("  train            {:>6}", splits.train.len());
    println!("  validation       {:>6}", splits.validation.len());
    println!("  sufficient_test  {:>6}", splits.sufficient_test.len());
    println!("  inadequate_test  {:>6}", splits.inadequate_test.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// extract

fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let mut manifest = RunManifest::new("extract", 0, serde_json::json!({}));
    manifest.input(&args.stories)?;

    let stories = load_stories_jsonl(&args.stories)?;
    let mut records = Vec::new();
    for story in &stories {
        let characters = identify_characters(story);
        records.extend(experience_records(story, &characters)?);
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            create_dir(parent)?;
        }
    }
    write_records_jsonl(&args.out, &records)?;
    manifest.output(&args.out);
    manifest.write(&manifest_sibling(&args.out, "extract_manifest.json"))?;

    println!("extracted {} experience records from {} stories", records.len(), stories.len());
    Ok(())
}

/// Manifest location for commands whose output is a single file.
fn manifest_sibling(out_file: &Path, name: &str) -> PathBuf {
    match out_file.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent.join(name),
        _ => PathBuf::from(name),
    }
}

// ---------------------------------------------------------------------------
// train

fn resolve_model_config(args: &TrainArgs, vocab_size: usize) -> Result<ModelConfig> {
    let mut config = match &args.config {
        Some(path) => ModelConfig::load(path)?,
        None => ModelConfig::desk_scale(vocab_size),
    };
    config.vocab_size = vocab_size;
    if let Some(embed) = args.embed {
        config.embed_dim = embed;
    }
    if let Some(fusion) = args.fusion {
        config.fusion = fusion;
    }
    if let Some(query) = &args.attention_query {
        config.attention_query = parse_attention_query(query)?;
    }
    if let Some(len) = args.max_decode_len {
        config.max_decode_len = len;
    }
    if let Some(hidden) = args.hidden {
        config.hidden_dim = hidden;
        // A changed hidden size invalidates inherited breakpoints; derive the
        // default layout unless the caller supplies a list.
        if args.breakpoints.is_none() && config.fusion == FusionMode::Vbf {
            config.breakpoints = quarter_breakpoints(hidden)?;
        }
    }
    if let Some(list) = &args.breakpoints {
        config.breakpoints = match args.ref_hidden {
            Some(reference) => scale_breakpoints(list, config.hidden_dim, reference)?,
            None => parse_breakpoint_list(list)?,
        };
    }
    config.validate()?;
    Ok(config)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let data = DataDir::load(&args.data)?;
    let model_config = resolve_model_config(&args, data.vocab.len())?;

    let train_config = TrainConfig {
        lr: args.lr,
        momentum: args.momentum,
        clip_norm: args.clip_norm,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed,
        patience: args.patience,
    };

    let mut manifest = RunManifest::new(
        "train",
        seed,
        serde_json::json!({
            "model": serde_json::to_value(&model_config).expect("config serializes"),
            "lr": args.lr,
            "momentum": args.momentum,
            "clip_norm": args.clip_norm,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "patience": args.patience,
            "resume": args.resume,
        }),
    );
    data.record_inputs(&mut manifest)?;
    if let Some(path) = &args.config {
        manifest.input(path)?;
    }

    let train = examples_for_split(&data.stories, &data.splits.train, &data.vocab)?;
    let val = examples_for_split(&data.stories, &data.splits.validation, &data.vocab)?;

    create_dir(&args.out)?;
    let mut trainer = if args.resume {
        let last = args.out.join(LAST_CHECKPOINT);
        manifest.input(&last)?;
        Trainer::resume(model_config.clone(), train_config, &last)?
    } else {
        let mut model = CosegModel::new(model_config.clone(), seed)?;
        if let Some(path) = &args.embeddings {
            manifest.input(path)?;
            let matrix =
                load_pretrained_embeddings(path, &data.vocab, model_config.embed_dim, seed)?;
            model.set_embeddings(matrix)?;
        }
        Trainer::new(model, train_config)?
    };

    let config_path = args.out.join(MODEL_CONFIG_FILE);
    model_config.save(&config_path)?;
    manifest.output(&config_path);

    let outcome = trainer.fit(&train, &val, Some(&args.out))?;

    manifest.output(&args.out.join(BEST_CHECKPOINT));
    manifest.output(&args.out.join(LAST_CHECKPOINT));
    manifest.output(&args.out.join(coseg::training::TRAIN_LOG));
    manifest.write(&args.out.join("train_manifest.json"))?;

    println!(
        "trained {} ({} epochs{}) | best val PPL {:.4}",
        model_config.model_label(),
        trainer.epoch,
        if outcome.stopped_early { ", early stop" } else { "" },
        outcome.best_ppl,
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// generate

fn matches_character(record: &GenerationRecord, name: &str) -> bool {
    let needle = name.to_lowercase();
    if record.character_id.to_lowercase() == needle {
        return true;
    }
    record
        .known_surfaces
        .iter()
        .any(|(id, forms)| *id == record.character_id && forms.contains(&needle))
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let data = DataDir::load(&args.data)?;
    let config_path = args
        .config
        .clone()
        .unwrap_or_else(|| manifest_sibling(&args.checkpoint, MODEL_CONFIG_FILE));
    let model = load_model(&config_path, &args.checkpoint)?;

    let mut manifest = RunManifest::new(
        "generate",
        0,
        serde_json::json!({
            "story_id": args.story_id,
            "all": args.all,
            "character": args.character,
        }),
    );
    data.record_inputs(&mut manifest)?;
    manifest.input(&config_path)?;
    manifest.input(&args.checkpoint)?;

    let selected: Vec<&Story> = if args.all {
        data.stories.iter().collect()
    } else {
        let id = args.story_id.as_ref().expect("clap enforces story-id or all");
        let story = data
            .stories
            .iter()
            .find(|s| &s.id == id)
            .ok_or_else(|| CosegError::InvalidInput(format!("unknown story id {id:?}")))?;
        vec![story]
    };

    let mut records = Vec::new();
    for story in &selected {
        records.extend(generate_all(&model, story, &data.vocab)?);
    }
    if let Some(name) = &args.character {
        records.retain(|r| matches_character(r, name));
        if records.is_empty() {
            return Err(CosegError::InvalidInput(format!(
                "no character {name:?} in the selected stories"
            )));
        }
    }

    for record in &records {
        let flag = if record.used_fallback { " [fallback]" } else { "" };
        println!(
            "{} {}{}: {}",
            record.story_id,
            record.character_id,
            flag,
            record.generated.join(" ")
        );
    }

    let out_path = args
        .out
        .clone()
        .unwrap_or_else(|| manifest_sibling(&args.checkpoint, GENERATIONS_FILE));
    write_records_jsonl(&out_path, &records)?;
    manifest.output(&out_path);
    manifest.write(&manifest_sibling(&out_path, "generate_manifest.json"))?;

    println!("{} endings written to {}", records.len(), out_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let data = DataDir::load(&args.data)?;
    let config_path = args.model_dir.join(MODEL_CONFIG_FILE);
    let checkpoint_path =
        args.checkpoint.clone().unwrap_or_else(|| args.model_dir.join(BEST_CHECKPOINT));
    let model = load_model(&config_path, &checkpoint_path)?;

    let mut manifest = RunManifest::new(
        "evaluate",
        0,
        serde_json::json!({
            "splits": args.splits,
            "individual_bleu": args.individual_bleu,
        }),
    );
    data.record_inputs(&mut manifest)?;
    manifest.input(&config_path)?;
    manifest.input(&checkpoint_path)?;

    // "all" covers the non-train splits and skips empty ones with a warning;
    // an explicitly named empty split is an error.
    let (names, explicit): (Vec<&str>, bool) = if args.splits.trim() == "all" {
        (vec!["validation", "sufficient_test", "inadequate_test"], false)
    } else {
        (args.splits.split(',').map(str::trim).collect(), true)
    };

    let mut csv = String::from(MetricsReport::CSV_HEADER);
    csv.push('\n');
    let mut all_records = Vec::new();
    let mut scored = 0usize;
    for name in names {
        let ids = data
            .split(name)
            .ok_or_else(|| CosegError::InvalidInput(format!("unknown split {name:?}")))?;
        if ids.is_empty() {
            if explicit {
                return Err(CosegError::InvalidInput(format!("split {name:?} is empty")));
            }
            eprintln!("warning: split {name:?} is empty, skipped");
            continue;
        }
        let (report, records) =
            evaluate_split(&model, &data.stories, ids, &data.vocab, name, args.individual_bleu)?;
        println!("{}", report.table());
        csv.push_str(&report.csv_row());
        csv.push('\n');
        all_records.extend(records);
        scored += 1;
    }
    if scored == 0 {
        return Err(CosegError::InvalidInput("no non-empty split to evaluate".into()));
    }

    let out_path = args.out.clone().unwrap_or_else(|| args.model_dir.join(METRICS_FILE));
    write_text(&out_path, &csv)?;
    manifest.output(&out_path);
    if let Some(path) = &args.generations {
        write_records_jsonl(path, &all_records)?;
        manifest.output(path);
    }
    manifest.write(&manifest_sibling(&out_path, "evaluate_manifest.json"))?;

    println!("metrics written to {}", out_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// ablate

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let data = DataDir::load(&args.data)?;

    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut combos: Vec<(String, Vec<usize>)> = Vec::new();
    for raw in args.combinations.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let scaled = scale_breakpoints(raw, args.hidden, args.ref_hidden)?;
        if !seen.insert(scaled.clone()) {
            eprintln!("warning: duplicate combination {raw:?} skipped");
            continue;
        }
        combos.push((raw.to_string(), scaled));
    }
    if combos.is_empty() {
        return Err(CosegError::Config("no combinations to ablate".into()));
    }

    let train = examples_for_split(&data.stories, &data.splits.train, &data.vocab)?;
    let val = examples_for_split(&data.stories, &data.splits.validation, &data.vocab)?;
    create_dir(&args.out)?;

    let mut manifest = RunManifest::new(
        "ablate",
        seed,
        serde_json::json!({
            "combinations": combos.iter().map(|(raw, _)| raw.clone()).collect::<Vec<_>>(),
            "ref_hidden": args.ref_hidden,
            "hidden": args.hidden,
            "embed": args.embed,
            "epochs": args.epochs,
            "lr": args.lr,
            "batch_size": args.batch_size,
        }),
    );
    data.record_inputs(&mut manifest)?;

    let train_config = TrainConfig {
        lr: args.lr,
        momentum: args.momentum,
        clip_norm: args.clip_norm,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed,
        patience: args.patience,
    };

    let mut results: Vec<(String, String, f64)> = Vec::new();
    for (raw, breakpoints) in &combos {
        let label: String =
            breakpoints.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("-");
        let model_config = ModelConfig {
            embed_dim: args.embed,
            hidden_dim: args.hidden,
            breakpoints: breakpoints.clone(),
            fusion: FusionMode::Vbf,
            vocab_size: data.vocab.len(),
            max_decode_len: args.max_decode_len,
            attention_query: AttentionQuery::FinalExperience,
        };
        model_config.validate()?;

        let combo_dir = args.out.join(format!("combo-{label}"));
        create_dir(&combo_dir)?;
        let config_path = combo_dir.join(MODEL_CONFIG_FILE);
        model_config.save(&config_path)?;
        manifest.output(&config_path);

        let model = CosegModel::new(model_config, seed)?;
        let mut trainer = Trainer::new(model, train_config)?;
        let outcome = trainer.fit(&train, &val, Some(&combo_dir))?;
        manifest.output(&combo_dir.join(BEST_CHECKPOINT));
        manifest.output(&combo_dir.join(LAST_CHECKPOINT));
        manifest.output(&combo_dir.join(coseg::training::TRAIN_LOG));

        println!("combination {raw} (at H={}: {label}) best val PPL {:.4}", args.hidden, outcome.best_ppl);
        results.push((raw.clone(), label, outcome.best_ppl));
    }

    results.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut csv = String::from("rank,combination,breakpoints,val_ppl\n");
    println!("\nranked by validation PPL:");
    for (rank, (raw, label, ppl)) in results.iter().enumerate() {
        csv.push_str(&format!("{},{},{},{:.6}\n", rank + 1, raw, label, ppl));
        println!("  {:>2}. {:<24} {:>10.4}", rank + 1, format!("coseg({label})"), ppl);
    }
    let csv_path = args.out.join(ABLATION_FILE);
    write_text(&csv_path, &csv)?;
    manifest.output(&csv_path);
    manifest.write(&args.out.join("ablate_manifest.json"))?;

    println!("ranking written to {}", csv_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// fixture

fn cmd_fixture(args: FixtureArgs) -> Result<()> {
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            create_dir(parent)?;
        }
    }
    write_fixture(&args.out)?;
    let mut manifest = RunManifest::new("fixture", 0, serde_json::json!({}));
    manifest.output(&args.out);
    manifest.write(&manifest_sibling(&args.out, "fixture_manifest.json"))?;
    println!(
        "wrote {} synthetic stories to {}",
        coseg::fixture::FIXTURE_SIZE,
        args.out.display()
    );
    Ok(())
}
