//! The `semiparse` command line.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};

use crate::confidence::{
    default_grid, read_confidence_sidecar, score_corpus, tune_d, write_confidence_sidecar, ConfidenceMethod,
    ScoredParse, TuningItem, DEFAULT_D,
};
use crate::corpus::{read_conll_file, read_treebank, write_conll_file, Format, Sentence};
use crate::decoder::{decode_corpus, write_score_sidecar, DEFAULT_BEAM};
use crate::dlm::{extract_dlm, DlmTable, UnitScheme, DEFAULT_MIN_COUNT};
use crate::error::{Error, Result};
use crate::eval::{
    attachment_scores, bucket_analysis, confusion_tsv, label_scores, label_scores_tsv, sentence_scores, significance,
    unknown_split, BucketContext, EvalOptions, Factor, PunctuationTags, DEFAULT_SIGNIFICANCE_ITERATIONS,
};
use crate::learn::{train_on_corpus, LearnerConfig, TrainConfig, DEFAULT_ITERATIONS};
use crate::model::{WeightModel, DEFAULT_HASH_BITS};
use crate::semisup::{
    build_boosted_trainset, random_select, run_pipeline, select_agreement_excluding, self_training_select,
    AgreementCriteria, Amount, PipelineSpec, SelectionReport,
};
use crate::transition::System;

#[derive(Debug, Parser)]
#[command(name = "semiparse", version, about = "Semi-supervised transition-based dependency parsing")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Threads for sentence-level parallelism [default: available parallelism]
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,

    /// More log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only log errors
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a parser model on a treebank
    Train(TrainArgs),
    /// Parse a corpus with a trained model
    Parse(ParseArgs),
    /// Parse a corpus and write per-sentence confidence scores
    Confidence(ConfidenceArgs),
    /// Choose the length penalty d on a gold development set
    TuneD(TuneDArgs),
    /// Build a dependency language model from parsed text
    ExtractDlm(ExtractDlmArgs),
    /// Select auto-parsed sentences for retraining
    Select(SelectArgs),
    /// Run a complete semi-supervised experiment from a spec file
    Pipeline(PipelineArgs),
    /// Score parses against gold, optionally comparing two systems
    Eval(EvalArgs),
    /// Break down differences between a baseline and a new system
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct FormatArg {
    /// Column layout of every corpus file
    #[arg(long, default_value_t = Format::Conll06)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Gold training treebank
    #[arg(long, value_name = "FILE")]
    pub train: PathBuf,
    /// Where to write the model
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, default_value_t = System::ArcStandardSwap)]
    pub system: System,
    #[arg(long, default_value_t = DEFAULT_BEAM)]
    pub beam: usize,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iterations: usize,
    #[arg(long, default_value_t = DEFAULT_HASH_BITS)]
    pub hash_bits: u32,
    /// Update as soon as the gold prefix leaves the beam
    #[arg(long)]
    pub early_update: bool,
    /// Keep the last weights instead of the averaged ones
    #[arg(long)]
    pub no_average: bool,
    /// DLM file to attach (repeatable; order gives the DLM index)
    #[arg(long, value_name = "FILE")]
    pub dlm: Vec<PathBuf>,
    #[command(flatten)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Also write `index<TAB>score` per sentence
    #[arg(long, value_name = "FILE")]
    pub scores: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BEAM)]
    pub beam: usize,
    #[command(flatten)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ConfidenceArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Score sidecar: index, raw, adjusted and delta columns
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Also write the parses
    #[arg(long, value_name = "FILE")]
    pub parsed: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BEAM)]
    pub beam: usize,
    /// Length penalty of the adjusted score
    #[arg(long, default_value_t = DEFAULT_D)]
    pub d: f64,
    /// Compute Delta scores (one constrained decode per edge)
    #[arg(long)]
    pub delta: bool,
    #[command(flatten)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct TuneDArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Gold development treebank
    #[arg(long, value_name = "FILE")]
    pub dev: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BEAM)]
    pub beam: usize,
    /// Candidate d values [default: 0 to 0.05 in steps of 0.005]
    #[arg(long, value_delimiter = ',', value_name = "D,...")]
    pub grid: Vec<f64>,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ExtractDlmArgs {
    /// Auto-parsed corpus
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// N-gram order
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    /// Unit of the model: form, pos or form+pos
    #[arg(long, default_value_t = UnitScheme::Form)]
    pub unit: UnitScheme,
    #[command(flatten)]
    pub format: FormatArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SelectMode {
    /// Sentences two parsers annotated identically
    Agreement,
    /// Top-ranked sentences by confidence score
    Confidence,
    /// A seeded random sample
    Random,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long, value_enum, default_value_t = SelectMode::Confidence)]
    pub mode: SelectMode,
    /// Parsed corpus to select from (the first source in agreement mode)
    #[arg(long, value_name = "FILE")]
    pub parsed: PathBuf,
    /// Second source's parses (agreement)
    #[arg(long, value_name = "FILE")]
    pub agree_with: Option<PathBuf>,
    /// Drop agreed sentences this parse already matches (agreement)
    #[arg(long, value_name = "FILE")]
    pub exclude: Option<PathBuf>,
    /// Skip sentences shorter than this (agreement)
    #[arg(long)]
    pub min_length: Option<usize>,
    /// Keep at most this many agreed sentences, in corpus order (agreement)
    #[arg(long)]
    pub max_selected: Option<usize>,
    /// Score sidecar written by `confidence` (confidence)
    #[arg(long, value_name = "FILE")]
    pub scores: Option<PathBuf>,
    /// raw, adjusted, adjusted:<d> or delta (confidence)
    #[arg(long, default_value = "adjusted")]
    pub method: ConfidenceMethod,
    /// Share of the corpus to select (confidence, random)
    #[arg(long, default_value_t = 0.5, conflicts_with = "count")]
    pub fraction: f64,
    /// Number of sentences to select (confidence, random)
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Prepend this treebank to the selection
    #[arg(long, value_name = "FILE")]
    pub base: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Write the selection report here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Flat key = value spec file
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
    /// Overrides the spec's seed
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PunctuationArgs {
    /// Leave punctuation tokens out of the scores
    #[arg(long)]
    pub exclude_punctuation: bool,
    /// Extra tags treated as punctuation
    #[arg(long, value_delimiter = ',', value_name = "TAG,...")]
    pub punctuation_tags: Vec<String>,
}

impl PunctuationArgs {
    fn options(&self) -> EvalOptions {
        EvalOptions {
            include_punctuation: !self.exclude_punctuation,
            punctuation: PunctuationTags::with_extra(self.punctuation_tags.iter().cloned()),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    /// Second system for the significance test
    #[arg(long, value_name = "FILE")]
    pub compare: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SIGNIFICANCE_ITERATIONS)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training treebank; adds a known/unknown word split
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,
    /// Write per-label scores and the confusion matrix with this prefix
    #[arg(long, value_name = "PREFIX")]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub punctuation: PunctuationArgs,
    #[command(flatten)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub base: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub new: PathBuf,
    /// length, unknown-words, prepositions or conjunctions
    #[arg(long, default_value_t = Factor::Length)]
    pub factor: Factor,
    /// Training treebank (unknown-words)
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "IN")]
    pub preposition_tags: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "CC")]
    pub conjunction_tags: Vec<String>,
    /// Write the table here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub punctuation: PunctuationArgs,
    #[command(flatten)]
    pub format: FormatArg,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on failure, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(&cli);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: --workers: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => LevelFilter::Error,
        (false, 0) => LevelFilter::Warn,
        (false, 1) => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Train(a) => train(a),
        Command::Parse(a) => parse(a),
        Command::Confidence(a) => confidence(a),
        Command::TuneD(a) => tune(a),
        Command::ExtractDlm(a) => extract(a),
        Command::Select(a) => select(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Eval(a) => eval(a),
        Command::Analyze(a) => analyze(a),
    }
}

fn check_beam(beam: usize) -> Result<()> {
    if beam == 0 {
        return Err(Error::InvalidArgument("--beam must be at least 1".into()));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::file(path, e))
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::file(p, e)),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn read_raw(path: &Path, format: Format) -> Result<Vec<Sentence>> {
    Ok(read_conll_file(path, format)?.iter().map(Sentence::stripped).collect())
}

fn train(a: &TrainArgs) -> Result<()> {
    check_beam(a.beam)?;
    let sentences = read_treebank(&a.train, a.format.format)?;
    let dlms = a
        .dlm
        .iter()
        .map(|p| Ok((p.display().to_string(), DlmTable::load(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let config = LearnerConfig {
        system: a.system,
        hash_bits: a.hash_bits,
        train: TrainConfig {
            beam: a.beam,
            iterations: a.iterations,
            early_update: a.early_update,
            average: !a.no_average,
        },
        ..LearnerConfig::default()
    };
    let model = train_on_corpus(&sentences, &config, &dlms)?;
    model.save(&a.model)?;
    info!("model written to {}", a.model.display());
    Ok(())
}

fn parse(a: &ParseArgs) -> Result<()> {
    check_beam(a.beam)?;
    let model = WeightModel::load(&a.model)?;
    let input = read_raw(&a.input, a.format.format)?;
    let (parses, scores): (Vec<Sentence>, Vec<f64>) = decode_corpus(&input, &model, a.beam, None)?.into_iter().unzip();
    write_conll_file(&a.output, &parses, a.format.format)?;
    if let Some(p) = &a.scores {
        write_score_sidecar(create(p)?, &scores)?;
    }
    Ok(())
}

fn confidence(a: &ConfidenceArgs) -> Result<()> {
    check_beam(a.beam)?;
    let model = WeightModel::load(&a.model)?;
    let input = read_raw(&a.input, a.format.format)?;
    let scored = score_corpus(&input, &model, a.beam, Some(a.d), a.delta)?;
    write_confidence_sidecar(create(&a.output)?, &scored)?;
    if let Some(p) = &a.parsed {
        let parses: Vec<Sentence> = scored.into_iter().map(|s| s.sentence).collect();
        write_conll_file(p, &parses, a.format.format)?;
    }
    Ok(())
}

fn tune(a: &TuneDArgs) -> Result<()> {
    check_beam(a.beam)?;
    let model = WeightModel::load(&a.model)?;
    let gold = read_treebank(&a.dev, a.format.format)?;
    let raw: Vec<Sentence> = gold.iter().map(Sentence::stripped).collect();
    let scored = score_corpus(&raw, &model, a.beam, None, false)?;
    let parses: Vec<Sentence> = scored.iter().map(|s| s.sentence.clone()).collect();
    let per_sentence = sentence_scores(&gold, &parses, &EvalOptions::including_punctuation())?;
    let items: Vec<TuningItem> = scored
        .iter()
        .zip(&per_sentence)
        .filter(|(_, r)| !r.is_empty())
        .map(|(s, r)| TuningItem {
            raw: s.raw,
            length: s.len(),
            accuracy: r.las(),
        })
        .collect();
    let grid = if a.grid.is_empty() { default_grid() } else { a.grid.clone() };
    let report = tune_d(&items, &grid)?;
    emit(&report.to_string(), a.output.as_deref())
}

fn extract(a: &ExtractDlmArgs) -> Result<()> {
    let corpus = read_treebank(&a.input, a.format.format)?;
    let table = extract_dlm(&corpus, a.order, a.min_count, a.unit)?;
    table.save(&a.output)?;
    let (ph, pm, pl) = table.class_sizes();
    info!("{} entries: PH {ph}, PM {pm}, PL {pl}", table.len());
    Ok(())
}

fn select(a: &SelectArgs) -> Result<()> {
    let format = a.format.format;
    let parsed = read_conll_file(&a.parsed, format)?;
    let amount = match a.count {
        Some(n) => Amount::Count(n),
        None => Amount::Fraction(a.fraction),
    };
    let missing = |flag: &str| Error::InvalidArgument(format!("--mode {:?} needs --{flag}", a.mode));
    let (selected, report) = match a.mode {
        SelectMode::Agreement => {
            let other = read_conll_file(a.agree_with.as_ref().ok_or_else(|| missing("agree-with"))?, format)?;
            let exclude = a.exclude.as_ref().map(|p| read_conll_file(p, format)).transpose()?;
            let criteria = AgreementCriteria {
                min_length: a.min_length,
                max_selected: a.max_selected,
            };
            select_agreement_excluding(&parsed, &other, exclude.as_deref(), &criteria)?
        }
        SelectMode::Confidence => {
            let path = a.scores.as_ref().ok_or_else(|| missing("scores"))?;
            let mut scored: Vec<ScoredParse> = parsed.iter().map(|s| ScoredParse::new(s.clone(), f64::NAN)).collect();
            let d = match a.method {
                ConfidenceMethod::Adjusted(d) => Some(d),
                _ => None,
            };
            let f = File::open(path).map_err(|e| Error::file(path, e))?;
            read_confidence_sidecar(BufReader::new(f), &mut scored, d)?;
            if let Some(i) = scored.iter().position(|s| s.raw.is_nan()) {
                return Err(Error::InvalidArgument(format!(
                    "{} has no score for sentence {i}",
                    path.display()
                )));
            }
            let (_, chosen) = self_training_select(&scored, a.method, amount)?;
            let report = SelectionReport::new(parsed.len(), parsed.len(), &chosen);
            (chosen, report)
        }
        SelectMode::Random => {
            let chosen = random_select(&parsed, amount, a.seed)?;
            let report = SelectionReport::new(parsed.len(), parsed.len(), &chosen);
            (chosen, report)
        }
    };
    let out = match &a.base {
        Some(p) => build_boosted_trainset(&read_treebank(p, format)?, &selected),
        None => selected,
    };
    write_conll_file(&a.output, &out, format)?;
    emit(&report.to_string(), a.report.as_deref())
}

fn pipeline(a: &PipelineArgs) -> Result<()> {
    let mut spec = PipelineSpec::load(&a.spec)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let out = run_pipeline(&spec)?;
    println!("{}", out.selection);
    if let Some(report) = out.evaluation_report() {
        print!("{report}");
    }
    Ok(())
}

fn vocabulary(path: &Path, format: Format) -> Result<HashSet<String>> {
    Ok(read_treebank(path, format)?
        .iter()
        .flat_map(|s| s.forms().map(str::to_owned).collect::<Vec<_>>())
        .collect())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let format = a.format.format;
    let opts = a.punctuation.options();
    let gold = read_treebank(&a.gold, format)?;
    let pred = read_conll_file(&a.pred, format)?;
    let mut out = String::new();
    let score = attachment_scores(&gold, &pred, &opts)?;
    out.push_str(&format!("{}\t{score}\n", a.pred.display()));
    if let Some(path) = &a.compare {
        let second = read_conll_file(path, format)?;
        let other = attachment_scores(&gold, &second, &opts)?;
        out.push_str(&format!("{}\t{other}\n", path.display()));
        let sig = significance(&gold, &pred, &second, a.iterations, a.seed, &opts)?;
        out.push_str(&format!("{sig}\n"));
    }
    if let Some(train) = &a.train {
        let (known, unknown) = unknown_split(&gold, &pred, &vocabulary(train, format)?, &opts)?;
        out.push_str(&format!("known\t{known}\nunknown\t{unknown}\n"));
    }
    if let Some(prefix) = &a.labels {
        let (scores, confusion) = label_scores(&gold, &pred)?;
        let with_suffix = |s: &str| {
            let mut p = prefix.clone().into_os_string();
            p.push(s);
            PathBuf::from(p)
        };
        emit(&label_scores_tsv(&scores), Some(&with_suffix(".labels.tsv")))?;
        emit(&confusion_tsv(&confusion), Some(&with_suffix(".confusion.tsv")))?;
    }
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(out.as_bytes())?;
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let format = a.format.format;
    let gold = read_treebank(&a.gold, format)?;
    let base = read_conll_file(&a.base, format)?;
    let new = read_conll_file(&a.new, format)?;
    let ctx = BucketContext {
        vocabulary: a.train.as_ref().map(|p| vocabulary(p, format)).transpose()?,
        preposition_tags: a.preposition_tags.iter().cloned().collect(),
        conjunction_tags: a.conjunction_tags.iter().cloned().collect(),
    };
    let report = bucket_analysis(&gold, &base, &new, a.factor, &ctx, &a.punctuation.options())?;
    emit(&report.to_tsv(), a.output.as_deref())
}
