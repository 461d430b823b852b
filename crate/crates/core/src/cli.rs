//! The `levqe` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or IO error, 2 data-format violation,
//! 3 scorer or model protocol violation.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::align::{ter_align, TerStats, TokenSeq};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::format::{self, read_aligned, read_corpus, read_tag_file, write_lines};
use crate::levt::{decode, qe_predict, ExternalScorer, GapQuery, LevtConfig, OracleScorer, RandomScorer, Scorer};
use crate::subword::{heuristic_subword_tags, subword_to_word_tags, FlatTagSeq, SubwordSeq};
use crate::synth::{
    grid_search_weights, synth_bt_rt_tgt, synth_mvppe, synth_src_mt1_mt2, synth_src_mt_ref, triplets_to_training,
    BeamConfig, ChunkSegmenter, CommandModel, CommandTranslator, EnsembleWeights, IdentityTranslator, ModelTranslator,
    MvppeSetup, Origin, Segmenter, SequenceModel, SynthReport, TableModel, TableSegmenter, TableTranslator, Translator,
    Vocab, WholeWordSegmenter,
};
use crate::tags::{pool_confusion, tags_from_alignment, Metrics, QeTags, Scope};

#[derive(Debug, Parser)]
#[command(name = "levqe", version, about = "Word-level translation quality estimation toolkit")]
pub struct Cli {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = one per core). Never changes output.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for the `random` scorer.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Word,
    Subword,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevtMode {
    Decode,
    Qe,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align MT against post-edits and report edit scripts and corpus TER.
    Align {
        #[arg(long)]
        mt: PathBuf,
        #[arg(long)]
        pe: PathBuf,
        /// Allow block shifts (default from config: off).
        #[arg(long)]
        shifts: Option<OnOff>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference word and gap tags from shift-free MT/post-edit alignment.
    Tag {
        #[arg(long)]
        mt: PathBuf,
        #[arg(long)]
        pe: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert tags between subword and word level.
    ConvertTags {
        #[arg(long)]
        to: Level,
        /// Subword-segmented MT, one sentence per line.
        #[arg(long)]
        tokens: PathBuf,
        /// Subword tags (naive subword tags for --to subword).
        #[arg(long)]
        tags: PathBuf,
        /// Word-level reference tags, required for --to subword.
        #[arg(long)]
        word_tags: Option<PathBuf>,
        #[arg(long)]
        marker: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted tags against gold tags: MCC, F1-OK, F1-BAD.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        scope: Option<Scope>,
        /// Also write the metrics as one JSON line to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Build synthetic (src, mt, pe) triplets.
    Synth(SynthArgs),
    /// Turn triplets into word tags, naive and heuristic subword tags.
    Training {
        #[arg(long)]
        triplets: PathBuf,
        /// `none`, `chunk:<width>` or `table:<path>` (word TAB pieces).
        #[arg(long, default_value = "none")]
        segmenter: String,
        #[arg(long)]
        marker: Option<String>,
        /// Writes <prefix>.mt.sw, <prefix>.word.tags, <prefix>.naive.tags and <prefix>.subword.tags.
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Run the Levenshtein edit loop or single-pass QE with a scorer.
    Levt {
        #[arg(long)]
        mode: LevtMode,
        /// Source sentences; empty source is used when omitted.
        #[arg(long)]
        src: Option<PathBuf>,
        /// MT output (qe) or initial sequences (decode).
        #[arg(long)]
        mt: PathBuf,
        /// `oracle:<targets file>`, `random[:<seed>]` (default seed from --seed) or `cmd:<command>`.
        #[arg(long)]
        scorer: String,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        gap_query: Option<GapQuery>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub method: Origin,
    #[arg(long)]
    pub src: Option<PathBuf>,
    /// Reference (src-mt-ref), monolingual target (bt-rt-tgt) or parallel target (mvppe).
    #[arg(long)]
    pub tgt: Option<PathBuf>,
    /// Translator spec: `identity`, `table:<tsv>` or `cmd:<command>`.
    #[arg(long)]
    pub mt_system: Option<String>,
    #[arg(long)]
    pub bt_system: Option<String>,
    #[arg(long)]
    pub weak: Option<String>,
    #[arg(long)]
    pub strong: Option<String>,
    /// Model spec: `table:<json>` or `cmd:<command>` (needs --vocab).
    #[arg(long)]
    pub model_t: Option<String>,
    /// Paraphrase view; defaults to the translation-view model.
    #[arg(long)]
    pub model_p: Option<String>,
    /// One output token per line, for `cmd:` models.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub lambda_t: Option<f64>,
    #[arg(long)]
    pub lambda_p: Option<f64>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub length_norm: bool,
    /// Grid-search the weights toward this mean TER before synthesis.
    #[arg(long)]
    pub grid_target: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Align { shifts: Some(s), .. } => cfg.shifts = *s == OnOff::On,
        Command::ConvertTags { marker: Some(m), .. } | Command::Training { marker: Some(m), .. } => {
            cfg.marker = m.clone()
        }
        Command::Eval { scope: Some(s), .. } => cfg.scope = *s,
        Command::Synth(a) => {
            cfg.lambda_t = a.lambda_t.unwrap_or(cfg.lambda_t);
            cfg.lambda_p = a.lambda_p.unwrap_or(cfg.lambda_p);
            cfg.beam = a.beam.unwrap_or(cfg.beam);
            cfg.max_len = a.max_len.unwrap_or(cfg.max_len);
            cfg.length_norm |= a.length_norm;
        }
        Command::Levt {
            tau,
            max_iters,
            k_max,
            gap_query,
            ..
        } => {
            cfg.tau = tau.unwrap_or(cfg.tau);
            cfg.max_iters = max_iters.unwrap_or(cfg.max_iters);
            cfg.k_max = k_max.unwrap_or(cfg.k_max);
            cfg.gap_query = gap_query.unwrap_or(cfg.gap_query);
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command, &cfg))
}

fn dispatch(command: Command, cfg: &RunConfig) -> Result<()> {
    match command {
        Command::Align { mt, pe, out, .. } => cmd_align(&mt, &pe, cfg.shifts, out.as_deref()),
        Command::Tag { mt, pe, out } => cmd_tag(&mt, &pe, out.as_deref()),
        Command::ConvertTags {
            to,
            tokens,
            tags,
            word_tags,
            out,
            ..
        } => cmd_convert_tags(to, &tokens, &tags, word_tags.as_deref(), &cfg.marker, out.as_deref()),
        Command::Eval { pred, gold, json, .. } => cmd_eval(&pred, &gold, cfg.scope, json.as_deref()),
        Command::Synth(args) => cmd_synth(&args, cfg),
        Command::Training {
            triplets,
            segmenter,
            out_prefix,
            ..
        } => cmd_training(&triplets, &segmenter, &cfg.marker, &out_prefix),
        Command::Levt {
            mode,
            src,
            mt,
            scorer,
            out,
            ..
        } => cmd_levt(mode, src.as_deref(), &mt, &scorer, cfg, out.as_deref()),
    }
}

fn cmd_align(mt: &Path, pe: &Path, shifts: bool, out: Option<&Path>) -> Result<()> {
    let (mt, pe) = read_aligned(mt, pe)?;
    let rows: Vec<(String, TerStats)> = mt
        .par_iter()
        .zip(pe.par_iter())
        .enumerate()
        .map(|(i, (h, r))| {
            let script = ter_align(h.tokens(), r.tokens(), shifts);
            let ops: Vec<String> = script.ops.iter().map(ToString::to_string).collect();
            let stats = TerStats {
                edits: script.cost,
                ref_len: r.len(),
            };
            (
                format!(
                    "{}\tcost={}\tref_len={}\t{}",
                    i + 1,
                    script.cost,
                    r.len(),
                    ops.join(" ")
                ),
                stats,
            )
        })
        .collect();
    let total = rows.iter().fold(TerStats::default(), |acc, (_, s)| acc + *s);
    let corpus = total
        .score()
        .map_err(|_| Error::Data("corpus TER undefined: references contain no tokens".into()))?;
    let mut lines: Vec<String> = rows.into_iter().map(|(l, _)| l).collect();
    lines.push(format!(
        "corpus_ter\t{corpus:.6}\tedits={}\tref_tokens={}",
        total.edits, total.ref_len
    ));
    write_lines(out, lines)
}

fn cmd_tag(mt: &Path, pe: &Path, out: Option<&Path>) -> Result<()> {
    let (mt, pe) = read_aligned(mt, pe)?;
    let lines: Vec<FlatTagSeq> = mt
        .par_iter()
        .zip(pe.par_iter())
        .map(|(h, r)| {
            let script = ter_align(h.tokens(), r.tokens(), false);
            let tags = tags_from_alignment(&script, h.len()).expect("shift-free alignment");
            FlatTagSeq::from(&tags)
        })
        .collect();
    write_lines(out, lines)
}

fn at_line(path: &Path, line: usize) -> impl FnOnce(Error) -> Error + '_ {
    move |e| match e {
        e @ Error::Format { .. } => e,
        other => Error::Format {
            path: path.to_owned(),
            line,
            reason: other.to_string(),
        },
    }
}

fn cmd_convert_tags(
    to: Level,
    tokens: &Path,
    tags: &Path,
    word_tags: Option<&Path>,
    marker: &str,
    out: Option<&Path>,
) -> Result<()> {
    let corpus = read_corpus(tokens)?;
    let sub_tags = read_tag_file(tags)?;
    if corpus.len() != sub_tags.len() {
        return Err(Error::Data(format!(
            "line count mismatch: {} tokens lines, {} tag lines",
            corpus.len(),
            sub_tags.len()
        )));
    }
    let segmented = corpus
        .into_iter()
        .enumerate()
        .map(|(i, line)| SubwordSeq::parse(line, marker).map_err(at_line(tokens, i + 1)))
        .collect::<Result<Vec<_>>>()?;
    let converted: Vec<FlatTagSeq> = match to {
        Level::Word => segmented
            .iter()
            .zip(&sub_tags)
            .enumerate()
            .map(|(i, (sw, q))| subword_to_word_tags(sw, q).map_err(at_line(tags, i + 1)))
            .collect::<Result<_>>()?,
        Level::Subword => {
            let word_path =
                word_tags.ok_or_else(|| Error::InvalidParameter("--to subword requires --word-tags".into()))?;
            let words = read_tag_file(word_path)?;
            if words.len() != segmented.len() {
                return Err(Error::Data(format!(
                    "line count mismatch: {} tokens lines, {} word tag lines",
                    segmented.len(),
                    words.len()
                )));
            }
            segmented
                .iter()
                .zip(&sub_tags)
                .zip(&words)
                .enumerate()
                .map(|(i, ((sw, naive), q_w))| heuristic_subword_tags(sw, naive, q_w).map_err(at_line(tags, i + 1)))
                .collect::<Result<_>>()?
        }
    };
    write_lines(out, converted)
}

fn scope_name(scope: Scope) -> &'static str {
    match scope {
        Scope::All => "all",
        Scope::WordsOnly => "words",
        Scope::GapsOnly => "gaps",
    }
}

fn cmd_eval(pred: &Path, gold: &Path, scope: Scope, json: Option<&Path>) -> Result<()> {
    let p = read_tag_file(pred)?;
    let g = read_tag_file(gold)?;
    if p.len() != g.len() {
        return Err(Error::Data(format!(
            "line count mismatch: pred {} lines, gold {} lines",
            p.len(),
            g.len()
        )));
    }
    let p: Vec<QeTags> = p.iter().map(QeTags::from).collect();
    let g: Vec<QeTags> = g.iter().map(QeTags::from).collect();
    let counts = pool_confusion(&p, &g, scope)?;
    let m = Metrics::from_counts(counts)?;
    let c = m.counts;
    write_lines(
        None,
        [
            format!("scope\t{}", scope_name(scope)),
            format!("mcc\t{:.6}", m.mcc),
            format!("f1_ok\t{:.6}", m.f1_ok),
            format!("f1_bad\t{:.6}", m.f1_bad),
            format!("tp\t{}\nfp\t{}\ntn\t{}\nfn\t{}", c.tp, c.fp, c.tn, c.fn_),
        ],
    )?;
    if let Some(path) = json {
        let record = serde_json::json!({
            "scope": scope_name(scope),
            "mcc": m.mcc,
            "f1_ok": m.f1_ok,
            "f1_bad": m.f1_bad,
            "tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn_,
        });
        write_lines(Some(path), [record])?;
    }
    Ok(())
}

fn translator(spec: &str) -> Result<Box<dyn Translator>> {
    match spec.split_once(':') {
        _ if spec == "identity" => Ok(Box::new(IdentityTranslator)),
        Some(("table", path)) => Ok(Box::new(TableTranslator::load(Path::new(path))?)),
        Some(("cmd", command)) => Ok(Box::new(CommandTranslator::spawn(command)?)),
        _ => Err(Error::InvalidParameter(format!("unknown translator spec {spec:?}"))),
    }
}

fn sequence_model(spec: &str, vocab: Option<&Path>) -> Result<Arc<dyn SequenceModel>> {
    match spec.split_once(':') {
        Some(("table", path)) => Ok(Arc::new(TableModel::load(Path::new(path))?)),
        Some(("cmd", command)) => {
            let vocab_path = vocab.ok_or_else(|| Error::InvalidParameter("cmd: models need --vocab".into()))?;
            let words = format::read_lines(vocab_path)?;
            let vocab = Vocab::new(words.iter().map(|w| w.trim()).filter(|w| !w.is_empty()))?;
            Ok(Arc::new(CommandModel::spawn(command, vocab)?))
        }
        _ => Err(Error::InvalidParameter(format!("unknown model spec {spec:?}"))),
    }
}

fn required<'a, T: ?Sized>(value: Option<&'a T>, flag: &str, method: Origin) -> Result<&'a T> {
    value.ok_or_else(|| Error::InvalidParameter(format!("--method {} requires --{flag}", method.as_str())))
}

fn cmd_synth(a: &SynthArgs, cfg: &RunConfig) -> Result<()> {
    let method = a.method;
    let report: SynthReport = match method {
        Origin::SrcMtRef => {
            let src = required(a.src.as_deref(), "src", method)?;
            let tgt = required(a.tgt.as_deref(), "tgt", method)?;
            let mt = translator(required(a.mt_system.as_deref(), "mt-system", method)?)?;
            let (s, t) = read_aligned(src, tgt)?;
            let pairs: Vec<_> = s.into_iter().zip(t).collect();
            synth_src_mt_ref(&pairs, mt.as_ref())
        }
        Origin::BtRtTgt => {
            let tgt = required(a.tgt.as_deref(), "tgt", method)?;
            let bt = translator(required(a.bt_system.as_deref(), "bt-system", method)?)?;
            let fwd = translator(required(a.mt_system.as_deref(), "mt-system", method)?)?;
            synth_bt_rt_tgt(&read_corpus(tgt)?, bt.as_ref(), fwd.as_ref())
        }
        Origin::SrcMt1Mt2 => {
            let src = required(a.src.as_deref(), "src", method)?;
            let weak = translator(required(a.weak.as_deref(), "weak", method)?)?;
            let strong = translator(required(a.strong.as_deref(), "strong", method)?)?;
            synth_src_mt1_mt2(&read_corpus(src)?, weak.as_ref(), strong.as_ref())
        }
        Origin::Mvppe => {
            let src = required(a.src.as_deref(), "src", method)?;
            let tgt = required(a.tgt.as_deref(), "tgt", method)?;
            let model_t = sequence_model(required(a.model_t.as_deref(), "model-t", method)?, a.vocab.as_deref())?;
            let model_p = match &a.model_p {
                Some(spec) => sequence_model(spec, a.vocab.as_deref())?,
                None => model_t.clone(),
            };
            let mut beam = BeamConfig::new(cfg.beam, cfg.max_len)?;
            beam.length_norm = cfg.length_norm;
            let mt_system: Box<dyn Translator> = match &a.mt_system {
                Some(spec) => translator(spec)?,
                None => Box::new(ModelTranslator::new("model-t", model_t.clone(), beam)),
            };
            let (s, t) = read_aligned(src, tgt)?;
            let pairs: Vec<_> = s.into_iter().zip(t).collect();
            let mut setup = MvppeSetup {
                model_t: model_t.as_ref(),
                model_p: model_p.as_ref(),
                weights: EnsembleWeights::new(cfg.lambda_t, cfg.lambda_p)?,
                mt_system: mt_system.as_ref(),
                beam,
            };
            if let Some(target) = a.grid_target {
                let mut grid = Vec::new();
                for lt in [1.0, 2.0, 3.0] {
                    for lp in [1.0, 1.2, 1.5] {
                        grid.push(EnsembleWeights::new(lt, lp)?);
                    }
                }
                let points = grid_search_weights(&pairs, &setup, &grid, target);
                for p in &points {
                    eprintln!(
                        "grid\tlambda_t={}\tlambda_p={}\tmean_ter={:.6}\tdistance={:.6}",
                        p.weights.lambda_t, p.weights.lambda_p, p.mean_ter, p.distance
                    );
                }
                if let Some(best) = points.first() {
                    setup.weights = best.weights;
                }
            }
            synth_mvppe(&pairs, &setup)
        }
        Origin::Human => {
            return Err(Error::InvalidParameter("human triplets are not synthesized".into()));
        }
    };

    write_lines(a.out.as_deref(), report.triplets.iter().map(format::triplet_line))?;
    let summary = [
        format!("method\t{}", method.as_str()),
        format!("triplets\t{}", report.triplets.len()),
        format!("skipped\t{}", report.skipped.len()),
        format!("removed_identical\t{}", report.removed_identical),
        format!(
            "mean_ter\t{}",
            report
                .mean_ter()
                .map_or_else(|| "nan".to_owned(), |t| format!("{t:.6}"))
        ),
    ];
    if a.out.is_some() {
        write_lines(None, summary)
    } else {
        for line in summary {
            eprintln!("{line}");
        }
        Ok(())
    }
}

fn segmenter(spec: &str, marker: &str) -> Result<Box<dyn Segmenter>> {
    let marker = marker.to_owned();
    match spec.split_once(':') {
        _ if spec == "none" => Ok(Box::new(WholeWordSegmenter { marker })),
        Some(("chunk", width)) => {
            let width: usize = width
                .parse()
                .ok()
                .filter(|&w| w > 0)
                .ok_or_else(|| Error::InvalidParameter(format!("bad chunk width {width:?}")))?;
            Ok(Box::new(ChunkSegmenter { width, marker }))
        }
        Some(("table", path)) => Ok(Box::new(TableSegmenter::load(Path::new(path), &marker)?)),
        _ => Err(Error::InvalidParameter(format!("unknown segmenter spec {spec:?}"))),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_training(triplets: &Path, seg_spec: &str, marker: &str, out_prefix: &Path) -> Result<()> {
    let triplets = format::read_triplets(triplets, Origin::Human)?;
    let seg = segmenter(seg_spec, marker)?;
    let report = triplets_to_training(&triplets, seg.as_ref());
    let recs = &report.records;
    write_lines(
        Some(&with_suffix(out_prefix, ".mt.sw")),
        recs.iter().map(|r| r.mt_subwords.subtokens()),
    )?;
    write_lines(
        Some(&with_suffix(out_prefix, ".word.tags")),
        recs.iter().map(|r| &r.word_tags),
    )?;
    write_lines(
        Some(&with_suffix(out_prefix, ".naive.tags")),
        recs.iter().map(|r| &r.naive_tags),
    )?;
    write_lines(
        Some(&with_suffix(out_prefix, ".subword.tags")),
        recs.iter().map(|r| &r.subword_tags),
    )?;
    write_lines(
        None,
        [
            format!("records\t{}", recs.len()),
            format!("skipped\t{}", report.skipped.len()),
        ],
    )
}

enum ScorerSpec {
    Oracle(Vec<TokenSeq>),
    Random(u64),
    External(ExternalScorer),
}

fn scorer_spec(spec: &str, default_seed: u64) -> Result<ScorerSpec> {
    match spec.split_once(':') {
        _ if spec == "random" => Ok(ScorerSpec::Random(default_seed)),
        Some(("oracle", path)) => Ok(ScorerSpec::Oracle(read_corpus(Path::new(path))?)),
        Some(("random", seed)) => seed
            .parse()
            .map(ScorerSpec::Random)
            .map_err(|_| Error::InvalidParameter(format!("bad random seed {seed:?}"))),
        Some(("cmd", command)) => Ok(ScorerSpec::External(ExternalScorer::spawn(command)?)),
        _ => Err(Error::InvalidParameter(format!("unknown scorer spec {spec:?}"))),
    }
}

fn cmd_levt(
    mode: LevtMode,
    src: Option<&Path>,
    mt: &Path,
    spec: &str,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<()> {
    let mt = read_corpus(mt)?;
    let src = match src {
        Some(p) => {
            let s = read_corpus(p)?;
            if s.len() != mt.len() {
                return Err(Error::Data(format!(
                    "line count mismatch: src {} lines, mt {} lines",
                    s.len(),
                    mt.len()
                )));
            }
            s
        }
        None => vec![TokenSeq::default(); mt.len()],
    };
    let spec = scorer_spec(spec, cfg.seed)?;
    if let ScorerSpec::Oracle(targets) = &spec {
        if targets.len() != mt.len() {
            return Err(Error::Data(format!(
                "line count mismatch: oracle targets {} lines, mt {} lines",
                targets.len(),
                mt.len()
            )));
        }
    }
    let random = match &spec {
        ScorerSpec::Random(seed) => Some(RandomScorer::new(*seed)),
        _ => None,
    };
    let levt = LevtConfig { k_max: cfg.k_max };

    let run_line = |i: usize| -> Result<String> {
        let oracle;
        let scorer: &dyn Scorer = match &spec {
            ScorerSpec::Oracle(targets) => {
                oracle = OracleScorer::new(targets[i].clone()).with_k_max(cfg.k_max);
                &oracle
            }
            ScorerSpec::Random(_) => random.as_ref().expect("set above"),
            ScorerSpec::External(ext) => ext,
        };
        match mode {
            LevtMode::Decode => {
                let outcome = decode(&src[i], &mt[i], scorer, cfg.max_iters, &levt)?;
                Ok(format!("{}\t{}", outcome.output, outcome.trace.len()))
            }
            LevtMode::Qe => {
                let tags = qe_predict(&src[i], &mt[i], scorer, cfg.tau, cfg.gap_query, &levt)?;
                Ok(FlatTagSeq::from(&tags).to_string())
            }
        }
    };
    let lines: Vec<String> = match &spec {
        // one pipe: keep queries in line order
        ScorerSpec::External(_) => (0..mt.len()).map(run_line).collect::<Result<_>>()?,
        _ => (0..mt.len()).into_par_iter().map(run_line).collect::<Result<_>>()?,
    };
    write_lines(out, lines)
}
