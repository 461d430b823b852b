//! Synthetic translation triplets `(src, mt, pe)` and their conversion into
//! tagged training records.
//!
//! Four recipes are supported:
//!
//! * `src-mt-ref`: translate the source of a parallel corpus; the reference is
//!   the post-edit.
//! * `bt-rt-tgt`: back-translate monolingual target text and translate it
//!   forward again; the round trip is the MT output, the original the
//!   post-edit.
//! * `src-mt1-mt2`: a weaker and a stronger system translate the same source;
//!   pairs where both agree are dropped.
//! * `mvppe`: the MT output comes from a translator, the post-edit from beam
//!   search over an interpolation of a translation view and a paraphrase
//!   view of the same model.

pub mod beam;
pub mod model;
pub mod translator;

use rayon::prelude::*;

pub use beam::{beam_decode_ids, beam_search, mvppe_decode, mvppe_decode_ids, BeamConfig, EnsembleWeights, Hypothesis};
pub use model::{CommandModel, SequenceModel, TableModel, Vocab, EOS, EOS_TOKEN};
pub use translator::{CommandTranslator, IdentityTranslator, ModelTranslator, TableTranslator, Translator};

use crate::align::{ter_score, TokenSeq};
use crate::error::{Error, Result};
use crate::subword::{heuristic_subword_tags, naive_subword_tags, word_tags, FlatTagSeq, SubwordSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    #[value(name = "src-mt-ref")]
    SrcMtRef,
    #[value(name = "bt-rt-tgt")]
    BtRtTgt,
    #[value(name = "src-mt1-mt2")]
    SrcMt1Mt2,
    Mvppe,
    Human,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::SrcMtRef => "src-mt-ref",
            Origin::BtRtTgt => "bt-rt-tgt",
            Origin::SrcMt1Mt2 => "src-mt1-mt2",
            Origin::Mvppe => "mvppe",
            Origin::Human => "human",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletRecord {
    pub src: TokenSeq,
    pub mt: TokenSeq,
    pub pe: TokenSeq,
    pub origin: Origin,
}

/// Triplets plus what was dropped along the way.
#[derive(Debug, Clone, Default)]
pub struct SynthReport {
    pub triplets: Vec<TripletRecord>,
    /// Input line index and reason for every line that failed.
    pub skipped: Vec<(usize, String)>,
    /// Lines dropped because MT output and post-edit were identical.
    pub removed_identical: usize,
}

impl SynthReport {
    fn collect(results: Vec<Result<Option<TripletRecord>>>, drop_identical: bool) -> Self {
        let mut report = SynthReport::default();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(Some(t)) if drop_identical && t.mt == t.pe => report.removed_identical += 1,
                Ok(Some(t)) => report.triplets.push(t),
                Ok(None) => {}
                Err(e) => {
                    log::warn!("line {}: skipped: {e}", i + 1);
                    report.skipped.push((i, e.to_string()));
                }
            }
        }
        report
    }

    /// Mean sentence-level TER of MT output against post-edit, over triplets
    /// with a non-empty post-edit.
    pub fn mean_ter(&self) -> Option<f64> {
        mean_ter(&self.triplets)
    }
}

pub fn mean_ter(triplets: &[TripletRecord]) -> Option<f64> {
    let scores: Vec<f64> = triplets.iter().filter_map(|t| ter_score(&t.mt, &t.pe).ok()).collect();
    if scores.is_empty() {
        None
    } else {
        Some(scores.iter().sum::<f64>() / scores.len() as f64)
    }
}

pub fn synth_src_mt_ref(parallel: &[(TokenSeq, TokenSeq)], mt_system: &dyn Translator) -> SynthReport {
    let results = parallel
        .par_iter()
        .map(|(src, reference)| {
            Ok(Some(TripletRecord {
                mt: mt_system.translate(src)?,
                src: src.clone(),
                pe: reference.clone(),
                origin: Origin::SrcMtRef,
            }))
        })
        .collect();
    SynthReport::collect(results, false)
}

pub fn synth_bt_rt_tgt(mono_tgt: &[TokenSeq], bt_system: &dyn Translator, fwd_system: &dyn Translator) -> SynthReport {
    let results = mono_tgt
        .par_iter()
        .map(|tgt| {
            let src = bt_system.translate(tgt)?;
            Ok(Some(TripletRecord {
                mt: fwd_system.translate(&src)?,
                src,
                pe: tgt.clone(),
                origin: Origin::BtRtTgt,
            }))
        })
        .collect();
    SynthReport::collect(results, false)
}

pub fn synth_src_mt1_mt2(mono_src: &[TokenSeq], weak: &dyn Translator, strong: &dyn Translator) -> SynthReport {
    let results = mono_src
        .par_iter()
        .map(|src| {
            Ok(Some(TripletRecord {
                mt: weak.translate(src)?,
                pe: strong.translate(src)?,
                src: src.clone(),
                origin: Origin::SrcMt1Mt2,
            }))
        })
        .collect();
    SynthReport::collect(results, true)
}

/// Everything `mvppe` synthesis needs besides the corpus.
pub struct MvppeSetup<'a> {
    pub model_t: &'a dyn SequenceModel,
    pub model_p: &'a dyn SequenceModel,
    pub weights: EnsembleWeights,
    pub mt_system: &'a dyn Translator,
    pub beam: BeamConfig,
}

/// Pairs where the pseudo post-edit equals the MT output carry no edits and
/// are dropped.
pub fn synth_mvppe(parallel: &[(TokenSeq, TokenSeq)], setup: &MvppeSetup<'_>) -> SynthReport {
    let results = parallel
        .par_iter()
        .map(|(src, tgt)| {
            let mt = setup.mt_system.translate(src)?;
            let pe = mvppe_decode(src, tgt, setup.model_t, setup.model_p, &setup.weights, &setup.beam)?;
            Ok(Some(TripletRecord {
                src: src.clone(),
                mt,
                pe,
                origin: Origin::Mvppe,
            }))
        })
        .collect();
    SynthReport::collect(results, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub weights: EnsembleWeights,
    pub mean_ter: f64,
    /// Absolute difference from the target mean TER.
    pub distance: f64,
}

/// Scores candidate weights by how close the mean TER of the synthesized
/// triplets lands to `target_ter`. Closest first; ties keep grid order.
pub fn grid_search_weights(
    parallel: &[(TokenSeq, TokenSeq)],
    setup: &MvppeSetup<'_>,
    grid: &[EnsembleWeights],
    target_ter: f64,
) -> Vec<GridPoint> {
    let mut points: Vec<GridPoint> = grid
        .iter()
        .filter_map(|&weights| {
            let run = MvppeSetup { weights, ..*setup };
            let results: Vec<Result<Option<TripletRecord>>> = parallel
                .par_iter()
                .map(|(src, tgt)| {
                    Ok(Some(TripletRecord {
                        mt: run.mt_system.translate(src)?,
                        pe: mvppe_decode(src, tgt, run.model_t, run.model_p, &weights, &run.beam)?,
                        src: src.clone(),
                        origin: Origin::Mvppe,
                    }))
                })
                .collect();
            let report = SynthReport::collect(results, false);
            let mean_ter = report.mean_ter()?;
            Some(GridPoint {
                weights,
                mean_ter,
                distance: (mean_ter - target_ter).abs(),
            })
        })
        .collect();
    points.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    points
}

/// Splits a word into marked subword pieces.
pub trait Segmenter: Send + Sync {
    fn segment(&self, word: &str) -> Result<Vec<String>>;
    fn marker(&self) -> &str;
}

/// Every word is its own piece.
#[derive(Debug, Clone)]
pub struct WholeWordSegmenter {
    pub marker: String,
}

impl Segmenter for WholeWordSegmenter {
    fn segment(&self, word: &str) -> Result<Vec<String>> {
        Ok(vec![word.to_owned()])
    }

    fn marker(&self) -> &str {
        &self.marker
    }
}

/// Cuts words into pieces of at most `width` characters.
#[derive(Debug, Clone)]
pub struct ChunkSegmenter {
    pub width: usize,
    pub marker: String,
}

impl Segmenter for ChunkSegmenter {
    fn segment(&self, word: &str) -> Result<Vec<String>> {
        let chars: Vec<char> = word.chars().collect();
        let chunks: Vec<String> = chars.chunks(self.width.max(1)).map(|c| c.iter().collect()).collect();
        let last = chunks.len() - 1;
        Ok(chunks
            .into_iter()
            .enumerate()
            .map(|(i, c)| if i < last { c + &self.marker } else { c })
            .collect())
    }

    fn marker(&self) -> &str {
        &self.marker
    }
}

/// Word to pieces lookup, e.g. from a BPE-applied vocabulary dump.
#[derive(Debug, Clone)]
pub struct TableSegmenter {
    pub table: std::collections::HashMap<String, Vec<String>>,
    pub marker: String,
}

impl TableSegmenter {
    /// Reads `word<TAB>piece piece ...` lines.
    pub fn load(path: &std::path::Path, marker: &str) -> Result<Self> {
        let mut table = std::collections::HashMap::new();
        for (i, line) in crate::format::read_lines(path)?.iter().enumerate() {
            let (word, pieces) = line.split_once('\t').ok_or_else(|| Error::Format {
                path: path.to_owned(),
                line: i + 1,
                reason: "expected word<TAB>pieces".into(),
            })?;
            table.insert(
                word.trim().to_owned(),
                pieces.split_whitespace().map(str::to_owned).collect(),
            );
        }
        Ok(TableSegmenter {
            table,
            marker: marker.to_owned(),
        })
    }
}

impl Segmenter for TableSegmenter {
    fn segment(&self, word: &str) -> Result<Vec<String>> {
        self.table
            .get(word)
            .cloned()
            .ok_or_else(|| Error::Data(format!("segmenter has no entry for {word:?}")))
    }

    fn marker(&self) -> &str {
        &self.marker
    }
}

/// One finetuning example at both granularities.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub mt_subwords: SubwordSeq,
    pub word_tags: FlatTagSeq,
    pub naive_tags: FlatTagSeq,
    /// Subword tags that collapse back to `word_tags` exactly.
    pub subword_tags: FlatTagSeq,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingReport {
    pub records: Vec<TrainingRecord>,
    pub skipped: Vec<(usize, String)>,
}

fn training_record(t: &TripletRecord, segmenter: &dyn Segmenter) -> Result<TrainingRecord> {
    if t.mt.is_empty() || t.pe.is_empty() {
        return Err(Error::Data("empty MT output or post-edit".into()));
    }
    let marker = segmenter.marker();
    let mt_sw = SubwordSeq::from_words(&t.mt, marker, |w| segmenter.segment(w))?;
    let pe_sw = SubwordSeq::from_words(&t.pe, marker, |w| segmenter.segment(w))?;
    let word_tags = word_tags(&t.mt, &t.pe);
    let naive_tags = naive_subword_tags(&mt_sw, &pe_sw);
    let subword_tags = heuristic_subword_tags(&mt_sw, &naive_tags, &word_tags)?;
    Ok(TrainingRecord {
        mt_subwords: mt_sw,
        word_tags,
        naive_tags,
        subword_tags,
    })
}

/// Word tags from shift-free alignment of MT against post-edit, naive tags
/// from aligning the segmented pieces, and the heuristic subword tags built
/// from both.
pub fn triplets_to_training(triplets: &[TripletRecord], segmenter: &dyn Segmenter) -> TrainingReport {
    let results: Vec<Result<TrainingRecord>> = triplets.par_iter().map(|t| training_record(t, segmenter)).collect();
    let mut report = TrainingReport::default();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => report.records.push(rec),
            Err(e) => {
                log::warn!("triplet {}: skipped: {e}", i + 1);
                report.skipped.push((i, e.to_string()));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subword::subword_to_word_tags;
    use crate::tags::Tag;

    fn seq(s: &str) -> TokenSeq {
        TokenSeq::from_line(s)
    }

    fn table(name: &str, rows: &[(&str, &str)]) -> TableTranslator {
        let mut t = TableTranslator::new(name);
        for (i, o) in rows {
            t.insert(i, o);
        }
        t
    }

    #[test]
    fn src_mt_ref() {
        assert!(synth_src_mt_ref(&[], &IdentityTranslator).triplets.is_empty());
        let mt = table("mt", &[("s1", "m1"), ("s3", "m3")]);
        let pairs = vec![(seq("s1"), seq("r1")), (seq("s2"), seq("r2")), (seq("s3"), seq("r3"))];
        let report = synth_src_mt_ref(&pairs, &mt);
        assert_eq!(report.triplets.len(), 2);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].0, 1);
        assert_eq!(report.triplets[0].mt, seq("m1"));
        assert_eq!(report.triplets[1].pe, seq("r3"));
    }

    #[test]
    fn bt_rt_tgt() {
        let id = IdentityTranslator;
        let r = synth_bt_rt_tgt(&[seq("t u")], &id, &id);
        assert_eq!(r.triplets[0].src, seq("t u"));
        assert_eq!(r.triplets[0].mt, seq("t u"));

        let bt = table("bt", &[("t", "b")]);
        let fwd = table("fwd", &[("b", "r")]);
        let r = synth_bt_rt_tgt(&[seq("t")], &bt, &fwd);
        let t = &r.triplets[0];
        assert_eq!((&t.src, &t.mt, &t.pe), (&seq("b"), &seq("r"), &seq("t")));
        assert!(synth_bt_rt_tgt(&[], &bt, &fwd).triplets.is_empty());
    }

    #[test]
    fn mt1_mt2_drops_agreement() {
        let srcs = vec![seq("x"), seq("y"), seq("z")];
        let r = synth_src_mt1_mt2(&srcs, &IdentityTranslator, &IdentityTranslator);
        assert!(r.triplets.is_empty());
        assert_eq!(r.removed_identical, 3);

        let weak = table("weak", &[("x", "a"), ("y", "b"), ("z", "c")]);
        let strong = table("strong", &[("x", "a2"), ("y", "b"), ("z", "c2")]);
        let r = synth_src_mt1_mt2(&srcs, &weak, &strong);
        assert_eq!(r.triplets.len(), 2);
        assert_eq!(r.removed_identical, 1);
        assert_eq!(r.triplets[0].src, seq("x"));
        assert_eq!(r.triplets[1].src, seq("z"));
    }

    #[test]
    fn chunk_segmenter_marks_all_but_last() {
        let s = ChunkSegmenter {
            width: 2,
            marker: "@@".into(),
        };
        assert_eq!(s.segment("abcde").unwrap(), vec!["ab@@", "cd@@", "e"]);
        assert_eq!(s.segment("ab").unwrap(), vec!["ab"]);
    }

    #[test]
    fn training_identity_and_degenerate_segmentation() {
        let t = TripletRecord {
            src: seq("s"),
            mt: seq("aa bb"),
            pe: seq("aa bb"),
            origin: Origin::Human,
        };
        let seg = ChunkSegmenter {
            width: 1,
            marker: "@@".into(),
        };
        let r = triplets_to_training(std::slice::from_ref(&t), &seg);
        assert_eq!(r.records[0].subword_tags, FlatTagSeq::all(Tag::Ok, 4));
        assert_eq!(r.records[0].word_tags, FlatTagSeq::all(Tag::Ok, 2));

        let t = TripletRecord {
            pe: seq("aa cc bb"),
            ..t
        };
        let whole = WholeWordSegmenter { marker: "@@".into() };
        let r = triplets_to_training(&[t], &whole);
        assert_eq!(r.records[0].subword_tags, r.records[0].word_tags);
    }

    #[test]
    fn training_worked_triplet() {
        // pieces "fo@@ o" vs "fo@@ x": word foo substituted by fox
        let mut seg = TableSegmenter {
            table: Default::default(),
            marker: "@@".into(),
        };
        seg.table.insert("foo".into(), vec!["fo@@".into(), "o".into()]);
        seg.table.insert("fox".into(), vec!["fo@@".into(), "x".into()]);
        let t = TripletRecord {
            src: seq("s"),
            mt: seq("foo"),
            pe: seq("fox"),
            origin: Origin::Human,
        };
        let r = triplets_to_training(&[t], &seg);
        let rec = &r.records[0];
        use Tag::{Bad as B, Ok as O};
        assert_eq!(rec.word_tags.tags(), &[O, B, O]);
        assert_eq!(rec.naive_tags.tags(), &[O, O, O, B, O]);
        assert_eq!(rec.subword_tags.tags(), &[O, O, O, B, O]);
        assert_eq!(
            subword_to_word_tags(&rec.mt_subwords, &rec.subword_tags).unwrap(),
            rec.word_tags
        );
    }

    #[test]
    fn training_skips_empty_sides() {
        let t = TripletRecord {
            src: seq("s"),
            mt: seq(""),
            pe: seq("a"),
            origin: Origin::Human,
        };
        let r = triplets_to_training(&[t], &WholeWordSegmenter { marker: "@@".into() });
        assert!(r.records.is_empty());
        assert_eq!(r.skipped.len(), 1);
    }

    #[test]
    fn mean_ter_of_report() {
        let t = |mt: &str, pe: &str| TripletRecord {
            src: seq("s"),
            mt: seq(mt),
            pe: seq(pe),
            origin: Origin::Human,
        };
        let m = mean_ter(&[t("a b", "a b"), t("a", "b c")]).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
        assert_eq!(mean_ter(&[]), None);
    }
}
