//! OK/BAD tags for MT words and the gaps between them, and the metrics used
//! to score predicted tags against references.

use std::fmt;
use std::str::FromStr;

use crate::align::{EditOp, EditScript};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Ok,
    Bad,
}

impl Tag {
    pub fn is_bad(self) -> bool {
        self == Tag::Bad
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Ok => "OK",
            Tag::Bad => "BAD",
        }
    }
}

impl From<bool> for Tag {
    /// `true` means BAD.
    fn from(bad: bool) -> Self {
        if bad {
            Tag::Bad
        } else {
            Tag::Ok
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "OK" => Ok(Tag::Ok),
            "BAD" => Ok(Tag::Bad),
            other => Err(format!("unknown tag {other:?}")),
        }
    }
}

/// Word tags for a J-word translation plus its J+1 gap tags.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QeTags {
    words: Vec<Tag>,
    gaps: Vec<Tag>,
}

impl QeTags {
    pub fn new(words: Vec<Tag>, gaps: Vec<Tag>) -> Result<Self> {
        if gaps.len() != words.len() + 1 {
            return Err(Error::length("gap tags", words.len() + 1, gaps.len()));
        }
        Ok(QeTags { words, gaps })
    }

    pub fn all_ok(words: usize) -> Self {
        QeTags {
            words: vec![Tag::Ok; words],
            gaps: vec![Tag::Ok; words + 1],
        }
    }

    pub fn words(&self) -> &[Tag] {
        &self.words
    }

    pub fn gaps(&self) -> &[Tag] {
        &self.gaps
    }

    pub fn bad_count(&self) -> usize {
        self.words.iter().chain(&self.gaps).filter(|t| t.is_bad()).count()
    }
}

/// Reads word and gap tags off a shift-free alignment of MT against its
/// post-edit.
///
/// A word is OK iff it is matched. A gap is BAD iff at least one reference
/// token is inserted there; gap `g` sits after the first `g` MT words.
pub fn tags_from_alignment(script: &EditScript, hyp_len: usize) -> Result<QeTags> {
    let mut words = Vec::with_capacity(hyp_len);
    let mut gaps = vec![Tag::Ok; hyp_len + 1];
    for op in &script.ops {
        match op {
            EditOp::Match { .. } => words.push(Tag::Ok),
            EditOp::Substitute { .. } | EditOp::Delete { .. } => words.push(Tag::Bad),
            EditOp::Insert { .. } => {
                if let Some(gap) = gaps.get_mut(words.len()) {
                    *gap = Tag::Bad;
                }
            }
            EditOp::Shift { .. } => return Err(Error::ShiftInAlignment),
        }
    }
    if words.len() != hyp_len {
        return Err(Error::CoverageMismatch {
            covered: words.len(),
            expected: hyp_len,
        });
    }
    QeTags::new(words, gaps)
}

/// Which tags participate in a pooled evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    #[default]
    All,
    #[value(name = "words")]
    #[serde(rename = "words")]
    WordsOnly,
    #[value(name = "gaps")]
    #[serde(rename = "gaps")]
    GapsOnly,
}

/// Binary confusion counts with BAD as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn n(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, pred: Tag, gold: Tag) {
        match (pred, gold) {
            (Tag::Bad, Tag::Bad) => self.tp += 1,
            (Tag::Bad, Tag::Ok) => self.fp += 1,
            (Tag::Ok, Tag::Ok) => self.tn += 1,
            (Tag::Ok, Tag::Bad) => self.fn_ += 1,
        }
    }

    /// Same counts with OK as the positive class.
    pub fn swapped(&self) -> Self {
        ConfusionCounts::new(self.tn, self.fn_, self.tp, self.fp)
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ConfusionCounts::new(self.tp + o.tp, self.fp + o.fp, self.tn + o.tn, self.fn_ + o.fn_)
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), |a, b| a + b)
    }
}

/// Confusion counts for one sentence.
pub fn sentence_confusion(pred: &QeTags, gold: &QeTags, scope: Scope, index: usize) -> Result<ConfusionCounts> {
    if pred.words.len() != gold.words.len() {
        return Err(Error::SentenceMismatch {
            index,
            what: "word tag",
            pred: pred.words.len(),
            gold: gold.words.len(),
        });
    }
    let mut counts = ConfusionCounts::default();
    if scope != Scope::GapsOnly {
        for (&p, &g) in pred.words.iter().zip(&gold.words) {
            counts.record(p, g);
        }
    }
    if scope != Scope::WordsOnly {
        for (&p, &g) in pred.gaps.iter().zip(&gold.gaps) {
            counts.record(p, g);
        }
    }
    Ok(counts)
}

/// Pools confusion counts over a corpus.
pub fn pool_confusion(pred: &[QeTags], gold: &[QeTags], scope: Scope) -> Result<ConfusionCounts> {
    if pred.len() != gold.len() {
        return Err(Error::length("sentence count", gold.len(), pred.len()));
    }
    pred.iter()
        .zip(gold)
        .enumerate()
        .map(|(i, (p, g))| sentence_confusion(p, g, scope, i))
        .sum()
}

/// Matthews correlation coefficient:
///
/// ```text
/// S = (TP + FN) / N,  P = (TP + FP) / N
/// MCC = (TP / N - S * P) / sqrt(P * S * (1 - S) * (1 - P))
/// ```
///
/// evaluated in the equivalent count form
/// `(TP*TN - FP*FN) / (sqrt((TP+FP)(TP+FN)) * sqrt((TN+FP)(TN+FN)))`,
/// which avoids cancellation and gives exactly 1 for perfect prediction.
/// Returns 0 when the denominator vanishes.
pub fn mcc(c: &ConfusionCounts) -> Result<f64> {
    if c.n() == 0 {
        return Err(Error::EmptyTagSet);
    }
    let (tp, fp, tn, fn_) = (c.tp as i128, c.fp as i128, c.tn as i128, c.fn_ as i128);
    let num = (tp * tn - fp * fn_) as f64;
    let denom = (((tp + fp) * (tp + fn_)) as f64).sqrt() * (((tn + fp) * (tn + fn_)) as f64).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(num / denom)
}

fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// `(f1_ok, f1_bad)`.
pub fn f1_per_class(c: &ConfusionCounts) -> Result<(f64, f64)> {
    if c.n() == 0 {
        return Err(Error::EmptyTagSet);
    }
    let ok = c.swapped();
    Ok((f1(ok.tp, ok.fp, ok.fn_), f1(c.tp, c.fp, c.fn_)))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Metrics {
    pub mcc: f64,
    pub f1_ok: f64,
    pub f1_bad: f64,
    pub counts: ConfusionCounts,
}

impl Metrics {
    pub fn from_counts(counts: ConfusionCounts) -> Result<Self> {
        let (f1_ok, f1_bad) = f1_per_class(&counts)?;
        Ok(Metrics {
            mcc: mcc(&counts)?,
            f1_ok,
            f1_bad,
            counts,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::levenshtein_align;
    use Tag::{Bad as B, Ok as O};

    fn tags_for(hyp: &str, reference: &str) -> QeTags {
        let h: Vec<&str> = hyp.split_whitespace().collect();
        let r: Vec<&str> = reference.split_whitespace().collect();
        tags_from_alignment(&levenshtein_align(&h, &r), h.len()).unwrap()
    }

    #[test]
    fn identity_alignment_all_ok() {
        let t = tags_for("a b c", "a b c");
        assert_eq!(t.words(), &[O, O, O]);
        assert_eq!(t.gaps(), &[O, O, O, O]);
    }

    #[test]
    fn insertion_marks_gap() {
        let t = tags_for("a b", "a x b");
        assert_eq!(t.words(), &[O, O]);
        assert_eq!(t.gaps(), &[O, B, O]);
    }

    #[test]
    fn deletion_marks_word() {
        let t = tags_for("a b", "a");
        assert_eq!(t.words(), &[O, B]);
        assert_eq!(t.gaps(), &[O, O, O]);
    }

    #[test]
    fn several_inserts_at_one_gap_one_bad() {
        let t = tags_for("a", "a x y z");
        assert_eq!(t.gaps(), &[O, B]);
        let t = tags_for("", "x y");
        assert_eq!(t.words(), &[] as &[Tag]);
        assert_eq!(t.gaps(), &[B]);
    }

    #[test]
    fn shifts_are_rejected() {
        let s = crate::align::ter_align(&["a", "b", "c", "d"], &["c", "d", "a", "b"], true);
        assert!(matches!(tags_from_alignment(&s, 4), Err(Error::ShiftInAlignment)));
    }

    #[test]
    fn coverage_mismatch_is_rejected() {
        let s = levenshtein_align(&["a"], &["a"]);
        assert!(matches!(
            tags_from_alignment(&s, 2),
            Err(Error::CoverageMismatch { .. })
        ));
    }

    #[test]
    fn pool_examples() {
        let corpus = vec![
            QeTags::new(vec![O, B], vec![O, B, O]).unwrap(),
            QeTags::new(vec![B, O], vec![O, B, O]).unwrap(),
        ];
        let c = pool_confusion(&corpus, &corpus, Scope::All).unwrap();
        assert_eq!(c, ConfusionCounts::new(4, 0, 6, 0));

        let pred = QeTags::new(vec![O, O], vec![O, O, O]).unwrap();
        let gold = QeTags::new(vec![B, B], vec![B, B, B]).unwrap();
        let c = pool_confusion(&[pred], &[gold], Scope::All).unwrap();
        assert_eq!(c, ConfusionCounts::new(0, 0, 0, 5));

        let pred = QeTags::new(vec![O, B], vec![O, O, B]).unwrap();
        let gold = QeTags::new(vec![O, O], vec![O, O, B]).unwrap();
        let all = pool_confusion(std::slice::from_ref(&pred), std::slice::from_ref(&gold), Scope::All).unwrap();
        assert_eq!(all, ConfusionCounts::new(1, 1, 3, 0));
        let words = pool_confusion(
            std::slice::from_ref(&pred),
            std::slice::from_ref(&gold),
            Scope::WordsOnly,
        )
        .unwrap();
        assert_eq!(words, ConfusionCounts::new(0, 1, 1, 0));
        let gaps = pool_confusion(&[pred], &[gold], Scope::GapsOnly).unwrap();
        assert_eq!(gaps, ConfusionCounts::new(1, 0, 2, 0));
    }

    #[test]
    fn pool_names_mismatched_sentence() {
        let a = QeTags::all_ok(2);
        let b = QeTags::all_ok(3);
        let err = pool_confusion(&[a.clone(), a], &[QeTags::all_ok(2), b], Scope::All).unwrap_err();
        assert!(matches!(err, Error::SentenceMismatch { index: 1, .. }), "{err}");
    }

    #[test]
    fn mcc_examples() {
        assert_eq!(mcc(&ConfusionCounts::new(5, 0, 5, 0)).unwrap(), 1.0);
        assert_eq!(mcc(&ConfusionCounts::new(0, 5, 0, 5)).unwrap(), -1.0);
        let v = mcc(&ConfusionCounts::new(3, 1, 4, 2)).unwrap();
        assert!((v - 0.408248).abs() < 1e-6, "{v}");
        assert_eq!(mcc(&ConfusionCounts::new(0, 0, 6, 4)).unwrap(), 0.0);
        assert!(matches!(mcc(&ConfusionCounts::default()), Err(Error::EmptyTagSet)));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_per_class(&ConfusionCounts::new(4, 0, 6, 0)).unwrap(), (1.0, 1.0));
        let (ok, bad) = f1_per_class(&ConfusionCounts::new(3, 1, 4, 2)).unwrap();
        assert!((bad - 6.0 / 9.0).abs() < 1e-15);
        assert!((ok - 8.0 / 11.0).abs() < 1e-15);
        assert_eq!(f1_per_class(&ConfusionCounts::new(0, 7, 0, 0)).unwrap(), (0.0, 0.0));
        assert!(f1_per_class(&ConfusionCounts::default()).is_err());
    }
}
