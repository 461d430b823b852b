//! Moving tags between word and subword granularity.
//!
//! Subword input uses a continuation marker suffix (`@@` by default): a piece
//! ending in the marker is glued to the piece after it. Tags at either level
//! are kept as a [`FlatTagSeq`], alternating gap and token tags.

use std::fmt;
use std::str::FromStr;

use crate::align::{levenshtein_align, TokenSeq};
use crate::error::{Error, Result};
use crate::tags::{tags_from_alignment, QeTags, Tag};

pub const DEFAULT_MARKER: &str = "@@";

/// Subword pieces plus the half-open piece span of every word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordSeq {
    subtokens: TokenSeq,
    spans: Vec<(usize, usize)>,
    marker: String,
}

impl SubwordSeq {
    /// Groups marked pieces into words.
    pub fn parse(marked: TokenSeq, marker: &str) -> Result<Self> {
        if marker.is_empty() {
            return Err(Error::InvalidParameter("empty continuation marker".into()));
        }
        let mut spans = Vec::new();
        let mut start = 0;
        for (i, piece) in marked.iter().enumerate() {
            if piece == marker {
                return Err(Error::BareMarker { position: i });
            }
            if !piece.ends_with(marker) {
                spans.push((start, i + 1));
                start = i + 1;
            }
        }
        if start != marked.len() {
            return Err(Error::DanglingContinuation(marked[marked.len() - 1].clone()));
        }
        Ok(SubwordSeq {
            subtokens: marked,
            spans,
            marker: marker.to_owned(),
        })
    }

    /// Segments words with `segment`, which must return marked pieces.
    pub fn from_words<F>(words: &[String], marker: &str, mut segment: F) -> Result<Self>
    where
        F: FnMut(&str) -> Result<Vec<String>>,
    {
        let mut pieces = Vec::new();
        for w in words {
            pieces.extend(segment(w)?);
        }
        let seq = SubwordSeq::parse(TokenSeq::new(pieces)?, marker)?;
        if seq.word_count() != words.len() {
            return Err(Error::length("segmented word count", words.len(), seq.word_count()));
        }
        Ok(seq)
    }

    pub fn subtokens(&self) -> &TokenSeq {
        &self.subtokens
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    pub fn word_count(&self) -> usize {
        self.spans.len()
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    /// The words recovered by stripping markers and joining each span.
    pub fn words(&self) -> TokenSeq {
        let words = self.spans.iter().map(|&(s, e)| {
            self.subtokens[s..e]
                .iter()
                .map(|p| p.strip_suffix(self.marker.as_str()).unwrap_or(p))
                .collect::<String>()
        });
        TokenSeq::from_line(&words.collect::<Vec<_>>().join(" "))
    }
}

/// Gap, token, gap, ..., gap: `2m + 1` tags for `m` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlatTagSeq(Vec<Tag>);

impl FlatTagSeq {
    pub fn new(tags: Vec<Tag>) -> Result<Self> {
        if tags.len().is_multiple_of(2) {
            return Err(Error::Data(format!("even tag count {}", tags.len())));
        }
        Ok(FlatTagSeq(tags))
    }

    pub fn all(tag: Tag, tokens: usize) -> Self {
        FlatTagSeq(vec![tag; 2 * tokens + 1])
    }

    pub fn token_count(&self) -> usize {
        self.0.len() / 2
    }

    pub fn tags(&self) -> &[Tag] {
        &self.0
    }

    pub fn gap(&self, g: usize) -> Tag {
        self.0[2 * g]
    }

    pub fn token(&self, i: usize) -> Tag {
        self.0[2 * i + 1]
    }

    /// Token tags and internal gaps of tokens `start..end`.
    pub fn interior(&self, start: usize, end: usize) -> &[Tag] {
        &self.0[2 * start + 1..2 * end]
    }

    pub fn last_gap(&self) -> Tag {
        self.0[self.0.len() - 1]
    }

    fn expect_tokens(&self, tokens: usize, what: &str) -> Result<()> {
        if self.token_count() != tokens {
            return Err(Error::length(what, 2 * tokens + 1, self.0.len()));
        }
        Ok(())
    }
}

impl From<&QeTags> for FlatTagSeq {
    fn from(t: &QeTags) -> Self {
        let mut flat = Vec::with_capacity(t.gaps().len() + t.words().len());
        for (gap, word) in t.gaps().iter().zip(t.words()) {
            flat.push(*gap);
            flat.push(*word);
        }
        flat.push(t.gaps()[t.gaps().len() - 1]);
        FlatTagSeq(flat)
    }
}

impl From<&FlatTagSeq> for QeTags {
    fn from(f: &FlatTagSeq) -> Self {
        let words = f.0.iter().skip(1).step_by(2).copied().collect();
        let gaps = f.0.iter().step_by(2).copied().collect();
        QeTags::new(words, gaps).expect("odd flat layout always splits evenly")
    }
}

impl fmt::Display for FlatTagSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t.as_str())?;
        }
        Ok(())
    }
}

impl FromStr for FlatTagSeq {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let tags = line
            .split_whitespace()
            .map(|t| t.parse::<Tag>().map_err(Error::Data))
            .collect::<Result<Vec<_>>>()?;
        FlatTagSeq::new(tags)
    }
}

/// Collapses subword tags to word tags.
///
/// Each word takes the subword gap tag in front of its span, and is OK only
/// if every piece tag and internal gap tag in the span is OK. The final gap
/// carries over.
pub fn subword_to_word_tags(sw: &SubwordSeq, q_sw: &FlatTagSeq) -> Result<FlatTagSeq> {
    q_sw.expect_tokens(sw.subtokens.len(), "subword tag sequence")?;
    let mut out = Vec::with_capacity(2 * sw.word_count() + 1);
    for &(s, e) in &sw.spans {
        out.push(q_sw.gap(s));
        out.push(Tag::from(q_sw.interior(s, e).iter().any(|t| t.is_bad())));
    }
    out.push(q_sw.last_gap());
    Ok(FlatTagSeq(out))
}

/// Tags from aligning MT pieces directly against post-edit pieces.
pub fn naive_subword_tags(mt_sw: &SubwordSeq, pe_sw: &SubwordSeq) -> FlatTagSeq {
    let script = levenshtein_align(mt_sw.subtokens.tokens(), pe_sw.subtokens.tokens());
    let tags = tags_from_alignment(&script, mt_sw.subtokens.len())
        .expect("levenshtein alignment is shift-free and covers the hypothesis");
    FlatTagSeq::from(&tags)
}

/// Subword tags that collapse back to `q_w` exactly.
///
/// Per word: the word-level left gap is copied; an OK word gets all-OK
/// pieces; a BAD word keeps its naive piece tags when they already contain a
/// BAD, and is forced all-BAD otherwise. The word-level final gap closes.
pub fn heuristic_subword_tags(sw: &SubwordSeq, q_sw_naive: &FlatTagSeq, q_w: &FlatTagSeq) -> Result<FlatTagSeq> {
    q_sw_naive.expect_tokens(sw.subtokens.len(), "naive subword tag sequence")?;
    q_w.expect_tokens(sw.word_count(), "word tag sequence")?;
    let mut out = Vec::with_capacity(q_sw_naive.0.len());
    for (k, &(s, e)) in sw.spans.iter().enumerate() {
        out.push(q_w.gap(k));
        let width = 2 * (e - s) - 1;
        let naive = q_sw_naive.interior(s, e);
        if !q_w.token(k).is_bad() {
            out.extend(std::iter::repeat_n(Tag::Ok, width));
        } else if naive.iter().any(|t| t.is_bad()) {
            out.extend_from_slice(naive);
        } else {
            out.extend(std::iter::repeat_n(Tag::Bad, width));
        }
    }
    out.push(q_w.last_gap());
    Ok(FlatTagSeq(out))
}

/// Word-level tags of `mt` against `pe` by shift-free alignment of the words.
pub fn word_tags(mt: &[String], pe: &[String]) -> FlatTagSeq {
    let script = levenshtein_align(mt, pe);
    FlatTagSeq::from(&tags_from_alignment(&script, mt.len()).expect("shift-free full coverage"))
}

/// One sentence for a round-trip measurement: the subword segmentation,
/// subword tags under test, and gold word tags.
#[derive(Debug, Clone)]
pub struct RoundtripCase {
    pub sw: SubwordSeq,
    pub subword_tags: FlatTagSeq,
    pub gold: FlatTagSeq,
}

/// Per-tag error rate of collapsing subword tags back to words.
pub fn roundtrip_error(cases: &[RoundtripCase]) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut wrong = 0usize;
    let mut total = 0usize;
    for case in cases {
        case.gold
            .expect_tokens(case.sw.word_count(), "gold word tag sequence")?;
        let back = subword_to_word_tags(&case.sw, &case.subword_tags)?;
        wrong += back.0.iter().zip(&case.gold.0).filter(|(a, b)| a != b).count();
        total += back.0.len();
    }
    Ok(wrong as f64 / total as f64)
}

/// Round-trip error of naive subword references on `(mt, pe)` segmented
/// pairs, with gold from word-level alignment of the recovered words.
pub fn naive_roundtrip_error(pairs: &[(SubwordSeq, SubwordSeq)]) -> Result<f64> {
    let cases: Vec<RoundtripCase> = pairs
        .iter()
        .map(|(mt, pe)| RoundtripCase {
            subword_tags: naive_subword_tags(mt, pe),
            gold: word_tags(&mt.words(), &pe.words()),
            sw: mt.clone(),
        })
        .collect();
    roundtrip_error(&cases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Tag::{Bad as B, Ok as O};

    fn sw(line: &str) -> SubwordSeq {
        SubwordSeq::parse(TokenSeq::from_line(line), DEFAULT_MARKER).unwrap()
    }

    fn flat(tags: &[Tag]) -> FlatTagSeq {
        FlatTagSeq::new(tags.to_vec()).unwrap()
    }

    #[test]
    fn parse_spans() {
        assert_eq!(sw("foo bar").spans(), &[(0, 1), (1, 2)]);
        assert_eq!(sw("fo@@ o bar").spans(), &[(0, 2), (2, 3)]);
        assert_eq!(sw("a@@ b@@ c").spans(), &[(0, 3)]);
        assert_eq!(sw("fo@@ o bar").words().tokens(), &["foo", "bar"]);
        assert!(sw("").spans().is_empty());
    }

    #[test]
    fn parse_errors() {
        let dangling = SubwordSeq::parse(TokenSeq::from_line("a b@@"), "@@");
        assert!(matches!(dangling, Err(Error::DanglingContinuation(_))));
        let bare = SubwordSeq::parse(TokenSeq::from_line("a @@ b"), "@@");
        assert!(matches!(bare, Err(Error::BareMarker { position: 1 })));
    }

    #[test]
    fn custom_marker() {
        let s = SubwordSeq::parse(TokenSeq::from_line("un## do it"), "##").unwrap();
        assert_eq!(s.words().tokens(), &["undo", "it"]);
    }

    #[test]
    fn collapse_identity_segmentation() {
        let q = flat(&[B, O, O, B, B]);
        assert_eq!(subword_to_word_tags(&sw("x y"), &q).unwrap(), q);
    }

    #[test]
    fn collapse_traces() {
        let q = flat(&[O, O, O, O, B, B, O]);
        assert_eq!(
            subword_to_word_tags(&sw("fo@@ o bar"), &q).unwrap(),
            flat(&[O, O, B, B, O])
        );
        let q = flat(&[O, O, B, O, O]);
        assert_eq!(subword_to_word_tags(&sw("fo@@ o"), &q).unwrap(), flat(&[O, B, O]));
    }

    #[test]
    fn collapse_length_mismatch() {
        assert!(subword_to_word_tags(&sw("fo@@ o"), &flat(&[O, O, O])).is_err());
    }

    #[test]
    fn naive_examples() {
        assert_eq!(
            naive_subword_tags(&sw("a@@ b c"), &sw("a@@ b c")),
            FlatTagSeq::all(O, 3)
        );
        assert_eq!(naive_subword_tags(&sw("fo@@ o"), &sw("fo@@ x")), flat(&[O, O, O, B, O]));
        assert_eq!(naive_subword_tags(&sw("a"), &sw("b a")), flat(&[B, O, O]));
    }

    #[test]
    fn heuristic_branches() {
        let s = sw("fo@@ o bar");
        // all words OK: everything OK regardless of naive
        let out = heuristic_subword_tags(&s, &flat(&[B, B, B, B, B, B, B]), &FlatTagSeq::all(O, 2)).unwrap();
        assert_eq!(out, FlatTagSeq::all(O, 3));
        // bar BAD but naive says OK: forced BAD
        let out = heuristic_subword_tags(&s, &FlatTagSeq::all(O, 3), &flat(&[O, O, O, B, O])).unwrap();
        assert_eq!(out, flat(&[O, O, O, O, O, B, O]));
        // word BAD, naive within span [BAD, OK, OK]: copied verbatim
        let s = sw("fo@@ o");
        let out = heuristic_subword_tags(&s, &flat(&[O, B, O, O, O]), &flat(&[O, B, O])).unwrap();
        assert_eq!(out, flat(&[O, B, O, O, O]));
    }

    #[test]
    fn heuristic_length_mismatch() {
        let s = sw("fo@@ o bar");
        assert!(heuristic_subword_tags(&s, &FlatTagSeq::all(O, 2), &FlatTagSeq::all(O, 2)).is_err());
        assert!(heuristic_subword_tags(&s, &FlatTagSeq::all(O, 3), &FlatTagSeq::all(O, 3)).is_err());
    }

    #[test]
    fn flat_parse_and_display() {
        let f: FlatTagSeq = "OK BAD OK".parse().unwrap();
        assert_eq!(f.to_string(), "OK BAD OK");
        assert!("OK BAD".parse::<FlatTagSeq>().is_err());
        assert!("OK ok OK".parse::<FlatTagSeq>().is_err());
        let q = QeTags::from(&f);
        assert_eq!(FlatTagSeq::from(&q), f);
    }

    #[test]
    fn roundtrip_error_requires_cases() {
        assert!(matches!(naive_roundtrip_error(&[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn single_piece_words_have_no_naive_error() {
        let pairs = vec![(sw("a b c"), sw("a x c")), (sw("d e"), sw("e d f"))];
        assert_eq!(naive_roundtrip_error(&pairs).unwrap(), 0.0);
    }
}
