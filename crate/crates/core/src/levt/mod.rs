//! The Levenshtein Transformer edit loop as a pure state machine.
//!
//! One iteration maps `y` to `W(S(D(y)))`: delete flagged tokens, insert
//! placeholder masks into gaps, then fill every mask with a word. The three
//! decisions come from a [`Scorer`]. Decoding repeats until the sequence stops
//! changing or the iteration cap is hit. For quality estimation a single
//! query of the deletion and insertion heads is turned into word and gap tags.

mod scorer;

use std::fmt;

pub use scorer::{lcs_pairs, ExternalScorer, NoopScorer, OracleScorer, RandomScorer, Scorer, WordDist};

use crate::align::TokenSeq;
use crate::error::{Error, Head, Result};
use crate::tags::{QeTags, Tag};

/// Placeholder spelling on the external scorer wire format.
pub const MASK_TOKEN: &str = "<mask>";
/// Default cap on masks inserted into one gap.
pub const DEFAULT_K_MAX: usize = 64;
const NORM_TOL: f64 = 1e-9;

/// A position of an intermediate sequence: a word or a placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Slot {
    Word(String),
    Mask,
}

impl Slot {
    pub fn as_str(&self) -> &str {
        match self {
            Slot::Word(w) => w,
            Slot::Mask => MASK_TOKEN,
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a scorer says during one iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionDistributions {
    /// Probability of deleting each token, one per position.
    pub del_probs: Vec<f64>,
    /// Distribution over insertion counts `0..=k` for each gap.
    pub ins_count_probs: Vec<Vec<f64>>,
    /// Distribution over words for each mask.
    pub word_probs: Vec<WordDist>,
}

fn malformed(head: Head, reason: impl Into<String>) -> Error {
    Error::MalformedHead {
        head,
        reason: reason.into(),
    }
}

fn check_normalized(head: Head, what: usize, probs: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    for p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(malformed(head, format!("entry {what} has invalid probability {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(malformed(head, format!("entry {what} sums to {sum}")));
    }
    Ok(())
}

pub(crate) fn validate_deletion(probs: &[f64], len: usize) -> Result<()> {
    if probs.len() != len {
        return Err(malformed(
            Head::Deletion,
            format!("{} probabilities for {len} tokens", probs.len()),
        ));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(malformed(
                Head::Deletion,
                format!("entry {i} has invalid probability {p}"),
            ));
        }
    }
    Ok(())
}

pub(crate) fn validate_insertion(dists: &[Vec<f64>], gaps: usize, k_max: usize) -> Result<()> {
    if dists.len() != gaps {
        return Err(malformed(
            Head::Insertion,
            format!("{} distributions for {gaps} gaps", dists.len()),
        ));
    }
    for (g, d) in dists.iter().enumerate() {
        if d.len() < 2 || d.len() > k_max + 1 {
            return Err(malformed(
                Head::Insertion,
                format!(
                    "gap {g} distribution has {} entries, expected 2..={}",
                    d.len(),
                    k_max + 1
                ),
            ));
        }
        check_normalized(Head::Insertion, g, d.iter().copied())?;
    }
    Ok(())
}

pub(crate) fn validate_words(dists: &[WordDist], masks: usize) -> Result<()> {
    if dists.len() != masks {
        return Err(malformed(
            Head::Words,
            format!("{} distributions for {masks} masks", dists.len()),
        ));
    }
    for (m, d) in dists.iter().enumerate() {
        if d.is_empty() {
            return Err(malformed(Head::Words, format!("mask {m} has an empty distribution")));
        }
        if let Some((w, _)) = d
            .iter()
            .find(|(w, _)| w.is_empty() || w.contains(char::is_whitespace) || w == MASK_TOKEN)
        {
            return Err(malformed(Head::Words, format!("mask {m} proposes invalid word {w:?}")));
        }
        check_normalized(Head::Words, m, d.iter().map(|(_, p)| *p))?;
    }
    Ok(())
}

/// Removes the flagged positions.
pub fn apply_deletion(y: &[String], decisions: &[bool]) -> Result<TokenSeq> {
    if decisions.len() != y.len() {
        return Err(Error::length("deletion decisions", y.len(), decisions.len()));
    }
    let kept = y.iter().zip(decisions).filter(|(_, &del)| !del).map(|(t, _)| t.clone());
    TokenSeq::new(kept)
}

/// Inserts `counts[g]` masks at gap `g`; gap 0 precedes the first token.
pub fn apply_insertion(y: &[String], counts: &[usize], k_max: usize) -> Result<Vec<Slot>> {
    if counts.len() != y.len() + 1 {
        return Err(Error::length("insertion counts", y.len() + 1, counts.len()));
    }
    if let Some((gap, &count)) = counts.iter().enumerate().find(|(_, &c)| c > k_max) {
        return Err(Error::CountOutOfRange { gap, count, max: k_max });
    }
    let mut out = Vec::with_capacity(y.len() + counts.iter().sum::<usize>());
    for (g, &count) in counts.iter().enumerate() {
        out.extend(std::iter::repeat_n(Slot::Mask, count));
        if let Some(tok) = y.get(g) {
            out.push(Slot::Word(tok.clone()));
        }
    }
    Ok(out)
}

/// Replaces masks left to right with `words`.
pub fn fill_words(y: &[Slot], words: &[String]) -> Result<TokenSeq> {
    let masks = y.iter().filter(|s| **s == Slot::Mask).count();
    if masks != words.len() {
        return Err(Error::length("fill words", masks, words.len()));
    }
    let mut fill = words.iter();
    TokenSeq::new(y.iter().map(|slot| match slot {
        Slot::Word(w) => w.clone(),
        Slot::Mask => fill.next().expect("counted above").clone(),
    }))
}

fn argmax_count(dist: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = k;
        }
    }
    best
}

fn argmax_word(dist: &WordDist) -> &str {
    let mut best = &dist[0];
    for cand in &dist[1..] {
        if cand.1 > best.1 || (cand.1 == best.1 && cand.0 < best.0) {
            best = cand;
        }
    }
    &best.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevtConfig {
    pub k_max: usize,
}

impl Default for LevtConfig {
    fn default() -> Self {
        LevtConfig { k_max: DEFAULT_K_MAX }
    }
}

/// Lengths seen inside one iteration plus the resulting sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevtStep {
    pub iteration: usize,
    /// Length entering the iteration.
    pub j0: usize,
    pub deleted: usize,
    /// Length after deletion.
    pub j1: usize,
    pub inserted: usize,
    /// Length after mask insertion.
    pub j2: usize,
    pub state: TokenSeq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub output: TokenSeq,
    /// One entry per iteration run.
    pub trace: Vec<LevtStep>,
    /// Whether the loop stopped because an iteration changed nothing.
    pub converged: bool,
}

impl DecodeOutcome {
    /// Iterations that changed the sequence.
    pub fn edit_iterations(&self) -> usize {
        if self.converged {
            self.trace.len() - 1
        } else {
            self.trace.len()
        }
    }
}

/// Runs one deletion, insertion, word-fill pass with argmax decisions.
pub fn step<S: Scorer + ?Sized>(
    src: &[String],
    y: &TokenSeq,
    scorer: &S,
    config: &LevtConfig,
    iteration: usize,
) -> Result<(LevtStep, ActionDistributions)> {
    let del_probs = scorer.deletion(src, y)?;
    validate_deletion(&del_probs, y.len())?;
    let decisions: Vec<bool> = del_probs.iter().map(|&p| p > 0.5).collect();
    let y1 = apply_deletion(y, &decisions)?;

    let ins_count_probs = scorer.insertion(src, &y1)?;
    validate_insertion(&ins_count_probs, y1.len() + 1, config.k_max)?;
    let counts: Vec<usize> = ins_count_probs.iter().map(|d| argmax_count(d)).collect();
    let y2 = apply_insertion(&y1, &counts, config.k_max)?;

    let masks = counts.iter().sum::<usize>();
    let word_probs = if masks > 0 { scorer.words(src, &y2)? } else { Vec::new() };
    validate_words(&word_probs, masks)?;
    let words: Vec<String> = word_probs.iter().map(|d| argmax_word(d).to_owned()).collect();
    let state = fill_words(&y2, &words)?;

    let record = LevtStep {
        iteration,
        j0: y.len(),
        deleted: y.len() - y1.len(),
        j1: y1.len(),
        inserted: masks,
        j2: y2.len(),
        state,
    };
    Ok((
        record,
        ActionDistributions {
            del_probs,
            ins_count_probs,
            word_probs,
        },
    ))
}

/// Iterates [`step`] from `y0` until a fixpoint or `max_iters` iterations.
pub fn decode<S: Scorer + ?Sized>(
    src: &[String],
    y0: &TokenSeq,
    scorer: &S,
    max_iters: usize,
    config: &LevtConfig,
) -> Result<DecodeOutcome> {
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
    }
    let mut trace: Vec<LevtStep> = Vec::new();
    let mut current = y0.clone();
    for k in 1..=max_iters {
        let (record, _) = step(src, &current, scorer, config, k)?;
        let fixpoint = record.state == current;
        current = record.state.clone();
        trace.push(record);
        if fixpoint {
            return Ok(DecodeOutcome {
                output: current,
                trace,
                converged: true,
            });
        }
    }
    Ok(DecodeOutcome {
        output: current,
        trace,
        converged: false,
    })
}

/// Which sequence the insertion head sees when predicting gap tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapQuery {
    /// The MT output as given; gaps map one-to-one.
    #[default]
    Original,
    /// The MT output after thresholded deletion; each gap maps to the
    /// original gap after its nearest surviving predecessor.
    PostDeletion,
}

/// Word and gap tags from a single query of the deletion and insertion heads.
///
/// A word is BAD when its deletion probability reaches `tau`; a gap is BAD
/// when the insertion head puts at least `tau` mass on inserting one or more
/// tokens there.
pub fn qe_predict<S: Scorer + ?Sized>(
    src: &[String],
    mt: &TokenSeq,
    scorer: &S,
    tau: f64,
    gap_query: GapQuery,
    config: &LevtConfig,
) -> Result<QeTags> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold {tau} outside (0, 1)")));
    }
    let del_probs = scorer.deletion(src, mt)?;
    validate_deletion(&del_probs, mt.len())?;
    let words: Vec<Tag> = del_probs.iter().map(|&p| Tag::from(p >= tau)).collect();

    let insert_mass = |d: &Vec<f64>| d[1..].iter().sum::<f64>() >= tau;
    let gaps = match gap_query {
        GapQuery::Original => {
            let ins = scorer.insertion(src, mt)?;
            validate_insertion(&ins, mt.len() + 1, config.k_max)?;
            ins.iter().map(|d| Tag::from(insert_mass(d))).collect()
        }
        GapQuery::PostDeletion => {
            let survivors: Vec<usize> = (0..mt.len()).filter(|&i| !words[i].is_bad()).collect();
            let reduced = TokenSeq::new(survivors.iter().map(|&i| mt[i].clone()))?;
            let ins = scorer.insertion(src, &reduced)?;
            validate_insertion(&ins, reduced.len() + 1, config.k_max)?;
            let mut gaps = vec![Tag::Ok; mt.len() + 1];
            for (g, d) in ins.iter().enumerate() {
                if insert_mass(d) {
                    let original = if g == 0 { 0 } else { survivors[g - 1] + 1 };
                    gaps[original] = Tag::Bad;
                }
            }
            gaps
        }
    };
    QeTags::new(words, gaps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Tag::{Bad as B, Ok as O};

    fn seq(s: &str) -> TokenSeq {
        TokenSeq::from_line(s)
    }

    fn w(s: &str) -> Slot {
        Slot::Word(s.to_owned())
    }

    #[test]
    fn deletion_examples() {
        assert_eq!(
            apply_deletion(&seq("a b c"), &[false, true, false]).unwrap(),
            seq("a c")
        );
        assert_eq!(apply_deletion(&seq("a b c"), &[false; 3]).unwrap(), seq("a b c"));
        assert!(apply_deletion(&seq("a b c"), &[true; 3]).unwrap().is_empty());
        assert!(apply_deletion(&seq("a b"), &[true]).is_err());
    }

    #[test]
    fn insertion_examples() {
        assert_eq!(
            apply_insertion(&seq("a c"), &[0, 0, 0], 64).unwrap(),
            vec![w("a"), w("c")]
        );
        assert_eq!(
            apply_insertion(&seq("a c"), &[0, 2, 0], 64).unwrap(),
            vec![w("a"), Slot::Mask, Slot::Mask, w("c")]
        );
        assert_eq!(apply_insertion(&seq(""), &[3], 64).unwrap(), vec![Slot::Mask; 3]);
        assert!(apply_insertion(&seq("a"), &[0], 64).is_err());
        assert!(matches!(
            apply_insertion(&seq("a"), &[0, 5], 4),
            Err(Error::CountOutOfRange {
                gap: 1,
                count: 5,
                max: 4
            })
        ));
    }

    #[test]
    fn fill_examples() {
        assert_eq!(fill_words(&[w("a")], &[]).unwrap(), seq("a"));
        assert_eq!(
            fill_words(&[w("a"), Slot::Mask, w("c")], &["b".into()]).unwrap(),
            seq("a b c")
        );
        assert_eq!(
            fill_words(&[Slot::Mask, Slot::Mask], &["x".into(), "y".into()]).unwrap(),
            seq("x y")
        );
        assert!(fill_words(&[Slot::Mask], &[]).is_err());
    }

    #[test]
    fn noop_scorer_fixpoint_at_first_iteration() {
        let out = decode(&[], &seq("a b"), &NoopScorer, 10, &LevtConfig::default()).unwrap();
        assert_eq!(out.output, seq("a b"));
        assert_eq!(out.trace.len(), 1);
        assert!(out.converged);
        assert_eq!(out.edit_iterations(), 0);
    }

    #[test]
    fn oracle_from_empty() {
        let target = seq("x y z");
        let out = decode(
            &[],
            &seq(""),
            &OracleScorer::new(target.clone()),
            10,
            &LevtConfig::default(),
        )
        .unwrap();
        assert_eq!(out.output, target);
        assert_eq!(out.trace.len(), 2);
        assert_eq!(out.edit_iterations(), 1);
        let first = &out.trace[0];
        assert_eq!((first.j0, first.j1, first.j2), (0, 0, 3));
    }

    #[test]
    fn iteration_cap() {
        let scorer = RandomScorer::new(7);
        let out = decode(&seq("s"), &seq("a b c"), &scorer, 1, &LevtConfig::default()).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.trace[0].iteration, 1);
        assert!(decode(&[], &seq("a"), &scorer, 0, &LevtConfig::default()).is_err());
    }

    #[test]
    fn qe_with_oracle() {
        let mt = seq("a b");
        let cfg = LevtConfig::default();
        let tags = qe_predict(&[], &mt, &OracleScorer::new(mt.clone()), 0.5, GapQuery::Original, &cfg).unwrap();
        assert_eq!(tags, QeTags::all_ok(2));

        let oracle = OracleScorer::new(seq("a c"));
        for mode in [GapQuery::Original, GapQuery::PostDeletion] {
            let tags = qe_predict(&[], &mt, &oracle, 0.5, mode, &cfg).unwrap();
            assert_eq!(tags.words(), &[O, B]);
            assert_eq!(tags.gaps(), &[O, B, O]);
        }
    }

    struct Flat(f64);

    impl Scorer for Flat {
        fn deletion(&self, _: &[String], y: &[String]) -> Result<Vec<f64>> {
            Ok(vec![self.0; y.len()])
        }
        fn insertion(&self, _: &[String], y: &[String]) -> Result<Vec<Vec<f64>>> {
            Ok(vec![vec![1.0 - self.0, self.0]; y.len() + 1])
        }
        fn words(&self, _: &[String], y: &[Slot]) -> Result<Vec<WordDist>> {
            let masks = y.iter().filter(|s| **s == Slot::Mask).count();
            Ok(vec![vec![("z".to_owned(), 1.0)]; masks])
        }
    }

    #[test]
    fn qe_threshold_dominates() {
        let cfg = LevtConfig::default();
        let tags = qe_predict(&[], &seq("a b c"), &Flat(0.6), 0.999, GapQuery::Original, &cfg).unwrap();
        assert_eq!(tags, QeTags::all_ok(3));
        let tags = qe_predict(&[], &seq("a b c"), &Flat(0.6), 0.5, GapQuery::Original, &cfg).unwrap();
        assert_eq!(tags.bad_count(), 7);
        assert!(qe_predict(&[], &seq("a"), &Flat(0.6), 1.0, GapQuery::Original, &cfg).is_err());
    }

    struct Broken(Head);

    impl Scorer for Broken {
        fn deletion(&self, _: &[String], y: &[String]) -> Result<Vec<f64>> {
            Ok(if self.0 == Head::Deletion {
                vec![0.0; y.len() + 1]
            } else {
                vec![0.0; y.len()]
            })
        }
        fn insertion(&self, _: &[String], y: &[String]) -> Result<Vec<Vec<f64>>> {
            Ok(if self.0 == Head::Insertion {
                vec![vec![0.3, 0.3]; y.len() + 1]
            } else {
                let mut d = vec![vec![1.0, 0.0]; y.len() + 1];
                d[0] = vec![0.0, 1.0];
                d
            })
        }
        fn words(&self, _: &[String], _: &[Slot]) -> Result<Vec<WordDist>> {
            Ok(vec![vec![("x".to_owned(), 0.5)]])
        }
    }

    #[test]
    fn malformed_heads_are_named() {
        for head in [Head::Deletion, Head::Insertion, Head::Words] {
            let err = decode(&[], &seq("a"), &Broken(head), 3, &LevtConfig::default()).unwrap_err();
            match err {
                Error::MalformedHead { head: got, .. } => assert_eq!(got, head),
                other => panic!("unexpected {other}"),
            }
        }
    }

    #[test]
    fn argmax_tie_breaks() {
        assert_eq!(argmax_count(&[0.5, 0.5]), 0);
        let d = vec![("b".to_owned(), 0.5), ("a".to_owned(), 0.5)];
        assert_eq!(argmax_word(&d), "a");
    }
}
