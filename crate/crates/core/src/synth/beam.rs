//! Beam search over one model or over the two-view interpolation used for
//! pseudo post-editing.

use std::cmp::Ordering;

use super::model::{validate_distribution, SequenceModel, Vocab, EOS};
use crate::align::TokenSeq;
use crate::error::{Error, Result};

/// Interpolation weights for the translation view and the paraphrase view.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnsembleWeights {
    pub lambda_t: f64,
    pub lambda_p: f64,
}

impl EnsembleWeights {
    pub fn new(lambda_t: f64, lambda_p: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(lambda_t) || !ok(lambda_p) || lambda_t + lambda_p <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "ensemble weights ({lambda_t}, {lambda_p}) must be non-negative with a positive sum"
            )));
        }
        Ok(EnsembleWeights { lambda_t, lambda_p })
    }

    /// Weights rescaled to sum to one.
    pub fn normalized(&self) -> (f64, f64) {
        let total = self.lambda_t + self.lambda_p;
        (self.lambda_t / total, self.lambda_p / total)
    }
}

impl Default for EnsembleWeights {
    fn default() -> Self {
        EnsembleWeights {
            lambda_t: 2.0,
            lambda_p: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamConfig {
    pub beam: usize,
    /// Most non-EOS tokens a hypothesis may hold.
    pub max_len: usize,
    /// Rank finished hypotheses by score per emitted token, EOS included.
    pub length_norm: bool,
}

impl BeamConfig {
    pub fn new(beam: usize, max_len: usize) -> Result<Self> {
        if beam == 0 || max_len == 0 {
            return Err(Error::InvalidParameter(
                "beam width and max length must be at least 1".into(),
            ));
        }
        Ok(BeamConfig {
            beam,
            max_len,
            length_norm: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    /// Accumulated natural-log probability.
    pub score: f64,
    /// Whether the hypothesis ended with EOS (which is not in `tokens`).
    pub finished: bool,
}

impl Hypothesis {
    fn rank_score(&self, length_norm: bool) -> f64 {
        if !length_norm {
            return self.score;
        }
        let steps = self.tokens.len() + usize::from(self.finished);
        if steps == 0 {
            self.score
        } else {
            self.score / steps as f64
        }
    }
}

/// Higher score first, then lexicographically smaller ids.
fn better(a: &Hypothesis, b: &Hypothesis, length_norm: bool) -> Ordering {
    b.rank_score(length_norm)
        .total_cmp(&a.rank_score(length_norm))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search with a next-token distribution callback.
///
/// Hypotheses that emit EOS are frozen into a finished pool and compete by
/// final score; the others are pruned to the beam width each step. Returns
/// the best finished hypothesis, or the best length-capped one if nothing
/// finished.
pub fn beam_search<F>(vocab_len: usize, config: &BeamConfig, mut next: F) -> Result<Hypothesis>
where
    F: FnMut(&[usize]) -> Result<Vec<f64>>,
{
    let mut alive = vec![Hypothesis {
        tokens: Vec::new(),
        score: 0.0,
        finished: false,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut capped: Vec<Hypothesis> = Vec::new();

    for step in 0..=config.max_len {
        if alive.is_empty() {
            break;
        }
        if !config.length_norm {
            // log-probabilities only fall, so nothing alive can overtake
            let best_done = finished.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
            let best_alive = alive.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
            if best_done > best_alive {
                break;
            }
        }
        let mut candidates = Vec::new();
        for hyp in &alive {
            let dist = next(&hyp.tokens)?;
            validate_distribution(&dist, vocab_len)?;
            if dist[EOS] > 0.0 {
                finished.push(Hypothesis {
                    tokens: hyp.tokens.clone(),
                    score: hyp.score + dist[EOS].ln(),
                    finished: true,
                });
            }
            if step == config.max_len {
                continue;
            }
            for (id, &p) in dist.iter().enumerate().skip(1) {
                if p > 0.0 {
                    let mut tokens = hyp.tokens.clone();
                    tokens.push(id);
                    candidates.push(Hypothesis {
                        tokens,
                        score: hyp.score + p.ln(),
                        finished: false,
                    });
                }
            }
        }
        if step == config.max_len {
            capped = std::mem::take(&mut alive);
            break;
        }
        candidates.sort_by(|a, b| better(a, b, false));
        candidates.truncate(config.beam);
        alive = candidates;
    }

    let pool = if finished.is_empty() { capped } else { finished };
    pool.into_iter()
        .min_by(|a, b| better(a, b, config.length_norm))
        .ok_or_else(|| Error::MalformedDistribution("beam search produced no hypothesis".into()))
}

/// Beam search over a single model.
pub fn beam_decode_ids(input: &[String], model: &dyn SequenceModel, config: &BeamConfig) -> Result<Hypothesis> {
    beam_search(model.vocab().len(), config, |prefix| {
        model.next_distribution(input, prefix)
    })
}

/// Beam search over the interpolation of the translation view
/// `model_t(. | src)` and the paraphrase view `model_p(. | tgt)`, with the
/// weights normalized to sum to one.
pub fn mvppe_decode_ids(
    src: &[String],
    tgt: &[String],
    model_t: &dyn SequenceModel,
    model_p: &dyn SequenceModel,
    weights: &EnsembleWeights,
    config: &BeamConfig,
) -> Result<Hypothesis> {
    if model_t.vocab() != model_p.vocab() {
        return Err(Error::InvalidParameter(
            "ensemble models must share a vocabulary".into(),
        ));
    }
    let vocab_len = model_t.vocab().len();
    let (wt, wp) = weights.normalized();
    beam_search(vocab_len, config, |prefix| {
        let pt = if wt > 0.0 {
            model_t.next_distribution(src, prefix)?
        } else {
            vec![0.0; vocab_len]
        };
        let pp = if wp > 0.0 {
            model_p.next_distribution(tgt, prefix)?
        } else {
            vec![0.0; vocab_len]
        };
        if wt > 0.0 {
            validate_distribution(&pt, vocab_len)?;
        }
        if wp > 0.0 {
            validate_distribution(&pp, vocab_len)?;
        }
        Ok(pt.iter().zip(&pp).map(|(a, b)| wt * a + wp * b).collect())
    })
}

pub fn mvppe_decode(
    src: &TokenSeq,
    tgt: &TokenSeq,
    model_t: &dyn SequenceModel,
    model_p: &dyn SequenceModel,
    weights: &EnsembleWeights,
    config: &BeamConfig,
) -> Result<TokenSeq> {
    let hyp = mvppe_decode_ids(src, tgt, model_t, model_p, weights, config)?;
    to_tokens(model_t.vocab(), &hyp)
}

pub(crate) fn to_tokens(vocab: &Vocab, hyp: &Hypothesis) -> Result<TokenSeq> {
    TokenSeq::new(vocab.decode(&hyp.tokens))
}
