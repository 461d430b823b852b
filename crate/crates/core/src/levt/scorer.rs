use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use super::{Slot, DEFAULT_K_MAX};
use crate::align::TokenSeq;
use crate::error::{Error, Head, Result};

/// Candidate words with their probabilities.
pub type WordDist = Vec<(String, f64)>;

/// Source of the three LevT action distributions.
///
/// `deletion` sees the sequence entering an iteration, `insertion` the
/// sequence after deletion, `words` the sequence with masks. Implementations
/// must be deterministic in their inputs.
pub trait Scorer: Send + Sync {
    fn deletion(&self, src: &[String], y: &[String]) -> Result<Vec<f64>>;
    fn insertion(&self, src: &[String], y: &[String]) -> Result<Vec<Vec<f64>>>;
    fn words(&self, src: &[String], y: &[Slot]) -> Result<Vec<WordDist>>;
}

/// Never deletes or inserts.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoopScorer;

impl Scorer for NoopScorer {
    fn deletion(&self, _: &[String], y: &[String]) -> Result<Vec<f64>> {
        Ok(vec![0.0; y.len()])
    }

    fn insertion(&self, _: &[String], y: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(vec![vec![1.0, 0.0]; y.len() + 1])
    }

    fn words(&self, _: &[String], y: &[Slot]) -> Result<Vec<WordDist>> {
        let masks = y.iter().filter(|s| **s == Slot::Mask).count();
        Ok(vec![vec![("<unk>".to_owned(), 1.0)]; masks])
    }
}

/// Matched `(a, b)` index pairs of a longest common subsequence.
///
/// Walks left to right, taking a match whenever it stays optimal and
/// otherwise skipping in `a` before `b`.
pub fn lcs_pairs<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    let mut rest = vec![0usize; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            rest[i * width + j] = if a[i] == b[j] {
                rest[(i + 1) * width + j + 1] + 1
            } else {
                rest[(i + 1) * width + j].max(rest[i * width + j + 1])
            };
        }
    }
    let mut pairs = Vec::with_capacity(rest[0]);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] && rest[i * width + j] == rest[(i + 1) * width + j + 1] + 1 {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if rest[(i + 1) * width + j] >= rest[i * width + j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}

/// Deterministic stand-in for trained heads that edits toward a fixed target.
///
/// Deletion flags tokens outside a longest common subsequence with the
/// target. Insertion requests each missing target token in the gap after
/// its nearest matched predecessor. Words fill masks from the target.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    target: TokenSeq,
    k_max: usize,
}

impl OracleScorer {
    pub fn new(target: TokenSeq) -> Self {
        OracleScorer {
            target,
            k_max: DEFAULT_K_MAX,
        }
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max.max(1);
        self
    }

    pub fn target(&self) -> &TokenSeq {
        &self.target
    }

    /// Number of target tokens owed to each gap of `y`.
    pub fn insertion_counts(&self, y: &[String]) -> Vec<usize> {
        let pairs = lcs_pairs(y, &self.target);
        let mut counts = vec![0; y.len() + 1];
        let mut pairs_iter = pairs.iter().peekable();
        let mut gap = 0;
        for t in 0..self.target.len() {
            if let Some(&&(yi, ti)) = pairs_iter.peek() {
                if ti == t {
                    gap = yi + 1;
                    pairs_iter.next();
                    continue;
                }
            }
            counts[gap] += 1;
        }
        counts
    }

    fn one_hot(&self, count: usize) -> Vec<f64> {
        let mut d = vec![0.0; self.k_max + 1];
        d[count.min(self.k_max)] = 1.0;
        d
    }
}

impl Scorer for OracleScorer {
    fn deletion(&self, _: &[String], y: &[String]) -> Result<Vec<f64>> {
        let mut probs = vec![1.0; y.len()];
        for (yi, _) in lcs_pairs(y, &self.target) {
            probs[yi] = 0.0;
        }
        Ok(probs)
    }

    fn insertion(&self, _: &[String], y: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(self.insertion_counts(y).into_iter().map(|c| self.one_hot(c)).collect())
    }

    fn words(&self, _: &[String], y: &[Slot]) -> Result<Vec<WordDist>> {
        let aligned = y.len() == self.target.len()
            && y.iter().zip(self.target.iter()).all(|(s, t)| match s {
                Slot::Word(w) => w == t,
                Slot::Mask => true,
            });
        let fallback = self.target.last().cloned().unwrap_or_else(|| "<unk>".to_owned());
        Ok(y.iter()
            .enumerate()
            .filter(|(_, s)| **s == Slot::Mask)
            .map(|(i, _)| {
                let word = if aligned {
                    self.target[i].clone()
                } else {
                    fallback.clone()
                };
                vec![(word, 1.0)]
            })
            .collect())
    }
}

fn fnv1a(seed: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for part in parts {
        for b in part.bytes().chain(std::iter::once(0xff)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Pseudo-random heads keyed on `(seed, head, src, y)`; the same query always
/// gets the same answer.
#[derive(Debug, Clone)]
pub struct RandomScorer {
    seed: u64,
    max_insert: usize,
}

impl RandomScorer {
    pub fn new(seed: u64) -> Self {
        RandomScorer { seed, max_insert: 3 }
    }

    fn rng(&self, head: Head, src: &[String], y: &[&str]) -> ChaCha8Rng {
        let head = head.to_string();
        let mut parts: Vec<&str> = vec![&head];
        parts.extend(src.iter().map(String::as_str));
        parts.push("\u{1}");
        parts.extend_from_slice(y);
        ChaCha8Rng::seed_from_u64(fnv1a(self.seed, &parts))
    }

    fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / sum).collect()
    }
}

impl Scorer for RandomScorer {
    fn deletion(&self, src: &[String], y: &[String]) -> Result<Vec<f64>> {
        let ys: Vec<&str> = y.iter().map(String::as_str).collect();
        let mut rng = self.rng(Head::Deletion, src, &ys);
        Ok((0..y.len()).map(|_| rng.random::<f64>()).collect())
    }

    fn insertion(&self, src: &[String], y: &[String]) -> Result<Vec<Vec<f64>>> {
        let ys: Vec<&str> = y.iter().map(String::as_str).collect();
        let mut rng = self.rng(Head::Insertion, src, &ys);
        Ok((0..=y.len())
            .map(|_| Self::simplex(&mut rng, self.max_insert + 1))
            .collect())
    }

    fn words(&self, src: &[String], y: &[Slot]) -> Result<Vec<WordDist>> {
        let ys: Vec<&str> = y.iter().map(Slot::as_str).collect();
        let mut rng = self.rng(Head::Words, src, &ys);
        let mut vocab: Vec<String> = src
            .iter()
            .chain(y.iter().filter_map(|s| match s {
                Slot::Word(w) => Some(w),
                Slot::Mask => None,
            }))
            .cloned()
            .collect();
        vocab.sort();
        vocab.dedup();
        if vocab.is_empty() {
            vocab.push("<unk>".to_owned());
        }
        let masks = y.iter().filter(|s| **s == Slot::Mask).count();
        Ok((0..masks)
            .map(|_| {
                vocab
                    .iter()
                    .cloned()
                    .zip(Self::simplex(&mut rng, vocab.len()))
                    .collect()
            })
            .collect())
    }
}

#[derive(Serialize)]
struct Request<'a> {
    head: Head,
    x: &'a [String],
    y: Vec<&'a str>,
}

struct Pipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Scorer backed by a child process speaking line-delimited JSON.
///
/// Each request is one line `{"head": "deletion"|"insertion"|"words", "x":
/// [...], "y": [...]}` (masks spelled `<mask>`); each response is one line
/// `{"probs": ...}` holding a list of numbers (deletion), a list of lists
/// (insertion) or a list of `{word: probability}` objects (words). Queries
/// are serialized through one pipe.
pub struct ExternalScorer {
    command: String,
    pipe: Mutex<Pipe>,
}

impl ExternalScorer {
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::InvalidParameter(format!("cannot start scorer {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = BufReader::new(child.stdout.take().expect("piped"));
        Ok(ExternalScorer {
            command: command.to_owned(),
            pipe: Mutex::new(Pipe { child, stdin, stdout }),
        })
    }

    fn query(&self, head: Head, src: &[String], y: Vec<&str>) -> Result<Value> {
        let protocol = |reason: String| Error::Protocol { head, reason };
        let line = serde_json::to_string(&Request { head, x: src, y }).expect("plain data");
        let mut pipe = self.pipe.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(pipe.stdin, "{line}")
            .and_then(|_| pipe.stdin.flush())
            .map_err(|e| protocol(format!("write to {:?} failed: {e}", self.command)))?;
        let mut reply = String::new();
        let n = pipe
            .stdout
            .read_line(&mut reply)
            .map_err(|e| protocol(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(protocol("scorer closed its output".into()));
        }
        let mut value: Value =
            serde_json::from_str(reply.trim_end()).map_err(|e| protocol(format!("bad JSON: {e}")))?;
        value
            .get_mut("probs")
            .map(Value::take)
            .ok_or_else(|| protocol("response lacks \"probs\"".into()))
    }
}

fn as_numbers(head: Head, v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
        .ok_or_else(|| Error::Protocol {
            head,
            reason: format!("expected a list of numbers, got {v}"),
        })
}

impl Scorer for ExternalScorer {
    fn deletion(&self, src: &[String], y: &[String]) -> Result<Vec<f64>> {
        let v = self.query(Head::Deletion, src, y.iter().map(String::as_str).collect())?;
        as_numbers(Head::Deletion, &v)
    }

    fn insertion(&self, src: &[String], y: &[String]) -> Result<Vec<Vec<f64>>> {
        let v = self.query(Head::Insertion, src, y.iter().map(String::as_str).collect())?;
        let rows = v.as_array().ok_or_else(|| Error::Protocol {
            head: Head::Insertion,
            reason: format!("expected a list of lists, got {v}"),
        })?;
        rows.iter().map(|r| as_numbers(Head::Insertion, r)).collect()
    }

    fn words(&self, src: &[String], y: &[Slot]) -> Result<Vec<WordDist>> {
        let v = self.query(Head::Words, src, y.iter().map(Slot::as_str).collect())?;
        let bad = || Error::Protocol {
            head: Head::Words,
            reason: format!("expected a list of {{word: probability}} objects, got {v}"),
        };
        let rows = v.as_array().ok_or_else(bad)?;
        rows.iter()
            .map(|row| {
                let obj = row.as_object().ok_or_else(bad)?;
                obj.iter()
                    .map(|(w, p)| p.as_f64().map(|p| (w.clone(), p)).ok_or_else(bad))
                    .collect()
            })
            .collect()
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        if let Ok(pipe) = self.pipe.get_mut() {
            let _ = pipe.child.kill();
            let _ = pipe.child.wait();
        }
    }
}
