use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::Deserialize;

use crate::error::{Error, Result};

pub const EOS: usize = 0;
pub const EOS_TOKEN: &str = "</s>";

/// Output vocabulary shared by the models of an ensemble. Id 0 is EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut tokens = vec![EOS_TOKEN.to_owned()];
        let mut index = HashMap::from([(EOS_TOKEN.to_owned(), EOS)]);
        for w in words {
            let w = w.into();
            if w.is_empty() || w.contains(char::is_whitespace) {
                return Err(Error::InvalidParameter(format!("invalid vocabulary entry {w:?}")));
            }
            if index.insert(w.clone(), tokens.len()).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate vocabulary entry {w:?}")));
            }
            tokens.push(w);
        }
        Ok(Vocab { tokens, index })
    }

    /// Size including EOS.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == 1
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }
}

/// An autoregressive model: given a conditioning sentence and an output
/// prefix (token ids), a distribution over the next id, EOS included.
pub trait SequenceModel: Send + Sync {
    fn vocab(&self) -> &Vocab;
    fn next_distribution(&self, input: &[String], prefix: &[usize]) -> Result<Vec<f64>>;
}

/// Checks a next-token distribution against the vocabulary.
pub fn validate_distribution(dist: &[f64], vocab_len: usize) -> Result<()> {
    if dist.len() != vocab_len {
        return Err(Error::MalformedDistribution(format!(
            "{} entries for a vocabulary of {vocab_len}",
            dist.len()
        )));
    }
    let mut sum = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::MalformedDistribution(format!("entry {i} is {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::MalformedDistribution(format!("sums to {sum}")));
    }
    Ok(())
}

/// Lookup-table model.
///
/// A row keyed on `(input, prefix)` wins over one keyed on the prefix alone,
/// which wins over the default row.
#[derive(Debug, Clone)]
pub struct TableModel {
    vocab: Vocab,
    rows: HashMap<(Option<String>, Vec<usize>), Vec<f64>>,
    default: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    vocab: Vec<String>,
    #[serde(default)]
    default: Option<HashMap<String, f64>>,
    #[serde(default)]
    rows: Vec<TableRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRow {
    #[serde(default)]
    input: Option<String>,
    #[serde(default)]
    prefix: String,
    probs: HashMap<String, f64>,
}

impl TableModel {
    pub fn new(vocab: Vocab) -> Self {
        TableModel {
            vocab,
            rows: HashMap::new(),
            default: None,
        }
    }

    pub fn set(&mut self, input: Option<&str>, prefix: &[usize], dist: Vec<f64>) -> Result<()> {
        validate_distribution(&dist, self.vocab.len())?;
        self.rows.insert((input.map(normalize), prefix.to_vec()), dist);
        Ok(())
    }

    pub fn set_default(&mut self, dist: Vec<f64>) -> Result<()> {
        validate_distribution(&dist, self.vocab.len())?;
        self.default = Some(dist);
        Ok(())
    }

    /// Reads the JSON table format (see the format reference).
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TableFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("model table: {e}")))?;
        let mut model = TableModel::new(Vocab::new(file.vocab)?);
        if let Some(d) = &file.default {
            let dist = model.dense(d)?;
            model.set_default(dist)?;
        }
        for row in &file.rows {
            let prefix = row
                .prefix
                .split_whitespace()
                .map(|t| {
                    model
                        .vocab
                        .id(t)
                        .ok_or_else(|| Error::InvalidParameter(format!("prefix token {t:?} not in vocabulary")))
                })
                .collect::<Result<Vec<_>>>()?;
            let dist = model.dense(&row.probs)?;
            model.set(row.input.as_deref(), &prefix, dist)?;
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        TableModel::from_json(&text)
    }

    fn dense(&self, sparse: &HashMap<String, f64>) -> Result<Vec<f64>> {
        let mut dist = vec![0.0; self.vocab.len()];
        for (tok, &p) in sparse {
            let id = self
                .vocab
                .id(tok)
                .ok_or_else(|| Error::InvalidParameter(format!("token {tok:?} not in vocabulary")))?;
            dist[id] = p;
        }
        Ok(dist)
    }
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl SequenceModel for TableModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_distribution(&self, input: &[String], prefix: &[usize]) -> Result<Vec<f64>> {
        let key = (Some(input.join(" ")), prefix.to_vec());
        if let Some(d) = self.rows.get(&key) {
            return Ok(d.clone());
        }
        if let Some(d) = self.rows.get(&(None, key.1)) {
            return Ok(d.clone());
        }
        self.default
            .clone()
            .ok_or_else(|| Error::MalformedDistribution(format!("no table row for prefix {prefix:?}")))
    }
}

struct ModelPipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Model served by a child process: request line
/// `{"input": [...], "prefix": [...]}` (prefix as token strings), response
/// line `{"probs": {token: probability, ...}}`.
pub struct CommandModel {
    vocab: Vocab,
    pipe: Mutex<ModelPipe>,
}

impl CommandModel {
    pub fn spawn(command: &str, vocab: Vocab) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::InvalidParameter(format!("cannot start model {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = BufReader::new(child.stdout.take().expect("piped"));
        Ok(CommandModel {
            vocab,
            pipe: Mutex::new(ModelPipe { child, stdin, stdout }),
        })
    }
}

impl SequenceModel for CommandModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_distribution(&self, input: &[String], prefix: &[usize]) -> Result<Vec<f64>> {
        let request = serde_json::json!({ "input": input, "prefix": self.vocab.decode(prefix) });
        let bad = |reason: String| Error::MalformedDistribution(format!("model process: {reason}"));
        let mut pipe = self.pipe.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(pipe.stdin, "{request}")
            .and_then(|_| pipe.stdin.flush())
            .map_err(|e| bad(e.to_string()))?;
        let mut line = String::new();
        if pipe.stdout.read_line(&mut line).map_err(|e| bad(e.to_string()))? == 0 {
            return Err(bad("closed its output".into()));
        }
        #[derive(Deserialize)]
        struct Reply {
            probs: HashMap<String, f64>,
        }
        let reply: Reply = serde_json::from_str(line.trim_end()).map_err(|e| bad(e.to_string()))?;
        let mut dist = vec![0.0; self.vocab.len()];
        for (tok, p) in reply.probs {
            let id = self
                .vocab
                .id(&tok)
                .ok_or_else(|| bad(format!("unknown token {tok:?}")))?;
            dist[id] = p;
        }
        Ok(dist)
    }
}

impl Drop for CommandModel {
    fn drop(&mut self) {
        if let Ok(pipe) = self.pipe.get_mut() {
            let _ = pipe.child.kill();
            let _ = pipe.child.wait();
        }
    }
}
