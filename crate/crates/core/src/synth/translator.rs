use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use super::beam::{beam_decode_ids, to_tokens, BeamConfig};
use super::model::SequenceModel;
use crate::align::TokenSeq;
use crate::error::{Error, Result};
use crate::format;

/// A machine translation system seen as a sentence-to-sentence function.
pub trait Translator: Send + Sync {
    fn name(&self) -> &str;
    fn translate(&self, input: &TokenSeq) -> Result<TokenSeq>;
}

#[derive(Debug, Clone, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn name(&self) -> &str {
        "identity"
    }

    fn translate(&self, input: &TokenSeq) -> Result<TokenSeq> {
        Ok(input.clone())
    }
}

/// In-memory lookup from source line to output line. Unknown inputs fail.
#[derive(Debug, Clone)]
pub struct TableTranslator {
    name: String,
    table: HashMap<TokenSeq, TokenSeq>,
}

impl TableTranslator {
    pub fn new(name: impl Into<String>) -> Self {
        TableTranslator {
            name: name.into(),
            table: HashMap::new(),
        }
    }

    pub fn insert(&mut self, input: &str, output: &str) -> &mut Self {
        self.table
            .insert(TokenSeq::from_line(input), TokenSeq::from_line(output));
        self
    }

    /// Reads `input<TAB>output` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let mut t = TableTranslator::new(path.display().to_string());
        for (i, line) in format::read_lines(path)?.iter().enumerate() {
            let (input, output) = line.split_once('\t').ok_or_else(|| Error::Format {
                path: path.to_owned(),
                line: i + 1,
                reason: "expected input<TAB>output".into(),
            })?;
            t.insert(input, output);
        }
        Ok(t)
    }
}

impl Translator for TableTranslator {
    fn name(&self) -> &str {
        &self.name
    }

    fn translate(&self, input: &TokenSeq) -> Result<TokenSeq> {
        self.table.get(input).cloned().ok_or_else(|| Error::Translator {
            name: self.name.clone(),
            reason: format!("no entry for {input:?}"),
        })
    }
}

struct Pipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Child process that answers each input line with exactly one output line.
pub struct CommandTranslator {
    command: String,
    pipe: Mutex<Pipe>,
}

impl CommandTranslator {
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::InvalidParameter(format!("cannot start translator {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = BufReader::new(child.stdout.take().expect("piped"));
        Ok(CommandTranslator {
            command: command.to_owned(),
            pipe: Mutex::new(Pipe { child, stdin, stdout }),
        })
    }
}

impl Translator for CommandTranslator {
    fn name(&self) -> &str {
        &self.command
    }

    fn translate(&self, input: &TokenSeq) -> Result<TokenSeq> {
        let fail = |reason: String| Error::Translator {
            name: self.command.clone(),
            reason,
        };
        let mut pipe = self.pipe.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(pipe.stdin, "{input}")
            .and_then(|_| pipe.stdin.flush())
            .map_err(|e| fail(e.to_string()))?;
        let mut line = String::new();
        if pipe.stdout.read_line(&mut line).map_err(|e| fail(e.to_string()))? == 0 {
            return Err(fail("process closed its output".into()));
        }
        Ok(TokenSeq::from_line(&line))
    }
}

impl Drop for CommandTranslator {
    fn drop(&mut self) {
        if let Ok(pipe) = self.pipe.get_mut() {
            let _ = pipe.child.kill();
            let _ = pipe.child.wait();
        }
    }
}

/// Translates by beam search over a sequence model.
pub struct ModelTranslator {
    name: String,
    model: Arc<dyn SequenceModel>,
    config: BeamConfig,
}

impl ModelTranslator {
    pub fn new(name: impl Into<String>, model: Arc<dyn SequenceModel>, config: BeamConfig) -> Self {
        ModelTranslator {
            name: name.into(),
            model,
            config,
        }
    }
}

impl Translator for ModelTranslator {
    fn name(&self) -> &str {
        &self.name
    }

    fn translate(&self, input: &TokenSeq) -> Result<TokenSeq> {
        let hyp = beam_decode_ids(input, self.model.as_ref(), &self.config)?;
        to_tokens(self.model.vocab(), &hyp)
    }
}
