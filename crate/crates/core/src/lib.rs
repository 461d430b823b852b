//! Word-level translation quality estimation toolkit.
//!
//! * [`align`]: Levenshtein and TER alignment with block shifts.
//! * [`tags`]: OK/BAD word and gap tags from alignments; MCC and F1.
//! * [`subword`]: conversion of tags between word and subword granularity.
//! * [`levt`]: the Levenshtein Transformer edit loop over a pluggable scorer.
//! * [`synth`]: synthetic post-editing triplets, including two-view ensemble
//!   beam decoding.
//! * [`format`], [`config`], [`cli`]: file formats and the command-line tool.

pub mod align;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod levt;
pub mod subword;
pub mod synth;
pub mod tags;

pub use align::{levenshtein_align, ter_align, ter_score, EditOp, EditScript, TokenSeq};
pub use error::{Error, Result};
pub use subword::{FlatTagSeq, SubwordSeq};
pub use tags::{ConfusionCounts, QeTags, Scope, Tag};
