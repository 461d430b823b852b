//! Minimum-edit alignment between token sequences.
//!
//! [`levenshtein_align`] is the unit-cost dynamic program with substitutions;
//! [`ter_align`] adds the greedy block-shift search used for TER scoring.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Longest block the shift search will move.
pub const MAX_SHIFT_LEN: usize = 10;
/// Farthest a block may travel in one shift.
pub const MAX_SHIFT_DIST: usize = 50;

/// A tokenized sentence. Tokens are non-empty and contain no whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self> {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        for (position, token) in tokens.iter().enumerate() {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(Error::InvalidToken {
                    token: token.clone(),
                    position,
                });
            }
        }
        Ok(TokenSeq(tokens))
    }

    /// Splits a line on whitespace. Always yields a valid sequence.
    pub fn from_line(line: &str) -> Self {
        TokenSeq(line.split_whitespace().map(str::to_owned).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditKind {
    Match,
    Substitute,
    Delete,
    Insert,
    Shift,
}

/// One step of an alignment.
///
/// Shift moves `hyp[start..start + len]` so that, after removal, the block is
/// reinserted at index `dest` of the remaining sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditOp {
    Match { hyp: usize, reference: usize },
    Substitute { hyp: usize, reference: usize },
    Delete { hyp: usize },
    Insert { reference: usize },
    Shift { start: usize, len: usize, dest: usize },
}

impl EditOp {
    pub fn kind(&self) -> EditKind {
        match self {
            EditOp::Match { .. } => EditKind::Match,
            EditOp::Substitute { .. } => EditKind::Substitute,
            EditOp::Delete { .. } => EditKind::Delete,
            EditOp::Insert { .. } => EditKind::Insert,
            EditOp::Shift { .. } => EditKind::Shift,
        }
    }

    pub fn hyp_index(&self) -> Option<usize> {
        match *self {
            EditOp::Match { hyp, .. } | EditOp::Substitute { hyp, .. } | EditOp::Delete { hyp } => Some(hyp),
            _ => None,
        }
    }

    pub fn ref_index(&self) -> Option<usize> {
        match *self {
            EditOp::Match { reference, .. } | EditOp::Substitute { reference, .. } | EditOp::Insert { reference } => {
                Some(reference)
            }
            _ => None,
        }
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EditOp::Match { hyp, reference } => write!(f, "M:{hyp}:{reference}"),
            EditOp::Substitute { hyp, reference } => write!(f, "S:{hyp}:{reference}"),
            EditOp::Delete { hyp } => write!(f, "D:{hyp}"),
            EditOp::Insert { reference } => write!(f, "I:{reference}"),
            EditOp::Shift { start, len, dest } => write!(f, "SH:{start}:{len}:{dest}"),
        }
    }
}

/// An alignment of a hypothesis against a reference.
///
/// Any Shift ops come first and are applied to the hypothesis in order; the
/// indices of the remaining ops refer to the shifted hypothesis.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
    pub cost: usize,
}

impl EditScript {
    fn from_ops(ops: Vec<EditOp>) -> Self {
        let cost = ops.iter().filter(|op| op.kind() != EditKind::Match).count();
        EditScript { ops, cost }
    }

    pub fn is_shift_free(&self) -> bool {
        self.ops.iter().all(|op| op.kind() != EditKind::Shift)
    }

    pub fn count(&self, kind: EditKind) -> usize {
        self.ops.iter().filter(|op| op.kind() == kind).count()
    }

    /// Checks the coverage and cost invariants against the sequence lengths.
    pub fn validate(&self, hyp_len: usize, ref_len: usize) -> Result<()> {
        let mut next_hyp = 0;
        let mut next_ref = 0;
        let mut seen_edit = false;
        for op in &self.ops {
            if let EditOp::Shift { start, len, dest } = *op {
                if seen_edit {
                    return Err(Error::Data("shift after a non-shift op".into()));
                }
                if len == 0 || start + len > hyp_len || dest > hyp_len - len || dest == start {
                    return Err(Error::Data(format!("invalid shift {op}")));
                }
                continue;
            }
            seen_edit = true;
            if let Some(h) = op.hyp_index() {
                if h != next_hyp {
                    return Err(Error::Data(format!("hyp index {h}, expected {next_hyp}")));
                }
                next_hyp += 1;
            }
            if let Some(r) = op.ref_index() {
                if r != next_ref {
                    return Err(Error::Data(format!("ref index {r}, expected {next_ref}")));
                }
                next_ref += 1;
            }
        }
        if next_hyp != hyp_len {
            return Err(Error::length("hypothesis coverage", hyp_len, next_hyp));
        }
        if next_ref != ref_len {
            return Err(Error::length("reference coverage", ref_len, next_ref));
        }
        let non_match = self.ops.iter().filter(|op| op.kind() != EditKind::Match).count();
        if non_match != self.cost {
            return Err(Error::length("script cost", non_match, self.cost));
        }
        Ok(())
    }
}

/// Unit-cost edit distance, two rows of memory.
pub fn edit_distance<T: PartialEq>(hyp: &[T], reference: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=reference.len()).collect();
    let mut cur = vec![0; reference.len() + 1];
    for (i, h) in hyp.iter().enumerate() {
        cur[0] = i + 1;
        for (j, r) in reference.iter().enumerate() {
            let diag = prev[j] + usize::from(h != r);
            cur[j + 1] = diag.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[reference.len()]
}

/// Minimum-cost monotone alignment with unit Substitute/Delete/Insert costs.
///
/// Among optimal alignments the script is chosen left to right, preferring
/// Match, then Substitute, then Delete, then Insert.
pub fn levenshtein_align<T: PartialEq>(hyp: &[T], reference: &[T]) -> EditScript {
    let n = hyp.len();
    let m = reference.len();
    let width = m + 1;
    // rest[i * width + j]: cost of aligning hyp[i..] with reference[j..]
    let mut rest = vec![0usize; (n + 1) * width];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            rest[i * width + j] = if i == n {
                m - j
            } else if j == m {
                n - i
            } else {
                let diag = rest[(i + 1) * width + j + 1] + usize::from(hyp[i] != reference[j]);
                diag.min(rest[(i + 1) * width + j] + 1).min(rest[i * width + j + 1] + 1)
            };
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let here = rest[i * width + j];
        if i < n && j < m {
            let diag = rest[(i + 1) * width + j + 1];
            if hyp[i] == reference[j] && here == diag {
                ops.push(EditOp::Match { hyp: i, reference: j });
                i += 1;
                j += 1;
                continue;
            }
            if hyp[i] != reference[j] && here == diag + 1 {
                ops.push(EditOp::Substitute { hyp: i, reference: j });
                i += 1;
                j += 1;
                continue;
            }
        }
        if i < n && here == rest[(i + 1) * width + j] + 1 {
            ops.push(EditOp::Delete { hyp: i });
            i += 1;
        } else {
            ops.push(EditOp::Insert { reference: j });
            j += 1;
        }
    }
    EditScript::from_ops(ops)
}

/// Applies one shift to `seq` (see [`EditOp::Shift`]).
pub fn apply_shift<T: Clone>(seq: &[T], start: usize, len: usize, dest: usize) -> Vec<T> {
    let block = &seq[start..start + len];
    let mut rest: Vec<T> = seq[..start].iter().chain(&seq[start + len..]).cloned().collect();
    rest.splice(dest..dest, block.iter().cloned());
    rest
}

fn occurs_in<T: PartialEq>(block: &[T], reference: &[T]) -> bool {
    reference.windows(block.len()).any(|w| w == block)
}

/// TER alignment. Without shifts this is [`levenshtein_align`]. With shifts,
/// repeatedly applies the block move that most lowers the total cost
/// (remaining edits plus one per shift) until no move helps.
///
/// Candidate blocks must occur verbatim somewhere in the reference, are at
/// most [`MAX_SHIFT_LEN`] long and move at most [`MAX_SHIFT_DIST`] positions.
pub fn ter_align<T: PartialEq + Clone>(hyp: &[T], reference: &[T], allow_shifts: bool) -> EditScript {
    if !allow_shifts {
        return levenshtein_align(hyp, reference);
    }
    let mut current = hyp.to_vec();
    let mut current_cost = edit_distance(&current, reference);
    let mut shifts = Vec::new();
    let n = current.len();

    while current_cost > 1 {
        let mut best: Option<(usize, EditOp, Vec<T>)> = None;
        for start in 0..n {
            for len in 1..=MAX_SHIFT_LEN.min(n - start) {
                if !occurs_in(&current[start..start + len], reference) {
                    continue;
                }
                let lo = start.saturating_sub(MAX_SHIFT_DIST);
                let hi = (start + MAX_SHIFT_DIST).min(n - len);
                for dest in lo..=hi {
                    if dest == start {
                        continue;
                    }
                    let shifted = apply_shift(&current, start, len, dest);
                    let cost = edit_distance(&shifted, reference) + 1;
                    if cost < current_cost && best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                        best = Some((cost, EditOp::Shift { start, len, dest }, shifted));
                    }
                }
            }
        }
        let Some((_, op, shifted)) = best else { break };
        shifts.push(op);
        current = shifted;
        current_cost = edit_distance(&current, reference);
    }

    let tail = levenshtein_align(&current, reference);
    let mut ops = shifts;
    ops.extend(tail.ops);
    EditScript::from_ops(ops)
}

/// Edit count and reference length behind a TER value, so corpus TER can be
/// pooled as total edits over total reference tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TerStats {
    pub edits: usize,
    pub ref_len: usize,
}

impl TerStats {
    pub fn compute<T: PartialEq + Clone>(hyp: &[T], reference: &[T], allow_shifts: bool) -> Self {
        TerStats {
            edits: ter_align(hyp, reference, allow_shifts).cost,
            ref_len: reference.len(),
        }
    }

    pub fn score(&self) -> Result<f64> {
        if self.ref_len == 0 {
            return Err(Error::EmptyReference);
        }
        Ok(self.edits as f64 / self.ref_len as f64)
    }
}

impl std::ops::Add for TerStats {
    type Output = TerStats;

    fn add(self, rhs: TerStats) -> TerStats {
        TerStats {
            edits: self.edits + rhs.edits,
            ref_len: self.ref_len + rhs.ref_len,
        }
    }
}

/// Shift-enabled TER: edits over reference length.
pub fn ter_score<T: PartialEq + Clone>(hyp: &[T], reference: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    TerStats::compute(hyp, reference, true).score()
}
