//! Run settings shared by the command-line tool. Values come from built-in
//! defaults, then an optional TOML file, then command-line flags.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::levt::{GapQuery, DEFAULT_K_MAX};
use crate::subword::DEFAULT_MARKER;
use crate::tags::Scope;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub marker: String,
    pub shifts: bool,
    pub tau: f64,
    pub lambda_t: f64,
    pub lambda_p: f64,
    pub beam: usize,
    pub max_len: usize,
    pub length_norm: bool,
    pub max_iters: usize,
    pub k_max: usize,
    pub gap_query: GapQuery,
    pub scope: Scope,
    /// Worker threads; 0 lets the runtime decide.
    pub workers: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            marker: DEFAULT_MARKER.to_owned(),
            shifts: false,
            tau: 0.5,
            lambda_t: 2.0,
            lambda_p: 1.0,
            beam: 5,
            max_len: 200,
            length_norm: false,
            max_iters: 10,
            k_max: DEFAULT_K_MAX,
            gap_query: GapQuery::Original,
            scope: Scope::All,
            workers: 0,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        RunConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.marker.is_empty() || self.marker.contains(char::is_whitespace) {
            return bad(format!("invalid subword marker {:?}", self.marker));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau {} outside (0, 1)", self.tau));
        }
        let weight_ok = |x: f64| x.is_finite() && x >= 0.0;
        if !weight_ok(self.lambda_t) || !weight_ok(self.lambda_p) || self.lambda_t + self.lambda_p <= 0.0 {
            return bad("lambda weights must be non-negative with a positive sum".into());
        }
        if self.beam == 0 || self.max_len == 0 || self.max_iters == 0 || self.k_max == 0 {
            return bad("beam, max_len, max_iters and k_max must be at least 1".into());
        }
        Ok(())
    }
}
