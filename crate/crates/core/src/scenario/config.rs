//! TOML scenario files.
//!
//! ```toml
//! seed = 7
//! voters = 3
//! workers = 3
//! threshold = 2
//! votes = [1, 1, -1]
//! # optional: question, modulus, crypto, worker_indices, [deadlines]
//!
//! [[behavior]]
//! participant = 2
//! kind = "double-vote"
//! ballots = [{ value = 1, tick = 2 }, { value = -1, tick = 4 }]
//!
//! [[tamper]]
//! after_tick = 20
//! seq = 5
//! mutation = "xor-byte"
//! offset = 60
//! mask = 1
//! ```
//!
//! Unknown keys are rejected, and every semantic problem is reported with
//! the path of the offending field before anything runs.

use std::collections::BTreeSet;
use std::fmt;

use serde::Deserialize;

use crate::crypto::Scheme;
use crate::field_sss::{is_prime, MAX_MODULUS, MERSENNE_31};
use crate::ledger::Mutation;
use crate::messages::{Deadlines, Tick};

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "default_question")]
    pub question: String,
    /// `k`.
    pub voters: usize,
    /// `n`.
    pub workers: usize,
    /// `t`.
    pub threshold: usize,
    #[serde(default = "default_modulus")]
    pub modulus: u64,
    #[serde(default = "default_scheme")]
    pub crypto: Scheme,
    #[serde(default)]
    pub deadlines: DeadlineConfig,
    /// One `+1` or `-1` per voter.
    pub votes: Vec<i64>,
    /// Which voters work, in share order. Defaults to the first `n`.
    #[serde(default)]
    pub worker_indices: Option<Vec<usize>>,
    #[serde(default, rename = "behavior")]
    pub behaviors: Vec<BehaviorConfig>,
    #[serde(default, rename = "tamper")]
    pub tampers: Vec<TamperConfig>,
}

fn default_question() -> String {
    "Adopt the proposal?".into()
}

fn default_modulus() -> u64 {
    MERSENNE_31
}

fn default_scheme() -> Scheme {
    Scheme::Ed25519
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeadlineConfig {
    pub q12: Tick,
    pub q23: Tick,
    pub q34: Tick,
}

impl Default for DeadlineConfig {
    fn default() -> Self {
        Self {
            q12: 1,
            q23: 10,
            q34: 20,
        }
    }
}

impl From<DeadlineConfig> for Deadlines {
    fn from(d: DeadlineConfig) -> Self {
        Deadlines {
            q12: d.q12,
            q23: d.q23,
            q34: d.q34,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorConfig {
    /// Voter index.
    pub participant: usize,
    pub kind: String,
    /// When the voter role casts, instead of `q12 + 1`.
    pub tick: Option<Tick>,
    /// partial-distribution: worker positions that receive shares.
    pub workers: Option<Vec<usize>>,
    /// impersonate: voter index to pose as.
    pub target: Option<usize>,
    /// invalid-vote: the value shared instead of the vote.
    pub value: Option<i64>,
    /// wrong-intermediate: added to the published share(s).
    pub offset: Option<i64>,
    /// wrong-intermediate: "r", "c" or "both".
    pub apply_to: Option<String>,
    /// double-vote: each ballot is a full share set at its tick.
    pub ballots: Option<Vec<BallotConfig>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallotConfig {
    pub value: i64,
    pub tick: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TamperConfig {
    pub after_tick: Tick,
    pub seq: u64,
    /// "identity", "flip-bit", "xor-byte", "delete" or "truncate".
    pub mutation: String,
    pub offset: Option<usize>,
    pub bit: Option<u8>,
    pub mask: Option<u8>,
}

impl TamperConfig {
    pub fn to_mutation(&self) -> Option<Mutation> {
        Some(match self.mutation.as_str() {
            "identity" => Mutation::Identity,
            "flip-bit" => Mutation::FlipBit {
                offset: self.offset?,
                bit: self.bit?,
            },
            "xor-byte" => Mutation::XorByte {
                offset: self.offset?,
                mask: self.mask?,
            },
            "delete" => Mutation::Delete,
            "truncate" => Mutation::Truncate,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

pub const BEHAVIOR_KINDS: [&str; 8] = [
    "honest",
    "inactive",
    "partial-distribution",
    "syntactic-garbage",
    "impersonate",
    "invalid-vote",
    "wrong-intermediate",
    "double-vote",
];

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn worker_indices(&self) -> Vec<usize> {
        self.worker_indices
            .clone()
            .unwrap_or_else(|| (0..self.workers).collect())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let diags = self.diagnostics();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(diags))
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut err = |field: String, message: String| out.push(Diagnostic { field, message });
        let k = self.voters;
        let n = self.workers;
        let t = self.threshold;
        let d = self.deadlines;

        if t < 2 {
            err("threshold".into(), format!("must be at least 2, got {t}"));
        }
        if t >= 1 && n < 2 * t - 1 {
            err("workers".into(), format!("{n} workers cannot open checksum shares; need at least 2t-1 = {}", 2 * t - 1));
        }
        if n > k {
            err("workers".into(), format!("{n} workers but only {k} voters"));
        }
        if !(is_prime(self.modulus) && self.modulus < MAX_MODULUS) {
            err("modulus".into(), format!("{} is not a prime below 2^63", self.modulus));
        } else if (self.modulus as u128) <= 4 * (k as u128) * (k as u128) {
            err("modulus".into(), format!("must exceed 4k^2 = {}", 4 * k * k));
        }
        if !(d.q12 < d.q23 && d.q23 < d.q34) {
            err("deadlines".into(), "must satisfy q12 < q23 < q34".into());
        } else if d.q12 + 1 >= d.q23 {
            err("deadlines.q23".into(), "leaves no tick for voting after the init broadcast".into());
        }
        if self.votes.len() != k {
            err("votes".into(), format!("expected {k} entries, got {}", self.votes.len()));
        }
        for (i, v) in self.votes.iter().enumerate() {
            if v.abs() != 1 {
                err(format!("votes[{i}]"), format!("must be 1 or -1, got {v}; use an invalid-vote behavior"));
            }
        }
        let workers = self.worker_indices();
        if let Some(list) = &self.worker_indices {
            if list.len() != n {
                err("worker_indices".into(), format!("expected {n} entries, got {}", list.len()));
            }
            if list.iter().collect::<BTreeSet<_>>().len() != list.len() {
                err("worker_indices".into(), "entries must be distinct".into());
            }
            for (j, &i) in list.iter().enumerate() {
                if i >= k {
                    err(format!("worker_indices[{j}]"), format!("no voter {i}"));
                }
            }
        }

        let mut seen = BTreeSet::new();
        for (b_idx, b) in self.behaviors.iter().enumerate() {
            let at = |f: &str| format!("behavior[{b_idx}].{f}");
            if b.participant >= k {
                err(at("participant"), format!("no voter {}", b.participant));
            }
            if !seen.insert(b.participant) {
                err(at("participant"), format!("voter {} already has a behavior", b.participant));
            }
            if !BEHAVIOR_KINDS.contains(&b.kind.as_str()) {
                err(at("kind"), format!("unknown kind {:?}; expected one of {}", b.kind, BEHAVIOR_KINDS.join(", ")));
                continue;
            }
            let allowed: &[&str] = match b.kind.as_str() {
                "honest" | "syntactic-garbage" => &["tick"],
                "inactive" => &[],
                "partial-distribution" => &["tick", "workers"],
                "impersonate" => &["tick", "target"],
                "invalid-vote" => &["tick", "value"],
                "wrong-intermediate" => &["offset", "apply_to"],
                "double-vote" => &["ballots"],
                _ => unreachable!(),
            };
            let present = [
                ("tick", b.tick.is_some()),
                ("workers", b.workers.is_some()),
                ("target", b.target.is_some()),
                ("value", b.value.is_some()),
                ("offset", b.offset.is_some()),
                ("apply_to", b.apply_to.is_some()),
                ("ballots", b.ballots.is_some()),
            ];
            for (name, is_set) in present {
                if is_set && !allowed.contains(&name) {
                    err(at(name), format!("not used by kind {:?}", b.kind));
                }
            }
            let required: &[(&str, bool)] = match b.kind.as_str() {
                "partial-distribution" => &[("workers", b.workers.is_some())],
                "impersonate" => &[("target", b.target.is_some())],
                "invalid-vote" => &[("value", b.value.is_some())],
                "wrong-intermediate" => &[("offset", b.offset.is_some())],
                "double-vote" => &[("ballots", b.ballots.is_some())],
                _ => &[],
            };
            for &(name, is_set) in required {
                if !is_set {
                    err(at(name), format!("required by kind {:?}", b.kind));
                }
            }
            if let Some(tick) = b.tick {
                if tick > d.q34 {
                    err(at("tick"), format!("{tick} is after the run ends at q34 = {}", d.q34));
                }
            }
            if let Some(list) = &b.workers {
                if list.is_empty() || list.len() >= n {
                    err(at("workers"), format!("must name between 1 and {} worker positions", n.saturating_sub(1)));
                }
                for &j in list {
                    if j >= n {
                        err(at("workers"), format!("no worker position {j}"));
                    }
                }
            }
            if let Some(target) = b.target {
                if target >= k || target == b.participant {
                    err(at("target"), format!("must be another voter, got {target}"));
                }
            }
            if let Some(value) = b.value {
                if value.abs() == 1 {
                    err(at("value"), "1 and -1 are legal votes".into());
                }
            }
            if b.kind == "wrong-intermediate" {
                if !workers.contains(&b.participant) {
                    err(at("participant"), format!("voter {} is not a worker", b.participant));
                }
                if b.offset == Some(0) {
                    err(at("offset"), "must be nonzero".into());
                }
                if let Some(a) = &b.apply_to {
                    if !["r", "c", "both"].contains(&a.as_str()) {
                        err(at("apply_to"), format!("expected \"r\", \"c\" or \"both\", got {a:?}"));
                    }
                }
            }
            if let Some(ballots) = &b.ballots {
                if ballots.len() < 2 {
                    err(at("ballots"), "needs at least two ballots".into());
                }
                for (x, ballot) in ballots.iter().enumerate() {
                    if ballot.value.abs() != 1 {
                        err(format!("behavior[{b_idx}].ballots[{x}].value"), "must be 1 or -1".into());
                    }
                    if ballot.tick > d.q34 {
                        err(format!("behavior[{b_idx}].ballots[{x}].tick"), format!("after q34 = {}", d.q34));
                    }
                }
            }
        }

        for (x, tamper) in self.tampers.iter().enumerate() {
            let at = |f: &str| format!("tamper[{x}].{f}");
            match tamper.mutation.as_str() {
                "identity" | "delete" | "truncate" => {
                    for (name, set) in [("offset", tamper.offset.is_some()), ("bit", tamper.bit.is_some()), ("mask", tamper.mask.is_some())] {
                        if set {
                            err(at(name), format!("not used by mutation {:?}", tamper.mutation));
                        }
                    }
                }
                "flip-bit" | "xor-byte" => {
                    let needs = if tamper.mutation == "flip-bit" { "bit" } else { "mask" };
                    let other = if needs == "bit" { "mask" } else { "bit" };
                    if tamper.offset.is_none() {
                        err(at("offset"), format!("required by mutation {:?}", tamper.mutation));
                    }
                    let (has_needed, has_other) = if needs == "bit" {
                        (tamper.bit.is_some(), tamper.mask.is_some())
                    } else {
                        (tamper.mask.is_some(), tamper.bit.is_some())
                    };
                    if !has_needed {
                        err(at(needs), format!("required by mutation {:?}", tamper.mutation));
                    }
                    if has_other {
                        err(at(other), format!("not used by mutation {:?}", tamper.mutation));
                    }
                    if tamper.bit.is_some_and(|b| b > 7) {
                        err(at("bit"), "must be 0-7".into());
                    }
                    if tamper.mask == Some(0) {
                        err(at("mask"), "must be nonzero".into());
                    }
                }
                other => err(
                    at("mutation"),
                    format!("unknown mutation {other:?}; expected identity, flip-bit, xor-byte, delete or truncate"),
                ),
            }
            if tamper.after_tick > d.q34 {
                err(at("after_tick"), format!("after the run ends at q34 = {}", d.q34));
            }
        }
        out
    }
}
