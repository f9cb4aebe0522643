//! Verdicts and their canonical text form.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::crypto::ParticipantId;
use crate::field_sss::FieldElement;
use crate::ledger::IntegrityViolation;
use crate::messages::ReferendumParams;

use super::audit::{Census, ComplianceRecord, Role};

/// Why a value could not be reconstructed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unavailable {
    InsufficientShares { have: usize, need: usize },
    /// No candidate polynomial is supported by more shares than its degree
    /// strictly requires.
    Ambiguous,
}

impl fmt::Display for Unavailable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unavailable::InsufficientShares { have, need } => {
                write!(f, "unavailable(insufficient-shares {have}/{need})")
            }
            Unavailable::Ambiguous => f.write_str("unavailable(ambiguous)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(BTreeSet<&'static str>),
    Inconclusive(BTreeSet<&'static str>),
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Valid => 0,
            Verdict::Invalid(_) => 2,
            Verdict::Inconclusive(_) => 3,
        }
    }

    pub fn reasons(&self) -> Vec<&'static str> {
        match self {
            Verdict::Valid => Vec::new(),
            Verdict::Invalid(r) | Verdict::Inconclusive(r) => r.iter().copied().collect(),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, reasons) = match self {
            Verdict::Valid => return f.write_str("VALID"),
            Verdict::Invalid(r) => ("INVALID", r),
            Verdict::Inconclusive(r) => ("INCONCLUSIVE", r),
        };
        let list: Vec<_> = reasons.iter().copied().collect();
        write!(f, "{name}({})", list.join(","))
    }
}

/// How many inactive workers each reconstruction tolerates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Robustness {
    /// `n - t`.
    pub outcome_tolerance: usize,
    /// `n - (2t - 1)`, what the degree arithmetic actually allows.
    pub checksum_tolerance: usize,
    /// `n - t^2`, the stricter figure quoted in the literature for the
    /// checksum; kept for comparison and may be negative.
    pub checksum_cited_bound: i64,
}

impl Robustness {
    pub fn of(params: &ReferendumParams) -> Self {
        let n = params.workers.len();
        let t = params.threshold;
        Self {
            outcome_tolerance: n.saturating_sub(t),
            checksum_tolerance: n.saturating_sub(2 * t - 1),
            checksum_cited_bound: n as i64 - (t * t) as i64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerdictReport {
    pub ledger_integrity: Result<(), IntegrityViolation>,
    /// `k'`.
    pub accepted_voters: usize,
    /// Signed outcome `r`.
    pub outcome: Result<i64, Unavailable>,
    pub checksum: Result<FieldElement, Unavailable>,
    pub checksum_valid: bool,
    pub outlier_workers: BTreeSet<ParticipantId>,
    pub overall: Verdict,
    pub notes: BTreeSet<&'static str>,
    pub compliance: Vec<ComplianceRecord>,
    pub unattributed: Vec<u64>,
    pub census_expected: Census,
    pub census_actual: Census,
    pub robustness: Robustness,
    pub(crate) labels: BTreeMap<ParticipantId, String>,
    pub(crate) modulus: u64,
    pub(crate) threshold: usize,
}

impl VerdictReport {
    pub fn label(&self, id: &ParticipantId) -> String {
        self.labels
            .get(id)
            .cloned()
            .unwrap_or_else(|| format!("x{}", id.fingerprint()))
    }

    /// Violation kinds per participant label and role, compliant ones omitted.
    pub fn violations(&self) -> BTreeMap<(Role, String), Vec<&'static str>> {
        self.compliance
            .iter()
            .filter(|c| !c.is_compliant())
            .map(|c| {
                let kinds = c.violations.keys().map(|k| k.as_str()).collect();
                ((c.role, self.label(&c.participant)), kinds)
            })
            .collect()
    }

    pub fn exit_code(&self) -> i32 {
        self.overall.exit_code()
    }

    /// Sorted `key = value` lines; equal reports give equal bytes.
    pub fn to_text(&self) -> String {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            kv.insert(k.to_string(), v);
        };
        put("accepted_voters", self.accepted_voters.to_string());
        put("census.actual", census_text(&self.census_actual));
        put("census.expected", census_text(&self.census_expected));
        put(
            "checksum",
            match &self.checksum {
                Ok(c) => c.value().to_string(),
                Err(u) => u.to_string(),
            },
        );
        put("checksum_valid", self.checksum_valid.to_string());
        put(
            "ledger_integrity",
            match &self.ledger_integrity {
                Ok(()) => "ok".into(),
                Err(v) => format!("violation(seq {}, {})", v.seq, v.kind.as_str()),
            },
        );
        put("notes", list_or_none(self.notes.iter().map(|s| s.to_string())));
        put(
            "outcome",
            match &self.outcome {
                Ok(r) => r.to_string(),
                Err(u) => u.to_string(),
            },
        );
        put(
            "outlier_workers",
            list_or_none(self.outlier_workers.iter().map(|w| self.label(w))),
        );
        put("overall", self.overall.to_string());
        put("params.modulus", self.modulus.to_string());
        put("params.threshold", self.threshold.to_string());
        put("robustness.checksum_cited_bound", self.robustness.checksum_cited_bound.to_string());
        put("robustness.checksum_inactive_tolerance", self.robustness.checksum_tolerance.to_string());
        put("robustness.outcome_inactive_tolerance", self.robustness.outcome_tolerance.to_string());
        if !self.unattributed.is_empty() {
            put("compliance.unattributed", seq_list(&self.unattributed));
        }
        for c in &self.compliance {
            let key = format!("compliance.{}.{}", c.role.as_str(), self.label(&c.participant));
            let value = if c.is_compliant() {
                "compliant".to_string()
            } else {
                c.violations
                    .iter()
                    .map(|(kind, seqs)| format!("{}{}", kind.as_str(), seq_list(seqs)))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            put(&key, value);
        }
        kv.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

impl fmt::Display for VerdictReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn census_text(c: &Census) -> String {
    format!("b={} s={} r={} c={}", c.b, c.s, c.r, c.c)
}

fn seq_list(seqs: &[u64]) -> String {
    let items: Vec<String> = seqs.iter().map(u64::to_string).collect();
    format!("[{}]", items.join(","))
}

fn list_or_none(items: impl Iterator<Item = String>) -> String {
    let items: Vec<String> = items.collect();
    if items.is_empty() {
        "none".into()
    } else {
        items.join(",")
    }
}

/// Stable short names: `init`, and `v000`, `v001`, ... by voter index.
pub(crate) fn labels_for(params: &ReferendumParams) -> BTreeMap<ParticipantId, String> {
    let mut labels: BTreeMap<ParticipantId, String> = params
        .voters
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), format!("v{i:03}")))
        .collect();
    labels.insert(params.initiator.clone(), "init".into());
    labels
}
