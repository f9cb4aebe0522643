//! The compliance audit: the one acceptance procedure shared by workers and
//! verifiers.

use std::collections::BTreeMap;

use crate::crypto::ParticipantId;
use crate::field_sss::Share;
use crate::ledger::{Ledger, Record};
use crate::messages::{Body, MessageKind, ReferendumParams, Tick};

/// Which protocol role a record claims to act in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Initiator,
    Voter,
    Worker,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Initiator => "initiator",
            Role::Voter => "voter",
            Role::Worker => "worker",
        }
    }

    fn of_kind(kind: MessageKind) -> Self {
        match kind {
            MessageKind::Init => Role::Initiator,
            MessageKind::VoteShare => Role::Voter,
            MessageKind::ResultShare | MessageKind::ChecksumShare => Role::Worker,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    Inactivity,
    PartialDistribution,
    Syntax,
    SignatureMismatch,
    Late,
    DuplicateResolved,
    IllegalPhase,
    /// A worker whose intermediate share disagrees with the consensus.
    Outlier,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Inactivity => "inactivity",
            ViolationKind::PartialDistribution => "partial-distribution",
            ViolationKind::Syntax => "syntax",
            ViolationKind::SignatureMismatch => "signature-mismatch",
            ViolationKind::Late => "late",
            ViolationKind::DuplicateResolved => "duplicate-resolved",
            ViolationKind::IllegalPhase => "illegal-phase",
            ViolationKind::Outlier => "outlier",
        }
    }
}

/// Everything the audit found out about one participant in one role.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplianceRecord {
    pub participant: ParticipantId,
    pub role: Role,
    /// Every ledger record attributed here, accepted or not.
    pub records: Vec<u64>,
    /// Offending record seqs per kind. `Inactivity` carries no seqs.
    pub violations: BTreeMap<ViolationKind, Vec<u64>>,
}

impl ComplianceRecord {
    fn new(participant: ParticipantId, role: Role) -> Self {
        Self {
            participant,
            role,
            records: Vec::new(),
            violations: BTreeMap::new(),
        }
    }

    pub fn is_compliant(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.contains_key(&kind)
    }

    pub(crate) fn flag(&mut self, kind: ViolationKind, seq: Option<u64>) {
        let seqs = self.violations.entry(kind).or_default();
        if let Some(seq) = seq {
            seqs.push(seq);
        }
    }
}

/// How the init broadcast on the ledger relates to the parameters supplied
/// to the audit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitStatus {
    Matches,
    Missing,
    Mismatch,
}

/// Record counts per message kind, readable or not.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Census {
    pub b: usize,
    pub s: usize,
    pub r: usize,
    pub c: usize,
}

impl Census {
    fn count(&mut self, kind: MessageKind) {
        match kind {
            MessageKind::Init => self.b += 1,
            MessageKind::VoteShare => self.s += 1,
            MessageKind::ResultShare => self.r += 1,
            MessageKind::ChecksumShare => self.c += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditOutcome {
    pub compliance: BTreeMap<(Role, ParticipantId), ComplianceRecord>,
    /// Voter index to worker position to the seq of the accepted `s` record.
    pub accepted: BTreeMap<usize, BTreeMap<usize, u64>>,
    /// Worker position to its surviving `r` record.
    pub result_shares: BTreeMap<usize, (u64, Share)>,
    /// Worker position to its surviving `c` record.
    pub checksum_shares: BTreeMap<usize, (u64, Share)>,
    /// Records without a readable sender.
    pub unattributed: Vec<u64>,
    pub init: InitStatus,
    pub census: Census,
}

impl AuditOutcome {
    pub fn accepted_voters(&self) -> usize {
        self.accepted.len()
    }

    pub fn record(&self, role: Role, id: &ParticipantId) -> Option<&ComplianceRecord> {
        self.compliance.get(&(role, id.clone()))
    }

    pub(crate) fn record_mut(&mut self, role: Role, id: &ParticipantId) -> &mut ComplianceRecord {
        self.compliance
            .entry((role, id.clone()))
            .or_insert_with(|| ComplianceRecord::new(id.clone(), role))
    }

    /// Workers whose `r` and `c` both survived.
    pub fn complete_workers(&self) -> Vec<usize> {
        self.result_shares
            .keys()
            .filter(|j| self.checksum_shares.contains_key(j))
            .copied()
            .collect()
    }
}

/// Classifies every record of `ledger` against `params`.
///
/// Applied in order: unparseable records are `syntax`; bad signatures are
/// `signature-mismatch` (charged to the claimed sender); records from the
/// wrong role or with inconsistent share metadata are `syntax`; records
/// outside their phase window are `late` or `illegal-phase`; only the most
/// recent share per (voter, worker) and the most recent `r`/`c` per worker
/// survive; finally a voter whose surviving shares do not reach every worker
/// loses all of them.
pub fn audit(ledger: &Ledger, params: &ReferendumParams) -> AuditOutcome {
    let n = params.workers.len();
    let mut out = AuditOutcome {
        compliance: BTreeMap::new(),
        accepted: BTreeMap::new(),
        result_shares: BTreeMap::new(),
        checksum_shares: BTreeMap::new(),
        unattributed: Vec::new(),
        init: InitStatus::Missing,
        census: Census::default(),
    };
    for id in &params.voters {
        out.record_mut(Role::Voter, id);
    }
    for id in &params.workers {
        out.record_mut(Role::Worker, id);
    }
    out.record_mut(Role::Initiator, &params.initiator);

    let mut state = Survivors::default();

    for record in ledger.records() {
        let seq = record.seq;
        let Some(env) = record.envelope() else {
            out.unattributed.push(seq);
            continue;
        };
        out.census.count(env.kind);
        let role = Role::of_kind(env.kind);
        let Some(sender) = env.sender.clone() else {
            out.unattributed.push(seq);
            continue;
        };
        out.record_mut(role, &sender).records.push(seq);
        if let Some(kind) = classify(record, params, &mut state, &mut out.init) {
            let flagged = match kind {
                Flag::Here(kind) => (kind, seq),
                Flag::Superseded(old) => (ViolationKind::DuplicateResolved, old),
            };
            out.record_mut(role, &sender).flag(flagged.0, Some(flagged.1));
        }
    }

    for (i, id) in params.voters.iter().enumerate() {
        let shares: BTreeMap<usize, u64> = (0..n)
            .filter_map(|j| state.s.get(&(i, j)).map(|&seq| (j, seq)))
            .collect();
        if shares.len() == n {
            out.accepted.insert(i, shares);
            continue;
        }
        let entry = out.record_mut(Role::Voter, id);
        if !shares.is_empty() {
            for &seq in shares.values() {
                entry.flag(ViolationKind::PartialDistribution, Some(seq));
            }
        } else if entry.records.is_empty() {
            entry.flag(ViolationKind::Inactivity, None);
        }
    }
    for (j, id) in params.workers.iter().enumerate() {
        let entry = out.record_mut(Role::Worker, id);
        if !(state.r.contains_key(&j) && state.c.contains_key(&j)) {
            entry.flag(ViolationKind::Inactivity, None);
        }
    }
    out.result_shares = state.r;
    out.checksum_shares = state.c;
    out
}

/// Latest surviving records seen so far.
#[derive(Default)]
struct Survivors {
    s: BTreeMap<(usize, usize), u64>,
    r: BTreeMap<usize, (u64, Share)>,
    c: BTreeMap<usize, (u64, Share)>,
    init_seen: bool,
}

enum Flag {
    /// The record itself violates `ViolationKind`.
    Here(ViolationKind),
    /// The record is fine and replaces an earlier one, given by seq.
    Superseded(u64),
}

fn classify(record: &Record, params: &ReferendumParams, state: &mut Survivors, init: &mut InitStatus) -> Option<Flag> {
    use Flag::Here;
    let q = params.deadlines;
    let t = params.threshold;
    let seq = record.seq;
    let tick = record.timestamp;
    let Ok(message) = record.parse() else {
        return Some(Here(ViolationKind::Syntax));
    };
    if !message.verify_signature() {
        return Some(Here(ViolationKind::SignatureMismatch));
    }
    let sender = message.sender();
    match message.body() {
        Body::Init(published) => {
            if *sender != params.initiator || state.init_seen {
                return Some(Here(ViolationKind::Syntax));
            }
            state.init_seen = true;
            *init = if published == params {
                InitStatus::Matches
            } else {
                InitStatus::Mismatch
            };
            (tick != q.q12).then_some(Here(ViolationKind::IllegalPhase))
        }
        Body::VoteShare(ct) => {
            let (Some(i), Some(j)) = (params.voter_index(sender), params.worker_position(&ct.recipient)) else {
                return Some(Here(ViolationKind::Syntax));
            };
            if let Some(kind) = phase_violation(tick, q.q12, q.q23) {
                return Some(Here(kind));
            }
            state.s.insert((i, j), seq).map(Flag::Superseded)
        }
        Body::ResultShare(share) | Body::ChecksumShare(share) => {
            let is_result = message.kind() == MessageKind::ResultShare;
            let degree = if is_result { t - 1 } else { 2 * (t - 1) };
            let Some(j) = params.worker_position(sender) else {
                return Some(Here(ViolationKind::Syntax));
            };
            let consistent = share.field().modulus() == params.modulus
                && share.degree() == degree
                && share.eval_point().value() == params.share_affiliation[j];
            if !consistent {
                return Some(Here(ViolationKind::Syntax));
            }
            if let Some(kind) = phase_violation(tick, q.q23, q.q34) {
                return Some(Here(kind));
            }
            let slot = if is_result { &mut state.r } else { &mut state.c };
            slot.insert(j, (seq, *share)).map(|(old, _)| Flag::Superseded(old))
        }
    }
}

fn phase_violation(tick: Tick, open: Tick, close: Tick) -> Option<ViolationKind> {
    if tick < open {
        Some(ViolationKind::IllegalPhase)
    } else if tick >= close {
        Some(ViolationKind::Late)
    } else {
        None
    }
}
