//! Append-only, hash-chained record store.
//!
//! The ledger does not judge content: anything that serializes is appended,
//! including garbage and forgeries. Filtering is the verifier's job.
//!
//! Canonical record bytes (big-endian):
//!
//! ```text
//! seq:u64 | prev_hash:[u8; 32] | timestamp:u64 | len:u32 | message[len]
//! ```
//!
//! `record_hash = SHA-256(canonical bytes)`. A stored record is the canonical
//! bytes followed by its 32-byte `record_hash`; the dump format is one
//! base64 line per stored record.

use std::fmt;
use std::ops::Range;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use sha2::{Digest as _, Sha256};

use crate::crypto::ParticipantId;
use crate::messages::{Envelope, Message, MessageKind, SyntaxError, Tick};

pub const DIGEST_LEN: usize = 32;

const HEADER_LEN: usize = 8 + DIGEST_LEN + 8 + 4;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0; DIGEST_LEN]);

    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", hex::encode(&self.0[..8]))
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub seq: u64,
    pub prev_hash: Digest,
    pub timestamp: Tick,
    message: Vec<u8>,
    pub record_hash: Digest,
}

impl Record {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.message.len());
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(&self.prev_hash.0);
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        out.extend_from_slice(&(self.message.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.message);
        out
    }

    pub fn computed_hash(&self) -> Digest {
        Digest::of(&self.canonical_bytes())
    }

    /// The message bytes exactly as appended.
    pub fn message_bytes(&self) -> &[u8] {
        &self.message
    }

    pub fn parse(&self) -> Result<Message, SyntaxError> {
        Message::parse(&self.message)
    }

    pub fn envelope(&self) -> Option<Envelope> {
        Envelope::peek(&self.message)
    }

    fn stored_bytes(&self) -> Vec<u8> {
        let mut out = self.canonical_bytes();
        out.extend_from_slice(&self.record_hash.0);
        out
    }

    fn decode_stored(bytes: &[u8]) -> Option<Record> {
        if bytes.len() < HEADER_LEN + DIGEST_LEN {
            return None;
        }
        let seq = u64::from_be_bytes(bytes[0..8].try_into().ok()?);
        let prev_hash = Digest(bytes[8..40].try_into().ok()?);
        let timestamp = u64::from_be_bytes(bytes[40..48].try_into().ok()?);
        let len = u32::from_be_bytes(bytes[48..52].try_into().ok()?) as usize;
        if bytes.len() != HEADER_LEN + len + DIGEST_LEN {
            return None;
        }
        let message = bytes[HEADER_LEN..HEADER_LEN + len].to_vec();
        let record_hash = Digest(bytes[HEADER_LEN + len..].try_into().ok()?);
        Some(Record {
            seq,
            prev_hash,
            timestamp,
            message,
            record_hash,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntegrityKind {
    /// Stored hash does not match the record's contents.
    HashMismatch,
    /// `prev_hash` does not match the predecessor.
    LinkBroken,
    /// Sequence numbers are not dense.
    SeqGap,
    /// Stored bytes do not decode as a record at all.
    Malformed,
    /// Fewer records, or a different head, than a previously seen checkpoint.
    Truncated,
}

impl IntegrityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IntegrityKind::HashMismatch => "hash-mismatch",
            IntegrityKind::LinkBroken => "link-broken",
            IntegrityKind::SeqGap => "seq-gap",
            IntegrityKind::Malformed => "malformed",
            IntegrityKind::Truncated => "truncated",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("ledger integrity violation at seq {seq}: {}", kind.as_str())]
pub struct IntegrityViolation {
    pub seq: u64,
    pub kind: IntegrityKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("message of {0} bytes exceeds the u32 length prefix")]
    Encoding(usize),
}

/// What a replica remembers about a ledger it has already seen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    pub len: u64,
    pub head: Digest,
}

/// Selection criteria for [`Ledger::query`]; unset fields match everything.
#[derive(Clone, Debug, Default)]
pub struct LedgerFilter {
    pub kind: Option<MessageKind>,
    pub sender: Option<ParticipantId>,
    pub recipient: Option<ParticipantId>,
    pub ticks: Option<Range<Tick>>,
}

impl LedgerFilter {
    pub fn kind(mut self, kind: MessageKind) -> Self {
        self.kind = Some(kind);
        self
    }

    pub fn sender(mut self, id: &ParticipantId) -> Self {
        self.sender = Some(id.clone());
        self
    }

    pub fn recipient(mut self, id: &ParticipantId) -> Self {
        self.recipient = Some(id.clone());
        self
    }

    pub fn ticks(mut self, ticks: Range<Tick>) -> Self {
        self.ticks = Some(ticks);
        self
    }

    fn matches(&self, record: &Record) -> bool {
        if let Some(range) = &self.ticks {
            if !range.contains(&record.timestamp) {
                return false;
            }
        }
        if self.kind.is_none() && self.sender.is_none() && self.recipient.is_none() {
            return true;
        }
        let Some(env) = record.envelope() else {
            return false;
        };
        self.kind.is_none_or(|k| env.kind == k)
            && self.sender.as_ref().is_none_or(|s| env.sender.as_ref() == Some(s))
            && self
                .recipient
                .as_ref()
                .is_none_or(|r| env.recipient.as_ref() == Some(r))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Entry {
    raw: Vec<u8>,
    record: Option<Record>,
}

impl Entry {
    fn from_raw(raw: Vec<u8>) -> Self {
        let record = Record::decode_stored(&raw);
        Self { raw, record }
    }
}

/// The ledger. Appends take `&mut self`, so they are totally ordered; any
/// `&Ledger` is a consistent prefix.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    entries: Vec<Entry>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn append(&mut self, message: &Message, tick: Tick) -> Result<u64, LedgerError> {
        self.append_bytes(message.to_bytes(), tick)
    }

    /// Appends arbitrary message bytes; no syntax or signature checks.
    pub fn append_bytes(&mut self, message: Vec<u8>, tick: Tick) -> Result<u64, LedgerError> {
        if u32::try_from(message.len()).is_err() {
            return Err(LedgerError::Encoding(message.len()));
        }
        let seq = self.entries.len() as u64;
        let prev_hash = match self.entries.last() {
            None => Digest::ZERO,
            Some(Entry { record: Some(r), .. }) => r.record_hash,
            Some(Entry { raw, .. }) => Digest::of(raw),
        };
        let mut record = Record {
            seq,
            prev_hash,
            timestamp: tick,
            message,
            record_hash: Digest::ZERO,
        };
        record.record_hash = record.computed_hash();
        self.entries.push(Entry {
            raw: record.stored_bytes(),
            record: Some(record),
        });
        Ok(seq)
    }

    pub fn get(&self, seq: u64) -> Option<&Record> {
        self.entries.get(seq as usize)?.record.as_ref()
    }

    /// Every decodable record, in storage order.
    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.entries.iter().filter_map(|e| e.record.as_ref())
    }

    pub fn query(&self, filter: &LedgerFilter) -> Vec<&Record> {
        self.records().filter(|r| filter.matches(r)).collect()
    }

    pub fn last_tick(&self) -> Option<Tick> {
        self.records().map(|r| r.timestamp).max()
    }

    /// Reports the first violated record, checking sequence, link, then hash.
    pub fn verify_integrity(&self) -> Result<(), IntegrityViolation> {
        let mut prev = Digest::ZERO;
        for (i, entry) in self.entries.iter().enumerate() {
            let seq = i as u64;
            let violation = |kind| Err(IntegrityViolation { seq, kind });
            let Some(record) = &entry.record else {
                return violation(IntegrityKind::Malformed);
            };
            if record.seq != seq {
                return violation(IntegrityKind::SeqGap);
            }
            if record.prev_hash != prev {
                return violation(IntegrityKind::LinkBroken);
            }
            if record.computed_hash() != record.record_hash {
                return violation(IntegrityKind::HashMismatch);
            }
            prev = record.record_hash;
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let head = match self.entries.last() {
            None => Digest::ZERO,
            Some(Entry { record: Some(r), .. }) => r.record_hash,
            Some(Entry { raw, .. }) => Digest::of(raw),
        };
        Checkpoint {
            len: self.entries.len() as u64,
            head,
        }
    }

    /// Integrity plus the guarantee that nothing seen earlier was dropped.
    pub fn verify_extends(&self, seen: &Checkpoint) -> Result<(), IntegrityViolation> {
        self.verify_integrity()?;
        if (self.entries.len() as u64) < seen.len {
            return Err(IntegrityViolation {
                seq: self.entries.len() as u64,
                kind: IntegrityKind::Truncated,
            });
        }
        if seen.len > 0 {
            let at = self.get(seen.len - 1).map(|r| r.record_hash);
            if at != Some(seen.head) {
                return Err(IntegrityViolation {
                    seq: seen.len - 1,
                    kind: IntegrityKind::Truncated,
                });
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&BASE64.encode(&entry.raw));
            out.push('\n');
        }
        out
    }

    /// Never fails: lines that do not decode become malformed entries, which
    /// [`Ledger::verify_integrity`] then reports.
    pub fn load(dump: &str) -> Self {
        let entries = dump
            .lines()
            .map(|line| match BASE64.decode(line.trim_end_matches('\r')) {
                Ok(raw) => Entry::from_raw(raw),
                Err(_) => Entry {
                    raw: line.as_bytes().to_vec(),
                    record: None,
                },
            })
            .collect();
        Self { entries }
    }

    /// Mutates stored bytes behind the append-only API.
    #[cfg(any(test, feature = "tamper"))]
    pub fn tamper_for_test(&mut self, seq: u64, mutation: Mutation) {
        let mut raws: Vec<Vec<u8>> = self.entries.drain(..).map(|e| e.raw).collect();
        mutation.apply(&mut raws, seq as usize);
        self.entries = raws.into_iter().map(Entry::from_raw).collect();
    }
}

/// A byte-level edit of stored records.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    Identity,
    /// Flip bit `bit` (0-7) of byte `offset` of the stored record.
    FlipBit { offset: usize, bit: u8 },
    /// XOR byte `offset` with `mask`.
    XorByte { offset: usize, mask: u8 },
    /// Remove the record.
    Delete,
    /// Remove the record and everything after it.
    Truncate,
}

impl Mutation {
    fn apply(self, raws: &mut Vec<Vec<u8>>, index: usize) {
        if index >= raws.len() {
            return;
        }
        match self {
            Mutation::Identity => {}
            Mutation::FlipBit { offset, bit } => {
                if let Some(b) = raws[index].get_mut(offset) {
                    *b ^= 1 << (bit % 8);
                }
            }
            Mutation::XorByte { offset, mask } => {
                if let Some(b) = raws[index].get_mut(offset) {
                    *b ^= mask;
                }
            }
            Mutation::Delete => {
                raws.remove(index);
            }
            Mutation::Truncate => raws.truncate(index),
        }
    }
}

/// Applies `mutation` to record `seq` of a dump, as someone editing the file would.
pub fn tamper_dump(dump: &str, seq: u64, mutation: Mutation) -> String {
    let ledger = Ledger::load(dump);
    let mut raws: Vec<Vec<u8>> = ledger.entries.into_iter().map(|e| e.raw).collect();
    mutation.apply(&mut raws, seq as usize);
    Ledger {
        entries: raws.into_iter().map(Entry::from_raw).collect(),
    }
    .dump()
}

/// Stored length of record `seq`, for choosing tamper offsets.
pub fn stored_len(ledger: &Ledger, seq: u64) -> Option<usize> {
    ledger.entries.get(seq as usize).map(|e| e.raw.len())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;
    use crate::crypto::{gen_keypair, Scheme};
    use crate::field_sss::{PrimeField, Share};
    use crate::messages::Body;

    fn sample_ledger(len: usize) -> (Ledger, Vec<crate::crypto::KeyPair>) {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let keys: Vec<_> = (0..3).map(|_| gen_keypair(Scheme::TestDouble, &mut rng)).collect();
        let f = PrimeField::new(101).unwrap();
        let mut ledger = Ledger::new();
        for i in 0..len {
            let share = Share::new(f.element(1 + i as u64 % 50), f.element(i as u64), 1).unwrap();
            let body = if i % 2 == 0 {
                Body::ResultShare(share)
            } else {
                Body::ChecksumShare(share)
            };
            let msg = Message::signed(body, &keys[i % 3]);
            ledger.append(&msg, i as Tick).unwrap();
        }
        (ledger, keys)
    }

    #[test]
    fn genesis_and_chaining() {
        let (ledger, _) = sample_ledger(2);
        let r0 = ledger.get(0).unwrap();
        let r1 = ledger.get(1).unwrap();
        assert_eq!(r0.seq, 0);
        assert_eq!(r0.prev_hash, Digest::ZERO);
        assert_eq!(r1.seq, 1);
        assert_eq!(r1.prev_hash, r0.record_hash);
        assert_eq!(r0.record_hash, r0.computed_hash());
        assert!(ledger.verify_integrity().is_ok());
    }

    #[test]
    fn broken_messages_are_still_appended() {
        let mut ledger = Ledger::new();
        let seq = ledger.append_bytes(vec![0xde, 0xad], 3).unwrap();
        assert_eq!(seq, 0);
        assert!(ledger.get(0).unwrap().parse().is_err());
        assert!(ledger.verify_integrity().is_ok());
    }

    #[test]
    fn filters_select_by_header_and_time() {
        let (ledger, keys) = sample_ledger(12);
        let from_first = ledger.query(&LedgerFilter::default().sender(keys[0].id()));
        assert_eq!(from_first.len(), 4);
        let results = ledger.query(&LedgerFilter::default().kind(MessageKind::ResultShare));
        assert!(results.iter().all(|r| r.seq % 2 == 0));
        assert_eq!(ledger.query(&LedgerFilter::default()).len(), 12);
        assert!(ledger.query(&LedgerFilter::default().ticks(100..200)).is_empty());
        let window = ledger.query(&LedgerFilter::default().ticks(3..6));
        assert_eq!(window.iter().map(|r| r.seq).collect::<Vec<_>>(), vec![3, 4, 5]);
        let none = ledger.query(&LedgerFilter::default().recipient(keys[0].id()));
        assert!(none.is_empty());
    }

    #[test]
    fn payload_tamper_is_a_hash_mismatch() {
        let (mut ledger, _) = sample_ledger(8);
        let offset = HEADER_LEN + 5;
        ledger.tamper_for_test(5, Mutation::XorByte { offset, mask: 0x40 });
        assert_eq!(
            ledger.verify_integrity(),
            Err(IntegrityViolation { seq: 5, kind: IntegrityKind::HashMismatch })
        );
    }

    #[test]
    fn deletion_is_a_seq_gap() {
        let (mut ledger, _) = sample_ledger(8);
        ledger.tamper_for_test(3, Mutation::Delete);
        assert_eq!(
            ledger.verify_integrity(),
            Err(IntegrityViolation { seq: 3, kind: IntegrityKind::SeqGap })
        );
    }

    #[test]
    fn identity_mutation_is_harmless() {
        let (mut ledger, _) = sample_ledger(8);
        ledger.tamper_for_test(2, Mutation::Identity);
        assert!(ledger.verify_integrity().is_ok());
        ledger.tamper_for_test(2, Mutation::FlipBit { offset: 60, bit: 3 });
        assert!(ledger.verify_integrity().is_err());
    }

    #[test]
    fn truncation_is_caught_by_checkpoints() {
        let (mut ledger, _) = sample_ledger(8);
        let seen = ledger.checkpoint();
        ledger.tamper_for_test(7, Mutation::Truncate);
        assert!(ledger.verify_integrity().is_ok(), "a clean prefix is self-consistent");
        assert_eq!(
            ledger.verify_extends(&seen),
            Err(IntegrityViolation { seq: 7, kind: IntegrityKind::Truncated })
        );
        let (fresh, _) = sample_ledger(8);
        assert!(fresh.verify_extends(&seen).is_ok());
    }

    #[test]
    fn every_single_bit_flip_is_detected() {
        let (ledger, _) = sample_ledger(20);
        for seq in 0..20 {
            let len = stored_len(&ledger, seq).unwrap();
            for offset in (0..len).step_by(7) {
                let mut copy = ledger.clone();
                copy.tamper_for_test(seq, Mutation::FlipBit { offset, bit: (offset % 8) as u8 });
                assert!(copy.verify_integrity().is_err(), "seq {seq} offset {offset}");
            }
        }
    }

    #[test]
    fn dump_round_trips_bit_exactly() {
        let (mut ledger, _) = sample_ledger(6);
        ledger.append_bytes(b"not a message".to_vec(), 9).unwrap();
        let dump = ledger.dump();
        let loaded = Ledger::load(&dump);
        assert_eq!(loaded, ledger);
        assert_eq!(loaded.dump(), dump);
        assert!(Ledger::load("").is_empty());
    }

    #[test]
    fn corrupt_dump_lines_are_malformed_entries() {
        let (ledger, _) = sample_ledger(4);
        let dump = ledger.dump();
        let mut lines: Vec<&str> = dump.lines().collect();
        lines[2] = "%%% not base64 %%%";
        let loaded = Ledger::load(&lines.join("\n"));
        assert_eq!(loaded.len(), 4);
        assert_eq!(
            loaded.verify_integrity(),
            Err(IntegrityViolation { seq: 2, kind: IntegrityKind::Malformed })
        );
        let edited = tamper_dump(&dump, 1, Mutation::XorByte { offset: 0, mask: 1 });
        assert_eq!(
            Ledger::load(&edited).verify_integrity(),
            Err(IntegrityViolation { seq: 1, kind: IntegrityKind::SeqGap })
        );
    }
}
