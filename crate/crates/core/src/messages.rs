//! The four message types exchanged over the ledger and their canonical bytes.
//!
//! Wire layout (all integers big-endian):
//!
//! ```text
//! message   = tag:u8 field*
//! field     = len:u32 bytes[len]
//! b (0x01)  = sender payload signature          payload = ReferendumParams
//! s (0x02)  = sender recipient payload signature payload = sealed share blob
//! r (0x03)  = sender payload signature          payload = share (28 bytes)
//! c (0x04)  = sender payload signature          payload = share (28 bytes)
//! ```
//!
//! The signature covers every byte before the signature field, so no header
//! is malleable. Broadcasts (`b`, `r`, `c`) have no recipient field at all.

use std::collections::BTreeSet;
use std::fmt;

use crate::crypto::{self, Ciphertext, KeyPair, ParticipantId};
use crate::field_sss::{PrimeField, Share, SharingError, SharingParams, SHARE_BYTES};

/// Logical time.
pub type Tick = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    /// `b`: the initiator's parameter broadcast.
    Init,
    /// `s`: one encrypted ballot share, voter to worker.
    VoteShare,
    /// `r`: a worker's share of the vote sum.
    ResultShare,
    /// `c`: a worker's share of the sum of squared votes.
    ChecksumShare,
}

impl MessageKind {
    pub const ALL: [MessageKind; 4] = [
        MessageKind::Init,
        MessageKind::VoteShare,
        MessageKind::ResultShare,
        MessageKind::ChecksumShare,
    ];

    pub fn tag(self) -> u8 {
        match self {
            MessageKind::Init => 0x01,
            MessageKind::VoteShare => 0x02,
            MessageKind::ResultShare => 0x03,
            MessageKind::ChecksumShare => 0x04,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    /// One-letter name used in reports and traces.
    pub fn letter(self) -> char {
        match self {
            MessageKind::Init => 'b',
            MessageKind::VoteShare => 's',
            MessageKind::ResultShare => 'r',
            MessageKind::ChecksumShare => 'c',
        }
    }

    fn field_names(self) -> &'static [&'static str] {
        match self {
            MessageKind::VoteShare => &["sender", "recipient", "payload", "signature"],
            _ => &["sender", "payload", "signature"],
        }
    }
}

/// Why a byte string is not a message.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyntaxError {
    #[error("unknown tag {0:#04x}")]
    UnknownTag(u8),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("bad length: {0}")]
    BadLength(String),
    #[error("undecodable `{field}`: {detail}")]
    Undecodable { field: &'static str, detail: String },
}

impl SyntaxError {
    /// Stable machine-readable class.
    pub fn class(&self) -> &'static str {
        match self {
            SyntaxError::UnknownTag(_) => "unknown-tag",
            SyntaxError::MissingField(_) => "missing-field",
            SyntaxError::BadLength(_) => "bad-length",
            SyntaxError::Undecodable { .. } => "undecodable-payload",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParamsError {
    #[error("invalid referendum parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sharing(#[from] SharingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Deadlines {
    /// Start of vote submission; the init broadcast is placed at this tick.
    pub q12: Tick,
    /// End of vote submission, start of intermediate computation.
    pub q23: Tick,
    /// End of intermediate computation, start of determination.
    pub q34: Tick,
}

/// Static referendum parameters, carried by the init broadcast.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferendumParams {
    pub initiator: ParticipantId,
    pub voters: Vec<ParticipantId>,
    /// Subset of `voters`, in share order.
    pub workers: Vec<ParticipantId>,
    /// Evaluation point of worker `j`'s share.
    pub share_affiliation: Vec<u64>,
    pub question: String,
    /// Label for `+1`.
    pub yes_label: String,
    /// Label for `-1`.
    pub no_label: String,
    pub deadlines: Deadlines,
    pub threshold: usize,
    pub modulus: u64,
}

impl ReferendumParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let invalid = |msg: String| Err(ParamsError::Invalid(msg));
        let k = self.voters.len();
        let n = self.workers.len();
        let t = self.threshold;
        if t < 2 {
            return invalid(format!("threshold {t} must be at least 2"));
        }
        if n < 2 * t - 1 {
            return invalid(format!("{n} workers cannot open checksum shares (need 2t-1 = {})", 2 * t - 1));
        }
        let voter_set: BTreeSet<_> = self.voters.iter().collect();
        if voter_set.len() != k {
            return invalid("voter ids are not distinct".into());
        }
        let worker_set: BTreeSet<_> = self.workers.iter().collect();
        if worker_set.len() != n {
            return invalid("worker ids are not distinct".into());
        }
        if !worker_set.is_subset(&voter_set) {
            return invalid("every worker must be a registered voter".into());
        }
        if voter_set.contains(&self.initiator) {
            return invalid("the initiator may not vote".into());
        }
        let d = self.deadlines;
        if !(d.q12 < d.q23 && d.q23 < d.q34) {
            return invalid(format!("deadlines must satisfy q12 < q23 < q34, got {} {} {}", d.q12, d.q23, d.q34));
        }
        if self.share_affiliation.len() != n {
            return invalid("share affiliation must name one point per worker".into());
        }
        let field = PrimeField::new(self.modulus)?;
        let k_max = k as u128;
        if (self.modulus as u128) <= 4 * k_max * k_max {
            return invalid(format!(
                "modulus {} must exceed 4k^2 = {} to rule out wraparound",
                self.modulus,
                4 * k_max * k_max
            ));
        }
        if self.share_affiliation.iter().any(|&x| x >= self.modulus) {
            return invalid("evaluation point outside the field".into());
        }
        let points = self.share_affiliation.iter().map(|&x| field.element(x)).collect();
        SharingParams::new(t, field, points)?;
        Ok(())
    }

    pub fn field(&self) -> PrimeField {
        PrimeField::new(self.modulus).expect("validated params carry a prime modulus")
    }

    pub fn sharing_params(&self) -> SharingParams {
        let field = self.field();
        let points = self.share_affiliation.iter().map(|&x| field.element(x)).collect();
        SharingParams::new(self.threshold, field, points).expect("validated params")
    }

    pub fn voter_index(&self, id: &ParticipantId) -> Option<usize> {
        self.voters.iter().position(|v| v == id)
    }

    pub fn worker_position(&self, id: &ParticipantId) -> Option<usize> {
        self.workers.iter().position(|w| w == id)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = FieldWriter::default();
        w.field(self.initiator.as_bytes());
        w.field(&(self.voters.len() as u32).to_be_bytes());
        for v in &self.voters {
            w.field(v.as_bytes());
        }
        w.field(&(self.workers.len() as u32).to_be_bytes());
        for (wk, x) in self.workers.iter().zip(&self.share_affiliation) {
            w.field(wk.as_bytes());
            w.field(&x.to_be_bytes());
        }
        w.field(self.question.as_bytes());
        w.field(self.yes_label.as_bytes());
        w.field(self.no_label.as_bytes());
        w.field(&self.deadlines.q12.to_be_bytes());
        w.field(&self.deadlines.q23.to_be_bytes());
        w.field(&self.deadlines.q34.to_be_bytes());
        w.field(&(self.threshold as u32).to_be_bytes());
        w.field(&self.modulus.to_be_bytes());
        w.finish()
    }

    /// Decodes and validates.
    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        let fields = split_fields(bytes).map_err(|e| e.to_string())?;
        let mut it = fields.into_iter();
        let mut next = |what: &str| it.next().ok_or_else(|| format!("missing {what}"));
        let id = |b: &[u8]| ParticipantId::from_bytes(b).map_err(|e| e.to_string());
        let u32_of = |b: &[u8]| -> Result<u32, String> {
            Ok(u32::from_be_bytes(b.try_into().map_err(|_| "expected u32")?))
        };
        let u64_of = |b: &[u8]| -> Result<u64, String> {
            Ok(u64::from_be_bytes(b.try_into().map_err(|_| "expected u64")?))
        };
        let text = |b: &[u8]| String::from_utf8(b.to_vec()).map_err(|_| "invalid utf-8".to_string());

        let initiator = id(next("initiator")?)?;
        let k = u32_of(next("voter count")?)? as usize;
        let mut voters = Vec::new();
        for _ in 0..k {
            voters.push(id(next("voter")?)?);
        }
        let n = u32_of(next("worker count")?)? as usize;
        let mut workers = Vec::new();
        let mut share_affiliation = Vec::new();
        for _ in 0..n {
            workers.push(id(next("worker")?)?);
            share_affiliation.push(u64_of(next("eval point")?)?);
        }
        let question = text(next("question")?)?;
        let yes_label = text(next("yes label")?)?;
        let no_label = text(next("no label")?)?;
        let deadlines = Deadlines {
            q12: u64_of(next("q12")?)?,
            q23: u64_of(next("q23")?)?,
            q34: u64_of(next("q34")?)?,
        };
        let threshold = u32_of(next("threshold")?)? as usize;
        let modulus = u64_of(next("modulus")?)?;
        if it.next().is_some() {
            return Err("trailing fields".into());
        }
        let params = Self {
            initiator,
            voters,
            workers,
            share_affiliation,
            question,
            yes_label,
            no_label,
            deadlines,
            threshold,
            modulus,
        };
        params.validate().map_err(|e| e.to_string())?;
        Ok(params)
    }
}

/// Typed message content.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    Init(ReferendumParams),
    VoteShare(Ciphertext),
    ResultShare(Share),
    ChecksumShare(Share),
}

impl Body {
    pub fn kind(&self) -> MessageKind {
        match self {
            Body::Init(_) => MessageKind::Init,
            Body::VoteShare(_) => MessageKind::VoteShare,
            Body::ResultShare(_) => MessageKind::ResultShare,
            Body::ChecksumShare(_) => MessageKind::ChecksumShare,
        }
    }

    fn payload_bytes(&self) -> Vec<u8> {
        match self {
            Body::Init(params) => params.encode(),
            Body::VoteShare(ct) => ct.blob.clone(),
            Body::ResultShare(s) | Body::ChecksumShare(s) => s.to_bytes().to_vec(),
        }
    }
}

/// A signed message. Construction never checks the signature against the
/// sender; acceptance is the verifier's call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    sender: ParticipantId,
    body: Body,
    signature: Vec<u8>,
}

impl Message {
    /// Signed by `keypair`, sent under its own id.
    pub fn signed(body: Body, keypair: &KeyPair) -> Self {
        Self::signed_as(keypair.id().clone(), body, keypair)
    }

    /// Claims `sender` but signs with `keypair`. Honest participants never do
    /// this; it is how impersonation attempts are built.
    pub fn signed_as(sender: ParticipantId, body: Body, keypair: &KeyPair) -> Self {
        let mut msg = Self {
            sender,
            body,
            signature: Vec::new(),
        };
        msg.signature = crypto::sign(&msg.signed_bytes(), keypair);
        msg
    }

    pub fn kind(&self) -> MessageKind {
        self.body.kind()
    }

    pub fn sender(&self) -> &ParticipantId {
        &self.sender
    }

    pub fn recipient(&self) -> Option<&ParticipantId> {
        match &self.body {
            Body::VoteShare(ct) => Some(&ct.recipient),
            _ => None,
        }
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    pub fn signature(&self) -> &[u8] {
        &self.signature
    }

    pub fn verify_signature(&self) -> bool {
        crypto::verify(&self.signed_bytes(), &self.signature, &self.sender)
    }

    /// Everything the signature covers.
    pub fn signed_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::with_tag(self.kind().tag());
        w.field(self.sender.as_bytes());
        if let Some(r) = self.recipient() {
            w.field(r.as_bytes());
        }
        w.field(&self.body.payload_bytes());
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.signed_bytes();
        push_field(&mut out, &self.signature);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, SyntaxError> {
        let (&tag, rest) = bytes.split_first().ok_or(SyntaxError::MissingField("tag"))?;
        let kind = MessageKind::from_tag(tag).ok_or(SyntaxError::UnknownTag(tag))?;
        let fields = split_fields(rest)?;
        let names = kind.field_names();
        if kind == MessageKind::VoteShare && fields.len() == 3 {
            // Broadcast layout under a share tag: the recipient header was left out.
            return Err(SyntaxError::MissingField("recipient"));
        }
        if fields.len() < names.len() {
            return Err(SyntaxError::MissingField(names[fields.len()]));
        }
        if fields.len() > names.len() {
            return Err(SyntaxError::BadLength(format!(
                "{} fields, expected {}",
                fields.len(),
                names.len()
            )));
        }
        if let Some(i) = fields.iter().position(|f| f.is_empty()) {
            return Err(SyntaxError::MissingField(names[i]));
        }

        let undecodable = |field: &'static str, detail: String| SyntaxError::Undecodable { field, detail };
        let sender = ParticipantId::from_bytes(fields[0])
            .map_err(|e| undecodable("sender", e.to_string()))?;
        let signature = fields[fields.len() - 1];
        let payload = fields[fields.len() - 2];
        let body = match kind {
            MessageKind::Init => Body::Init(
                ReferendumParams::decode(payload).map_err(|e| undecodable("payload", e))?,
            ),
            MessageKind::VoteShare => {
                let recipient = ParticipantId::from_bytes(fields[1])
                    .map_err(|e| undecodable("recipient", e.to_string()))?;
                let expected = recipient.scheme().ciphertext_len(SHARE_BYTES);
                if payload.len() != expected {
                    return Err(undecodable(
                        "payload",
                        format!("sealed share must be {expected} bytes, got {}", payload.len()),
                    ));
                }
                Body::VoteShare(Ciphertext {
                    recipient,
                    blob: payload.to_vec(),
                })
            }
            MessageKind::ResultShare | MessageKind::ChecksumShare => {
                let share =
                    Share::from_bytes(payload).map_err(|e| undecodable("payload", e.to_string()))?;
                if kind == MessageKind::ResultShare {
                    Body::ResultShare(share)
                } else {
                    Body::ChecksumShare(share)
                }
            }
        };
        if signature.len() != sender.scheme().signature_len() {
            return Err(SyntaxError::BadLength(format!(
                "signature is {} bytes, scheme uses {}",
                signature.len(),
                sender.scheme().signature_len()
            )));
        }
        Ok(Self {
            sender,
            body,
            signature: signature.to_vec(),
        })
    }
}

/// The routing header of a message, readable even when the payload is not.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub kind: MessageKind,
    pub sender: Option<ParticipantId>,
    pub recipient: Option<ParticipantId>,
}

impl Envelope {
    /// Best-effort header decode; `None` when even the tag is unusable.
    pub fn peek(bytes: &[u8]) -> Option<Self> {
        let (&tag, rest) = bytes.split_first()?;
        let kind = MessageKind::from_tag(tag)?;
        let mut sender = None;
        let mut recipient = None;
        let mut cursor = rest;
        for i in 0..2 {
            let Some((field, tail)) = take_field(cursor) else { break };
            cursor = tail;
            match i {
                0 => sender = ParticipantId::from_bytes(field).ok(),
                _ if kind == MessageKind::VoteShare => {
                    recipient = ParticipantId::from_bytes(field).ok()
                }
                _ => {}
            }
        }
        Some(Self {
            kind,
            sender,
            recipient,
        })
    }
}

/// Encodes raw fields under `tag` and appends a signature over them.
///
/// Adversarial participants use this to emit messages no typed constructor
/// would produce.
pub fn encode_raw(tag: u8, fields: &[&[u8]], keypair: &KeyPair) -> Vec<u8> {
    let mut w = FieldWriter::with_tag(tag);
    for f in fields {
        w.field(f);
    }
    let mut out = w.finish();
    let sig = crypto::sign(&out, keypair);
    push_field(&mut out, &sig);
    out
}

#[derive(Default)]
struct FieldWriter {
    buf: Vec<u8>,
}

impl FieldWriter {
    fn with_tag(tag: u8) -> Self {
        Self { buf: vec![tag] }
    }

    fn field(&mut self, bytes: &[u8]) {
        push_field(&mut self.buf, bytes);
    }

    fn finish(self) -> Vec<u8> {
        self.buf
    }
}

fn push_field(buf: &mut Vec<u8>, bytes: &[u8]) {
    let len = u32::try_from(bytes.len()).expect("field exceeds u32 length");
    buf.extend_from_slice(&len.to_be_bytes());
    buf.extend_from_slice(bytes);
}

fn take_field(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let len = u32::from_be_bytes(bytes.get(..4)?.try_into().ok()?) as usize;
    let rest = &bytes[4..];
    (rest.len() >= len).then(|| rest.split_at(len))
}

fn split_fields(mut bytes: &[u8]) -> Result<Vec<&[u8]>, SyntaxError> {
    let mut fields = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < 4 {
            return Err(SyntaxError::BadLength("truncated field header".into()));
        }
        let (field, rest) = take_field(bytes)
            .ok_or_else(|| SyntaxError::BadLength("field runs past the end".into()))?;
        fields.push(field);
        bytes = rest;
    }
    Ok(fields)
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}
