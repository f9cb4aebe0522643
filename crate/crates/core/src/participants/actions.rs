use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};

use crate::crypto::{decrypt, encrypt, KeyPair};
use crate::field_sss::{add_shares, share_secret, square_share, FieldElement, Share};
use crate::ledger::{Ledger, LedgerFilter};
use crate::messages::{encode_raw, Body, Message, MessageKind, ReferendumParams, Tick};
use crate::verifier;

use super::{Behavior, Phase, PhaseClock, ProtocolError};

/// Appends the signed init broadcast. Allowed once, at `q12`.
pub fn initiator_publish(
    params: &ReferendumParams,
    keypair: &KeyPair,
    ledger: &mut Ledger,
    tick: Tick,
) -> Result<u64, ProtocolError> {
    let prior = LedgerFilter::default()
        .kind(MessageKind::Init)
        .sender(keypair.id());
    if !ledger.query(&prior).is_empty() {
        return Err(ProtocolError::DuplicatePublish);
    }
    if tick != params.deadlines.q12 {
        return Err(ProtocolError::WrongTick {
            expected: params.deadlines.q12,
            got: tick,
        });
    }
    let message = Message::signed(Body::Init(params.clone()), keypair);
    Ok(append(ledger, &message, tick))
}

fn append(ledger: &mut Ledger, message: &Message, tick: Tick) -> u64 {
    ledger
        .append(message, tick)
        .expect("protocol messages fit the length prefix")
}

/// One full share set of `value`, each share sealed to its worker.
fn share_set<R: RngCore + CryptoRng>(
    value: FieldElement,
    params: &ReferendumParams,
    rng: &mut R,
) -> Vec<Body> {
    let shares = share_secret(value, &params.sharing_params(), rng).expect("validated params");
    shares
        .iter()
        .zip(&params.workers)
        .map(|(share, worker)| Body::VoteShare(encrypt(&share.to_bytes(), worker, rng)))
        .collect()
}

/// Performs whatever `behavior` does at `tick` in the voter role.
///
/// Adversarial output is appended like any other; the ledger accepts it and
/// the audit sorts it out.
pub fn voter_act<R: RngCore + CryptoRng>(
    vote: i64,
    behavior: &Behavior,
    keypair: &KeyPair,
    params: &ReferendumParams,
    ledger: &mut Ledger,
    tick: Tick,
    rng: &mut R,
) -> Vec<u64> {
    let field = params.field();
    let signed = |body: Body, ledger: &mut Ledger| append(ledger, &Message::signed(body, keypair), tick);
    match behavior {
        Behavior::Inactive => Vec::new(),
        Behavior::Honest | Behavior::WrongIntermediate { .. } => share_set(field.from_i64(vote), params, rng)
            .into_iter()
            .map(|b| signed(b, ledger))
            .collect(),
        Behavior::InvalidVote(value) => share_set(*value, params, rng)
            .into_iter()
            .map(|b| signed(b, ledger))
            .collect(),
        Behavior::PartialDistribution(subset) => share_set(field.from_i64(vote), params, rng)
            .into_iter()
            .enumerate()
            .filter(|(j, _)| subset.contains(j))
            .map(|(_, b)| signed(b, ledger))
            .collect(),
        Behavior::DoubleVote(plan) => plan
            .iter()
            .filter(|&&(_, at)| at == tick)
            .flat_map(|&(v, _)| share_set(field.from_i64(v), params, rng))
            .collect::<Vec<_>>()
            .into_iter()
            .map(|b| signed(b, ledger))
            .collect(),
        Behavior::SyntacticGarbage => params
            .workers
            .iter()
            .map(|w| {
                let bytes = encode_raw(
                    MessageKind::VoteShare.tag(),
                    &[keypair.id().as_bytes(), w.as_bytes(), &[0xff; 7]],
                    keypair,
                );
                ledger.append_bytes(bytes, tick).expect("short message")
            })
            .collect(),
        Behavior::Impersonate(target) => {
            let value = field.from_i64(vote);
            let mut seqs: Vec<u64> = share_set(value, params, rng)
                .into_iter()
                .map(|b| signed(b, ledger))
                .collect();
            for body in share_set(value, params, rng) {
                let forged = Message::signed_as(target.clone(), body, keypair);
                seqs.push(append(ledger, &forged, tick));
            }
            seqs
        }
    }
}

/// What a worker did, for cross-checking against verifiers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkerAction {
    pub seqs: Vec<u64>,
    /// Voter indices whose shares went into the sums.
    pub accepted: BTreeSet<usize>,
}

/// Runs the shared audit, sums the accepted shares and their squares, and
/// publishes both intermediate shares.
pub fn worker_act(
    behavior: &Behavior,
    keypair: &KeyPair,
    params: &ReferendumParams,
    ledger: &mut Ledger,
    tick: Tick,
) -> Result<WorkerAction, ProtocolError> {
    let phase = PhaseClock::new(params.deadlines).phase_at(tick);
    if phase != Phase::IntermediateComputation {
        return Err(ProtocolError::WrongPhase { tick, phase });
    }
    let j = params
        .worker_position(keypair.id())
        .ok_or_else(|| ProtocolError::NotAWorker(keypair.id().clone()))?;
    if !behavior.worker_active() {
        return Ok(WorkerAction::default());
    }
    let t = params.threshold;
    let sharing = params.sharing_params();
    let x = params.field().element(params.share_affiliation[j]);
    let mut r = Share::zero(x, t - 1).expect("nonzero eval point");
    let mut c = Share::zero(x, 2 * (t - 1)).expect("nonzero eval point");
    let mut accepted = BTreeSet::new();

    let audit = verifier::audit(ledger, params);
    for (&i, shares) in &audit.accepted {
        let Some(share) = open_share(ledger, shares[&j], keypair, params, x) else {
            continue;
        };
        r = add_shares(&r, &share).expect("aligned");
        c = add_shares(&c, &square_share(&share, &sharing).expect("fresh share")).expect("aligned");
        accepted.insert(i);
    }

    if let Behavior::WrongIntermediate { offset, apply_to } = behavior {
        if apply_to.result() {
            r = r.offset_by(*offset);
        }
        if apply_to.checksum() {
            c = c.offset_by(*offset);
        }
    }
    let seqs = vec![
        append(ledger, &Message::signed(Body::ResultShare(r), keypair), tick),
        append(ledger, &Message::signed(Body::ChecksumShare(c), keypair), tick),
    ];
    Ok(WorkerAction { seqs, accepted })
}

/// Decrypts an accepted share; anything that fails is treated as a
/// syntactically invalid share and skipped.
fn open_share(
    ledger: &Ledger,
    seq: u64,
    keypair: &KeyPair,
    params: &ReferendumParams,
    x: FieldElement,
) -> Option<Share> {
    let message = ledger.get(seq)?.parse().ok()?;
    let Body::VoteShare(ct) = message.body() else {
        return None;
    };
    let plain = decrypt(ct, keypair).ok()?;
    let share = Share::from_bytes(&plain).ok()?;
    let aligned = share.eval_point() == x
        && share.degree() == params.threshold - 1
        && share.field().modulus() == params.modulus;
    aligned.then_some(share)
}
