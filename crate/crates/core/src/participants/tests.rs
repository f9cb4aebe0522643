use std::collections::BTreeSet;

use super::*;
use crate::crypto::{decrypt, Scheme};
use crate::field_sss::{detect_outliers, reconstruct, PrimeField, Share};
use crate::ledger::{Ledger, LedgerFilter};
use crate::messages::{Body, MessageKind, ReferendumParams};
use crate::verifier;

const Q: Deadlines = Deadlines {
    q12: 1,
    q23: 10,
    q34: 20,
};

fn params_for(roster: &Roster, n: usize, t: usize) -> ReferendumParams {
    let voters: Vec<_> = roster.voters.iter().map(|kp| kp.id().clone()).collect();
    ReferendumParams {
        initiator: roster.initiator.id().clone(),
        workers: voters[..n].to_vec(),
        voters,
        share_affiliation: (1..=n as u64).collect(),
        question: "Adopt the proposal?".into(),
        yes_label: "yes".into(),
        no_label: "no".into(),
        deadlines: Q,
        threshold: t,
        modulus: 2_147_483_647,
    }
}

fn simulation(n: usize, t: usize, votes: &[i64], behaviors: Vec<Behavior>, seed: u64) -> Simulation {
    let roster = Roster::generate(Scheme::TestDouble, votes.len(), seed);
    let params = params_for(&roster, n, t);
    params.validate().unwrap();
    let k = votes.len();
    Simulation::new(params, roster, votes.to_vec(), behaviors, vec![Q.q12 + 1; k], seed)
}

fn field() -> PrimeField {
    PrimeField::new(2_147_483_647).unwrap()
}

fn honest(k: usize) -> Vec<Behavior> {
    vec![Behavior::Honest; k]
}

/// Opens voter `i`'s accepted shares with the first `t` worker keys.
fn open_vote(sim: &Simulation, i: usize, t: usize) -> i64 {
    let audit = verifier::audit(sim.ledger(), sim.params());
    let shares: Vec<Share> = (0..t)
        .map(|j| {
            let seq = audit.accepted[&i][&j];
            let msg = sim.ledger().get(seq).unwrap().parse().unwrap();
            let Body::VoteShare(ct) = msg.body() else { panic!() };
            Share::from_bytes(&decrypt(ct, &sim.roster().voters[j]).unwrap()).unwrap()
        })
        .collect();
    reconstruct(&shares, t - 1).unwrap().to_signed()
}

fn intermediate(ledger: &Ledger, kind: MessageKind) -> Vec<Share> {
    ledger
        .query(&LedgerFilter::default().kind(kind))
        .iter()
        .map(|r| match r.parse().unwrap().body() {
            Body::ResultShare(s) | Body::ChecksumShare(s) => *s,
            _ => unreachable!(),
        })
        .collect()
}

#[test]
fn phases_follow_the_deadlines() {
    let mut clock = PhaseClock::new(Q);
    assert_eq!(clock.phase(), Phase::PreInit);
    assert_eq!(clock.phase_at(1), Phase::VoteSubmission);
    assert_eq!(clock.phase_at(9), Phase::VoteSubmission);
    assert_eq!(clock.phase_at(10), Phase::IntermediateComputation);
    assert_eq!(clock.phase_at(19), Phase::IntermediateComputation);
    assert_eq!(clock.phase_at(20), Phase::Determination);
    assert_eq!(clock.advance(), 1);
    assert_eq!(clock.phase(), Phase::VoteSubmission);
}

#[test]
fn initiator_publishes_once() {
    let roster = Roster::generate(Scheme::TestDouble, 3, 1);
    let params = params_for(&roster, 3, 2);
    let mut ledger = Ledger::new();
    assert_eq!(
        initiator_publish(&params, &roster.initiator, &mut ledger, 0),
        Err(ProtocolError::WrongTick { expected: 1, got: 0 })
    );
    assert_eq!(initiator_publish(&params, &roster.initiator, &mut ledger, 1), Ok(0));
    assert_eq!(
        initiator_publish(&params, &roster.initiator, &mut ledger, 1),
        Err(ProtocolError::DuplicatePublish)
    );
    let found = ledger.query(&LedgerFilter::default().kind(MessageKind::Init));
    let Body::Init(read) = found[0].parse().unwrap().body().clone() else { panic!() };
    assert_eq!(read, params);
}

#[test]
fn honest_voter_addresses_every_worker_once() {
    let mut sim = simulation(3, 2, &[1, 1, -1], honest(3), 2);
    sim.run();
    let params = sim.params().clone();
    let first = sim.roster().voters[0].id().clone();
    let sent = sim.ledger().query(&LedgerFilter::default().kind(MessageKind::VoteShare).sender(&first));
    let recipients: Vec<_> = sent.iter().map(|r| r.envelope().unwrap().recipient.unwrap()).collect();
    assert_eq!(recipients, params.workers);
}

#[test]
fn honest_run_census_and_sums() {
    let mut sim = simulation(3, 2, &[1, 1, -1], honest(3), 3);
    sim.run();
    let audit = verifier::audit(sim.ledger(), sim.params());
    assert_eq!(audit.census, verifier::expected_census(sim.params()));
    let r = intermediate(sim.ledger(), MessageKind::ResultShare);
    let c = intermediate(sim.ledger(), MessageKind::ChecksumShare);
    assert_eq!(reconstruct(&r, 1).unwrap().to_signed(), 1);
    assert_eq!(reconstruct(&c, 2).unwrap().value(), 3);
}

#[test]
fn double_vote_keeps_only_the_latest_set() {
    let mut behaviors = honest(3);
    behaviors[2] = Behavior::DoubleVote(vec![(1, 2), (-1, 5)]);
    let mut sim = simulation(3, 2, &[1, 1, 1], behaviors, 4);
    sim.run();
    let voter = sim.roster().voters[2].id().clone();
    let sent = sim.ledger().query(&LedgerFilter::default().kind(MessageKind::VoteShare).sender(&voter));
    assert_eq!(sent.len(), 6);
    assert_eq!(open_vote(&sim, 2, 2), -1);
    let r = intermediate(sim.ledger(), MessageKind::ResultShare);
    assert_eq!(reconstruct(&r, 1).unwrap().to_signed(), 1);
}

#[test]
fn invalid_vote_shares_the_illegal_value() {
    let mut behaviors = honest(3);
    behaviors[1] = Behavior::InvalidVote(field().element(3));
    let mut sim = simulation(3, 2, &[1, 1, 1], behaviors, 5);
    sim.run();
    assert_eq!(open_vote(&sim, 1, 2), 3);
    let c = intermediate(sim.ledger(), MessageKind::ChecksumShare);
    assert_eq!(reconstruct(&c, 2).unwrap().value(), 11);
}

#[test]
fn inactive_worker_leaves_outcome_but_not_checksum() {
    let mut behaviors = honest(4);
    behaviors[2] = Behavior::Inactive;
    let mut sim = simulation(3, 2, &[1, 1, 1, -1], behaviors, 6);
    sim.run();
    let r = intermediate(sim.ledger(), MessageKind::ResultShare);
    let c = intermediate(sim.ledger(), MessageKind::ChecksumShare);
    assert_eq!(r.len(), 2);
    assert_eq!(reconstruct(&r, 1).unwrap().to_signed(), 1);
    assert!(reconstruct(&c, 2).is_err());
}

#[test]
fn wrong_intermediate_is_an_outlier() {
    let mut behaviors = honest(6);
    behaviors[3] = Behavior::WrongIntermediate {
        offset: field().one(),
        apply_to: ApplyTo::Result,
    };
    let mut sim = simulation(5, 2, &[1; 6], behaviors, 7);
    sim.run();
    let r = intermediate(sim.ledger(), MessageKind::ResultShare);
    let report = detect_outliers(&r, 1).unwrap();
    assert_eq!(report.outliers, BTreeSet::from([4]));
    assert_eq!(report.consensus.to_signed(), 6);
}

#[test]
fn same_seed_same_ledger() {
    let run = |seed| {
        let mut sim = simulation(3, 2, &[1, -1, 1, 1], honest(4), seed);
        sim.run();
        sim.ledger().dump()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn workers_and_verifier_accept_the_same_voters() {
    let mut behaviors = honest(6);
    behaviors[0] = Behavior::PartialDistribution(BTreeSet::from([0]));
    behaviors[1] = Behavior::SyntacticGarbage;
    behaviors[4] = Behavior::DoubleVote(vec![(1, 3), (-1, 4)]);
    let mut sim = simulation(5, 2, &[1, 1, -1, 1, 1, -1], behaviors, 8);
    sim.run();
    let audit = verifier::audit(sim.ledger(), sim.params());
    let accepted: BTreeSet<usize> = audit.accepted.keys().copied().collect();
    assert_eq!(accepted, BTreeSet::from([2, 3, 4, 5]));
    assert_eq!(sim.worker_views().len(), 5);
    for (_, view) in sim.worker_views() {
        assert_eq!(view, &accepted);
    }
}

#[test]
fn initiator_never_sends_shares() {
    let mut behaviors = honest(5);
    behaviors[4] = Behavior::Impersonate(Roster::generate(Scheme::TestDouble, 5, 11).voters[0].id().clone());
    let mut sim = simulation(3, 2, &[1; 5], behaviors, 11);
    sim.run();
    let init = sim.roster().initiator.id().clone();
    let from_init = sim.ledger().query(&LedgerFilter::default().sender(&init));
    assert_eq!(from_init.len(), 1);
    assert_eq!(from_init[0].envelope().unwrap().kind, MessageKind::Init);
}

#[test]
fn workers_refuse_outside_their_phase() {
    let roster = Roster::generate(Scheme::TestDouble, 3, 12);
    let params = params_for(&roster, 3, 2);
    let mut ledger = Ledger::new();
    assert!(matches!(
        worker_act(&Behavior::Honest, &roster.voters[0], &params, &mut ledger, 5),
        Err(ProtocolError::WrongPhase { .. })
    ));
    let outsider = Roster::generate(Scheme::TestDouble, 0, 13).initiator;
    assert!(matches!(
        worker_act(&Behavior::Honest, &outsider, &params, &mut ledger, 10),
        Err(ProtocolError::NotAWorker(_))
    ));
}
