use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::crypto::{gen_keypair, KeyPair, Scheme};
use crate::ledger::Ledger;
use crate::messages::{ReferendumParams, Tick};

use super::actions::{initiator_publish, voter_act, worker_act};
use super::Behavior;

const KEY_STREAM: u64 = 0;
const PROTOCOL_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Key pairs for one referendum, derived from a seed.
#[derive(Debug)]
pub struct Roster {
    pub initiator: KeyPair,
    pub voters: Vec<KeyPair>,
}

impl Roster {
    pub fn generate(scheme: Scheme, voters: usize, seed: u64) -> Self {
        let mut rng = stream(seed, KEY_STREAM);
        let initiator = gen_keypair(scheme, &mut rng);
        let voters = (0..voters).map(|_| gen_keypair(scheme, &mut rng)).collect();
        Self { initiator, voters }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Actor {
    Initiator,
    Voter(usize),
    /// By worker position.
    Worker(usize),
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::Initiator => f.write_str("init"),
            Actor::Voter(i) => write!(f, "v{i:03}"),
            Actor::Worker(j) => write!(f, "w{j:03}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub tick: Tick,
    pub actor: Actor,
    pub action: String,
    pub seqs: Vec<u64>,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let seqs: Vec<String> = self.seqs.iter().map(u64::to_string).collect();
        write!(
            f,
            "tick {:>4}  {}  {}  seqs [{}]",
            self.tick,
            self.actor,
            self.action,
            seqs.join(",")
        )
    }
}

/// A complete referendum: every participant, one ledger, one logical clock.
///
/// Each tick, every actor with something to do acts once, in an order
/// shuffled from the seed.
pub struct Simulation {
    params: ReferendumParams,
    roster: Roster,
    votes: Vec<i64>,
    behaviors: Vec<Behavior>,
    cast_at: Vec<Tick>,
    ledger: Ledger,
    protocol_rng: ChaCha20Rng,
    shuffle_rng: ChaCha20Rng,
    published: bool,
    tick: Tick,
    trace: Vec<TraceEntry>,
    worker_views: Vec<(usize, BTreeSet<usize>)>,
}

impl Simulation {
    /// `votes`, `behaviors` and `cast_at` are indexed by voter.
    ///
    /// # Panics
    ///
    /// If the per-voter vectors do not match the roster.
    pub fn new(
        params: ReferendumParams,
        roster: Roster,
        votes: Vec<i64>,
        behaviors: Vec<Behavior>,
        cast_at: Vec<Tick>,
        seed: u64,
    ) -> Self {
        let k = roster.voters.len();
        assert!(votes.len() == k && behaviors.len() == k && cast_at.len() == k);
        Self {
            params,
            roster,
            votes,
            behaviors,
            cast_at,
            ledger: Ledger::new(),
            protocol_rng: stream(seed, PROTOCOL_STREAM),
            shuffle_rng: stream(seed, SHUFFLE_STREAM),
            published: false,
            tick: 0,
            trace: Vec::new(),
            worker_views: Vec::new(),
        }
    }

    pub fn params(&self) -> &ReferendumParams {
        &self.params
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    /// Swaps in another ledger, e.g. a tampered copy.
    pub fn replace_ledger(&mut self, ledger: Ledger) {
        self.ledger = ledger;
    }

    pub fn into_ledger(self) -> Ledger {
        self.ledger
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    /// Voter indices each active worker summed, by worker position.
    pub fn worker_views(&self) -> &[(usize, BTreeSet<usize>)] {
        &self.worker_views
    }

    /// The next tick to be played.
    pub fn tick(&self) -> Tick {
        self.tick
    }

    /// The last tick at which anyone has something to do.
    pub fn last_tick(&self) -> Tick {
        let voter_max = self
            .behaviors
            .iter()
            .zip(&self.cast_at)
            .flat_map(|(b, &at)| b.voter_ticks(at))
            .max()
            .unwrap_or(0);
        voter_max.max(self.params.deadlines.q34)
    }

    fn due(&self, tick: Tick) -> Vec<Actor> {
        let mut due = Vec::new();
        if !self.published && tick == self.params.deadlines.q12 {
            due.push(Actor::Initiator);
        }
        for (i, b) in self.behaviors.iter().enumerate() {
            if b.voter_ticks(self.cast_at[i]).contains(&tick) {
                due.push(Actor::Voter(i));
            }
        }
        if tick == self.params.deadlines.q23 {
            for (j, w) in self.params.workers.iter().enumerate() {
                let i = self.params.voter_index(w).expect("workers are voters");
                if self.behaviors[i].worker_active() {
                    due.push(Actor::Worker(j));
                }
            }
        }
        due
    }

    /// Plays one tick.
    pub fn step(&mut self) {
        let tick = self.tick;
        let mut due = self.due(tick);
        due.shuffle(&mut self.shuffle_rng);
        for actor in due {
            self.act(actor, tick);
        }
        self.tick += 1;
    }

    fn act(&mut self, actor: Actor, tick: Tick) {
        let (action, seqs) = match actor {
            Actor::Initiator => {
                let seq = initiator_publish(&self.params, &self.roster.initiator, &mut self.ledger, tick)
                    .expect("scheduled exactly once at q12");
                self.published = true;
                ("publish b".to_string(), vec![seq])
            }
            Actor::Voter(i) => {
                let behavior = &self.behaviors[i];
                let seqs = voter_act(
                    self.votes[i],
                    behavior,
                    &self.roster.voters[i],
                    &self.params,
                    &mut self.ledger,
                    tick,
                    &mut self.protocol_rng,
                );
                (format!("{} s x{}", behavior.name(), seqs.len()), seqs)
            }
            Actor::Worker(j) => {
                let i = self.params.voter_index(&self.params.workers[j]).expect("workers are voters");
                let behavior = &self.behaviors[i];
                let done = worker_act(behavior, &self.roster.voters[i], &self.params, &mut self.ledger, tick)
                    .expect("scheduled at q23 for a registered worker");
                let action = format!("{} r,c over {} voters", behavior.name(), done.accepted.len());
                self.worker_views.push((j, done.accepted));
                (action, done.seqs)
            }
        };
        self.trace.push(TraceEntry {
            tick,
            actor,
            action,
            seqs,
        });
    }

    /// Plays every remaining tick up to [`Simulation::last_tick`], calling
    /// `after_tick` after each.
    pub fn run_with(&mut self, mut after_tick: impl FnMut(Tick, &mut Ledger)) {
        while self.tick <= self.last_tick() {
            let tick = self.tick;
            self.step();
            after_tick(tick, &mut self.ledger);
        }
    }

    pub fn run(&mut self) {
        self.run_with(|_, _| {});
    }
}
