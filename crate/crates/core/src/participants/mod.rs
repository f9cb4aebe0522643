//! Initiator, voter and worker roles, honest or adversarial, plus the
//! round-based scheduler that drives them over a shared ledger.

mod actions;
mod scheduler;

use std::collections::BTreeSet;
use std::fmt;

pub use actions::{initiator_publish, voter_act, worker_act, WorkerAction};
pub use scheduler::{Actor, Roster, Simulation, TraceEntry};

use crate::crypto::ParticipantId;
use crate::field_sss::FieldElement;
use crate::messages::{Deadlines, Tick};

/// Which intermediate share a dishonest worker corrupts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApplyTo {
    Result,
    Checksum,
    Both,
}

impl ApplyTo {
    pub fn result(self) -> bool {
        matches!(self, ApplyTo::Result | ApplyTo::Both)
    }

    pub fn checksum(self) -> bool {
        matches!(self, ApplyTo::Checksum | ApplyTo::Both)
    }
}

/// How a participant behaves for a whole run.
///
/// Voter-side deviations leave the participant's worker role honest and vice
/// versa; `Inactive` silences both roles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Behavior {
    Honest,
    Inactive,
    /// Sends shares only to these worker positions.
    PartialDistribution(BTreeSet<usize>),
    /// Sends one signed but undecodable share message to every worker.
    SyntacticGarbage,
    /// Votes honestly, then sends a second full share set under `target`'s id.
    Impersonate(ParticipantId),
    /// Shares this value instead of the chosen vote.
    InvalidVote(FieldElement),
    /// Adds `offset` to the intermediate share(s) it publishes.
    WrongIntermediate { offset: FieldElement, apply_to: ApplyTo },
    /// A full share set of each listed vote at each listed tick.
    DoubleVote(Vec<(i64, Tick)>),
}

impl Behavior {
    pub fn name(&self) -> &'static str {
        match self {
            Behavior::Honest => "honest",
            Behavior::Inactive => "inactive",
            Behavior::PartialDistribution(_) => "partial-distribution",
            Behavior::SyntacticGarbage => "syntactic-garbage",
            Behavior::Impersonate(_) => "impersonate",
            Behavior::InvalidVote(_) => "invalid-vote",
            Behavior::WrongIntermediate { .. } => "wrong-intermediate",
            Behavior::DoubleVote(_) => "double-vote",
        }
    }

    /// Ticks at which the voter role appends something, given its default
    /// casting tick.
    pub fn voter_ticks(&self, cast_at: Tick) -> Vec<Tick> {
        match self {
            Behavior::Inactive => Vec::new(),
            Behavior::DoubleVote(plan) => {
                let ticks: BTreeSet<Tick> = plan.iter().map(|&(_, t)| t).collect();
                ticks.into_iter().collect()
            }
            _ => vec![cast_at],
        }
    }

    pub fn worker_active(&self) -> bool {
        !matches!(self, Behavior::Inactive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("the initiator has already published")]
    DuplicatePublish,
    #[error("init must be published at tick {expected}, not {got}")]
    WrongTick { expected: Tick, got: Tick },
    #[error("{0:?} is not a registered worker")]
    NotAWorker(ParticipantId),
    #[error("tick {tick} is outside the {phase} phase")]
    WrongPhase { tick: Tick, phase: Phase },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    PreInit,
    VoteSubmission,
    IntermediateComputation,
    Determination,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::PreInit => "pre-init",
            Phase::VoteSubmission => "vote-submission",
            Phase::IntermediateComputation => "intermediate-computation",
            Phase::Determination => "determination",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhaseClock {
    pub current_tick: Tick,
    pub deadlines: Deadlines,
}

impl PhaseClock {
    pub fn new(deadlines: Deadlines) -> Self {
        Self {
            current_tick: 0,
            deadlines,
        }
    }

    pub fn phase_at(&self, tick: Tick) -> Phase {
        let d = self.deadlines;
        if tick < d.q12 {
            Phase::PreInit
        } else if tick < d.q23 {
            Phase::VoteSubmission
        } else if tick < d.q34 {
            Phase::IntermediateComputation
        } else {
            Phase::Determination
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase_at(self.current_tick)
    }

    pub fn advance(&mut self) -> Tick {
        self.current_tick += 1;
        self.current_tick
    }
}

#[cfg(test)]
mod tests;
