//! Declarative scenarios: build participants from a config, run all four
//! phases, and verify the resulting ledger.

mod config;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

pub use config::{
    BallotConfig, BehaviorConfig, ConfigError, DeadlineConfig, Diagnostic, ScenarioConfig, TamperConfig,
    BEHAVIOR_KINDS,
};

use crate::field_sss::PrimeField;
use crate::ledger::{tamper_dump, Checkpoint, IntegrityViolation, Ledger};
use crate::messages::{ReferendumParams, Tick};
use crate::participants::{ApplyTo, Behavior, Roster, Simulation};
use crate::verifier::{verify, VerdictReport};

/// Exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 1;

/// Keys and public parameters derived from a config and its seed.
pub fn prepare(config: &ScenarioConfig) -> Result<(ReferendumParams, Roster), ConfigError> {
    config.validate()?;
    let roster = Roster::generate(config.crypto, config.voters, config.seed);
    let voters: Vec<_> = roster.voters.iter().map(|kp| kp.id().clone()).collect();
    let params = ReferendumParams {
        initiator: roster.initiator.id().clone(),
        workers: config.worker_indices().iter().map(|&i| voters[i].clone()).collect(),
        voters,
        share_affiliation: (1..=config.workers as u64).collect(),
        question: config.question.clone(),
        yes_label: "yes".into(),
        no_label: "no".into(),
        deadlines: config.deadlines.into(),
        threshold: config.threshold,
        modulus: config.modulus,
    };
    params.validate().map_err(|e| {
        ConfigError::Invalid(vec![Diagnostic {
            field: "params".into(),
            message: e.to_string(),
        }])
    })?;
    Ok((params, roster))
}

fn behavior_of(behavior: &BehaviorConfig, field: PrimeField, roster: &Roster) -> Behavior {
    match behavior.kind.as_str() {
        "honest" => Behavior::Honest,
        "inactive" => Behavior::Inactive,
        "partial-distribution" => {
            Behavior::PartialDistribution(behavior.workers.iter().flatten().copied().collect::<BTreeSet<_>>())
        }
        "syntactic-garbage" => Behavior::SyntacticGarbage,
        "impersonate" => Behavior::Impersonate(roster.voters[behavior.target.expect("validated")].id().clone()),
        "invalid-vote" => Behavior::InvalidVote(field.from_i64(behavior.value.expect("validated"))),
        "wrong-intermediate" => Behavior::WrongIntermediate {
            offset: field.from_i64(behavior.offset.expect("validated")),
            apply_to: match behavior.apply_to.as_deref() {
                Some("c") => ApplyTo::Checksum,
                Some("both") => ApplyTo::Both,
                _ => ApplyTo::Result,
            },
        },
        "double-vote" => Behavior::DoubleVote(
            behavior.ballots
                .iter()
                .flatten()
                .map(|b| (b.value, b.tick))
                .collect(),
        ),
        other => unreachable!("validated kind {other}"),
    }
}

/// A ready-to-run simulation for `config`.
pub fn build(config: &ScenarioConfig) -> Result<Simulation, ConfigError> {
    let (params, roster) = prepare(config)?;
    let field = params.field();
    let k = config.voters;
    let mut behaviors = vec![Behavior::Honest; k];
    let mut cast_at = vec![params.deadlines.q12 + 1; k];
    for behavior in &config.behaviors {
        behaviors[behavior.participant] = behavior_of(behavior, field, &roster);
        if let Some(tick) = behavior.tick {
            cast_at[behavior.participant] = tick;
        }
    }
    Ok(Simulation::new(params, roster, config.votes.clone(), behaviors, cast_at, config.seed))
}

/// Everything a run produces.
pub struct RunOutput {
    pub params: ReferendumParams,
    pub ledger: Ledger,
    pub report: VerdictReport,
    pub trace: String,
    /// Voter indices each active worker summed, by worker position.
    pub worker_views: Vec<(usize, BTreeSet<usize>)>,
}

impl RunOutput {
    pub fn dump(&self) -> String {
        self.ledger.dump()
    }

    pub fn exit_code(&self) -> i32 {
        self.report.exit_code()
    }

    /// Writes `ledger.dump`, `report.txt` and `trace.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ledger.dump"), self.dump())?;
        std::fs::write(dir.join("report.txt"), self.report.to_text())?;
        std::fs::write(dir.join("trace.txt"), &self.trace)
    }
}

/// Plays every phase, applies configured tampering, and verifies.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput, ConfigError> {
    let started = Instant::now();
    let mut sim = build(config)?;
    let mut tamper_log: Vec<(Tick, String)> = Vec::new();
    sim.run_with(|tick, ledger| {
        for tamper in config.tampers.iter().filter(|t| t.after_tick == tick) {
            let mutation = tamper.to_mutation().expect("validated");
            *ledger = Ledger::load(&tamper_dump(&ledger.dump(), tamper.seq, mutation));
            tamper_log.push((tick, format!("tamper {} at seq {}", tamper.mutation, tamper.seq)));
        }
    });
    let params = sim.params().clone();
    let report = verify(sim.ledger(), &params);

    let mut trace = String::new();
    let _ = writeln!(
        trace,
        "# seed={} k={} n={} t={} p={} crypto={}",
        config.seed, config.voters, config.workers, config.threshold, config.modulus, config.crypto
    );
    let mut lines: Vec<(Tick, usize, String)> = sim
        .trace()
        .iter()
        .map(|e| (e.tick, 0, e.to_string()))
        .collect();
    lines.extend(tamper_log.into_iter().map(|(tick, line)| (tick, 1, format!("tick {tick:>4}  {line}"))));
    lines.sort_by_key(|(tick, order, _)| (*tick, *order));
    for (_, _, line) in lines {
        let _ = writeln!(trace, "{line}");
    }
    let checkpoint = sim.ledger().checkpoint();
    let _ = writeln!(trace, "records = {}", checkpoint.len);
    let _ = writeln!(trace, "head = {}", checkpoint.head);
    let _ = writeln!(trace, "overall = {}", report.overall);
    let _ = writeln!(trace, "elapsed_ms = {}", started.elapsed().as_millis());

    let worker_views = sim.worker_views().to_vec();
    Ok(RunOutput {
        params,
        ledger: sim.into_ledger(),
        report,
        trace,
        worker_views,
    })
}

/// Verifies an existing dump against the parameters `config` implies.
pub fn replay(dump: &str, config: &ScenarioConfig) -> Result<VerdictReport, ConfigError> {
    let (params, _) = prepare(config)?;
    Ok(verify(&Ledger::load(dump), &params))
}

/// Integrity only.
pub fn verify_dump(dump: &str) -> Result<Checkpoint, IntegrityViolation> {
    let ledger = Ledger::load(dump);
    ledger.verify_integrity()?;
    Ok(ledger.checkpoint())
}
