//! Local validation: integrity, compliance audit, reconstruction, verdict.
//!
//! Every participant can run [`verify`] on its own ledger replica; equal
//! replicas give byte-identical [`VerdictReport::to_text`] output.

mod audit;
mod report;

use std::collections::BTreeSet;

pub use audit::{audit, AuditOutcome, Census, ComplianceRecord, InitStatus, Role, ViolationKind};
pub use report::{Robustness, Unavailable, Verdict, VerdictReport};

use crate::field_sss::{detect_outliers, reconstruct, FieldElement, Share, SharingError};
use crate::ledger::Ledger;
use crate::messages::ReferendumParams;

/// Record counts an honest run produces.
pub fn expected_census(params: &ReferendumParams) -> Census {
    let k = params.voters.len();
    let n = params.workers.len();
    Census {
        b: 1,
        s: k * n,
        r: n,
        c: n,
    }
}

/// Audit plus tally.
pub fn verify(ledger: &Ledger, params: &ReferendumParams) -> VerdictReport {
    let outcome = audit(ledger, params);
    tally(ledger, params, &outcome)
}

struct Combined {
    value: Result<FieldElement, Unavailable>,
    outliers: BTreeSet<u64>,
    no_redundancy: bool,
}

/// Consensus with outlier exclusion when shares are redundant, plain
/// interpolation when they are exactly enough.
fn combine(shares: &[Share], degree: usize) -> Combined {
    let mut out = Combined {
        value: Err(Unavailable::InsufficientShares {
            have: shares.len(),
            need: degree + 1,
        }),
        outliers: BTreeSet::new(),
        no_redundancy: false,
    };
    if shares.len() >= degree + 2 {
        match detect_outliers(shares, degree) {
            Ok(report) => {
                out.value = Ok(report.consensus);
                out.outliers = report.outliers;
            }
            Err(SharingError::Ambiguous { .. }) => out.value = Err(Unavailable::Ambiguous),
            Err(e) => unreachable!("audited shares are aligned: {e}"),
        }
    } else if shares.len() == degree + 1 {
        out.value = Ok(reconstruct(shares, degree).expect("audited shares are aligned"));
        out.no_redundancy = true;
    }
    out
}

pub fn tally(ledger: &Ledger, params: &ReferendumParams, audit: &AuditOutcome) -> VerdictReport {
    let t = params.threshold;
    let field = params.field();
    let integrity = ledger.verify_integrity();
    let accepted = audit.accepted_voters();
    let complete = audit.complete_workers();
    let mut audit = audit.clone();
    let mut notes = BTreeSet::new();
    let mut outlier_workers = BTreeSet::new();

    let mut values = Vec::new();
    for (shares, degree, note) in [
        (&audit.result_shares, t - 1, "no-redundancy(outcome)"),
        (&audit.checksum_shares, 2 * (t - 1), "no-redundancy(checksum)"),
    ] {
        let picked: Vec<Share> = complete.iter().map(|j| shares[j].1).collect();
        let combined = combine(&picked, degree);
        if combined.no_redundancy {
            notes.insert(note);
        }
        if !combined.outliers.is_empty() && 2 * (combined.outliers.len() + 1) > picked.len() {
            notes.insert("outlier-majority-risk");
        }
        let flagged: Vec<(usize, u64)> = complete
            .iter()
            .filter(|&&j| combined.outliers.contains(&params.share_affiliation[j]))
            .map(|&j| (j, shares[&j].0))
            .collect();
        values.push((combined.value, flagged));
    }
    for (_, flagged) in &values {
        for &(j, seq) in flagged {
            let id = &params.workers[j];
            outlier_workers.insert(id.clone());
            audit.record_mut(Role::Worker, id).flag(ViolationKind::Outlier, Some(seq));
        }
    }
    let checksum = values[1].0;
    let outcome = values[0].0;

    let checksum_valid = checksum == Ok(field.element(accepted as u64));
    let outcome = outcome.map(|r| r.to_signed());
    let census_expected = expected_census(params);
    if audit.census != census_expected {
        notes.insert("census-deviation");
    }

    let mut invalid = BTreeSet::new();
    let mut inconclusive = BTreeSet::new();
    if integrity.is_err() {
        invalid.insert("ledger-integrity");
    }
    if audit.init != InitStatus::Matches {
        invalid.insert("census-mismatch");
    }
    if checksum.is_ok() && !checksum_valid {
        invalid.insert("checksum-mismatch");
    }
    if let Ok(r) = outcome {
        if checksum_valid && r.unsigned_abs() > accepted as u64 {
            invalid.insert("outcome-bound");
        }
    }
    match outcome {
        Err(Unavailable::Ambiguous) => inconclusive.insert("outcome-ambiguous"),
        Err(_) => inconclusive.insert("outcome-unavailable"),
        Ok(_) => false,
    };
    match checksum {
        Err(Unavailable::Ambiguous) => inconclusive.insert("checksum-ambiguous"),
        Err(_) => inconclusive.insert("checksum-unavailable"),
        Ok(_) => false,
    };
    let overall = if !invalid.is_empty() {
        Verdict::Invalid(invalid)
    } else if !inconclusive.is_empty() {
        Verdict::Inconclusive(inconclusive)
    } else {
        Verdict::Valid
    };

    VerdictReport {
        ledger_integrity: integrity,
        accepted_voters: accepted,
        outcome,
        checksum,
        checksum_valid,
        outlier_workers,
        overall,
        notes,
        compliance: audit.compliance.into_values().collect(),
        unattributed: audit.unattributed,
        census_expected,
        census_actual: audit.census,
        robustness: Robustness::of(params),
        labels: report::labels_for(params),
        modulus: params.modulus,
        threshold: t,
    }
}
