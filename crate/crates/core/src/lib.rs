//! Ledger-based referendum: Shamir-shared ballots tallied by a committee of
//! workers, with a sum-of-squares checksum that any holder of the ledger can
//! check.
//!
//! Start with [`scenario::run`] for a whole referendum, or [`verifier::verify`]
//! to judge an existing ledger.

pub mod crypto;
pub mod field_sss;
pub mod ledger;
pub mod messages;
pub mod participants;
pub mod scenario;
pub mod verifier;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sharing.md")]
    mod sharing {}
    #[doc = include_str!("../../../book/src/ledger.md")]
    mod ledger {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
