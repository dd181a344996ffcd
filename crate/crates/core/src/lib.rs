//! Coverage-gap auditing for network intrusion detection datasets.
//!
//! The library walks a five-phase pipeline:
//!
//! 1. [`stix`] — parse the Enterprise and ICS ATT&CK STIX 2.1 bundles into a
//!    merged, deduplicated object graph.
//! 2. [`threat`] — extract the techniques used by a configured list of threat
//!    entities (groups, software, campaigns) and count occurrences.
//! 3. [`risk`] — turn occurrence counts into frequency scores and weighted
//!    risk values for prioritization.
//! 4. [`detect`] — classify techniques by network detectability from their
//!    documented data sources and filter to the network-observable set.
//! 5. [`kb`] + [`assess`] + [`report`] — load dataset profiles, assess every
//!    (technique, dataset) pair against five coverage criteria, reconcile
//!    assessors conservatively, and compute coverage/gap/complementarity
//!    analytics.
//!
//! [`pipeline`] orchestrates the phases behind the `auditor` CLI, persisting
//! every intermediate artifact as JSON so any phase can be re-run from its
//! predecessor's output.

pub mod assess;
pub mod detect;
pub mod kb;
pub mod pipeline;
pub mod report;
pub mod risk;
pub mod stix;
pub mod threat;
