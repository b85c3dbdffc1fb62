//! Coded caching with Ruzsa-Szemerédi graphs.
//!
//! - [`rsgraph`]: construction and validation of induced-matching
//!   decompositions, and the scheme parameters they give.
//! - [`codec`]: placement, XOR delivery and decoding for such a scheme.
//! - [`decentral`]: virtual-user pools with two-choice placement, join/leave
//!   dynamics and round-based delivery.
//! - [`ballsbins`]: the static and adversarial two-choice processes.
//! - [`harness`]: seeded experiments and reports behind the `rscache` CLI.

pub mod ballsbins;
pub mod codec;
pub mod combinatorics;
pub mod decentral;
pub mod harness;
pub mod rsgraph;
