//! Simulators for randomized wireless link scheduling in quasi-metric decay
//! spaces and battery-constrained online broadcast in metric spaces, plus
//! the brute-force oracles that ground-truth both.
//!
//! Layout follows the problem:
//! - [`decayspace`]: quasi-metric construction, validation, balls,
//!   independence, bounded-growth diagnostics.
//! - [`sinrcore`]: SINR, power conditions, affectance and WAFF, gates,
//!   acknowledgement powers.
//! - [`conflict`]: annulus decompositions, independence predicates, WAFF
//!   bounds, dense balls, guards.
//! - [`spaids`]: the slotted scheduling and power selection engine.
//! - [`oams`]: the online broadcast engine with its Markov-chain analysis.
//! - [`oracle`]: exact small-instance references.
//! - [`harness`]: experiment plans, metrics, reports.
//! - [`instance_io`]: the versioned on-disk formats.

pub mod config;
pub mod conflict;
pub mod decayspace;
pub mod error;
pub mod harness;
pub mod instance_io;
pub mod oams;
pub mod oracle;
pub mod sinrcore;
pub mod spaids;

pub use config::ScenarioConfig;
pub use decayspace::{Instance, QuasiMetricSpace};
pub use error::{Error, Result};
pub use sinrcore::QuasiLink;
