//! Simulator of projective measurement in which a discrete meter couples,
//! through a von Neumann-type interaction, to the coarse-grained Goldstone-mode
//! phase space of a Bose–Einstein condensate.
//!
//! The pieces, bottom-up:
//!
//! - [`statespace`]: meter states, inner products, diagonal unitaries.
//! - [`sectors`]: compartment grid of the condensate coordinate and velocity.
//! - [`composite`]: the direct-sum composite state and its phase evolution.
//! - [`decoherence`]: superselected observables and the decoherence verdict.
//! - [`eventreading`]: gauge events, the equivalence test, collapse.
//! - [`ensemble`]: many copies through the full two-stage measurement.
//! - [`cli`]: scenario files, reports and the `gm` command-line front end.

// Range guards are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod composite;
pub mod decoherence;
pub mod ensemble;
pub mod error;
pub mod eventreading;
pub mod exec;
pub mod sectors;
pub mod statespace;

pub use error::{Error, Result};
pub use exec::Execution;
