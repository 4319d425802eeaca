//! Certification of non-entanglement-breaking quantum channels from
//! prepare-and-measure statistics.
//!
//! The crate is organised bottom-up:
//!
//! * [`qmat`] dense complex matrices, states, effects and measurements;
//! * [`channel`] Kraus channels, Choi states and measure-and-prepare channels;
//! * [`pmtest`] prepare-and-measure tests of type I and II, witness operators
//!   and the witness-to-test compiler;
//! * [`bounds`] entanglement-breaking bounds for the device-dependent,
//!   measurement-device-independent and semi-device-independent scenarios;
//! * [`depol`] closed-form results for the depolarizing channel;
//! * [`cli`] the `nebwit` command-line driver.

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod depol;
mod error;
pub mod pmtest;
pub mod qmat;

pub use error::{Error, Result};
