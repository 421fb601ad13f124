//! Robust secure transmit beamforming and RIS reflection design for a multiuser
//! MISO downlink with an eavesdropper, under transceiver distortion and RIS
//! phase errors.
//!
//! The crate provides the channel model ([`scenario`], [`himodel`]), rate
//! evaluation ([`rate`]), the fractional-programming lower bound ([`fp`],
//! [`quadform`]), two alternating optimizers ([`socp::bcd_socp`] and
//! [`mm::bcd_mm`]) and a Monte-Carlo experiment runner ([`harness`]).

pub mod error;
pub mod fp;
pub mod harness;
pub mod himodel;
pub mod linalg;
pub mod mm;
pub mod quadform;
pub mod rate;
pub mod rng;
pub mod scenario;
pub mod socp;
pub mod trace;

pub use error::{Error, Result};
