//! Outage analysis of space-time network coded relaying with overhearing
//! amplify-and-forward relays (STNC-OHAF), compared against STNC-AF and
//! TDMA with overhearing.
//!
//! - [`model`]: topology, powers, schemes, slot counts and outage thresholds
//! - [`fading`]: seeded Rayleigh channel draws
//! - [`snr`]: effective-SNR recursion of the relay cascade
//! - [`closedform`]: high-SNR outage approximation and related formulas
//! - [`montecarlo`]: parallel, reproducible outage estimation and sweeps
//! - [`baseband`]: signal-level chain used to check the SNR recursion
//! - [`experiment`]: batch experiments producing CSV and run manifests

pub mod baseband;
pub mod closedform;
mod error;
pub mod experiment;
pub mod fading;
pub mod model;
pub mod montecarlo;
pub mod snr;
pub mod stream;

pub use error::{Error, Result};
pub use model::{Link, NetworkTopology, Node, PowerAllocation, Scheme};
