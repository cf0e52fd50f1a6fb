//! Zero-crossing precoding for the multiuser MIMO downlink with 1-bit
//! quantization and temporal oversampling at the receivers.
//!
//! The crate is organized bottom-up:
//!
//! - [`signal`]: pulses, the combined waveform and the structural matrices
//!   `V`, `U`, `G_Tx`, `G_Rx` of the discrete-time block model.
//! - [`zc`]: the zero-crossing alphabet, output pattern construction, Gray
//!   mapping and the backward-mapping detector.
//! - [`qcqp`]: a barrier interior-point solver for the epigraph-form
//!   max-min-margin program, plus a slow independent reference solver.
//! - [`precoder`]: assembles the program for a target sign pattern and
//!   extracts the transmit block.
//! - [`channel`]: random channels, spatial zero forcing, noise calibration
//!   and the quantized receive path.
//! - [`sim`]: experiment campaigns (margin vs bandwidth, BER vs SNR, QPSK
//!   reference, spectral estimate).

pub mod channel;
pub mod error;
pub mod precoder;
pub mod qcqp;
pub mod rng;
pub mod signal;
pub mod sim;
pub mod zc;

pub use error::{Error, Result};
