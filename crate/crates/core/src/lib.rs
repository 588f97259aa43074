//! Multicarrier (OFDM / MCPC) integrated sensing and communication toolkit.
//!
//! The crate simulates radar and communication observations on the
//! fast-time/slow-time grid, runs range-Doppler processing and detection,
//! mitigates or exploits hardware impairments (ICI, phase noise,
//! self-interference), evaluates sensing and communication KPIs, and solves
//! subcarrier power/assignment problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod channel;
pub mod cli;
pub mod dft;
pub mod enhance;
pub mod error;
pub mod kpi;
pub mod model;
pub mod phase_noise;
pub mod radar_rx;
pub mod rng;
pub mod waveform;

pub use error::{IsacError, Result};
pub use model::{
    array_steering, cfo_phase_matrix, freq_steering, max_phase_excursion, time_steering, ArrayConfig, FrameConfig,
    PhaseDiagonal, PowerGrid, SymbolGrid, SyncOffsets, Target, SPEED_OF_LIGHT,
};
