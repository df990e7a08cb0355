//! GFDM waveform simulation, receiver analytics, adjacent-channel interference
//! modeling and interference-constrained power allocation for a cognitive
//! secondary user.
//!
//! The sample path (filters, modulation, channel, equalization, periodogram)
//! is generic over [`Real`]; the analytic link metrics, spectrum integrals
//! and the allocator work in `f64`.

pub mod allocator;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod link;
pub mod num;
pub mod qam;
pub mod seed;
pub mod spectrum;
pub mod waveform;

pub use config::{FilterKind, GfdmConfig};
pub use error::{Error, Result};
pub use num::Real;
pub use waveform::{
    add_cp, demodulate, modulate, remove_cp, PowerAllocation, ReceiverKind, SymbolFrame,
};

pub type PrototypeFilter64 = waveform::PrototypeFilter<f64>;
pub type PrototypeFilter32 = waveform::PrototypeFilter<f32>;
pub type ModulationMatrix64 = waveform::ModulationMatrix<f64>;
pub type ModulationMatrix32 = waveform::ModulationMatrix<f32>;
pub type ReceiverMatrix64 = waveform::ReceiverMatrix<f64>;
pub type ReceiverMatrix32 = waveform::ReceiverMatrix<f32>;
pub type SymbolFrame64 = waveform::SymbolFrame<f64>;
pub type SymbolFrame32 = waveform::SymbolFrame<f32>;
pub type CMatrix64 = linalg::CMatrix<f64>;
