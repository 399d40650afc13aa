//! Spread unsourced random access over quasi-static Rayleigh-fading
//! massive MIMO: shared codebook, per-user encoder, channel model, the
//! iterative receiver and the Monte Carlo trial logic.
//!
//! The crate is `no_std` and only needs `alloc`. IO, parallel campaigns and
//! the command-line front end live in the `fasura` crate.
#![no_std]

extern crate alloc;

pub mod codebook;
pub mod config;
pub mod harness;
pub mod channel;
pub mod linalg;
pub mod polar;
pub mod receiver;
pub mod rng;
pub mod transmitter;

pub use channel::{sigma2_from_ebn0, ChannelRealization, Observation};
pub use codebook::{phi, phi_inverse, Codebook, SeqIndex};
pub use config::{SymbolPrior, SystemConfig};
pub use harness::{find_required_ebn0, CampaignStats, TrialResult, TrialSetup};
pub use num_complex::Complex64;
pub use polar::PolarSpec;
pub use receiver::{decode_all, Receiver, ReceiverOptions, ReceiverOutput};
pub use transmitter::{encode_message, Message, TransmitSignal};
