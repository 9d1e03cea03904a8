//! Beacon-timing modem and channel simulator.
//!
//! Symbols are carried in the transmission timing of periodic beacon frames:
//! a sender shifts its beacons by whole shift units, and a receiver that can
//! only sense channel energy recovers the shift by folding a binary RSSI trace
//! at the beacon period and locating the column with the largest fold sum.
//!
//! The crate is split into:
//!
//! * [`signal`]: binary RSSI traces, quantization, packet-edge filtering, trace files.
//! * [`modem`]: synchronous and asynchronous modulation/demodulation via folding.
//! * [`channel`]: stochastic rendering of schedules plus background traffic.
//! * [`multiplex`]: coprime interval assignment and concurrent demultiplexing.
//! * [`harness`]: Monte-Carlo sweeps, throughput/overhead reports, CSV output.

pub mod channel;
pub mod harness;
pub mod modem;
pub mod multiplex;
pub mod signal;

mod error;

pub use error::{Error, Result};

pub use channel::{ChannelModel, DutyCycleSchedule, PacketLengths};
pub use modem::{
    BeaconSchedule, BitsPerSymbol, Demodulated, FoldSums, IntervalConfig, Symbol, Variant,
};
pub use multiplex::{DemuxMode, IntervalAssignment, Receiver, SenderId};
pub use signal::{QuantizerConfig, RssiTrace};
