//! Baseband simulator for the BLE 5 physical and link layers, with a
//! Monte Carlo packet-error-rate harness.

pub mod bits;
pub mod channel;
pub mod coded;
pub mod csa;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod iqfile;
pub mod modem;
pub mod packet;
pub mod phy;
pub mod rx;
pub mod seed;

pub use bits::BitVector;
pub use error::{Error, Result};
pub use modem::IqFrame;
pub use phy::{ChannelIndex, CodingScheme, PhyMode};
