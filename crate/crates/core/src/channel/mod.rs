//! Propagation and interference impairments.
//!
//! All impairments are pure functions of their inputs and an explicit seed.

mod awgn;
mod fading;
mod impair;
mod wlan;

pub use awgn::{add_noise, awgn};
pub use fading::{fade, ChannelProfile, ProfileKind, Tap};
pub use impair::{apply_cfo, apply_dc};
pub use wlan::{mix, mix_with_gain, wlan_interferer, wlan_interferer_in_band, InterfererConfig};
