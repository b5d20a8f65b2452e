//! Post-processing of exact-model output: Wigner function, packet detection
//! in `P_n` and the Fourier spectrum of `⟨a†a⟩`.

pub mod packets;
pub mod peaks;
pub mod spectrum;
pub mod wigner;

pub use packets::{detect_packets, Packet, PacketOptions, PacketReport};
pub use spectrum::{centred_power, peak_report, spectrum, PeakOptions, PeakReport, Spectrum, Window};
pub use wigner::{wigner, DEFAULT_NORMALIZATION_TOLERANCE, wigner_max_track, wigner_point, GridSpec, TrackOptions, WignerGrid};
