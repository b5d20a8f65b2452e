//! Packet detection in a photon-number distribution.

use serde::Serialize;

use super::peaks::find_peaks;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketOptions {
    /// Moving-average width (samples).
    pub width: usize,
    pub min_prominence: f64,
    pub min_separation: usize,
}

impl Default for PacketOptions {
    fn default() -> Self {
        Self { width: 3, min_prominence: 0.005, min_separation: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Packet {
    /// Mean photon number over the packet's region.
    pub center: f64,
    /// Index of the smoothed maximum.
    pub peak: usize,
    pub prominence: f64,
    pub mass: f64,
    /// Inclusive photon-number range assigned to the packet.
    pub lo: usize,
    pub hi: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PacketReport {
    pub packets: Vec<Packet>,
    /// Probability not assigned to any packet.
    pub residue: f64,
}

/// Centred moving average; windows are truncated at the ends.
pub fn smooth(p: &[f64], width: usize) -> Vec<f64> {
    let w = width.max(1);
    let (before, after) = ((w - 1) / 2, w / 2);
    (0..p.len())
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after).min(p.len() - 1);
            p[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Finds packets in `p` and splits the distribution between them at the
/// smoothed minima separating neighbouring peaks.
pub fn detect_packets(p: &[f64], opts: &PacketOptions) -> PacketReport {
    if p.is_empty() {
        return PacketReport { packets: Vec::new(), residue: 0.0 };
    }
    let s = smooth(p, opts.width);
    let peaks = find_peaks(&s, opts.min_prominence, opts.min_separation);
    if peaks.is_empty() {
        return PacketReport { packets: Vec::new(), residue: p.iter().sum() };
    }
    let mut cuts = Vec::with_capacity(peaks.len() + 1);
    cuts.push(0);
    for pair in peaks.windows(2) {
        let (a, b) = (pair[0].index, pair[1].index);
        let mut best = a + 1;
        for i in a + 1..b {
            if s[i] < s[best] {
                best = i;
            }
        }
        cuts.push(best);
    }
    cuts.push(p.len());
    let packets = peaks
        .iter()
        .enumerate()
        .map(|(k, pk)| {
            let (lo, end) = (cuts[k], cuts[k + 1]);
            let mass: f64 = p[lo..end].iter().sum();
            let first: f64 = p[lo..end].iter().enumerate().map(|(i, x)| (lo + i) as f64 * x).sum();
            Packet {
                center: if mass > 0.0 { first / mass } else { pk.index as f64 },
                peak: pk.index,
                prominence: pk.prominence,
                mass,
                lo,
                hi: end - 1,
            }
        })
        .collect();
    PacketReport { packets, residue: 0.0 }
}
