//! Transmission footprints and the overlap weights used in SINR.

use serde::{Deserialize, Serialize};

use crate::access::{Footprint, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resource {
    /// Whole channel for the frame's airtime.
    Channel(Interval),
    /// Sidelink subchannels over one or more TTIs.
    Grid(Footprint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionEvent {
    pub tx_id: u32,
    pub start_ns: u64,
    pub duration_ns: u64,
    pub resource: Resource,
    pub payload_bytes: u32,
    pub seq: u64,
}

/// Share of `event`'s resources that `other` occupies.
pub fn overlap_fraction(event: &TransmissionEvent, other: &TransmissionEvent) -> f64 {
    match (event.resource, other.resource) {
        (Resource::Channel(a), Resource::Channel(b)) => a.overlap_fraction(&b),
        (Resource::Grid(a), Resource::Grid(b)) => a.shared_cells(&b) as f64 / a.cells() as f64,
        _ => 0.0,
    }
}

/// Every other event that overlaps `event`, with its overlap fraction.
pub fn interference_set(event: &TransmissionEvent, all_events: &[TransmissionEvent]) -> Vec<(u32, f64)> {
    all_events
        .iter()
        .filter(|o| **o != *event)
        .filter_map(|o| {
            let f = overlap_fraction(event, o);
            (f > 0.0).then_some((o.tx_id, f))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(id: u32, s: u64, e: u64) -> TransmissionEvent {
        TransmissionEvent {
            tx_id: id,
            start_ns: s,
            duration_ns: e - s,
            resource: Resource::Channel(Interval::new(s, e)),
            payload_bytes: 350,
            seq: 0,
        }
    }

    fn grid(id: u32, tti: u64, sub: u32, n: u32) -> TransmissionEvent {
        TransmissionEvent {
            tx_id: id,
            start_ns: tti * 1_000_000,
            duration_ns: 1_000_000,
            resource: Resource::Grid(Footprint { tti, n_tti: 1, subchannel: sub, n_subch: n }),
            payload_bytes: 350,
            seq: 0,
        }
    }

    #[test]
    fn examples() {
        let a = wave(0, 0, 512);
        assert!(interference_set(&a, &[a, wave(1, 512, 1024)]).is_empty());
        assert_eq!(interference_set(&a, &[a, wave(1, 256, 768)]), vec![(1, 0.5)]);
        let g = grid(0, 5, 0, 2);
        assert!(interference_set(&g, &[g, grid(1, 5, 2, 3)]).is_empty());
        assert_eq!(interference_set(&g, &[g, grid(1, 5, 1, 4)]), vec![(1, 0.5)]);
        assert!(interference_set(&g, &[g, grid(1, 6, 0, 2)]).is_empty());
    }
}
