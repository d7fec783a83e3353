//! MAC decision log for invariant checks.

use serde::{Deserialize, Serialize};

use crate::access::{Footprint, SpsParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsmaTxRecord {
    pub node: u32,
    pub time_ns: u64,
    /// Sensed state when the frame started.
    pub busy: bool,
    /// Instant of the last idle→busy edge.
    pub busy_since_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub node: u32,
    pub tti: u64,
    pub chosen: Footprint,
    pub threshold_dbm: f64,
    pub n_remaining: usize,
    pub n_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpsTxRecord {
    pub node: u32,
    pub tti: u64,
    pub counter_before: u32,
    pub counter_after: u32,
    pub keep: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MacTrace {
    pub csma_tx: Vec<CsmaTxRecord>,
    pub selections: Vec<SelectionRecord>,
    pub sps_tx: Vec<SpsTxRecord>,
}

impl MacTrace {
    /// Transmissions started while the node had sensed busy for a while.
    pub fn csma_busy_violations(&self) -> Vec<CsmaTxRecord> {
        self.csma_tx
            .iter()
            .filter(|r| r.busy && r.busy_since_ns < r.time_ns)
            .copied()
            .collect()
    }

    /// Selections outside `[tti + T1, tti + T2]` or with too few candidates.
    pub fn selection_violations(&self, params: &SpsParams) -> Vec<SelectionRecord> {
        self.selections
            .iter()
            .filter(|s| {
                let lo = s.tti + u64::from(params.t1_tti);
                let hi = s.tti + u64::from(params.t2_tti);
                let in_window = s.chosen.tti >= lo && s.chosen.end_tti() <= hi;
                let enough = s.n_remaining as f64 >= params.min_candidate_fraction * s.n_total as f64 - 1e-9;
                !(in_window && enough)
            })
            .copied()
            .collect()
    }

    pub fn counter_violations(&self) -> Vec<SpsTxRecord> {
        self.sps_tx
            .iter()
            .filter(|r| r.counter_before != r.counter_after + 1)
            .copied()
            .collect()
    }

    /// `(kept, decisions)`
    pub fn keep_counts(&self) -> (usize, usize) {
        let d: Vec<bool> = self.sps_tx.iter().filter_map(|r| r.keep).collect();
        (d.iter().filter(|&&k| k).count(), d.len())
    }
}
