//! Sidelink sensing-based semi-persistent scheduling.
//!
//! Time is counted in TTIs. A resource is a start TTI plus a run of adjacent
//! subchannels; packets that do not fit one TTI take every subchannel of
//! several consecutive TTIs.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpsParams {
    pub t1_tti: u32,
    pub t2_tti: u32,
    pub period_tti: u32,
    pub keep_probability: f64,
    pub counter_min: u32,
    pub counter_max: u32,
    pub rsrp_threshold_dbm: f64,
    pub rsrp_step_db: f64,
    pub min_candidate_fraction: f64,
    pub best_fraction: f64,
    pub sensing_window_tti: u32,
    /// SINR needed to decode another vehicle's control information.
    pub sci_sinr_db: f64,
}

impl Default for SpsParams {
    fn default() -> Self {
        Self {
            t1_tti: 1,
            t2_tti: 100,
            period_tti: 100,
            keep_probability: 0.5,
            counter_min: 5,
            counter_max: 15,
            rsrp_threshold_dbm: -110.0,
            rsrp_step_db: 3.0,
            min_candidate_fraction: 0.2,
            best_fraction: 0.2,
            sensing_window_tti: 1000,
            sci_sinr_db: 0.0,
        }
    }
}

impl SpsParams {
    pub fn validate(&self) -> Result<()> {
        if self.t1_tti == 0 || self.t2_tti < self.t1_tti {
            return Err(Error::config("sps requires 1 <= t1_tti <= t2_tti"));
        }
        if self.period_tti == 0 || self.sensing_window_tti < self.period_tti {
            return Err(Error::config("sps sensing window must cover at least one period"));
        }
        if !(0.0..=1.0).contains(&self.keep_probability) {
            return Err(Error::config("sps.keep_probability must lie in [0, 1]"));
        }
        if self.counter_min == 0 || self.counter_max < self.counter_min {
            return Err(Error::config("sps requires 1 <= counter_min <= counter_max"));
        }
        if !(self.rsrp_step_db > 0.0) {
            return Err(Error::config("sps.rsrp_step_db must be > 0"));
        }
        for f in [self.min_candidate_fraction, self.best_fraction] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config("sps candidate fractions must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    pub fn draw_counter<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(self.counter_min..=self.counter_max)
    }
}

/// Time/frequency footprint of one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Footprint {
    pub tti: u64,
    pub n_tti: u32,
    pub subchannel: u32,
    pub n_subch: u32,
}

impl Footprint {
    pub fn end_tti(&self) -> u64 {
        self.tti + u64::from(self.n_tti) - 1
    }

    pub fn cells(&self) -> u64 {
        u64::from(self.n_tti) * u64::from(self.n_subch)
    }

    pub fn covers_tti(&self, tti: u64) -> bool {
        (self.tti..=self.end_tti()).contains(&tti)
    }

    pub fn subchannels(&self) -> std::ops::Range<u32> {
        self.subchannel..self.subchannel + self.n_subch
    }

    /// Shared (TTI, subchannel) cells.
    pub fn shared_cells(&self, other: &Footprint) -> u64 {
        let t = (self.end_tti().min(other.end_tti()) + 1).saturating_sub(self.tti.max(other.tti));
        let s = (self.subchannel + self.n_subch)
            .min(other.subchannel + other.n_subch)
            .saturating_sub(self.subchannel.max(other.subchannel));
        t * u64::from(s)
    }

    pub fn shifted(&self, by: u64) -> Footprint {
        Footprint {
            tti: self.tti + by,
            ..*self
        }
    }
}

/// Decoded sidelink control information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SciRecord {
    pub source: u32,
    pub footprint: Footprint,
    pub rsrp_dbm: f64,
    pub reserves_next: bool,
}

/// Rolling per-vehicle measurement history.
#[derive(Debug, Clone)]
pub struct SensingWindow {
    n_subch: usize,
    len: usize,
    stamp: Vec<u64>,
    rssi_mw: Vec<f64>,
    own_tx: Vec<bool>,
    scis: VecDeque<SciRecord>,
}

const NO_TTI: u64 = u64::MAX;

impl SensingWindow {
    pub fn new(n_subch: u32, len: u32) -> Self {
        let (n, l) = (n_subch as usize, len as usize);
        Self {
            n_subch: n,
            len: l,
            stamp: vec![NO_TTI; l],
            rssi_mw: vec![0.0; l * n],
            own_tx: vec![false; l],
            scis: VecDeque::new(),
        }
    }

    fn slot(&mut self, tti: u64) -> usize {
        let i = (tti % self.len as u64) as usize;
        if self.stamp[i] != tti {
            self.stamp[i] = tti;
            self.own_tx[i] = false;
            self.rssi_mw[i * self.n_subch..(i + 1) * self.n_subch].fill(0.0);
        }
        i
    }

    fn slot_if_valid(&self, tti: u64) -> Option<usize> {
        let i = (tti % self.len as u64) as usize;
        (self.stamp[i] == tti).then_some(i)
    }

    pub fn add_rssi(&mut self, tti: u64, subchannels: std::ops::Range<u32>, power_mw: f64) {
        let i = self.slot(tti);
        for s in subchannels {
            self.rssi_mw[i * self.n_subch + s as usize] += power_mw;
        }
    }

    pub fn mark_own_tx(&mut self, tti: u64) {
        let i = self.slot(tti);
        self.own_tx[i] = true;
    }

    pub fn was_own_tx(&self, tti: u64) -> bool {
        self.slot_if_valid(tti).is_some_and(|i| self.own_tx[i])
    }

    /// Measured power on `subch` at `tti`, `None` when not sensed.
    pub fn rssi(&self, tti: u64, subch: u32) -> Option<f64> {
        let i = self.slot_if_valid(tti)?;
        if self.own_tx[i] {
            return None;
        }
        Some(self.rssi_mw[i * self.n_subch + subch as usize])
    }

    pub fn push_sci(&mut self, sci: SciRecord, horizon_tti: u64) {
        let cutoff = sci.footprint.tti.saturating_sub(horizon_tti);
        while self.scis.front().is_some_and(|s| s.footprint.tti < cutoff) {
            self.scis.pop_front();
        }
        self.scis.push_back(sci);
    }

    pub fn scis(&self) -> impl Iterator<Item = &SciRecord> {
        self.scis.iter()
    }
}

/// One selectable resource with the quantities ranking needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub footprint: Footprint,
    /// Strongest reservation RSRP landing on the resource.
    pub reserved_rsrp_dbm: f64,
    /// Linear-average sensed power over past periods.
    pub avg_rssi_mw: f64,
    /// Would collide with the periodic image of an own past transmission.
    pub own_blocked: bool,
}

/// Every resource within `[now + T1, now + T2]` for a packet needing
/// `n_tti × n_subch` cells, scored from the sensing history.
pub fn build_candidates(
    window: &SensingWindow,
    now_tti: u64,
    n_tti: u32,
    n_subch: u32,
    total_subch: u32,
    params: &SpsParams,
) -> Vec<Candidate> {
    let lo = now_tti + u64::from(params.t1_tti);
    let hi = now_tti + u64::from(params.t2_tti);
    let period = u64::from(params.period_tti);
    let back = u64::from(params.sensing_window_tti / params.period_tti);
    let width = (hi - lo + 1) as usize;
    let ns = total_subch as usize;

    // Per-cell scores over the selection window.
    let mut rsrp = vec![f64::NEG_INFINITY; width * ns];
    for sci in window.scis().filter(|x| x.reserves_next) {
        let fp = sci.footprint.shifted(period);
        for t in fp.tti.max(lo)..=fp.end_tti().min(hi) {
            for sc in fp.subchannels() {
                let c = &mut rsrp[(t - lo) as usize * ns + sc as usize];
                *c = c.max(sci.rsrp_dbm);
            }
        }
    }
    let mut rssi_sum = vec![0.0; width * ns];
    let mut rssi_n = vec![0u32; width * ns];
    let mut own = vec![false; width];
    for w in 0..width {
        let t = lo + w as u64;
        for j in 1..=back {
            let Some(past) = t.checked_sub(j * period) else { break };
            own[w] |= window.was_own_tx(past);
            for sc in 0..total_subch {
                if let Some(p) = window.rssi(past, sc) {
                    rssi_sum[w * ns + sc as usize] += p;
                    rssi_n[w * ns + sc as usize] += 1;
                }
            }
        }
    }

    let mut out = Vec::new();
    let mut c = lo;
    while c + u64::from(n_tti) - 1 <= hi {
        for s in 0..=(total_subch - n_subch) {
            let fp = Footprint {
                tti: c,
                n_tti,
                subchannel: s,
                n_subch,
            };
            let (mut r, mut sum, mut n, mut blocked) = (f64::NEG_INFINITY, 0.0, 0u32, false);
            for t in fp.tti..=fp.end_tti() {
                let w = (t - lo) as usize;
                blocked |= own[w];
                for sc in fp.subchannels() {
                    let i = w * ns + sc as usize;
                    r = r.max(rsrp[i]);
                    sum += rssi_sum[i];
                    n += rssi_n[i];
                }
            }
            out.push(Candidate {
                footprint: fp,
                reserved_rsrp_dbm: r,
                avg_rssi_mw: if n > 0 { sum / f64::from(n) } else { 0.0 },
                own_blocked: blocked,
            });
        }
        c += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOutcome {
    pub footprint: Footprint,
    /// RSRP threshold in force when the candidate set became large enough.
    pub threshold_dbm: f64,
    pub n_remaining: usize,
    pub n_total: usize,
    pub n_best: usize,
}

/// Exclusion by reservation RSRP with threshold relaxation, then a uniform
/// pick among the least-loaded share of what remains.
pub fn select_resource<R: Rng + ?Sized>(
    candidates: &[Candidate],
    params: &SpsParams,
    rng: &mut R,
) -> Option<SelectionOutcome> {
    let total = candidates.len();
    if total == 0 {
        return None;
    }
    let needed = ((params.min_candidate_fraction * total as f64) - 1e-9).ceil().max(1.0) as usize;
    let max_rsrp = candidates
        .iter()
        .map(|c| c.reserved_rsrp_dbm)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut threshold = params.rsrp_threshold_dbm;
    let mut honour_own = true;
    let remaining = loop {
        let keep: Vec<usize> = (0..total)
            .filter(|&i| {
                let c = &candidates[i];
                !(honour_own && c.own_blocked) && !(c.reserved_rsrp_dbm > threshold)
            })
            .collect();
        if keep.len() >= needed {
            break keep;
        }
        if threshold >= max_rsrp {
            honour_own = false;
        }
        threshold += params.rsrp_step_db;
    };
    let mut ranked = remaining.clone();
    ranked.shuffle(rng);
    ranked.sort_by(|&a, &b| candidates[a].avg_rssi_mw.total_cmp(&candidates[b].avg_rssi_mw));
    let best = ((params.best_fraction * total as f64) - 1e-9).ceil().max(1.0) as usize;
    let best = best.min(ranked.len());
    let pick = ranked[rng.random_range(0..best)];
    Some(SelectionOutcome {
        footprint: candidates[pick].footprint,
        threshold_dbm: threshold,
        n_remaining: remaining.len(),
        n_total: total,
        n_best: best,
    })
}

/// Reservation and counter of one vehicle.
#[derive(Debug, Clone)]
pub struct SpsState {
    /// Next reserved resource, `None` until the first selection or after a
    /// reselection decision.
    pub reservation: Option<Footprint>,
    pub reselection_counter: u32,
    pub keep_probability: f64,
    pub sensing: SensingWindow,
}

/// What happened to the reservation at a transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxOutcome {
    pub counter_before: u32,
    pub counter_after: u32,
    /// `Some(kept)` when the counter expired at this transmission.
    pub keep_decision: Option<bool>,
    /// Announced in the control information.
    pub reserves_next: bool,
}

impl SpsState {
    pub fn new(total_subch: u32, params: &SpsParams) -> Self {
        Self {
            reservation: None,
            reselection_counter: 0,
            keep_probability: params.keep_probability,
            sensing: SensingWindow::new(total_subch, params.sensing_window_tti),
        }
    }

    /// True when the current reservation can carry a packet generated at
    /// `now_tti`.
    pub fn reservation_usable(&self, now_tti: u64, params: &SpsParams) -> bool {
        self.reservation.is_some_and(|r| {
            r.tti >= now_tti + u64::from(params.t1_tti) && r.end_tti() <= now_tti + u64::from(params.t2_tti)
        })
    }

    /// Runs a selection from the sensing history and installs it.
    pub fn select<R: Rng + ?Sized>(
        &mut self,
        now_tti: u64,
        n_tti: u32,
        n_subch: u32,
        total_subch: u32,
        params: &SpsParams,
        rng: &mut R,
    ) -> Option<SelectionOutcome> {
        let cands = build_candidates(&self.sensing, now_tti, n_tti, n_subch, total_subch, params);
        let out = select_resource(&cands, params, rng)?;
        self.reservation = Some(out.footprint);
        self.reselection_counter = params.draw_counter(rng);
        Some(out)
    }

    /// Counts down the reservation after sending on it. On expiry the
    /// resource is kept with the keep probability, otherwise released.
    pub fn on_transmission<R: Rng + ?Sized>(&mut self, params: &SpsParams, rng: &mut R) -> TxOutcome {
        let before = self.reselection_counter;
        self.reselection_counter = before.saturating_sub(1);
        let mut keep_decision = None;
        let period = u64::from(params.period_tti);
        if self.reselection_counter == 0 {
            let kept = rng.random::<f64>() < self.keep_probability;
            keep_decision = Some(kept);
            if kept {
                self.reselection_counter = params.draw_counter(rng);
            }
        }
        let reserves_next = self.reselection_counter > 0;
        self.reservation = if reserves_next {
            self.reservation.map(|r| r.shifted(period))
        } else {
            None
        };
        TxOutcome {
            counter_before: before,
            counter_after: if keep_decision == Some(true) { 0 } else { self.reselection_counter },
            keep_decision,
            reserves_next,
        }
    }
}
