//! 802.11p single-queue CSMA/CA.
//!
//! A node with a fresh packet on an idle medium waits one AIFS and sends.
//! Otherwise it draws a backoff from `0..=CW` slots, which only counts down
//! after the medium has been idle for an AIFS and freezes whenever the
//! medium turns busy again.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::settings::{CW_MAX, SLOT_TIME_US, T_AIFS_US};

/// Known-signal (decodable preamble) sensing threshold.
pub const CS_KNOWN_DBM: f64 = -85.0;
/// Energy-detection threshold for anything else.
pub const CS_UNKNOWN_DBM: f64 = -65.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsmaParams {
    pub aifs_us: f64,
    pub slot_us: f64,
    pub cw: u32,
    pub known_threshold_dbm: f64,
    pub unknown_threshold_dbm: f64,
    /// Preamble SINR needed to count a frame as decodable for sensing.
    pub preamble_sinr_db: f64,
}

impl Default for CsmaParams {
    fn default() -> Self {
        Self {
            aifs_us: T_AIFS_US,
            slot_us: SLOT_TIME_US,
            cw: CW_MAX,
            known_threshold_dbm: CS_KNOWN_DBM,
            unknown_threshold_dbm: CS_UNKNOWN_DBM,
            preamble_sinr_db: 2.0,
        }
    }
}

impl CsmaParams {
    pub fn aifs_ns(&self) -> u64 {
        (self.aifs_us * 1000.0).round() as u64
    }

    pub fn slot_ns(&self) -> u64 {
        (self.slot_us * 1000.0).round() as u64
    }
}

/// Busy when a decodable frame arrives above the known-signal threshold or
/// the total energy crosses the energy-detection threshold.
pub fn csma_carrier_sense(rx_power_dbm: f64, decodable: bool) -> bool {
    carrier_sense_with(rx_power_dbm, decodable, CS_KNOWN_DBM, CS_UNKNOWN_DBM)
}

pub fn carrier_sense_with(rx_power_dbm: f64, decodable: bool, known_dbm: f64, unknown_dbm: f64) -> bool {
    (decodable && rx_power_dbm >= known_dbm) || rx_power_dbm >= unknown_dbm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsmaPhase {
    #[default]
    Idle,
    AifsWait,
    Backoff,
    Transmitting,
}

/// Reference to a packet waiting for the medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingPacket {
    pub seq: u64,
    pub generated_ns: u64,
}

#[derive(Debug, Clone, Default)]
pub struct CsmaState {
    pub phase: CsmaPhase,
    pub backoff_slots_remaining: u32,
    pub cw: u32,
    pub pending_packet: Option<PendingPacket>,
    /// Arrived while transmitting.
    pub queued_packet: Option<PendingPacket>,
    /// Scheduled transmission start, if counting down.
    pub deadline: Option<u64>,
    countdown_from: u64,
    pub dropped: u64,
}

impl CsmaState {
    pub fn new(cw: u32) -> Self {
        Self {
            cw,
            ..Self::default()
        }
    }

    /// New packet from the application. Returns a transmit deadline when the
    /// node starts counting down right away.
    pub fn on_packet<R: Rng + ?Sized>(
        &mut self,
        pkt: PendingPacket,
        now: u64,
        medium_busy: bool,
        params: &CsmaParams,
        rng: &mut R,
    ) -> Option<u64> {
        match self.phase {
            CsmaPhase::Transmitting => {
                if self.queued_packet.replace(pkt).is_some() {
                    self.dropped += 1;
                }
                None
            }
            CsmaPhase::AifsWait | CsmaPhase::Backoff => {
                if self.pending_packet.replace(pkt).is_some() {
                    self.dropped += 1;
                }
                None
            }
            CsmaPhase::Idle => {
                self.pending_packet = Some(pkt);
                if medium_busy {
                    self.draw_backoff(rng);
                    None
                } else {
                    self.phase = CsmaPhase::AifsWait;
                    let t = now + params.aifs_ns();
                    self.deadline = Some(t);
                    Some(t)
                }
            }
        }
    }

    fn draw_backoff<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.phase = CsmaPhase::Backoff;
        self.backoff_slots_remaining = rng.random_range(0..=self.cw);
        self.deadline = None;
    }

    /// Medium turned busy. A node whose deadline is this very instant still
    /// transmits; everyone else freezes.
    pub fn on_medium_busy<R: Rng + ?Sized>(&mut self, now: u64, params: &CsmaParams, rng: &mut R) {
        if self.deadline == Some(now) {
            return;
        }
        match self.phase {
            CsmaPhase::AifsWait => self.draw_backoff(rng),
            CsmaPhase::Backoff => {
                if self.deadline.take().is_some() && now > self.countdown_from {
                    let elapsed = ((now - self.countdown_from) / params.slot_ns()) as u32;
                    self.backoff_slots_remaining = self.backoff_slots_remaining.saturating_sub(elapsed);
                }
            }
            CsmaPhase::Idle | CsmaPhase::Transmitting => {}
        }
    }

    /// Medium turned idle. Returns the new deadline when a frozen backoff
    /// resumes.
    pub fn on_medium_idle(&mut self, now: u64, params: &CsmaParams) -> Option<u64> {
        if self.phase != CsmaPhase::Backoff || self.deadline.is_some() {
            return None;
        }
        self.countdown_from = now + params.aifs_ns();
        let t = self.countdown_from + u64::from(self.backoff_slots_remaining) * params.slot_ns();
        self.deadline = Some(t);
        Some(t)
    }

    /// Timer expiry at `now`. Returns the packet to send if the timer is live.
    pub fn on_timer(&mut self, now: u64) -> Option<PendingPacket> {
        if self.deadline != Some(now) || !matches!(self.phase, CsmaPhase::AifsWait | CsmaPhase::Backoff) {
            return None;
        }
        self.deadline = None;
        self.backoff_slots_remaining = 0;
        self.phase = CsmaPhase::Transmitting;
        self.pending_packet.take()
    }

    /// Own frame finished. A packet queued meanwhile starts contention.
    pub fn on_tx_end<R: Rng + ?Sized>(
        &mut self,
        now: u64,
        medium_busy: bool,
        params: &CsmaParams,
        rng: &mut R,
    ) -> Option<u64> {
        self.phase = CsmaPhase::Idle;
        match self.queued_packet.take() {
            Some(p) => self.on_packet(p, now, medium_busy, params, rng),
            None => None,
        }
    }
}
