//! Technology parameter vectors and the timing/throughput model built on them.
//!
//! All durations are carried in microseconds. Throughputs are in bit/s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Data bits per OFDM symbol for 802.11p MCS 0..=7 with 10 MHz channelization.
pub const NBPS_10MHZ: [u32; 8] = [24, 36, 48, 72, 96, 144, 192, 216];

/// Default 802.11p timing: AIFS, preamble plus SIGNAL field, OFDM symbol, slot.
pub const T_AIFS_US: f64 = 110.0;
pub const T_PREAMBLE_US: f64 = 40.0;
pub const T_SYMBOL_US: f64 = 8.0;
pub const SLOT_TIME_US: f64 = 13.0;
pub const CW_MAX: u32 = 15;

/// Looks up the data bits per OFDM symbol for an 802.11p MCS index.
pub fn resolve_nbps(mcs_index: u8) -> Result<u32> {
    NBPS_10MHZ
        .get(mcs_index as usize)
        .copied()
        .ok_or_else(|| Error::config(format!("802.11p MCS index {mcs_index} outside 0..=7")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ieee80211pSettings<T> {
    /// On-air data payload, including MAC header, service and tail bits.
    pub payload_bytes: u32,
    pub t_aifs_us: T,
    pub t_preamble_us: T,
    pub t_symbol_us: T,
    pub bits_per_symbol: u32,
    pub mcs_index: Option<u8>,
    pub cw_max: u32,
    pub slot_time_us: T,
}

impl<T: Real> Ieee80211pSettings<T> {
    /// Default timings with `n_bpS` resolved from the MCS index.
    pub fn with_mcs(mcs_index: u8, payload_bytes: u32) -> Result<Self> {
        let s = Self {
            payload_bytes,
            t_aifs_us: T::lit(T_AIFS_US),
            t_preamble_us: T::lit(T_PREAMBLE_US),
            t_symbol_us: T::lit(T_SYMBOL_US),
            bits_per_symbol: resolve_nbps(mcs_index)?,
            mcs_index: Some(mcs_index),
            cw_max: CW_MAX,
            slot_time_us: T::lit(SLOT_TIME_US),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.payload_bytes == 0 {
            return Err(Error::config("802.11p payload_bytes must be >= 1"));
        }
        if self.bits_per_symbol == 0 {
            return Err(Error::config("802.11p bits_per_symbol must be >= 1"));
        }
        if let Some(mcs) = self.mcs_index {
            let expected = resolve_nbps(mcs)?;
            if expected != self.bits_per_symbol {
                return Err(Error::config(format!(
                    "802.11p MCS {mcs} implies {expected} bits/symbol, got {}",
                    self.bits_per_symbol
                )));
            }
        }
        for (name, v) in [
            ("t_aifs_us", self.t_aifs_us),
            ("t_preamble_us", self.t_preamble_us),
            ("t_symbol_us", self.t_symbol_us),
            ("slot_time_us", self.slot_time_us),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::config(format!("802.11p {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `⌈8·P_b / n_bpS⌉`
    pub fn n_symbols(&self) -> u32 {
        (8 * self.payload_bytes).div_ceil(self.bits_per_symbol)
    }

    /// Time the frame occupies the medium: preamble plus data symbols.
    pub fn airtime_us(&self) -> T {
        self.t_preamble_us + self.t_symbol_us * T::lit(self.n_symbols() as f64)
    }
}

/// Transmission time of one 802.11p packet in µs, AIFS included.
pub fn tx_time_11p<T: Real>(s: &Ieee80211pSettings<T>) -> T {
    s.t_aifs_us + s.airtime_us()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CV2xSettings<T> {
    pub payload_bytes: u32,
    pub n_subch: u32,
    pub n_prb_subch: u32,
    pub t_tti_us: T,
    /// PRBs needed by one packet, control overhead included.
    pub n_prb_pkt: u32,
    pub mcs_index: Option<u8>,
}

impl<T: Real> CV2xSettings<T> {
    /// Sidelink settings with `n_PRB-pkt` resolved through a PRB table.
    pub fn with_mcs(
        mcs_index: u8,
        payload_bytes: u32,
        n_subch: u32,
        n_prb_subch: u32,
        t_tti_us: T,
        table: &PrbTable,
    ) -> Result<Self> {
        let s = Self {
            payload_bytes,
            n_subch,
            n_prb_subch,
            t_tti_us,
            n_prb_pkt: resolve_nprb(table, mcs_index, payload_bytes)?,
            mcs_index: Some(mcs_index),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.payload_bytes == 0 {
            return Err(Error::config("C-V2X payload_bytes must be >= 1"));
        }
        if self.n_prb_pkt == 0 {
            return Err(Error::config("C-V2X n_prb_pkt must be >= 1"));
        }
        if self.n_subch == 0 || self.n_prb_subch == 0 {
            return Err(Error::config("C-V2X needs at least one subchannel of one PRB"));
        }
        let tti = self.t_tti_us.as_f64();
        if ![250.0, 500.0, 1000.0].contains(&tti) {
            return Err(Error::config(format!(
                "C-V2X TTI must be 250, 500 or 1000 µs, got {tti}"
            )));
        }
        Ok(())
    }

    /// `n_PRB-TTI = n_subch · n_PRB-subch`
    pub fn n_prb_tti(&self) -> u32 {
        self.n_subch * self.n_prb_subch
    }

    /// Number of TTIs one packet spans.
    pub fn n_tti(&self) -> u32 {
        self.n_prb_pkt.div_ceil(self.n_prb_tti())
    }

    /// Subchannels a single-TTI packet occupies.
    pub fn subchannels_per_packet(&self) -> u32 {
        self.n_prb_pkt.div_ceil(self.n_prb_subch).min(self.n_subch)
    }
}

/// Transmission time of one sidelink packet in µs.
pub fn tx_time_cv2x<T: Real>(s: &CV2xSettings<T>) -> T {
    s.t_tti_us * T::lit(s.n_tti() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "technology", rename_all = "snake_case")]
pub enum TechnologySettings<T> {
    Ieee80211p(Ieee80211pSettings<T>),
    Cv2x(CV2xSettings<T>),
}

impl<T: Real> TechnologySettings<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            TechnologySettings::Ieee80211p(s) => s.validate(),
            TechnologySettings::Cv2x(s) => s.validate(),
        }
    }

    pub fn payload_bytes(&self) -> u32 {
        match self {
            TechnologySettings::Ieee80211p(s) => s.payload_bytes,
            TechnologySettings::Cv2x(s) => s.payload_bytes,
        }
    }

    pub fn mcs_index(&self) -> Option<u8> {
        match self {
            TechnologySettings::Ieee80211p(s) => s.mcs_index,
            TechnologySettings::Cv2x(s) => s.mcs_index,
        }
    }

    pub fn tx_time_us(&self) -> T {
        match self {
            TechnologySettings::Ieee80211p(s) => tx_time_11p(s),
            TechnologySettings::Cv2x(s) => tx_time_cv2x(s),
        }
    }

    pub fn technology(&self) -> Technology {
        match self {
            TechnologySettings::Ieee80211p(_) => Technology::Ieee80211p,
            TechnologySettings::Cv2x(_) => Technology::Cv2x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technology {
    #[serde(alias = "11p", alias = "ieee80211p")]
    Ieee80211p,
    #[serde(alias = "lte", alias = "cv2x", alias = "c-v2x")]
    Cv2x,
}

impl Technology {
    pub fn as_str(self) -> &'static str {
        match self {
            Technology::Ieee80211p => "11p",
            Technology::Cv2x => "cv2x",
        }
    }
}

impl std::str::FromStr for Technology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "11p" | "ieee80211p" | "80211p" => Ok(Technology::Ieee80211p),
            "cv2x" | "c-v2x" | "lte" | "ltev2x" | "lte-v2x" | "sidelink" => Ok(Technology::Cv2x),
            other => Err(Error::config(format!("unknown technology '{other}'"))),
        }
    }
}

impl std::fmt::Display for Technology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Net throughput of a configuration in bit/s.
///
/// For sidelink the raw rate is normalised by the fraction of the TTI
/// resources the packet actually occupies.
pub fn effective_throughput<T: Real>(s: &TechnologySettings<T>) -> T {
    let bits = T::lit(8.0 * s.payload_bytes() as f64);
    let t_tx_s = s.tx_time_us() * T::lit(1e-6);
    match s {
        TechnologySettings::Ieee80211p(_) => bits / t_tx_s,
        TechnologySettings::Cv2x(c) => {
            let used = T::lit(c.n_prb_pkt as f64);
            let avail = T::lit(c.n_prb_tti() as f64) * T::lit(c.n_tti() as f64);
            bits / t_tx_s * (avail / used)
        }
    }
}

/// Net bits one PRB carries per MCS, after DMRS and guard-symbol overhead.
///
/// Approximate values (non-standard): single-TTI transport block sizes for a
/// 10-PRB allocation scaled to the sidelink data symbol budget.
pub const DEFAULT_BITS_PER_PRB: [u32; 21] = [
    16, 21, 26, 35, 43, 54, 64, 76, 86, 96, 108, 108, 126, 142, 157, 177, 193, 201, 225, 249, 273,
];

/// MCS index to PRB capacity table with the adjacent PSCCH overhead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrbTable {
    /// Indexed by MCS.
    pub bits_per_prb: Vec<u32>,
    /// PRBs added to every packet for the adjacent control channel.
    pub control_overhead_prb: u32,
    /// Largest data allocation the table covers.
    pub max_prb: u32,
}

impl Default for PrbTable {
    fn default() -> Self {
        Self {
            bits_per_prb: DEFAULT_BITS_PER_PRB.to_vec(),
            control_overhead_prb: 2,
            max_prb: 110,
        }
    }
}

/// Smallest PRB count carrying `8·P_b` bits, plus the control overhead.
pub fn resolve_nprb(table: &PrbTable, mcs_index: u8, payload_bytes: u32) -> Result<u32> {
    if payload_bytes == 0 {
        return Err(Error::config("payload_bytes must be >= 1"));
    }
    let per_prb = *table
        .bits_per_prb
        .get(mcs_index as usize)
        .ok_or_else(|| Error::config(format!("C-V2X MCS {mcs_index} not in PRB table")))?;
    if per_prb == 0 {
        return Err(Error::config(format!("PRB table entry for MCS {mcs_index} is zero")));
    }
    let bits = 8 * payload_bytes as u64;
    let data_prb = bits.div_ceil(per_prb as u64);
    if data_prb > table.max_prb as u64 {
        return Err(Error::config(format!(
            "{payload_bytes} B at MCS {mcs_index} needs {data_prb} PRBs, table covers {}",
            table.max_prb
        )));
    }
    Ok(data_prb as u32 + table.control_overhead_prb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p11(payload: u32, nbps: u32) -> Ieee80211pSettings<f64> {
        Ieee80211pSettings {
            payload_bytes: payload,
            t_aifs_us: 110.0,
            t_preamble_us: 40.0,
            t_symbol_us: 8.0,
            bits_per_symbol: nbps,
            mcs_index: None,
            cw_max: 15,
            slot_time_us: 13.0,
        }
    }

    fn cv(tti: f64, pkt: u32) -> CV2xSettings<f64> {
        CV2xSettings {
            payload_bytes: 350,
            n_subch: 5,
            n_prb_subch: 10,
            t_tti_us: tti,
            n_prb_pkt: pkt,
            mcs_index: None,
        }
    }

    #[test]
    fn tx_time_11p_examples() {
        assert_eq!(tx_time_11p(&p11(350, 48)), 622.0);
        assert_eq!(tx_time_11p(&p11(6, 48)), 158.0);
        assert_eq!(tx_time_11p(&p11(550, 96)), 518.0);
    }

    #[test]
    fn tx_time_cv2x_examples() {
        assert_eq!(tx_time_cv2x(&cv(1000.0, 38)), 1000.0);
        assert_eq!(tx_time_cv2x(&cv(1000.0, 50)), 1000.0);
        assert_eq!(tx_time_cv2x(&cv(500.0, 75)), 1000.0);
    }

    #[test]
    fn throughput_examples() {
        let t = effective_throughput(&TechnologySettings::Ieee80211p(p11(350, 48)));
        assert!((t / 1e6 - 4.5016).abs() < 5e-5);
        let t = effective_throughput(&TechnologySettings::Cv2x(cv(1000.0, 38)));
        assert!((t / 1e6 - 3.684).abs() < 5e-4);
        let full = effective_throughput(&TechnologySettings::Cv2x(cv(1000.0, 50)));
        assert_eq!(full, 8.0 * 350.0 / 1e-3);
    }

    #[test]
    fn nbps_lookup() {
        assert_eq!(resolve_nbps(2).unwrap(), 48);
        assert_eq!(resolve_nbps(0).unwrap(), 24);
        assert_eq!(resolve_nbps(4).unwrap(), 96);
        assert!(resolve_nbps(8).unwrap_err().is_config());
    }

    #[test]
    fn nprb_lookup() {
        let table = PrbTable {
            control_overhead_prb: 0,
            ..PrbTable::default()
        };
        assert_eq!(table.bits_per_prb[7], 76);
        // brute force: smallest n with n * 76 >= 2800
        let brute = (1..).find(|n| n * 76 >= 2800).unwrap();
        assert_eq!(brute, 37);
        assert_eq!(resolve_nprb(&table, 7, 350).unwrap(), 37);
        assert!(resolve_nprb(&table, 7, 0).is_err());
        // 76 * 10 bits is exactly 95 bytes
        assert_eq!(resolve_nprb(&table, 7, 95).unwrap(), 10);
        assert_eq!(resolve_nprb(&PrbTable::default(), 7, 350).unwrap(), 39);
        assert!(resolve_nprb(&table, 0, 100_000).unwrap_err().is_config());
        assert!(resolve_nprb(&table, 40, 100).is_err());
    }

    #[test]
    fn mcs_constructors_validate() {
        let s = Ieee80211pSettings::<f64>::with_mcs(2, 350).unwrap();
        assert_eq!(s.bits_per_symbol, 48);
        assert_eq!(s.n_symbols(), 59);
        let c = CV2xSettings::<f64>::with_mcs(7, 350, 5, 10, 1000.0, &PrbTable::default()).unwrap();
        assert_eq!(c.n_prb_pkt, 39);
        assert_eq!(c.subchannels_per_packet(), 4);
        assert!(CV2xSettings::<f64>::with_mcs(7, 350, 5, 10, 300.0, &PrbTable::default()).is_err());
        let mut bad = p11(350, 48);
        bad.mcs_index = Some(4);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn eleven_p_rate_below_phy_rate() {
        let s = p11(350, 48);
        let t = effective_throughput(&TechnologySettings::Ieee80211p(s.clone()));
        assert!(t < 48.0 / 8e-6);
        let big = effective_throughput(&TechnologySettings::Ieee80211p(p11(4_000_000, 48)));
        assert!((big - 48.0 / 8e-6).abs() / (48.0 / 8e-6) < 1e-4);
    }
}
