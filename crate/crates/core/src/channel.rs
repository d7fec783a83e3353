//! Link budget: WINNER+ B1 path loss, correlated log-normal shadowing,
//! thermal noise and SINR with partially overlapping interferers.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{db_to_linear, linear_to_db, Real};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Thermal noise density at 290 K.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathLossModel {
    WinnerB1Los,
    WinnerB1Nlos,
}

/// How the configured shadowing spread is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowingSpread {
    #[default]
    StdDev,
    Variance,
}

/// WINNER+ B1 coefficients.
///
/// Below the breakpoint the LOS loss is
/// `los_slope·log10(d) + los_intercept + freq_coeff·log10(fc / fc_ref)`;
/// past it the loss grows with `far_slope` from its breakpoint value. The
/// NLOS form is the Manhattan-grid expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real"))]
pub struct WinnerB1Coefficients<T> {
    pub los_slope_db: T,
    pub los_intercept_db: T,
    pub freq_coeff_db: T,
    pub fc_ref_ghz: T,
    pub far_slope_db: T,
    pub antenna_height_m: T,
    pub nlos_offset_db: T,
    pub nlos_nj_base: T,
    pub nlos_nj_per_m: T,
    pub nlos_nj_min: T,
    pub nlos_nj_gain_db: T,
    pub nlos_freq_coeff_db: T,
    /// Never report less loss than free space at the same distance.
    pub free_space_floor: bool,
}

impl<T: Real> Default for WinnerB1Coefficients<T> {
    fn default() -> Self {
        Self {
            los_slope_db: T::lit(22.7),
            los_intercept_db: T::lit(27.0),
            freq_coeff_db: T::lit(20.0),
            fc_ref_ghz: T::lit(1.0),
            far_slope_db: T::lit(40.0),
            antenna_height_m: T::lit(1.5),
            nlos_offset_db: T::lit(20.0),
            nlos_nj_base: T::lit(2.8),
            nlos_nj_per_m: T::lit(0.0024),
            nlos_nj_min: T::lit(1.84),
            nlos_nj_gain_db: T::lit(12.5),
            nlos_freq_coeff_db: T::lit(3.0),
            free_space_floor: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real"))]
pub struct PropagationConfig<T> {
    pub carrier_hz: T,
    pub model: PathLossModel,
    pub shadowing_std_db: T,
    pub shadowing_spread: ShadowingSpread,
    pub decorrelation_m: T,
    /// Applied at both transmitter and receiver.
    pub antenna_gain_dbi: T,
    pub noise_figure_db: T,
    pub tx_power_density_dbm_mhz: T,
    pub bandwidth_hz: T,
    pub winner: WinnerB1Coefficients<T>,
}

impl<T: Real> Default for PropagationConfig<T> {
    fn default() -> Self {
        Self {
            carrier_hz: T::lit(5.9e9),
            model: PathLossModel::WinnerB1Los,
            shadowing_std_db: T::lit(3.0),
            shadowing_spread: ShadowingSpread::StdDev,
            decorrelation_m: T::lit(25.0),
            antenna_gain_dbi: T::lit(3.0),
            noise_figure_db: T::lit(6.0),
            tx_power_density_dbm_mhz: T::lit(13.0),
            bandwidth_hz: T::lit(10e6),
            winner: WinnerB1Coefficients::default(),
        }
    }
}

impl<T: Real> PropagationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.decorrelation_m > T::zero()) {
            return Err(Error::config("propagation.decorrelation_m must be > 0"));
        }
        if !(self.bandwidth_hz > T::zero()) {
            return Err(Error::config("propagation.bandwidth_hz must be > 0"));
        }
        if !(self.carrier_hz > T::zero()) {
            return Err(Error::config("propagation.carrier_hz must be > 0"));
        }
        if self.shadowing_std_db < T::zero() {
            return Err(Error::config("propagation.shadowing_std_db must be >= 0"));
        }
        if !(self.winner.antenna_height_m > T::zero() && self.winner.fc_ref_ghz > T::zero()) {
            return Err(Error::config("WINNER antenna height and reference frequency must be > 0"));
        }
        Ok(())
    }

    /// Shadowing standard deviation in dB under the configured reading.
    pub fn shadowing_sigma_db(&self) -> T {
        match self.shadowing_spread {
            ShadowingSpread::StdDev => self.shadowing_std_db,
            ShadowingSpread::Variance => self.shadowing_std_db.sqrt(),
        }
    }

    /// Total transmit power over the channel bandwidth.
    pub fn tx_power_dbm(&self) -> T {
        self.tx_power_density_dbm_mhz + linear_to_db(self.bandwidth_hz / T::lit(1e6))
    }

    pub fn carrier_ghz(&self) -> T {
        self.carrier_hz / T::lit(1e9)
    }

    /// `4·h_tx·h_rx·fc / c`
    pub fn breakpoint_m(&self) -> T {
        let h = self.winner.antenna_height_m;
        T::lit(4.0) * h * h * self.carrier_hz / T::lit(SPEED_OF_LIGHT)
    }
}

/// Free-space loss in dB.
pub fn free_space_loss_db<T: Real>(d: T, carrier_hz: T) -> T {
    let d = d.max(T::one());
    T::lit(20.0) * d.log10() + T::lit(20.0) * carrier_hz.log10() - T::lit(147.55)
}

fn floor_distance<T: Real>(d: T) -> T {
    if d > T::one() {
        d
    } else {
        T::one()
    }
}

fn los_unfloored<T: Real>(d: T, cfg: &PropagationConfig<T>) -> T {
    let w = &cfg.winner;
    let near = |d: T| {
        w.los_slope_db * d.log10() + w.los_intercept_db + w.freq_coeff_db * (cfg.carrier_ghz() / w.fc_ref_ghz).log10()
    };
    let bp = cfg.breakpoint_m();
    if d <= bp {
        near(d)
    } else {
        near(bp) + w.far_slope_db * (d / bp).log10()
    }
}

fn apply_floor<T: Real>(pl: T, d: T, cfg: &PropagationConfig<T>) -> T {
    if cfg.winner.free_space_floor {
        pl.max(free_space_loss_db(d, cfg.carrier_hz))
    } else {
        pl
    }
}

/// LOS loss with the dual-slope breakpoint. Distances below 1 m use 1 m.
pub fn path_loss_los_db<T: Real>(d: T, cfg: &PropagationConfig<T>) -> T {
    let d = floor_distance(d);
    apply_floor(los_unfloored(d, cfg), d, cfg)
}

/// NLOS loss around one corner: `d1` along the transmitter's street, `d2`
/// along the crossing street. The better of the two orientations is used.
pub fn path_loss_manhattan_db<T: Real>(d1: T, d2: T, cfg: &PropagationConfig<T>) -> T {
    let (d1, d2) = (floor_distance(d1), floor_distance(d2));
    let w = &cfg.winner;
    let one_way = |a: T, b: T| {
        let nj = (w.nlos_nj_base - w.nlos_nj_per_m * a).max(w.nlos_nj_min);
        los_unfloored(a, cfg) + w.nlos_offset_db - w.nlos_nj_gain_db * nj
            + T::lit(10.0) * nj * b.log10()
            + w.nlos_freq_coeff_db * cfg.carrier_ghz().log10()
    };
    let pl = one_way(d1, d2).min(one_way(d2, d1));
    let euclid = (d1 * d1 + d2 * d2).sqrt();
    apply_floor(pl.max(los_unfloored(euclid, cfg)), euclid, cfg)
}

/// Distance-only NLOS: the Manhattan form with the direct path split into
/// two equal perpendicular legs.
pub fn path_loss_nlos_db<T: Real>(d: T, cfg: &PropagationConfig<T>) -> T {
    let d = floor_distance(d);
    let leg = d / T::lit(2.0).sqrt();
    path_loss_manhattan_db(leg, leg, cfg).max(path_loss_los_db(d, cfg))
}

/// Deterministic loss for the configured model at distance `d`.
pub fn path_loss_db<T: Real>(d: T, cfg: &PropagationConfig<T>) -> T {
    match cfg.model {
        PathLossModel::WinnerB1Los => path_loss_los_db(d, cfg),
        PathLossModel::WinnerB1Nlos => path_loss_nlos_db(d, cfg),
    }
}

/// Noise power over `bandwidth_hz`.
pub fn thermal_noise_dbm<T: Real>(bandwidth_hz: T, noise_figure_db: T) -> T {
    T::lit(THERMAL_NOISE_DBM_HZ) + linear_to_db(bandwidth_hz) + noise_figure_db
}

pub fn noise_power_dbm<T: Real>(cfg: &PropagationConfig<T>) -> T {
    thermal_noise_dbm(cfg.bandwidth_hz, cfg.noise_figure_db)
}

/// Received power: transmit power plus both antenna gains minus losses.
pub fn rx_power_dbm<T: Real>(cfg: &PropagationConfig<T>, path_loss_db: T, shadowing_db: T) -> T {
    cfg.tx_power_dbm() + T::lit(2.0) * cfg.antenna_gain_dbi - path_loss_db - shadowing_db
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer<T> {
    pub source_id: u32,
    /// Share of the wanted packet the interferer overlaps, in [0, 1].
    pub overlap: T,
    pub power_dbm: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSample<T> {
    pub rx_power_dbm: T,
    pub interferers: Vec<Interferer<T>>,
}

/// Linear `S / (N + Σ overlap_k · I_k)`.
pub fn sinr<T: Real>(link: &LinkSample<T>, noise_dbm: T) -> T {
    let denom = link
        .interferers
        .iter()
        .fold(db_to_linear(noise_dbm), |acc, i| acc + i.overlap * db_to_linear(i.power_dbm));
    db_to_linear(link.rx_power_dbm) / denom
}

/// Current shadowing value of one directed link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowingState<T> {
    pub value_db: T,
    /// Transmitter track position (distance travelled) at the last update.
    pub track_m: T,
}

/// Gudmundson update of a link's shadowing along the transmitter's track.
///
/// A link without history draws a fresh `N(0, σ²)` sample.
pub fn shadowing_db<T: Real, R: Rng + ?Sized>(
    prev: Option<ShadowingState<T>>,
    track_m: T,
    sigma_db: T,
    decorrelation_m: T,
    rng: &mut R,
) -> ShadowingState<T> {
    let z: f64 = rng.sample(StandardNormal);
    let z = T::lit(z);
    let value_db = match prev {
        None => sigma_db * z,
        Some(p) => {
            let dd = (track_m - p.track_m).abs();
            if dd == T::zero() {
                p.value_db
            } else {
                let rho = (-dd / decorrelation_m).exp();
                rho * p.value_db + sigma_db * (T::one() - rho * rho).sqrt() * z
            }
        }
    };
    ShadowingState { value_db, track_m }
}
