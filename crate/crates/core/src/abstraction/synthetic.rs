//! Logistic PER curves used as stand-ins for measured link-level curves.

use super::fit::shannon_throughput;
use crate::error::Result;
use crate::num::{linear_to_db, Real};
use crate::settings::{effective_throughput, CV2xSettings, Ieee80211pSettings, PrbTable, TechnologySettings};

/// `PER(x) = 1 / (1 + exp((x − center_db) / slope_db))` sampled on
/// `center_db + k·step_db` for `k` in `-half_span..=half_span`.
///
/// The grid always contains `center_db`, where PER is exactly 0.5.
pub fn logistic_curve<T: Real>(center_db: T, slope_db: T, step_db: T, half_span: usize) -> Vec<(T, T)> {
    let n = half_span as i64;
    (-n..=n)
        .map(|k| {
            let x = center_db + step_db * T::lit(k as f64);
            (x, logistic_per(x, center_db, slope_db))
        })
        .collect()
}

pub fn logistic_per<T: Real>(sinr_db: T, center_db: T, slope_db: T) -> T {
    T::one() / (T::one() + ((sinr_db - center_db) / slope_db).exp())
}

/// Generator parameters of the bundled highway LOS curve set.
pub mod bundled {
    pub const SCENARIO_ID: &str = "highway_los";
    /// Implementation loss the curve centres are placed on.
    pub const ALPHA: f64 = 0.37;
    pub const BANDWIDTH_HZ: f64 = 10e6;
    pub const SLOPE_DB: f64 = 0.8;
    pub const STEP_DB: f64 = 0.5;
    pub const HALF_SPAN: usize = 16;
    /// `(11p MCS, payload)` pairs.
    pub const WAVE: [(u8, u32); 6] = [(0, 350), (2, 350), (4, 350), (0, 550), (2, 550), (4, 550)];
    /// `(sidelink MCS, payload)` pairs.
    pub const SIDELINK: [(u8, u32); 7] = [(4, 350), (5, 350), (6, 350), (7, 350), (8, 350), (11, 350), (11, 550)];
    /// Centre offsets in dB, one per curve in `WAVE ++ SIDELINK` order, so
    /// the set does not sit exactly on the fitted line.
    pub const OFFSETS_DB: [f64; 13] = [0.4, -0.3, 0.2, -0.5, 0.1, 0.3, -0.2, 0.5, -0.1, -0.4, 0.2, -0.3, 0.1];
    /// Sidelink subchannel layout and TTI.
    pub const N_SUBCH: u32 = 5;
    pub const N_PRB_SUBCH: u32 = 10;
    pub const T_TTI_US: f64 = 1000.0;
}

/// One bundled curve: its configuration and logistic parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpec {
    pub theta: TechnologySettings<f64>,
    pub center_db: f64,
    pub slope_db: f64,
}

impl CurveSpec {
    pub fn samples(&self) -> Vec<(f64, f64)> {
        logistic_curve(self.center_db, self.slope_db, bundled::STEP_DB, bundled::HALF_SPAN)
    }
}

/// Centre in dB of a logistic curve whose PER = 0.5 point lies on the
/// Shannon line scaled by `alpha`.
pub fn center_on_line_db(theta: &TechnologySettings<f64>, alpha: f64, bandwidth_hz: f64) -> f64 {
    let exponent = effective_throughput(theta) / (alpha * bandwidth_hz);
    let gamma = 2f64.powf(exponent) - 1.0;
    debug_assert!((shannon_throughput(gamma, bandwidth_hz) * alpha - effective_throughput(theta)).abs() < 1.0);
    linear_to_db(gamma)
}

/// The 13 highway LOS curve specifications (six 11p, seven sidelink).
pub fn bundled_specs(table: &PrbTable) -> Result<Vec<CurveSpec>> {
    use bundled::*;
    let mut thetas = Vec::new();
    for &(mcs, bytes) in &WAVE {
        thetas.push(TechnologySettings::Ieee80211p(Ieee80211pSettings::with_mcs(mcs, bytes)?));
    }
    for &(mcs, bytes) in &SIDELINK {
        thetas.push(TechnologySettings::Cv2x(CV2xSettings::with_mcs(
            mcs, bytes, N_SUBCH, N_PRB_SUBCH, T_TTI_US, table,
        )?));
    }
    Ok(thetas
        .into_iter()
        .zip(OFFSETS_DB)
        .map(|(theta, off)| CurveSpec {
            center_db: center_on_line_db(&theta, ALPHA, BANDWIDTH_HZ) + off,
            slope_db: SLOPE_DB,
            theta,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_set_shape() {
        let specs = bundled_specs(&PrbTable::default()).unwrap();
        assert_eq!(specs.len(), 13);
        assert_eq!(specs.iter().filter(|s| matches!(s.theta, TechnologySettings::Ieee80211p(_))).count(), 6);
        // 11p MCS 2 / 350 B: 4.5016 Mb/s over 3.7 Mb/s puts the line at 1.22 dB.
        assert!((specs[1].center_db + 0.3 - 1.2191).abs() < 1e-3);
    }

    #[test]
    fn centred_and_decreasing() {
        let c = logistic_curve(2.0_f64, 0.8, 0.5, 16);
        assert_eq!(c.len(), 33);
        assert_eq!(c[16], (2.0, 0.5));
        assert!(c.windows(2).all(|w| w[1].1 < w[0].1));
        assert!(c[0].1 > 0.99 && c[32].1 < 0.01);
    }
}
