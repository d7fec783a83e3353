//! Discrete-event simulation of a vehicular broadcast scenario.
//!
//! 802.11p runs on a continuous-time event queue, the sidelink on a TTI
//! clock. Both compute, for every transmission and every receiver within
//! range, the SINR with overlap-weighted interference and hand it to one or
//! more reception models. The MAC never looks at the reception model, so
//! several models can be evaluated on one channel and MAC realisation.

mod interference;
mod links;
mod sidelink;
pub mod streams;
mod trace;
mod wave;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use interference::{interference_set, overlap_fraction, Resource, TransmissionEvent};
pub use trace::{CsmaTxRecord, MacTrace, SelectionRecord, SpsTxRecord};

use crate::abstraction::{PerCurve, StepFunction};
use crate::access::{CsmaParams, SpsParams};
use crate::channel::PropagationConfig;
use crate::error::{Error, Result};
use crate::metrics::{MetricStore, DEFAULT_BIN_WIDTH_M, DEFAULT_IPG_RANGE_M, DEFAULT_MAX_DISTANCE_M};
use crate::scenario::{RoadConfig, TrafficConfig};
use crate::settings::{Technology, TechnologySettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceptionMode {
    PerCurve,
    StepThreshold,
}

/// How a packet's fate follows from its SINR.
#[derive(Debug, Clone, PartialEq)]
pub enum ReceptionModel {
    /// Bernoulli draw with success probability `1 − PER(SINR)`.
    PerCurve(PerCurve<f64>),
    /// Received iff SINR exceeds the threshold.
    StepThreshold(StepFunction<f64>),
}

impl ReceptionModel {
    pub fn mode(&self) -> ReceptionMode {
        match self {
            ReceptionModel::PerCurve(_) => ReceptionMode::PerCurve,
            ReceptionModel::StepThreshold(_) => ReceptionMode::StepThreshold,
        }
    }
}

/// Applies `model` to a linear SINR.
pub fn decide_reception<R: Rng + ?Sized>(sinr_linear: f64, model: &ReceptionModel, rng: &mut R) -> bool {
    match model {
        ReceptionModel::StepThreshold(step) => step.receives(sinr_linear),
        ReceptionModel::PerCurve(curve) => {
            let per = curve.per_at_linear(sinr_linear);
            rng.random::<f64>() >= per
        }
    }
}

/// Which instant an IPG sample is stamped with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IpgTimestamp {
    /// Application generation time of the received packet.
    #[default]
    Generation,
    /// End of the packet's airtime at the receiver.
    Reception,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    /// Receivers farther than this are not evaluated.
    pub max_range_m: f64,
    pub prr_bin_width_m: f64,
    pub prr_max_distance_m: f64,
    pub ipg_range_m: f64,
    pub ipg_timestamp: IpgTimestamp,
    pub record_trace: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            max_range_m: 1000.0,
            prr_bin_width_m: DEFAULT_BIN_WIDTH_M,
            prr_max_distance_m: DEFAULT_MAX_DISTANCE_M,
            ipg_range_m: DEFAULT_IPG_RANGE_M,
            ipg_timestamp: IpgTimestamp::Generation,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub sim_duration_s: f64,
    pub warmup_s: f64,
    pub theta: TechnologySettings<f64>,
    pub reception: ReceptionModel,
    pub road: RoadConfig,
    pub traffic: TrafficConfig,
    pub propagation: PropagationConfig<f64>,
    pub csma: CsmaParams,
    pub sps: SpsParams,
    pub options: EngineOptions,
}

impl RunConfig {
    /// Table defaults around the given technology settings and reception
    /// model: 100 v/km highway, 10 s with 1 s warmup, seed 1.
    pub fn new(theta: TechnologySettings<f64>, reception: ReceptionModel) -> Self {
        let traffic = TrafficConfig {
            payload_bytes: theta.payload_bytes(),
            ..TrafficConfig::default()
        };
        Self {
            seed: 1,
            sim_duration_s: 10.0,
            warmup_s: 1.0,
            theta,
            reception,
            road: RoadConfig::default(),
            traffic,
            propagation: PropagationConfig::default(),
            csma: CsmaParams::default(),
            sps: SpsParams::default(),
            options: EngineOptions::default(),
        }
    }

    pub fn technology(&self) -> Technology {
        self.theta.technology()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sim_duration_s > 0.0) || !(self.warmup_s >= 0.0) || !(self.warmup_s < self.sim_duration_s) {
            return Err(Error::config(format!(
                "need 0 <= warmup ({}) < duration ({})",
                self.warmup_s, self.sim_duration_s
            )));
        }
        self.theta.validate()?;
        self.road.validate()?;
        self.traffic.validate()?;
        self.propagation.validate()?;
        self.sps.validate()?;
        if self.theta.payload_bytes() != self.traffic.payload_bytes {
            return Err(Error::config(format!(
                "technology payload {} B differs from traffic payload {} B",
                self.theta.payload_bytes(),
                self.traffic.payload_bytes
            )));
        }
        let o = &self.options;
        if !(o.max_range_m > 0.0 && o.ipg_range_m > 0.0) {
            return Err(Error::config("engine ranges must be > 0"));
        }
        if let TechnologySettings::Cv2x(c) = &self.theta {
            if c.n_tti() > self.sps.t2_tti - self.sps.t1_tti + 1 {
                return Err(Error::config("sidelink packet does not fit the selection window"));
            }
            let period_ms = self.traffic.generation_period_ms;
            if (period_ms * 1000.0 - f64::from(self.sps.period_tti) * c.t_tti_us).abs() > 1e-6 {
                return Err(Error::config(format!(
                    "reservation period {} TTI does not match the {period_ms} ms generation period",
                    self.sps.period_tti
                )));
            }
        }
        Ok(())
    }

    fn new_store(&self) -> Result<MetricStore> {
        let o = &self.options;
        MetricStore::new(o.prr_bin_width_m, o.prr_max_distance_m, o.ipg_range_m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// One store per reception model, in the order given.
    pub stores: Vec<MetricStore>,
    pub trace: Option<MacTrace>,
    /// Shortest gap between successive receptions measured at reception
    /// time, whichever stamp the stores use.
    pub min_reception_gap_s: Option<f64>,
}

/// Runs the scenario with `cfg.reception`.
pub fn run(cfg: &RunConfig) -> Result<MetricStore> {
    let mut out = run_multi(cfg, std::slice::from_ref(&cfg.reception))?;
    Ok(out.stores.remove(0))
}

/// Runs the scenario once and scores every reception model on it.
pub fn run_multi(cfg: &RunConfig, models: &[ReceptionModel]) -> Result<RunOutput> {
    cfg.validate()?;
    if models.is_empty() {
        return Err(Error::config("no reception model given"));
    }
    match &cfg.theta {
        TechnologySettings::Ieee80211p(s) => wave::run(cfg, s, models),
        TechnologySettings::Cv2x(s) => sidelink::run(cfg, s, models),
    }
}

/// Shared per-opportunity bookkeeping of both loops.
struct Scorer<'a> {
    models: &'a [ReceptionModel],
    stores: Vec<MetricStore>,
    rngs: Vec<rand::rngs::SmallRng>,
    stamp: IpgTimestamp,
    last_rx: std::collections::HashMap<(u32, u32), f64>,
    min_gap: Option<f64>,
    ipg_range_m: f64,
}

enum Fate {
    HalfDuplex,
    Sinr(f64),
}

impl<'a> Scorer<'a> {
    fn new(cfg: &RunConfig, models: &'a [ReceptionModel]) -> Result<Self> {
        Ok(Self {
            models,
            stores: models.iter().map(|_| cfg.new_store()).collect::<Result<_>>()?,
            rngs: (0..models.len())
                .map(|i| streams::stream(cfg.seed, streams::Purpose::Reception, &[i as u64]))
                .collect(),
            stamp: cfg.options.ipg_timestamp,
            last_rx: Default::default(),
            min_gap: None,
            ipg_range_m: cfg.options.ipg_range_m,
        })
    }

    fn generated(&mut self) {
        for s in &mut self.stores {
            s.outcomes.packets_generated += 1;
        }
    }

    fn sent(&mut self) {
        for s in &mut self.stores {
            s.outcomes.packets_sent += 1;
        }
    }

    fn dropped(&mut self, n: u64) {
        for s in &mut self.stores {
            s.outcomes.packets_dropped += n;
        }
    }

    fn score(&mut self, pair: (u32, u32), distance: f64, fate: Fate, gen_s: f64, rx_s: f64) {
        let t = match self.stamp {
            IpgTimestamp::Generation => gen_s,
            IpgTimestamp::Reception => rx_s,
        };
        let mut any = false;
        for (i, model) in self.models.iter().enumerate() {
            let out = &mut self.stores[i];
            out.outcomes.opportunities += 1;
            let received = match fate {
                Fate::HalfDuplex => {
                    out.outcomes.lost_half_duplex += 1;
                    false
                }
                Fate::Sinr(sinr) => {
                    let ok = decide_reception(sinr, model, &mut self.rngs[i]);
                    if ok {
                        out.outcomes.received += 1;
                    } else {
                        out.outcomes.lost_sinr += 1;
                    }
                    ok
                }
            };
            any |= received;
            crate::metrics::record_reception(&mut out.prr, &mut out.ipg, pair, distance, received, t);
        }
        if any && distance <= self.ipg_range_m {
            if let Some(prev) = self.last_rx.insert(pair, rx_s) {
                let g = rx_s - prev;
                self.min_gap = Some(self.min_gap.map_or(g, |m| m.min(g)));
            }
        }
    }

    fn finish(self, trace: Option<MacTrace>) -> RunOutput {
        RunOutput {
            stores: self.stores,
            trace,
            min_reception_gap_s: self.min_gap,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{synthetic::logistic_curve, CurveMeta};
    use crate::abstraction::normalize_curve;
    use rand::rngs::SmallRng;
    use rand::SeedableRng;

    #[test]
    fn step_decisions() {
        let m = ReceptionModel::StepThreshold(StepFunction::new(2.0, 0.5).unwrap());
        let mut rng = SmallRng::seed_from_u64(0);
        assert!(decide_reception(4.0, &m, &mut rng));
        assert!(!decide_reception(1.0, &m, &mut rng));
        assert!(!decide_reception(2.0, &m, &mut rng));
    }

    #[test]
    fn curve_decision_rate_matches_per() {
        let (curve, _) = normalize_curve(&logistic_curve(3.0, 0.8, 0.5, 16), CurveMeta::default()).unwrap();
        let m = ReceptionModel::PerCurve(curve);
        let mut rng = SmallRng::seed_from_u64(1);
        let sinr = 10f64.powf(0.3);
        let n = 10_000;
        let ok = (0..n).filter(|_| decide_reception(sinr, &m, &mut rng)).count();
        assert!((ok as f64 / n as f64 - 0.5).abs() <= 0.01);
        assert!(!decide_reception(1e-3, &m, &mut rng));
        assert!(decide_reception(1e6, &m, &mut rng));
    }
}
