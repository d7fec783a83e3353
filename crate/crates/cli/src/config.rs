//! Sectioned TOML run configuration with `section.key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use v2xsim_core::abstraction::synthetic::{bundled, bundled_specs};
use v2xsim_core::abstraction::{
    normalize_curve, threshold_for_settings, threshold_from_curve, AbstractionModel, CurveMeta, PerCurve,
    StepFunction,
};
use v2xsim_core::access::{CsmaParams, SpsParams};
use v2xsim_core::channel::PropagationConfig;
use v2xsim_core::engine::{EngineOptions, IpgTimestamp, ReceptionMode, ReceptionModel, RunConfig};
use v2xsim_core::io;
use v2xsim_core::metrics::uniform_grid;
use v2xsim_core::scenario::{RoadConfig, TrafficConfig};
use v2xsim_core::settings::{CV2xSettings, Ieee80211pSettings, PrbTable, Technology, TechnologySettings};
use v2xsim_core::{Error, Result};

/// Annotated defaults, printed by `print-config`. Parses to
/// [`SimConfig::default`].
pub const DEFAULT_CONFIG_TOML: &str = r#"# v2xsim run configuration. PAPER marks values taken from the reference
# study's settings table; NON-PAPER marks choices made here.

[run]
seed = 1                        # NON-PAPER
n_seeds = 1                     # NON-PAPER: consecutive seeds pooled into one result
duration_s = 20.0               # NON-PAPER
warmup_s = 1.0                  # NON-PAPER
technology = "ieee80211p"       # ieee80211p | cv2x
reception = "step_threshold"    # step_threshold | per_curve

[ieee80211p]
mcs = 2                         # PAPER: QPSK, rate 1/2

[cv2x]
mcs = 7                         # PAPER
n_subch = 5                     # PAPER
n_prb_subch = 10                # PAPER
t_tti_us = 1000.0               # PAPER

[prb_table]                     # NON-PAPER: approximate sidelink PRB capacities
bits_per_prb = [16, 21, 26, 35, 43, 54, 64, 76, 86, 96, 108, 108, 126, 142, 157, 177, 193, 201, 225, 249, 273]
control_overhead_prb = 2        # adjacent control channel
max_prb = 110

[abstraction]
alpha_hat = 0.37                # PAPER: highway LOS
beta = 0.5                      # PAPER
bandwidth_hz = 10000000.0       # PAPER
threshold_source = "model"      # model: from alpha_hat | curve: cut the PER curve at beta
model = ""                      # model file; overrides alpha_hat, beta and bandwidth_hz when set
curve = ""                      # PER curve CSV; empty selects the bundled synthetic curve

[road]
layout = "highway"              # PAPER
lanes_per_direction = 3         # PAPER: 3+3
lane_width_m = 4.0              # PAPER
road_length_m = 2000.0          # NON-PAPER: wrap-around highway segment
density_vpk = 100.0             # PAPER: 100 or 400
mean_speed_kmh = 96.0           # PAPER: 96 at 100 v/km, 56 at 400 v/km
speed_std_kmh = 5.0             # NON-PAPER
wrap_around = true              # NON-PAPER
edge_trim_m = 0.0               # NON-PAPER: finite road only
placed = []

[traffic]
payload_bytes = 350             # PAPER
generation_period_ms = 100.0    # NON-PAPER: periodic stand-in for the generation rules
jitter_rule = "fixed_phase_random_offset"

[propagation]
carrier_hz = 5900000000.0       # PAPER
model = "winner_b1_los"         # PAPER: WINNER+ B1
shadowing_std_db = 3.0          # PAPER
shadowing_spread = "std_dev"    # NON-PAPER: reading of the stated spread
decorrelation_m = 25.0          # PAPER
antenna_gain_dbi = 3.0          # PAPER
noise_figure_db = 6.0           # PAPER
tx_power_density_dbm_mhz = 13.0 # PAPER
bandwidth_hz = 10000000.0       # PAPER

[propagation.winner]            # NON-PAPER: published B1 coefficients
los_slope_db = 22.7
los_intercept_db = 27.0
freq_coeff_db = 20.0
fc_ref_ghz = 1.0
far_slope_db = 40.0
antenna_height_m = 1.5
nlos_offset_db = 20.0
nlos_nj_base = 2.8
nlos_nj_per_m = 0.0024
nlos_nj_min = 1.84
nlos_nj_gain_db = 12.5
nlos_freq_coeff_db = 3.0
free_space_floor = true

[csma]
aifs_us = 110.0                 # PAPER
slot_us = 13.0                  # NON-PAPER: 10 MHz channel slot
cw = 15                         # PAPER
known_threshold_dbm = -85.0     # PAPER
unknown_threshold_dbm = -65.0   # PAPER
preamble_sinr_db = 2.0          # NON-PAPER

[sps]
t1_tti = 1                      # PAPER
t2_tti = 100                    # PAPER
period_tti = 100                # NON-PAPER: matches the generation period
keep_probability = 0.5          # PAPER
counter_min = 5                 # NON-PAPER
counter_max = 15                # NON-PAPER
rsrp_threshold_dbm = -110.0     # NON-PAPER
rsrp_step_db = 3.0              # NON-PAPER
min_candidate_fraction = 0.2    # NON-PAPER
best_fraction = 0.2             # NON-PAPER
sensing_window_tti = 1000       # NON-PAPER
sci_sinr_db = 0.0               # NON-PAPER

[output]
max_range_m = 1000.0            # NON-PAPER
prr_bin_width_m = 25.0          # NON-PAPER
prr_max_distance_m = 600.0      # NON-PAPER
ipg_range_m = 150.0             # PAPER
ipg_timestamp = "generation"    # NON-PAPER: generation | reception
record_trace = false
ipg_grid_step_s = 0.01          # NON-PAPER
ipg_grid_max_s = 1.0            # NON-PAPER
"#;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub n_seeds: u32,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub technology: Technology,
    pub reception: ReceptionMode,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            n_seeds: 1,
            duration_s: 20.0,
            warmup_s: 1.0,
            technology: Technology::Ieee80211p,
            reception: ReceptionMode::StepThreshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveSection {
    pub mcs: u8,
}

impl Default for WaveSection {
    fn default() -> Self {
        Self { mcs: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SidelinkSection {
    pub mcs: u8,
    pub n_subch: u32,
    pub n_prb_subch: u32,
    pub t_tti_us: f64,
}

impl Default for SidelinkSection {
    fn default() -> Self {
        Self {
            mcs: 7,
            n_subch: bundled::N_SUBCH,
            n_prb_subch: bundled::N_PRB_SUBCH,
            t_tti_us: bundled::T_TTI_US,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    Model,
    Curve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbstractionSection {
    pub alpha_hat: f64,
    pub beta: f64,
    pub bandwidth_hz: f64,
    pub threshold_source: ThresholdSource,
    pub model: PathBuf,
    pub curve: PathBuf,
}

impl Default for AbstractionSection {
    fn default() -> Self {
        Self {
            alpha_hat: bundled::ALPHA,
            beta: 0.5,
            bandwidth_hz: bundled::BANDWIDTH_HZ,
            threshold_source: ThresholdSource::Model,
            model: PathBuf::new(),
            curve: PathBuf::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub max_range_m: f64,
    pub prr_bin_width_m: f64,
    pub prr_max_distance_m: f64,
    pub ipg_range_m: f64,
    pub ipg_timestamp: IpgTimestamp,
    pub record_trace: bool,
    pub ipg_grid_step_s: f64,
    pub ipg_grid_max_s: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        let e = EngineOptions::default();
        Self {
            max_range_m: e.max_range_m,
            prr_bin_width_m: e.prr_bin_width_m,
            prr_max_distance_m: e.prr_max_distance_m,
            ipg_range_m: e.ipg_range_m,
            ipg_timestamp: e.ipg_timestamp,
            record_trace: e.record_trace,
            ipg_grid_step_s: 0.01,
            ipg_grid_max_s: 1.0,
        }
    }
}

impl OutputSection {
    pub fn engine(&self) -> EngineOptions {
        EngineOptions {
            max_range_m: self.max_range_m,
            prr_bin_width_m: self.prr_bin_width_m,
            prr_max_distance_m: self.prr_max_distance_m,
            ipg_range_m: self.ipg_range_m,
            ipg_timestamp: self.ipg_timestamp,
            record_trace: self.record_trace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub run: RunSection,
    pub ieee80211p: WaveSection,
    pub cv2x: SidelinkSection,
    pub prb_table: PrbTable,
    pub abstraction: AbstractionSection,
    pub road: RoadConfig,
    pub traffic: TrafficConfig,
    pub propagation: PropagationConfig<f64>,
    pub csma: CsmaParams,
    pub sps: SpsParams,
    pub output: OutputSection,
}

/// Parses a `section.key=value` override. The value is read as a TOML
/// literal and falls back to a bare string.
pub fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{spec}' is not section.key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.len() < 2 || path.iter().any(String::is_empty) {
        return Err(Error::config(format!("override key '{key}' must look like section.key")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn apply_override(root: &mut toml::Table, reference: &toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let dotted = path.join(".");
    let (last, parents) = path.split_last().expect("non-empty path");
    let (mut here, mut known) = (root, Some(reference));
    for p in parents {
        known = known.and_then(|k| k.get(p)).and_then(toml::Value::as_table);
        here = here
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(Default::default()))
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override {dotted}: '{p}' is not a section")))?;
    }
    if !known.is_some_and(|k| k.contains_key(last)) {
        return Err(Error::config(format!("override {dotted}: unknown key")));
    }
    here.insert(last.clone(), value);
    Ok(())
}

/// Rejects keys the defaults do not have, so typos do not pass silently.
fn check_keys(user: &toml::Table, reference: &toml::Table, prefix: &str) -> Result<()> {
    for (k, v) in user {
        let dotted = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (reference.get(k), v) {
            (None, _) => return Err(Error::config(format!("unknown config key {dotted}"))),
            (Some(toml::Value::Table(r)), toml::Value::Table(u)) => check_keys(u, r, &dotted)?,
            _ => {}
        }
    }
    Ok(())
}

impl SimConfig {
    /// Parses config text (or a run manifest embedding one) and applies
    /// overrides in order.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut root: toml::Table = toml::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        if let Some(toml::Value::Table(inner)) = root.remove("config") {
            root = inner;
        }
        let reference = toml::Table::try_from(SimConfig::default()).map_err(|e| Error::config(e.to_string()))?;
        check_keys(&root, &reference, "")?;
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut root, &reference, &path, value)?;
        }
        let cfg: SimConfig = root.try_into().map_err(|e: toml::de::Error| Error::config(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    fn check(&self) -> Result<()> {
        if self.run.n_seeds == 0 {
            return Err(Error::config("run.n_seeds must be >= 1"));
        }
        if !(self.abstraction.beta > 0.0 && self.abstraction.beta < 1.0) {
            return Err(Error::config("abstraction.beta must lie in (0, 1)"));
        }
        uniform_grid(self.output.ipg_grid_step_s, self.output.ipg_grid_max_s)?;
        Ok(())
    }

    /// Technology settings for `technology` under this config.
    pub fn theta_for(&self, technology: Technology, mcs: u8, payload: u32) -> Result<TechnologySettings<f64>> {
        Ok(match technology {
            Technology::Ieee80211p => TechnologySettings::Ieee80211p(Ieee80211pSettings::with_mcs(mcs, payload)?),
            Technology::Cv2x => {
                let c = &self.cv2x;
                TechnologySettings::Cv2x(CV2xSettings::with_mcs(
                    mcs,
                    payload,
                    c.n_subch,
                    c.n_prb_subch,
                    c.t_tti_us,
                    &self.prb_table,
                )?)
            }
        })
    }

    pub fn theta(&self) -> Result<TechnologySettings<f64>> {
        let mcs = match self.run.technology {
            Technology::Ieee80211p => self.ieee80211p.mcs,
            Technology::Cv2x => self.cv2x.mcs,
        };
        self.theta_for(self.run.technology, mcs, self.traffic.payload_bytes)
    }

    /// The configured curve, or the bundled synthetic curve for `theta`.
    pub fn curve(&self, theta: &TechnologySettings<f64>) -> Result<PerCurve<f64>> {
        if !self.abstraction.curve.as_os_str().is_empty() {
            return Ok(io::load_curve(&self.abstraction.curve)?.0);
        }
        let mcs = theta.mcs_index();
        let spec = bundled_specs(&self.prb_table)?
            .into_iter()
            .find(|s| s.theta.technology() == theta.technology() && s.theta.mcs_index() == mcs && s.theta.payload_bytes() == theta.payload_bytes())
            .ok_or_else(|| {
                Error::data(format!(
                    "no bundled curve for {} MCS {} {} B; set abstraction.curve",
                    theta.technology(),
                    mcs.map_or("?".into(), |m| m.to_string()),
                    theta.payload_bytes()
                ))
            })?;
        let meta = CurveMeta::new(bundled::SCENARIO_ID, theta.technology(), mcs.unwrap_or(0), theta.payload_bytes());
        Ok(normalize_curve(&spec.samples(), meta)?.0)
    }

    pub fn model(&self) -> Result<AbstractionModel<f64>> {
        if !self.abstraction.model.as_os_str().is_empty() {
            return io::load_model(&self.abstraction.model)?.model();
        }
        let a = &self.abstraction;
        AbstractionModel::new("config", a.alpha_hat, a.bandwidth_hz, a.beta)
    }

    /// Step function for `theta` from the configured source.
    pub fn step(&self, theta: &TechnologySettings<f64>, beta: f64) -> Result<StepFunction<f64>> {
        match self.abstraction.threshold_source {
            ThresholdSource::Model => Ok(threshold_for_settings(theta, &self.model()?)),
            ThresholdSource::Curve => threshold_from_curve(&self.curve(theta)?, beta),
        }
    }

    /// Engine configuration for `seed`, with the configured reception model.
    pub fn run_config(&self, seed: u64) -> Result<RunConfig> {
        let theta = self.theta()?;
        let reception = match self.run.reception {
            ReceptionMode::PerCurve => ReceptionModel::PerCurve(self.curve(&theta)?),
            ReceptionMode::StepThreshold => ReceptionModel::StepThreshold(self.step(&theta, self.abstraction.beta)?),
        };
        let cfg = RunConfig {
            seed,
            sim_duration_s: self.run.duration_s,
            warmup_s: self.run.warmup_s,
            theta,
            reception,
            road: self.road.clone(),
            traffic: self.traffic.clone(),
            propagation: self.propagation.clone(),
            csma: self.csma.clone(),
            sps: self.sps.clone(),
            options: self.output.engine(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..u64::from(self.run.n_seeds)).map(|k| self.run.seed + k).collect()
    }

    pub fn ipg_grid(&self) -> Vec<f64> {
        uniform_grid(self.output.ipg_grid_step_s, self.output.ipg_grid_max_s).expect("checked on load")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotated_defaults_match_struct_defaults() {
        let parsed: SimConfig = toml::from_str(DEFAULT_CONFIG_TOML).unwrap();
        assert_eq!(parsed, SimConfig::default());
        assert_eq!(SimConfig::from_toml("", &[]).unwrap(), SimConfig::default());
    }

    #[test]
    fn serialised_config_roundtrips() {
        let c = SimConfig::default();
        assert_eq!(SimConfig::from_toml(&c.to_toml().unwrap(), &[]).unwrap(), c);
    }

    #[test]
    fn overrides_apply_in_order() {
        let c = SimConfig::from_toml(
            "",
            &[
                "road.density_vpk=400".into(),
                "road.mean_speed_kmh=56".into(),
                "run.technology=cv2x".into(),
                "run.reception=per_curve".into(),
                "propagation.winner.free_space_floor=false".into(),
                "run.seed=3".into(),
                "run.seed=4".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.road.density_vpk, 400.0);
        assert_eq!(c.road.mean_speed_kmh, 56.0);
        assert_eq!(c.run.technology, Technology::Cv2x);
        assert_eq!(c.run.reception, ReceptionMode::PerCurve);
        assert!(!c.propagation.winner.free_space_floor);
        assert_eq!(c.run.seed, 4);
    }

    #[test]
    fn bad_overrides_are_config_errors() {
        for o in ["road.densty=4", "road", "nosuch.key=1", "road.density_vpk=fast", "run.n_seeds=0"] {
            let e = SimConfig::from_toml("", &[o.into()]).unwrap_err();
            assert!(e.is_config(), "{o}: {e}");
        }
        assert!(SimConfig::from_toml("[road]\nbogus = 1\n", &[]).unwrap_err().is_config());
    }

    #[test]
    fn resolves_both_technologies_and_modes() {
        for tech in ["ieee80211p", "cv2x"] {
            for mode in ["step_threshold", "per_curve"] {
                let c = SimConfig::from_toml("", &[format!("run.technology={tech}"), format!("run.reception={mode}")]).unwrap();
                let rc = c.run_config(7).unwrap();
                assert_eq!(rc.seed, 7);
                assert_eq!(rc.reception.mode(), c.run.reception);
            }
        }
    }

    #[test]
    fn model_threshold_for_default_wave_settings() {
        // 4.5016 Mb/s over 0.37 · 10 MHz.
        let c = SimConfig::default();
        let s = c.step(&c.theta().unwrap(), 0.5).unwrap();
        assert!((s.gamma_th_db() - 1.2191).abs() < 1e-3);
    }

    #[test]
    fn missing_bundled_curve_is_a_data_error() {
        let c = SimConfig::from_toml("", &["ieee80211p.mcs=6".into(), "run.reception=per_curve".into()]).unwrap();
        assert!(matches!(c.run_config(1), Err(Error::Data(_))));
    }
}
