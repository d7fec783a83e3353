//! Workflows behind the `v2xsim` binary: fit the implementation loss from a
//! curve set, derive thresholds from a fitted model, select the target PER,
//! and run simulations that emit plot-ready CSVs.

pub mod config;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use v2xsim_core::abstraction::synthetic::{bundled, bundled_specs};
use v2xsim_core::abstraction::{
    fit_alpha, fit_point_for_curve, select_beta, threshold_for_settings, threshold_from_curve, DEFAULT_BETAS,
};
use v2xsim_core::engine::{run_multi, ReceptionModel, RunConfig};
use v2xsim_core::io::{self, FitRow, ModelFile};
use v2xsim_core::metrics::{ipg_ccdf, MetricStore, OutcomeCounts};
use v2xsim_core::num::linear_to_db;
use v2xsim_core::settings::{effective_throughput, Technology};
use v2xsim_core::Error;

pub use config::{SimConfig, DEFAULT_CONFIG_TOML};

/// Process exit code for an error: 2 for configuration, 3 for data.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_config() => 2,
        _ => 3,
    }
}

/// Runs `models` on every seed in parallel and pools the stores per model
/// in seed order.
pub fn run_seeds(cfg: &SimConfig, models: &[ReceptionModel]) -> Result<Vec<MetricStore>> {
    let configs: Vec<RunConfig> = cfg.seeds().into_iter().map(|s| cfg.run_config(s)).collect::<Result<_, _>>()?;
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|rc| scope.spawn(move || run_multi(rc, models)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut pooled: Option<Vec<MetricStore>> = None;
    for (seed, r) in cfg.seeds().into_iter().zip(results) {
        let out = r.with_context(|| format!("seed {seed}"))?;
        match pooled.as_mut() {
            None => pooled = Some(out.stores),
            Some(acc) => {
                for (a, s) in acc.iter_mut().zip(&out.stores) {
                    a.merge(s)?;
                }
            }
        }
    }
    Ok(pooled.expect("at least one seed"))
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: ModelFile,
    pub path: PathBuf,
}

/// Fits `α̂` to every curve of `scenario_id` in `curve_dir` and writes the
/// model file.
pub fn cmd_fit_alpha(cfg: &SimConfig, curve_dir: &Path, scenario_id: &str, beta: f64, out: &Path) -> Result<FitReport> {
    let bandwidth = cfg.abstraction.bandwidth_hz;
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for path in io::find_curves(curve_dir, scenario_id)? {
        let (curve, report) = io::load_curve(&path)?;
        if report.warning {
            log::warn!("{}: PER repaired by up to {}", path.display(), report.max_adjustment);
        }
        let m = &curve.meta;
        let (tech, mcs, bytes) = (m.technology.expect("parsed"), m.mcs_index.expect("parsed"), m.payload_bytes.expect("parsed"));
        let theta = cfg.theta_for(tech, mcs, bytes).with_context(|| path.display().to_string())?;
        let (point, step) = fit_point_for_curve(&curve, &theta, beta, bandwidth).with_context(|| path.display().to_string())?;
        rows.push(FitRow {
            settings: curve.name(),
            psi_e_bps: point.psi_e,
            psi_s_bps: point.psi_s,
            gamma_th_db: step.gamma_th_db(),
        });
        points.push(point);
    }
    let fit = fit_alpha(&points)?;
    let model = ModelFile {
        scenario_id: scenario_id.to_string(),
        alpha_hat: fit.alpha_hat,
        beta,
        bandwidth_hz: bandwidth,
        rmse_bps: fit.rmse,
        n_curves: fit.n,
        fit_points: rows,
    };
    model.model()?;
    io::save_model(out, &model)?;
    Ok(FitReport { model, path: out.to_path_buf() })
}

pub fn format_fit_report(r: &FitReport) -> String {
    let m = &r.model;
    let mut s = format!(
        "scenario {}: alpha_hat = {:.4}, RMSE = {:.3} Mb/s over {} curves (beta = {}, B = {} MHz)\n",
        m.scenario_id,
        m.alpha_hat,
        m.rmse_bps / 1e6,
        m.n_curves,
        m.beta,
        m.bandwidth_hz / 1e6
    );
    s.push_str(&format!("{:<32} {:>10} {:>12} {:>12} {:>8}\n", "settings", "gamma_dB", "psi_e_Mbps", "psi_s_Mbps", "ratio"));
    for p in &m.fit_points {
        s.push_str(&format!(
            "{:<32} {:>10.3} {:>12.4} {:>12.4} {:>8.4}\n",
            p.settings,
            p.gamma_th_db,
            p.psi_e_bps / 1e6,
            p.psi_s_bps / 1e6,
            p.psi_e_bps / p.psi_s_bps
        ));
    }
    s.push_str(&format!("model written to {}\n", r.path.display()));
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub psi_e_bps: f64,
    pub gamma_linear: f64,
    pub gamma_db: f64,
}

/// Threshold of the configured settings under a model file.
pub fn cmd_derive_threshold(cfg: &SimConfig, model_path: &Path) -> Result<Threshold> {
    let model = io::load_model(model_path)?.model()?;
    let theta = cfg.theta()?;
    let step = threshold_for_settings(&theta, &model);
    Ok(Threshold {
        psi_e_bps: effective_throughput(&theta),
        gamma_linear: step.gamma_th,
        gamma_db: linear_to_db(step.gamma_th),
    })
}

pub fn format_threshold(t: &Threshold) -> String {
    let db = if t.gamma_linear > 0.0 && t.gamma_db.is_finite() {
        format!("{:.4} dB", t.gamma_db)
    } else {
        "below any threshold".to_string()
    };
    format!(
        "effective throughput {:.4} Mb/s\nthreshold {} (linear {:.6})\n",
        t.psi_e_bps / 1e6,
        db,
        t.gamma_linear
    )
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest: ManifestInfo,
    config: &'a SimConfig,
}

#[derive(Serialize)]
struct ManifestInfo {
    tool: &'static str,
    version: &'static str,
    seeds: Vec<u64>,
    technology: Technology,
    tx_time_us: f64,
    effective_throughput_bps: f64,
    threshold_db: Option<f64>,
    outcomes: OutcomeCounts,
}

pub fn write_metrics(dir: &Path, store: &MetricStore, grid: &[f64]) -> Result<()> {
    io::save_with(&dir.join("prr.csv"), |b| io::write_prr(b, &store.prr))?;
    let ccdf = if store.ipg.gaps().is_empty() {
        log::warn!("no inter-packet gaps recorded; ipg_ccdf.csv has no rows");
        Vec::new()
    } else {
        ipg_ccdf(&store.ipg, grid)?
    };
    io::save_with(&dir.join("ipg_ccdf.csv"), |b| io::write_ccdf(b, &ccdf))?;
    Ok(())
}

/// Runs the configured scenario and writes `prr.csv`, `ipg_ccdf.csv` and
/// `manifest.toml` into `out_dir`.
pub fn cmd_simulate(cfg: &SimConfig, out_dir: &Path) -> Result<MetricStore> {
    let rc = cfg.run_config(cfg.run.seed)?;
    let store = run_seeds(cfg, std::slice::from_ref(&rc.reception))?.remove(0);
    write_metrics(out_dir, &store, &cfg.ipg_grid())?;
    let manifest = Manifest {
        manifest: ManifestInfo {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seeds: cfg.seeds(),
            technology: rc.technology(),
            tx_time_us: rc.theta.tx_time_us(),
            effective_throughput_bps: effective_throughput(&rc.theta),
            threshold_db: match &rc.reception {
                ReceptionModel::StepThreshold(s) => Some(s.gamma_th_db()),
                ReceptionModel::PerCurve(_) => None,
            },
            outcomes: store.outcomes,
        },
        config: cfg,
    };
    let text = toml::to_string(&manifest).context("serialising manifest")?;
    let path = out_dir.join("manifest.toml");
    std::fs::write(&path, text).with_context(|| path.display().to_string())?;
    Ok(store)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaReport {
    pub beta_hat: f64,
    pub table: Vec<(f64, f64)>,
}

/// Curve-mode benchmark plus one step-mode evaluation per `beta`, all on the
/// same seeds. Writes `mae.csv` and the benchmark's `prr.csv`.
pub fn cmd_select_beta(cfg: &SimConfig, betas: &[f64], out_dir: &Path) -> Result<BetaReport> {
    let theta = cfg.theta()?;
    let curve = cfg.curve(&theta)?;
    let mut models = vec![ReceptionModel::PerCurve(curve.clone())];
    for &b in betas {
        models.push(ReceptionModel::StepThreshold(threshold_from_curve(&curve, b)?));
    }
    let stores = run_seeds(cfg, &models)?;
    let benchmark = &stores[0].prr;
    let mut next = stores[1..].iter();
    let sel = select_beta(betas, benchmark, |_| Ok(next.next().expect("one store per beta").prr.clone()))?;
    io::save_with(&out_dir.join("mae.csv"), |b| io::write_mae(b, &sel.table))?;
    io::save_with(&out_dir.join("prr.csv"), |b| io::write_prr(b, benchmark))?;
    Ok(BetaReport {
        beta_hat: sel.beta_hat,
        table: sel.table,
    })
}

pub fn format_beta_report(r: &BetaReport) -> String {
    let mut s = format!("{:>6} {:>10}\n", "beta", "MAE");
    for &(b, m) in &r.table {
        let mark = if b == r.beta_hat { " *" } else { "" };
        s.push_str(&format!("{b:>6} {m:>10.5}{mark}\n"));
    }
    s.push_str(&format!("beta_hat = {}\n", r.beta_hat));
    s
}

pub fn default_betas() -> Vec<f64> {
    DEFAULT_BETAS.to_vec()
}

/// Resolves the configuration as a run would and summarises it.
pub fn cmd_validate(cfg: &SimConfig) -> Result<String> {
    let rc = cfg.run_config(cfg.run.seed)?;
    let model = match &rc.reception {
        ReceptionModel::StepThreshold(s) => format!("step threshold {:.4} dB", s.gamma_th_db()),
        ReceptionModel::PerCurve(c) => format!("PER curve {} ({} points)", c.name(), c.points().len()),
    };
    Ok(format!(
        "ok: {} MCS {} {} B, tx time {} us, {} vehicles, {}, {} seed(s) x {} s\n",
        rc.technology(),
        rc.theta.mcs_index().map_or("-".into(), |m| m.to_string()),
        rc.theta.payload_bytes(),
        rc.theta.tx_time_us(),
        rc.road.vehicle_count(),
        model,
        cfg.run.n_seeds,
        cfg.run.duration_s
    ))
}

/// Writes the bundled synthetic curve set into `dir`.
pub fn write_bundled_curves(cfg: &SimConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for spec in bundled_specs(&cfg.prb_table)? {
        let t = &spec.theta;
        let name = format!(
            "{}_{}_mcs{}_{}B.csv",
            bundled::SCENARIO_ID,
            t.technology(),
            t.mcs_index().expect("bundled settings carry an MCS"),
            t.payload_bytes()
        );
        let path = dir.join(name);
        io::save_curve(&path, &spec.samples())?;
        out.push(path);
    }
    Ok(out)
}
