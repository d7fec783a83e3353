use v2xsim_core::abstraction::{normalize_curve, synthetic::logistic_curve, CurveMeta, StepFunction};
use v2xsim_core::channel::{noise_power_dbm, path_loss_los_db, PropagationConfig};
use v2xsim_core::engine::{run, run_multi, ReceptionModel, RunConfig};
use v2xsim_core::scenario::PlacedVehicle;
use v2xsim_core::settings::{CV2xSettings, Ieee80211pSettings, PrbTable, TechnologySettings};

fn wave() -> TechnologySettings<f64> {
    TechnologySettings::Ieee80211p(Ieee80211pSettings::with_mcs(2, 350).unwrap())
}

fn sidelink() -> TechnologySettings<f64> {
    TechnologySettings::Cv2x(CV2xSettings::with_mcs(7, 350, 5, 10, 1000.0, &PrbTable::default()).unwrap())
}

fn step(db: f64) -> ReceptionModel {
    ReceptionModel::StepThreshold(StepFunction::from_db(db, 0.5).unwrap())
}

fn pair(theta: TechnologySettings<f64>, gap_m: f64) -> RunConfig {
    let mut cfg = RunConfig::new(theta, step(0.0));
    cfg.road.placed = vec![
        PlacedVehicle { lane: 0, position_m: 100.0, speed_kmh: 96.0 },
        PlacedVehicle { lane: 0, position_m: 100.0 + gap_m, speed_kmh: 96.0 },
    ];
    cfg.sim_duration_s = 5.0;
    cfg
}

#[test]
fn isolated_pair_receives_everything_at_ten_metres() {
    // At 10 m the mean SNR is tens of dB above a 0 dB threshold.
    let prop = PropagationConfig::<f64>::default();
    let snr_db = prop.tx_power_dbm() + 2.0 * prop.antenna_gain_dbi - path_loss_los_db(10.0, &prop) - noise_power_dbm(&prop);
    assert!(snr_db > 40.0);
    for theta in [wave(), sidelink()] {
        let m = run(&pair(theta, 10.0)).unwrap();
        let bin = m.prr.bin_of(10.0).unwrap();
        assert!(m.prr.opportunities()[bin] > 50);
        assert_eq!(m.prr.received()[bin], m.prr.opportunities()[bin]);
    }
}

#[test]
fn single_vehicle_has_no_receptions() {
    for theta in [wave(), sidelink()] {
        let mut cfg = RunConfig::new(theta, step(0.0));
        cfg.road.placed = vec![PlacedVehicle { lane: 0, position_m: 0.0, speed_kmh: 50.0 }];
        let m = run(&cfg).unwrap();
        assert_eq!(m.outcomes.opportunities, 0);
        assert!(m.prr.prr_curve().is_empty());
        assert!(m.ipg.gaps().is_empty());
        assert!(m.outcomes.packets_sent > 0);
    }
}

fn small_highway(theta: TechnologySettings<f64>, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(theta, step(3.0));
    cfg.seed = seed;
    cfg.road.road_length_m = 1000.0;
    cfg.road.density_vpk = 60.0;
    cfg.sim_duration_s = 3.0;
    cfg.warmup_s = 0.5;
    cfg
}

#[test]
fn identical_seeds_are_bit_identical() {
    for theta in [wave(), sidelink()] {
        let a = run(&small_highway(theta.clone(), 4)).unwrap();
        let b = run(&small_highway(theta.clone(), 4)).unwrap();
        assert_eq!(a, b);
        let c = run(&small_highway(theta, 5)).unwrap();
        assert_ne!(a.prr, c.prr);
    }
}

#[test]
fn every_opportunity_has_exactly_one_outcome() {
    for theta in [wave(), sidelink()] {
        let m = run(&small_highway(theta, 9)).unwrap();
        let o = m.outcomes;
        assert!(o.opportunities > 1000);
        assert_eq!(o.opportunities, o.received + o.lost_sinr + o.lost_half_duplex);
        let tallied: u64 = m.prr.opportunities().iter().sum();
        assert!(tallied <= o.opportunities);
    }
}

#[test]
fn raising_the_threshold_never_helps() {
    // Same channel and MAC realisation, so step outcomes are nested.
    for theta in [wave(), sidelink()] {
        let cfg = small_highway(theta, 2);
        let out = run_multi(&cfg, &[step(0.0), step(5.0), step(10.0)]).unwrap();
        let r: Vec<&[u64]> = out.stores.iter().map(|s| s.prr.received()).collect();
        for b in 0..r[0].len() {
            assert!(r[0][b] >= r[1][b] && r[1][b] >= r[2][b]);
        }
        assert_eq!(out.stores[0].prr.opportunities(), out.stores[2].prr.opportunities());
    }
}

#[test]
fn curve_mode_matches_shadowing_average_on_noise_limited_link() {
    // Two vehicles at fixed separation: PRR = E_shadow[1 − PER(SNR)].
    let prop = PropagationConfig::<f64>::default();
    let gap = 400.0;
    let mean_snr_db = prop.tx_power_dbm() + 2.0 * prop.antenna_gain_dbi - path_loss_los_db(gap, &prop) - noise_power_dbm(&prop);
    let center = mean_snr_db;
    let (curve, _) = normalize_curve(&logistic_curve(center, 2.0, 0.25, 80), CurveMeta::default()).unwrap();

    // Numerical integration over the shadowing density.
    let sigma = prop.shadowing_sigma_db();
    let (mut acc, mut wsum) = (0.0, 0.0);
    let steps = 4000;
    for i in 0..=steps {
        let z = -6.0 + 12.0 * i as f64 / steps as f64;
        let w = (-0.5 * z * z).exp();
        acc += w * (1.0 - curve.per_at_db(mean_snr_db - sigma * z));
        wsum += w;
    }
    let expected = acc / wsum;

    let mut cfg = pair(wave(), gap);
    cfg.reception = ReceptionModel::PerCurve(curve);
    cfg.sim_duration_s = 300.0;
    cfg.options.prr_max_distance_m = 600.0;
    let m = run(&cfg).unwrap();
    let bin = m.prr.bin_of(gap).unwrap();
    let got = m.prr.received()[bin] as f64 / m.prr.opportunities()[bin] as f64;
    assert!((got - expected).abs() < 0.05, "simulated {got} vs integrated {expected}");
}

#[test]
fn edge_trim_drops_transmitters_near_the_road_ends() {
    for theta in [wave(), sidelink()] {
        let mut cfg = RunConfig::new(theta, step(0.0));
        cfg.road.wrap_around = false;
        cfg.road.road_length_m = 2000.0;
        cfg.road.edge_trim_m = 300.0;
        // Parked: one vehicle in the trimmed zone, one in the scored middle.
        cfg.road.placed = vec![
            PlacedVehicle { lane: 0, position_m: 100.0, speed_kmh: 0.0 },
            PlacedVehicle { lane: 0, position_m: 400.0, speed_kmh: 0.0 },
        ];
        cfg.sim_duration_s = 3.0;
        let trimmed = run(&cfg).unwrap();
        cfg.road.edge_trim_m = 0.0;
        let full = run(&cfg).unwrap();
        assert!(trimmed.outcomes.opportunities > 0);
        // Each vehicle is the other's only receiver; start offsets can differ by one packet.
        let (t, f) = (trimmed.outcomes.opportunities, full.outcomes.opportunities);
        assert!(t < f && (2 * t).abs_diff(f) <= 1, "trimmed {t}, full {f}");
    }
}
