//! LTE-V2X sidelink loop on a TTI clock.

use rand::rngs::SmallRng;

use super::links::{LinkTable, Snapshot};
use super::streams::{stream, Purpose};
use super::trace::{MacTrace, SelectionRecord, SpsTxRecord};
use super::{Fate, ReceptionModel, RunConfig, RunOutput, Scorer};
use crate::access::{Footprint, SciRecord, SpsState};
use crate::error::{Error, Result};
use crate::num::{db_to_linear, linear_to_db};
use crate::scenario::spawn;
use crate::settings::CV2xSettings;

/// Bandwidth of one resource element, for RSRP.
const RE_BANDWIDTH_HZ: f64 = 15e3;

struct Tx {
    tx: u32,
    gen_ns: u64,
    fp: Footprint,
    link: Snapshot,
}

struct Ue {
    sps: SpsState,
    rng: SmallRng,
    pending: Option<u64>,
    next_gen_ns: u64,
}

pub(super) fn run(cfg: &RunConfig, s: &CV2xSettings<f64>, models: &[ReceptionModel]) -> Result<RunOutput> {
    let vehicles = spawn(&cfg.road, &cfg.traffic, &mut stream(cfg.seed, Purpose::Placement, &[]))?;
    let n = vehicles.len();
    let mut links = LinkTable::new(n, cfg.seed, &cfg.propagation);
    let mut scorer = Scorer::new(cfg, models)?;
    let mut trace = cfg.options.record_trace.then(MacTrace::default);
    let sp = &cfg.sps;

    let tti_ns = (s.t_tti_us * 1e3).round() as u64;
    let end_ns = (cfg.sim_duration_s * 1e9).round() as u64;
    let warmup_ns = (cfg.warmup_s * 1e9).round() as u64;
    let period_ns = (cfg.traffic.generation_period_ms * 1e6).round() as u64;
    let n_tti_pkt = s.n_tti();
    let n_sub_pkt = if n_tti_pkt > 1 { s.n_subch } else { s.subchannels_per_packet() };
    let sci_lin = db_to_linear(sp.sci_sinr_db);
    let rsrp_offset_db = linear_to_db(cfg.propagation.bandwidth_hz / RE_BANDWIDTH_HZ);
    let sci_horizon = u64::from(sp.period_tti) + u64::from(n_tti_pkt);
    if n_sub_pkt > s.n_subch {
        return Err(Error::config("packet needs more subchannels than configured"));
    }

    let mut ues: Vec<Ue> = vehicles
        .iter()
        .enumerate()
        .map(|(i, v)| Ue {
            sps: SpsState::new(s.n_subch, sp),
            rng: stream(cfg.seed, Purpose::Mac, &[i as u64]),
            pending: None,
            next_gen_ns: (v.phase_s * 1e9).round() as u64,
        })
        .collect();

    let mut flight: Vec<Tx> = Vec::new();
    let n_ttis = end_ns.div_ceil(tti_ns);
    let mut transmitting = vec![false; n];
    let mut pending_sci: Vec<SciRecord> = Vec::new();

    for tti in 0..n_ttis {
        let t0 = tti * tti_ns;
        let t_s = t0 as f64 / 1e9;

        // Start reserved transmissions.
        for (i, ue) in ues.iter_mut().enumerate() {
            let Some(gen_ns) = ue.pending else { continue };
            let Some(fp) = ue.sps.reservation.filter(|r| r.tti == tti) else { continue };
            let out = ue.sps.on_transmission(sp, &mut ue.rng);
            if let Some(tr) = trace.as_mut() {
                tr.sps_tx.push(SpsTxRecord {
                    node: i as u32,
                    tti,
                    counter_before: out.counter_before,
                    counter_after: out.counter_after,
                    keep: out.keep_decision,
                });
            }
            for t in fp.tti..=fp.end_tti() {
                ue.sps.sensing.mark_own_tx(t);
            }
            ue.pending = None;
            if gen_ns >= warmup_ns {
                scorer.sent();
            }
            let link = links.snapshot(i, &vehicles, &cfg.road, t_s);
            flight.push(Tx { tx: i as u32, gen_ns, fp, link });
            // Control information announces whether the resource stays.
            let sci = SciRecord {
                source: i as u32,
                footprint: fp,
                rsrp_dbm: 0.0,
                reserves_next: out.reserves_next,
            };
            pending_sci.push(sci);
        }

        // Sensing of this TTI at every vehicle not transmitting in it.
        transmitting.fill(false);
        for f in flight.iter().filter(|f| f.fp.covers_tti(tti)) {
            transmitting[f.tx as usize] = true;
        }
        let here: Vec<&Tx> = flight.iter().filter(|f| f.fp.covers_tti(tti)).collect();
        for (v, ue) in ues.iter_mut().enumerate() {
            if transmitting[v] {
                continue;
            }
            for f in &here {
                ue.sps.sensing.add_rssi(tti, f.fp.subchannels(), f.link.power_mw[v]);
            }
            for f in here.iter().filter(|f| f.fp.tti == tti) {
                let interf: f64 = here
                    .iter()
                    .filter(|g| g.tx != f.tx)
                    .map(|g| {
                        let shared = f.fp.shared_cells(&g.fp) as f64 / f.fp.cells() as f64;
                        shared * g.link.power_mw[v]
                    })
                    .sum();
                if f.link.power_mw[v] >= sci_lin * (links.noise_mw + interf) {
                    let sci = pending_sci.iter().find(|s| s.source == f.tx).expect("sci of started tx");
                    ue.sps.sensing.push_sci(
                        SciRecord {
                            rsrp_dbm: f.link.power_dbm[v] - rsrp_offset_db,
                            ..*sci
                        },
                        sci_horizon,
                    );
                }
            }
        }
        pending_sci.clear();

        // Score transmissions whose last TTI is this one.
        for f in flight.iter().filter(|f| f.fp.end_tti() == tti && f.gen_ns >= warmup_ns) {
            evaluate(f, &flight, &links, cfg, &mut scorer, t0 + tti_ns);
        }
        let keep_from = tti.saturating_sub(u64::from(n_tti_pkt));
        flight.retain(|f| f.fp.end_tti() >= keep_from);

        // Packets generated during this TTI.
        for (i, ue) in ues.iter_mut().enumerate() {
            if ue.next_gen_ns >= t0 + tti_ns || ue.next_gen_ns >= end_ns {
                continue;
            }
            let gen_ns = ue.next_gen_ns;
            ue.next_gen_ns += period_ns;
            if gen_ns >= warmup_ns {
                scorer.generated();
            }
            if ue.pending.replace(gen_ns).is_some() && gen_ns >= warmup_ns {
                scorer.dropped(1);
            }
            if !ue.sps.reservation_usable(tti, sp) {
                let Some(o) = ue.sps.select(tti, n_tti_pkt, n_sub_pkt, s.n_subch, sp, &mut ue.rng) else {
                    return Err(Error::config("empty sidelink selection window"));
                };
                if let Some(tr) = trace.as_mut() {
                    tr.selections.push(SelectionRecord {
                        node: i as u32,
                        tti,
                        chosen: o.footprint,
                        threshold_dbm: o.threshold_dbm,
                        n_remaining: o.n_remaining,
                        n_total: o.n_total,
                    });
                }
            }
        }
    }

    Ok(scorer.finish(trace))
}

fn evaluate(f: &Tx, flight: &[Tx], links: &LinkTable, cfg: &RunConfig, scorer: &mut Scorer, end_ns: u64) {
    let overlapping: Vec<(&Tx, f64)> = flight
        .iter()
        .filter(|g| !std::ptr::eq(*g, f))
        .filter_map(|g| {
            let o = f.fp.shared_cells(&g.fp) as f64 / f.fp.cells() as f64;
            (o > 0.0).then_some((g, o))
        })
        .collect();
    let gen_s = f.gen_ns as f64 / 1e9;
    let rx_s = end_ns as f64 / 1e9;
    if !f.link.scored {
        return;
    }
    for r in 0..f.link.power_mw.len() {
        let d = f.link.distance_m[r];
        if r == f.tx as usize || d > cfg.options.max_range_m {
            continue;
        }
        let busy_tx = flight.iter().any(|g| {
            g.tx as usize == r && g.fp.tti <= f.fp.end_tti() && f.fp.tti <= g.fp.end_tti()
        });
        let fate = if busy_tx {
            Fate::HalfDuplex
        } else {
            let interf: f64 = overlapping.iter().map(|(g, o)| o * g.link.power_mw[r]).sum();
            Fate::Sinr(f.link.power_mw[r] / (links.noise_mw + interf))
        };
        scorer.score((f.tx, r as u32), d, fate, gen_s, rx_s);
    }
}
