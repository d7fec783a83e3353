//! 802.11p event loop.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::rngs::SmallRng;

use super::links::{LinkTable, Snapshot};
use super::streams::{stream, Purpose};
use super::trace::{CsmaTxRecord, MacTrace};
use super::{Fate, ReceptionModel, RunConfig, RunOutput, Scorer};
use crate::access::{CsmaState, Interval, PendingPacket};
use crate::error::Result;
use crate::num::db_to_linear;
use crate::scenario::spawn;
use crate::settings::Ieee80211pSettings;

const NS_PER_S: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    TxEnd = 0,
    Timer = 1,
    Generate = 2,
}

struct Frame {
    tx: u32,
    gen_ns: u64,
    span: Interval,
    link: Snapshot,
    /// Preamble decodable at each node, judged when the frame started.
    decodable: Vec<bool>,
}

struct Node {
    mac: CsmaState,
    rng: SmallRng,
    busy: bool,
    busy_since: u64,
}

pub(super) fn run(cfg: &RunConfig, s: &Ieee80211pSettings<f64>, models: &[ReceptionModel]) -> Result<RunOutput> {
    let vehicles = spawn(&cfg.road, &cfg.traffic, &mut stream(cfg.seed, Purpose::Placement, &[]))?;
    let n = vehicles.len();
    let mut links = LinkTable::new(n, cfg.seed, &cfg.propagation);
    let mut scorer = Scorer::new(cfg, models)?;
    let mut trace = cfg.options.record_trace.then(MacTrace::default);

    let end_ns = (cfg.sim_duration_s * NS_PER_S).round() as u64;
    let warmup_ns = (cfg.warmup_s * NS_PER_S).round() as u64;
    let period_ns = (cfg.traffic.generation_period_ms * 1e6).round() as u64;
    let airtime_ns = (s.airtime_us() * 1e3).round() as u64;
    let p = &cfg.csma;
    let known_dbm = cfg.csma.known_threshold_dbm;
    let unknown_mw = db_to_linear(cfg.csma.unknown_threshold_dbm);
    let preamble_lin = db_to_linear(cfg.csma.preamble_sinr_db);

    let mut nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            mac: CsmaState::new(p.cw),
            rng: stream(cfg.seed, Purpose::Mac, &[i as u64]),
            busy: false,
            busy_since: 0,
        })
        .collect();

    let mut queue: BinaryHeap<Reverse<(u64, Kind, u64, u32)>> = BinaryHeap::new();
    let mut order = 0u64;
    let mut push = |q: &mut BinaryHeap<_>, t: u64, k: Kind, arg: u32| {
        q.push(Reverse((t, k, order, arg)));
        order += 1;
    };
    for (i, v) in vehicles.iter().enumerate() {
        let t = (v.phase_s * NS_PER_S).round() as u64;
        if t < end_ns {
            push(&mut queue, t, Kind::Generate, i as u32);
        }
    }

    // Frames still relevant for sensing or as interferers, oldest first.
    let mut frames: VecDeque<(u64, Frame)> = VecDeque::new();
    let mut next_id = 0u64;
    let mut seq = 0u64;

    while let Some(Reverse((now, kind, _, arg))) = queue.pop() {
        if now > end_ns {
            break;
        }
        let node = arg as usize;
        match kind {
            Kind::Generate => {
                if now >= warmup_ns {
                    scorer.generated();
                }
                let pkt = PendingPacket { seq, generated_ns: now };
                seq += 1;
                let nd = &mut nodes[node];
                let before = nd.mac.dropped;
                if let Some(t) = nd.mac.on_packet(pkt, now, nd.busy, p, &mut nd.rng) {
                    push(&mut queue, t, Kind::Timer, arg);
                }
                if nd.mac.dropped > before && now >= warmup_ns {
                    scorer.dropped(nd.mac.dropped - before);
                }
                if now + period_ns < end_ns {
                    push(&mut queue, now + period_ns, Kind::Generate, arg);
                }
            }
            Kind::Timer => {
                let Some(pkt) = nodes[node].mac.on_timer(now) else { continue };
                if let Some(tr) = trace.as_mut() {
                    tr.csma_tx.push(CsmaTxRecord {
                        node: arg,
                        time_ns: now,
                        busy: nodes[node].busy,
                        busy_since_ns: nodes[node].busy_since,
                    });
                }
                if pkt.generated_ns >= warmup_ns {
                    scorer.sent();
                }
                let link = links.snapshot(node, &vehicles, &cfg.road, now as f64 / NS_PER_S);
                let span = Interval::new(now, now + airtime_ns);
                let active: Vec<&Frame> = frames.iter().map(|(_, f)| f).filter(|f| f.span.end > now).collect();
                let decodable = (0..n)
                    .map(|m| {
                        let interf: f64 = active.iter().map(|f| f.link.power_mw[m]).sum();
                        link.power_mw[m] >= preamble_lin * (links.noise_mw + interf)
                    })
                    .collect();
                frames.push_back((
                    next_id,
                    Frame {
                        tx: arg,
                        gen_ns: pkt.generated_ns,
                        span,
                        link,
                        decodable,
                    },
                ));
                push(&mut queue, span.end, Kind::TxEnd, 0);
                next_id += 1;
                update_sensing(&frames, &mut nodes, now, p, known_dbm, unknown_mw, &mut queue, &mut push);
            }
            Kind::TxEnd => {
                // Frames ending now, in start order.
                let ending: Vec<u64> = frames
                    .iter()
                    .filter(|(_, f)| f.span.end == now)
                    .map(|(id, _)| *id)
                    .collect();
                if ending.is_empty() {
                    continue;
                }
                for id in &ending {
                    let f = &frames.iter().find(|(i, _)| i == id).expect("frame").1;
                    let tx = f.tx as usize;
                    let nd = &mut nodes[tx];
                    if let Some(t) = nd.mac.on_tx_end(now, nd.busy, p, &mut nd.rng) {
                        push(&mut queue, t, Kind::Timer, f.tx);
                    }
                }
                for id in &ending {
                    let f = &frames.iter().find(|(i, _)| i == id).expect("frame").1;
                    if f.gen_ns >= warmup_ns {
                        evaluate(f, &frames, &links, cfg, &mut scorer);
                    }
                }
                // Drain the duplicate TxEnd entries for the other frames.
                while let Some(Reverse((t, Kind::TxEnd, _, _))) = queue.peek() {
                    if *t != now {
                        break;
                    }
                    queue.pop();
                }
                update_sensing(&frames, &mut nodes, now, p, known_dbm, unknown_mw, &mut queue, &mut push);
                let max_air = airtime_ns;
                while frames.front().is_some_and(|(_, f)| f.span.end + max_air <= now) {
                    frames.pop_front();
                }
            }
        }
    }

    Ok(scorer.finish(trace))
}

/// Recomputes every node's carrier-sense state after the active set changed.
#[allow(clippy::too_many_arguments)]
fn update_sensing<F>(
    frames: &VecDeque<(u64, Frame)>,
    nodes: &mut [Node],
    now: u64,
    p: &crate::access::CsmaParams,
    known_dbm: f64,
    unknown_mw: f64,
    queue: &mut BinaryHeap<Reverse<(u64, Kind, u64, u32)>>,
    push: &mut F,
) where
    F: FnMut(&mut BinaryHeap<Reverse<(u64, Kind, u64, u32)>>, u64, Kind, u32),
{
    let active: Vec<&Frame> = frames
        .iter()
        .map(|(_, f)| f)
        .filter(|f| f.span.start <= now && f.span.end > now)
        .collect();
    for (m, nd) in nodes.iter_mut().enumerate() {
        let mut total = 0.0;
        let mut known = false;
        for f in active.iter().filter(|f| f.tx as usize != m) {
            total += f.link.power_mw[m];
            known |= f.decodable[m] && f.link.power_dbm[m] >= known_dbm;
        }
        let busy = known || total >= unknown_mw;
        if busy == nd.busy {
            continue;
        }
        nd.busy = busy;
        if busy {
            nd.busy_since = now;
            nd.mac.on_medium_busy(now, p, &mut nd.rng);
        } else if let Some(t) = nd.mac.on_medium_idle(now, p) {
            push(queue, t, Kind::Timer, m as u32);
        }
    }
}

/// Scores frame `f` at every receiver in range.
fn evaluate(f: &Frame, frames: &VecDeque<(u64, Frame)>, links: &LinkTable, cfg: &RunConfig, scorer: &mut Scorer) {
    let overlapping: Vec<(&Frame, f64)> = frames
        .iter()
        .map(|(_, g)| g)
        .filter(|g| !std::ptr::eq(*g, f))
        .filter_map(|g| {
            let o = f.span.overlap_fraction(&g.span);
            (o > 0.0).then_some((g, o))
        })
        .collect();
    let gen_s = f.gen_ns as f64 / NS_PER_S;
    let rx_s = f.span.end as f64 / NS_PER_S;
    if !f.link.scored {
        return;
    }
    for r in 0..f.link.power_mw.len() {
        let d = f.link.distance_m[r];
        if r == f.tx as usize || d > cfg.options.max_range_m {
            continue;
        }
        let fate = if overlapping.iter().any(|(g, _)| g.tx as usize == r) {
            Fate::HalfDuplex
        } else {
            let interf: f64 = overlapping.iter().map(|(g, o)| o * g.link.power_mw[r]).sum();
            Fate::Sinr(f.link.power_mw[r] / (links.noise_mw + interf))
        };
        scorer.score((f.tx, r as u32), d, fate, gen_s, rx_s);
    }
}
