//! Per-run link table: deterministic loss plus per-directed-link shadowing.

use rand_distr::{Distribution, StandardNormal};

use super::streams::{stream, Purpose};
use crate::channel::{
    noise_power_dbm, path_loss_db, path_loss_manhattan_db, PropagationConfig, ShadowingState,
};
use crate::num::db_to_linear;
use crate::scenario::{link_geometry, position_at, track_m, LinkGeometry, RoadConfig, VehicleState};

#[derive(Clone, Copy)]
struct Cell {
    state: Option<ShadowingState<f64>>,
    draws: u64,
}

pub struct LinkTable {
    n: usize,
    seed: u64,
    prop: PropagationConfig<f64>,
    sigma_db: f64,
    eirp_dbm: f64,
    pub noise_mw: f64,
    cells: Vec<Cell>,
}

/// Powers from one transmitter to every vehicle at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub power_dbm: Vec<f64>,
    pub power_mw: Vec<f64>,
    pub distance_m: Vec<f64>,
    /// False when the transmitter sits in a trimmed edge zone of a finite road.
    pub scored: bool,
}

impl LinkTable {
    pub fn new(n: usize, seed: u64, prop: &PropagationConfig<f64>) -> Self {
        Self {
            n,
            seed,
            prop: prop.clone(),
            sigma_db: prop.shadowing_sigma_db(),
            eirp_dbm: prop.tx_power_dbm() + 2.0 * prop.antenna_gain_dbi,
            noise_mw: db_to_linear(noise_power_dbm(prop)),
            cells: vec![Cell { state: None, draws: 0 }; n * n],
        }
    }

    fn shadowing(&mut self, tx: usize, rx: usize, track: f64) -> f64 {
        if self.sigma_db == 0.0 {
            return 0.0;
        }
        let cell = &mut self.cells[tx * self.n + rx];
        if let Some(s) = cell.state {
            if s.track_m == track {
                return s.value_db;
            }
        }
        let mut rng = stream(self.seed, Purpose::Shadowing, &[tx as u64, rx as u64, cell.draws]);
        cell.draws += 1;
        let z: f64 = StandardNormal.sample(&mut rng);
        let value_db = match cell.state {
            None => self.sigma_db * z,
            Some(p) => {
                let rho = (-(track - p.track_m).abs() / self.prop.decorrelation_m).exp();
                rho * p.value_db + self.sigma_db * (1.0 - rho * rho).sqrt() * z
            }
        };
        cell.state = Some(ShadowingState { value_db, track_m: track });
        value_db
    }

    fn loss_db(&self, g: LinkGeometry) -> f64 {
        match g {
            LinkGeometry::Los { distance_m } => path_loss_db(distance_m, &self.prop),
            LinkGeometry::Nlos { d1_m, d2_m, .. } => path_loss_manhattan_db(d1_m, d2_m, &self.prop),
        }
    }

    /// Received powers from `tx` to all vehicles at time `t` (seconds). The
    /// transmitter's own entry is `-inf`.
    pub fn snapshot(&mut self, tx: usize, vehicles: &[VehicleState], road: &RoadConfig, t: f64) -> Snapshot {
        let n = vehicles.len();
        let mut s = Snapshot {
            power_dbm: vec![f64::NEG_INFINITY; n],
            power_mw: vec![0.0; n],
            distance_m: vec![f64::INFINITY; n],
            scored: true,
        };
        let a = &vehicles[tx];
        let pa = position_at(a, road, t);
        if !road.wrap_around {
            s.scored = pa >= road.edge_trim_m && pa <= road.road_length_m - road.edge_trim_m;
        }
        let track = track_m(a, t);
        for (rx, b) in vehicles.iter().enumerate() {
            if rx == tx {
                continue;
            }
            let g = link_geometry(road, a, pa, b, position_at(b, road, t));
            let p = self.eirp_dbm - self.loss_db(g) - self.shadowing(tx, rx, track);
            s.power_dbm[rx] = p;
            s.power_mw[rx] = db_to_linear(p);
            s.distance_m[rx] = g.distance_m();
        }
        s
    }
}
