//! Vehicle placement, constant-speed mobility and periodic packet generation.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    #[default]
    Highway,
    /// Two perpendicular streets crossing at the origin.
    UrbanGrid,
}

/// A vehicle pinned to a lane and position instead of drawn at random.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedVehicle {
    pub lane: u32,
    pub position_m: f64,
    pub speed_kmh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoadConfig {
    pub layout: Layout,
    pub lanes_per_direction: u32,
    pub lane_width_m: f64,
    pub road_length_m: f64,
    /// Vehicles per km counted over both directions.
    pub density_vpk: f64,
    pub mean_speed_kmh: f64,
    pub speed_std_kmh: f64,
    pub wrap_around: bool,
    /// On a finite road, transmissions from within this distance of either
    /// end are not scored.
    pub edge_trim_m: f64,
    /// When non-empty, replaces random placement.
    pub placed: Vec<PlacedVehicle>,
}

impl Default for RoadConfig {
    fn default() -> Self {
        Self {
            layout: Layout::Highway,
            lanes_per_direction: 3,
            lane_width_m: 4.0,
            road_length_m: 2000.0,
            density_vpk: 100.0,
            mean_speed_kmh: 96.0,
            speed_std_kmh: 5.0,
            wrap_around: true,
            edge_trim_m: 0.0,
            placed: Vec::new(),
        }
    }
}

impl RoadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.road_length_m > 0.0) {
            return Err(Error::config("road.road_length_m must be > 0"));
        }
        if self.placed.is_empty() && !(self.density_vpk > 0.0) {
            return Err(Error::config("road.density_vpk must be > 0"));
        }
        if self.lanes_per_direction == 0 {
            return Err(Error::config("road.lanes_per_direction must be >= 1"));
        }
        if !(self.lane_width_m > 0.0) || self.speed_std_kmh < 0.0 || self.mean_speed_kmh < 0.0 {
            return Err(Error::config("road lane width must be > 0 and speeds >= 0"));
        }
        if !(self.edge_trim_m >= 0.0 && 2.0 * self.edge_trim_m < self.road_length_m) {
            return Err(Error::config("road.edge_trim_m must be >= 0 and leave part of the road scored"));
        }
        for p in &self.placed {
            if p.lane >= self.n_lanes() {
                return Err(Error::config(format!("placed vehicle lane {} out of range", p.lane)));
            }
            if !(0.0..self.road_length_m).contains(&p.position_m) {
                return Err(Error::config(format!("placed vehicle position {} off the road", p.position_m)));
            }
        }
        Ok(())
    }

    pub fn n_lanes(&self) -> u32 {
        2 * self.lanes_per_direction
    }

    /// `round(density · length)` when placing at random.
    pub fn vehicle_count(&self) -> usize {
        if self.placed.is_empty() {
            (self.density_vpk * self.road_length_m / 1000.0).round() as usize
        } else {
            self.placed.len()
        }
    }

    /// Lanes `0..lanes_per_direction` head forward, the rest backward.
    pub fn heading_of(&self, lane: u32) -> i8 {
        if lane < self.lanes_per_direction {
            1
        } else {
            -1
        }
    }

    /// Signed lateral offset of a lane from the road axis.
    pub fn lane_offset_m(&self, lane: u32) -> f64 {
        let i = (lane % self.lanes_per_direction) as f64 + 0.5;
        f64::from(self.heading_of(lane)) * i * self.lane_width_m
    }

    /// Half of the paved width, both directions together.
    pub fn half_width_m(&self) -> f64 {
        f64::from(self.lanes_per_direction) * self.lane_width_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterRule {
    /// Strictly periodic with a per-vehicle phase drawn once.
    #[default]
    FixedPhaseRandomOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficConfig {
    pub payload_bytes: u32,
    pub generation_period_ms: f64,
    pub jitter_rule: JitterRule,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            payload_bytes: 350,
            generation_period_ms: 100.0,
            jitter_rule: JitterRule::FixedPhaseRandomOffset,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.generation_period_ms > 0.0) {
            return Err(Error::config("traffic.generation_period_ms must be > 0"));
        }
        if self.payload_bytes == 0 {
            return Err(Error::config("traffic.payload_bytes must be > 0"));
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        self.generation_period_ms / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    pub lane: u32,
    /// Along the vehicle's street, in `[0, road_length)` under wrap-around.
    pub position_m: f64,
    pub speed_mps: f64,
    pub heading: i8,
    /// First packet generation offset in `[0, period)`, seconds.
    pub phase_s: f64,
    /// Street index in the urban layout (0 along x, 1 along y).
    pub street: u8,
}

pub fn kmh_to_mps(v: f64) -> f64 {
    v / 3.6
}

/// Places vehicles on the road.
///
/// Random placement draws `round(density · length)` vehicles with uniform
/// position and lane, Gaussian speed truncated at three standard deviations
/// and a uniform generation phase.
pub fn spawn<R: Rng + ?Sized>(road: &RoadConfig, traffic: &TrafficConfig, rng: &mut R) -> Result<Vec<VehicleState>> {
    road.validate()?;
    traffic.validate()?;
    let period = traffic.period_s();
    if !road.placed.is_empty() {
        return Ok(road
            .placed
            .iter()
            .enumerate()
            .map(|(i, p)| VehicleState {
                id: i as u32,
                lane: p.lane,
                position_m: p.position_m,
                speed_mps: kmh_to_mps(p.speed_kmh),
                heading: road.heading_of(p.lane),
                phase_s: rng.random_range(0.0..period),
                street: 0,
            })
            .collect());
    }
    let n = road.vehicle_count();
    let speed = truncated_speed(road)?;
    let streets = match road.layout {
        Layout::Highway => 1,
        Layout::UrbanGrid => 2,
    };
    Ok((0..n)
        .map(|i| {
            let lane = rng.random_range(0..road.n_lanes());
            VehicleState {
                id: i as u32,
                lane,
                position_m: rng.random_range(0.0..road.road_length_m),
                speed_mps: kmh_to_mps(speed.sample(rng)),
                heading: road.heading_of(lane),
                phase_s: rng.random_range(0.0..period),
                street: rng.random_range(0..streets),
            }
        })
        .collect())
}

struct TruncatedSpeed {
    normal: Option<Normal<f64>>,
    mean: f64,
    bound: f64,
}

impl TruncatedSpeed {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.normal {
            None => self.mean,
            Some(n) => loop {
                let v = n.sample(rng);
                if (v - self.mean).abs() <= self.bound {
                    break v.max(0.0);
                }
            },
        }
    }
}

fn truncated_speed(road: &RoadConfig) -> Result<TruncatedSpeed> {
    let normal = if road.speed_std_kmh > 0.0 {
        Some(Normal::new(road.mean_speed_kmh, road.speed_std_kmh).map_err(|e| Error::config(e.to_string()))?)
    } else {
        None
    };
    Ok(TruncatedSpeed {
        normal,
        mean: road.mean_speed_kmh,
        bound: 3.0 * road.speed_std_kmh,
    })
}

fn wrap(x: f64, len: f64) -> f64 {
    let r = x.rem_euclid(len);
    if r >= len {
        0.0
    } else {
        r
    }
}

/// Position after `t` seconds from the spawn state.
pub fn position_at(v: &VehicleState, road: &RoadConfig, t: f64) -> f64 {
    let x = v.position_m + f64::from(v.heading) * v.speed_mps * t;
    if road.wrap_around {
        wrap(x, road.road_length_m)
    } else {
        x
    }
}

/// Moves every vehicle forward by `dt` seconds.
pub fn advance(vehicles: &mut [VehicleState], road: &RoadConfig, dt: f64) {
    for v in vehicles {
        v.position_m = position_at(v, road, dt);
    }
}

/// Distance travelled since spawn, the coordinate shadowing evolves along.
pub fn track_m(v: &VehicleState, t: f64) -> f64 {
    v.speed_mps * t
}

/// First generation instant at or after `now`.
pub fn next_generation_time(v: &VehicleState, traffic: &TrafficConfig, now: f64) -> f64 {
    let period = traffic.period_s();
    if now <= v.phase_s {
        return v.phase_s;
    }
    let k = ((now - v.phase_s) / period).ceil();
    v.phase_s + k * period
}

/// Line-of-sight state and the quantities path loss needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkGeometry {
    Los { distance_m: f64 },
    /// Legs from each end to the intersection centre.
    Nlos { distance_m: f64, d1_m: f64, d2_m: f64 },
}

impl LinkGeometry {
    pub fn distance_m(&self) -> f64 {
        match *self {
            LinkGeometry::Los { distance_m } | LinkGeometry::Nlos { distance_m, .. } => distance_m,
        }
    }
}

/// Planar coordinates of a vehicle at its current position.
pub fn coordinates(v: &VehicleState, road: &RoadConfig, position_m: f64) -> (f64, f64) {
    let lateral = road.lane_offset_m(v.lane);
    match (road.layout, v.street) {
        (Layout::Highway, _) | (Layout::UrbanGrid, 0) => (position_m, lateral),
        (Layout::UrbanGrid, _) => (lateral, position_m),
    }
}

fn wrapped_delta(a: f64, b: f64, len: f64, wrap_around: bool) -> f64 {
    let d = (a - b).abs();
    if wrap_around {
        d.min(len - d)
    } else {
        d
    }
}

/// Geometry between two vehicles at given positions along their streets.
///
/// In the urban layout streets are centred on the origin: positions are
/// shifted by half the road length so the crossing sits mid-street.
pub fn link_geometry(
    road: &RoadConfig,
    a: &VehicleState,
    pos_a: f64,
    b: &VehicleState,
    pos_b: f64,
) -> LinkGeometry {
    let len = road.road_length_m;
    let (ya, yb) = (road.lane_offset_m(a.lane), road.lane_offset_m(b.lane));
    if road.layout == Layout::Highway || a.street == b.street {
        let dx = wrapped_delta(pos_a, pos_b, len, road.wrap_around);
        let dy = ya - yb;
        return LinkGeometry::Los {
            distance_m: (dx * dx + dy * dy).sqrt(),
        };
    }
    let half = len / 2.0;
    let along_a = pos_a - half;
    let along_b = pos_b - half;
    let distance_m = ((along_a - yb).powi(2) + (ya - along_b).powi(2)).sqrt();
    let w = road.half_width_m();
    if along_a.abs() <= w || along_b.abs() <= w {
        return LinkGeometry::Los { distance_m };
    }
    LinkGeometry::Nlos {
        distance_m,
        d1_m: along_a.abs(),
        d2_m: along_b.abs(),
    }
}
