//! Static road topology: lanes, traffic lights, routes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polyline, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LaneId(pub u32);

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneClass {
    Normal,
    Biking,
    /// Traffic on this lane flows against the centerline direction.
    Opposite,
    DeadEnd,
}

impl LaneClass {
    pub const ALL: [LaneClass; 4] = [
        LaneClass::Normal,
        LaneClass::Biking,
        LaneClass::Opposite,
        LaneClass::DeadEnd,
    ];

    /// Lanes on which the ego has reduced right-of-road.
    pub fn is_dangerous(self) -> bool {
        matches!(self, LaneClass::Biking | LaneClass::Opposite)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LaneClass::Normal => "normal",
            LaneClass::Biking => "biking",
            LaneClass::Opposite => "opposite",
            LaneClass::DeadEnd => "dead_end",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: LaneId,
    pub centerline: Polyline,
    pub width: f64,
    pub class: LaneClass,
    pub speed_limit: f64,
    pub left: Option<LaneId>,
    pub right: Option<LaneId>,
    pub successor: Option<LaneId>,
    /// Connector lane inside an intersection.
    pub junction: bool,
}

impl Lane {
    pub fn length(&self) -> f64 {
        self.centerline.length()
    }

    /// +1 when traffic follows the centerline, -1 on opposite lanes.
    pub fn traffic_sign(&self) -> f64 {
        if self.class == LaneClass::Opposite {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightPhase {
    Green,
    Yellow,
    Red,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficLight {
    /// (approach lane, junction connector)
    pub controlled_connection: (LaneId, LaneId),
    pub green_s: f64,
    pub yellow_s: f64,
    pub red_s: f64,
    pub phase_offset: f64,
}

impl TrafficLight {
    pub fn cycle_s(&self) -> f64 {
        self.green_s + self.yellow_s + self.red_s
    }

    /// Phase and seconds remaining in it at episode clock `t`.
    pub fn phase_at(&self, t: f64) -> (LightPhase, f64) {
        let tau = (t + self.phase_offset).rem_euclid(self.cycle_s());
        if tau < self.green_s {
            (LightPhase::Green, self.green_s - tau)
        } else if tau < self.green_s + self.yellow_s {
            (LightPhase::Yellow, self.green_s + self.yellow_s - tau)
        } else {
            (LightPhase::Red, self.cycle_s() - tau)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub id: u32,
    /// Segment-one lane the ego starts on; parallel to `path[0]`.
    pub start: LaneId,
    /// Approach lane, junction connector, exit lane.
    pub path: Vec<LaneId>,
}

impl Route {
    pub fn approach(&self) -> LaneId {
        self.path[0]
    }

    pub fn connector(&self) -> LaneId {
        self.path[1]
    }

    pub fn exit(&self) -> LaneId {
        self.path[2]
    }
}

#[derive(Debug, Clone)]
pub struct RoadMap {
    lanes: Vec<Lane>,
    index: BTreeMap<LaneId, usize>,
    predecessors: BTreeMap<LaneId, Vec<LaneId>>,
    pub lights: Vec<TrafficLight>,
    pub routes: Vec<Route>,
}

impl PartialEq for RoadMap {
    fn eq(&self, other: &Self) -> bool {
        self.lanes == other.lanes && self.lights == other.lights && self.routes == other.routes
    }
}

impl RoadMap {
    /// Builds and validates a map.
    pub fn new(lanes: Vec<Lane>, lights: Vec<TrafficLight>, routes: Vec<Route>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, l) in lanes.iter().enumerate() {
            if index.insert(l.id, i).is_some() {
                return Err(Error::Map(format!("duplicate lane id {}", l.id)));
            }
        }
        let mut predecessors: BTreeMap<LaneId, Vec<LaneId>> = BTreeMap::new();
        for l in &lanes {
            if let Some(s) = l.successor {
                predecessors.entry(s).or_default().push(l.id);
            }
        }
        let map = Self {
            lanes,
            index,
            predecessors,
            lights,
            routes,
        };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Map(m));
        for l in &self.lanes {
            if !(l.width > 0.0) || !(l.speed_limit > 0.0) {
                return err(format!("lane {} needs positive width and speed limit", l.id));
            }
            for (n, back) in [(l.left, true), (l.right, false)] {
                let Some(n) = n else { continue };
                let Some(other) = self.get(n) else {
                    return err(format!("lane {} references missing neighbor {n}", l.id));
                };
                let mirror = if back { other.right } else { other.left };
                if mirror != Some(l.id) {
                    return err(format!("neighbor relation {} <-> {n} is not symmetric", l.id));
                }
                // neighbors share a station parameterization
                if (other.length() - l.length()).abs() > 1e-6 {
                    return err(format!("neighbors {} and {n} differ in length", l.id));
                }
            }
            if let Some(s) = l.successor {
                if self.get(s).is_none() {
                    return err(format!("lane {} references missing successor {s}", l.id));
                }
            }
            if l.junction && (l.left.is_some() || l.right.is_some()) {
                return err(format!("junction lane {} cannot have neighbors", l.id));
            }
        }
        for light in &self.lights {
            let (from, to) = light.controlled_connection;
            if self.get(from).and_then(|l| l.successor) != Some(to) {
                return err(format!("light controls a non-existent connection {from}->{to}"));
            }
            let durations = [light.green_s, light.yellow_s, light.red_s];
            if durations.iter().any(|d| !(*d >= 0.0)) || light.cycle_s() <= 0.0 {
                return err(format!("light {from}->{to} has an invalid cycle"));
            }
        }
        if self.routes.is_empty() {
            return err("map has no routes".into());
        }
        for r in &self.routes {
            if r.path.len() != 3 {
                return err(format!("route {} must list approach, connector, exit", r.id));
            }
            for id in r.path.iter().chain(std::iter::once(&r.start)) {
                if self.get(*id).is_none() {
                    return err(format!("route {} references missing lane {id}", r.id));
                }
            }
            for w in r.path.windows(2) {
                if self.lane(w[0]).successor != Some(w[1]) {
                    return err(format!("route {} path {}->{} is not connected", r.id, w[0], w[1]));
                }
            }
            let junctions = r.path.iter().filter(|id| self.lane(**id).junction).count();
            if junctions != 1 || !self.lane(r.connector()).junction {
                return err(format!("route {} must cross exactly one intersection", r.id));
            }
            if !self.cross_section(r.approach()).contains(&r.start) {
                return err(format!("route {} start lane is not beside its approach lane", r.id));
            }
        }
        Ok(())
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn get(&self, id: LaneId) -> Option<&Lane> {
        self.index.get(&id).map(|&i| &self.lanes[i])
    }

    /// Panics on unknown ids; maps are validated at construction.
    pub fn lane(&self, id: LaneId) -> &Lane {
        self.get(id)
            .unwrap_or_else(|| panic!("unknown lane id {id}"))
    }

    pub fn predecessors(&self, id: LaneId) -> &[LaneId] {
        self.predecessors.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn light_for(&self, from: LaneId) -> Option<&TrafficLight> {
        self.lights.iter().find(|l| l.controlled_connection.0 == from)
    }

    /// All lanes laterally reachable from `id`, ordered right to left.
    pub fn cross_section(&self, id: LaneId) -> Vec<LaneId> {
        let mut right_most = id;
        let mut guard = 0;
        while let Some(r) = self.lane(right_most).right {
            right_most = r;
            guard += 1;
            if guard > self.lanes.len() {
                break;
            }
        }
        let mut out = vec![right_most];
        let mut cur = right_most;
        while let Some(l) = self.lane(cur).left {
            if out.contains(&l) {
                break;
            }
            out.push(l);
            cur = l;
        }
        out
    }

    /// Position of a lane within its cross-section, counted from the right.
    pub fn lateral_index(&self, id: LaneId) -> usize {
        self.cross_section(id)
            .iter()
            .position(|&l| l == id)
            .unwrap_or(0)
    }

    /// Arc length along `route` for a vehicle at station `s` on `lane`, or
    /// `None` when the lane is off-route.
    pub fn route_progress(&self, route: &Route, lane: LaneId, s: f64) -> Option<f64> {
        let l0 = self.lane(route.approach()).length();
        let l1 = self.lane(route.connector()).length();
        if self.cross_section(route.approach()).contains(&lane) {
            Some(s)
        } else if lane == route.connector() {
            Some(l0 + s)
        } else if self.cross_section(route.exit()).contains(&lane) {
            Some(l0 + l1 + s)
        } else {
            None
        }
    }

    pub fn route_length(&self, route: &Route) -> f64 {
        route.path.iter().map(|id| self.lane(*id).length()).sum()
    }

    /// Lanes that make up a route's corridor (both segments and connector).
    pub fn corridor_lanes(&self, route: &Route) -> Vec<LaneId> {
        let mut set: BTreeSet<LaneId> = self.cross_section(route.approach()).into_iter().collect();
        set.insert(route.connector());
        set.extend(self.cross_section(route.exit()));
        set.into_iter().collect()
    }

    /// Navigation lane for a vehicle currently on `lane`.
    pub fn navigation_lane(&self, route: &Route, lane: LaneId) -> LaneId {
        if lane == route.connector() {
            route.connector()
        } else if self.cross_section(route.exit()).contains(&lane) {
            route.exit()
        } else {
            route.approach()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Turn {
    Left,
    Straight,
    Right,
}

/// Parameters of one generated route corridor.
#[derive(Debug, Clone)]
pub struct CorridorSpec {
    pub turn: Turn,
    /// Navigation (approach) lane: `true` for the left normal lane.
    pub nav_left: bool,
    /// Start lane: `true` for the left normal lane.
    pub start_left: bool,
    pub approach_len: f64,
    pub exit_len: f64,
    pub light: (f64, f64, f64, f64),
}

/// Geometry constants of generated corridors.
#[derive(Debug, Clone)]
pub struct CorridorGeometry {
    pub lane_width: f64,
    pub speed_limit: f64,
    pub junction_speed_limit: f64,
    pub junction_half_size: f64,
    pub stub_len: f64,
    pub spacing: f64,
}

impl Default for CorridorGeometry {
    fn default() -> Self {
        Self {
            lane_width: 3.5,
            speed_limit: 10.0,
            junction_speed_limit: 8.0,
            junction_half_size: 10.0,
            stub_len: 20.0,
            spacing: 1000.0,
        }
    }
}

/// Builds a map of independent corridors, one per route. Each corridor has
/// a four-lane approach segment (biking, two normal, opposite; right to
/// left), a signaled junction and a four-lane exit segment.
pub fn corridor_map(specs: &[CorridorSpec], geo: &CorridorGeometry) -> Result<RoadMap> {
    let mut lanes = Vec::new();
    let mut lights = Vec::new();
    let mut routes = Vec::new();
    let w = geo.lane_width;
    let h = geo.junction_half_size;
    let classes = [
        LaneClass::Biking,
        LaneClass::Normal,
        LaneClass::Normal,
        LaneClass::Opposite,
    ];
    for (ri, spec) in specs.iter().enumerate() {
        let base = (ri as u32) * 16;
        let shift = Vec2::new(geo.spacing * ri as f64, 0.0);
        let id = |k: u32| LaneId(base + k);
        let side_y = |k: usize| (k as f64 - 1.5) * w;

        // approach segment: ids base+0..3, right to left
        for (k, class) in classes.iter().enumerate() {
            let y = side_y(k);
            let a = Vec2::new(-(h + spec.approach_len), y) + shift;
            let b = Vec2::new(-h, y) + shift;
            lanes.push(Lane {
                id: id(k as u32),
                centerline: Polyline::new(vec![a, b]).unwrap(),
                width: w,
                class: *class,
                speed_limit: geo.speed_limit,
                left: (k < 3).then(|| id(k as u32 + 1)),
                right: (k > 0).then(|| id(k as u32 - 1)),
                successor: None,
                junction: false,
            });
        }
        // exit segment: ids base+4..7
        let dir = match spec.turn {
            Turn::Straight => Vec2::new(1.0, 0.0),
            Turn::Left => Vec2::new(0.0, 1.0),
            Turn::Right => Vec2::new(0.0, -1.0),
        };
        for (k, class) in classes.iter().enumerate() {
            let off = dir.perp() * side_y(k);
            let a = dir * h + off + shift;
            let b = dir * (h + spec.exit_len) + off + shift;
            lanes.push(Lane {
                id: id(4 + k as u32),
                centerline: Polyline::new(vec![a, b]).unwrap(),
                width: w,
                class: *class,
                speed_limit: geo.speed_limit,
                left: (k < 3).then(|| id(5 + k as u32)),
                right: (k > 0).then(|| id(3 + k as u32)),
                successor: None,
                junction: false,
            });
        }
        let nav_k = if spec.nav_left { 2 } else { 1 };
        let other_k = 3 - nav_k;
        let exit_k = match spec.turn {
            Turn::Straight => nav_k,
            Turn::Left => 2,
            Turn::Right => 1,
        };
        // route connector: base+8
        let p0 = Vec2::new(-h, side_y(nav_k)) + shift;
        let q0 = lanes[lanes.len() - 4 + exit_k].centerline.points()[0];
        let mut pts = vec![p0];
        if spec.turn != Turn::Straight {
            pts.push(Vec2::new(q0.x, p0.y));
        }
        pts.push(q0);
        lanes.push(Lane {
            id: id(8),
            centerline: Polyline::new(pts).unwrap(),
            width: w,
            class: LaneClass::Normal,
            speed_limit: geo.junction_speed_limit,
            left: None,
            right: None,
            successor: Some(id(4 + exit_k as u32)),
            junction: true,
        });
        // the other normal lane crosses straight into a short stub
        let y = side_y(other_k);
        lanes.push(Lane {
            id: id(9),
            centerline: Polyline::new(vec![Vec2::new(-h, y) + shift, Vec2::new(h, y) + shift])
                .unwrap(),
            width: w,
            class: LaneClass::Normal,
            speed_limit: geo.junction_speed_limit,
            left: None,
            right: None,
            successor: Some(id(10)),
            junction: true,
        });
        lanes.push(Lane {
            id: id(10),
            centerline: Polyline::new(vec![
                Vec2::new(h, y) + shift,
                Vec2::new(h + geo.stub_len, y) + shift,
            ])
            .unwrap(),
            width: w,
            class: LaneClass::Normal,
            speed_limit: geo.speed_limit,
            left: None,
            right: None,
            successor: None,
            junction: false,
        });
        for (k, succ) in [(nav_k, id(8)), (other_k, id(9))] {
            let target = id(k as u32);
            if let Some(lane) = lanes.iter_mut().find(|l| l.id == target) {
                lane.successor = Some(succ);
            }
        }
        let (g, yl, r, off) = spec.light;
        for (from, to) in [(id(nav_k as u32), id(8)), (id(other_k as u32), id(9))] {
            lights.push(TrafficLight {
                controlled_connection: (from, to),
                green_s: g,
                yellow_s: yl,
                red_s: r,
                phase_offset: off,
            });
        }
        routes.push(Route {
            id: ri as u32,
            start: id(if spec.start_left { 2 } else { 1 }),
            path: vec![id(nav_k as u32), id(8), id(4 + exit_k as u32)],
        });
    }
    RoadMap::new(lanes, lights, routes)
}

/// The four-route desk-scale map.
pub fn desk_map() -> RoadMap {
    let specs = [
        (Turn::Right, false, true, 0.0),
        (Turn::Left, true, false, 7.0),
        (Turn::Straight, true, true, 14.0),
        (Turn::Straight, false, false, 21.0),
    ]
    .map(|(turn, nav_left, start_left, off)| CorridorSpec {
        turn,
        nav_left,
        start_left,
        approach_len: 150.0,
        exit_len: 80.0,
        light: (15.0, 3.0, 12.0, off),
    });
    corridor_map(&specs, &CorridorGeometry::default()).expect("desk map is valid")
}

/// The twenty-route full-scale map.
pub fn full_map() -> RoadMap {
    let mut specs = Vec::new();
    'outer: for variant in 0..2 {
        for turn in [Turn::Left, Turn::Straight, Turn::Right] {
            for nav_left in [false, true] {
                for start_left in [false, true] {
                    if specs.len() == 20 {
                        break 'outer;
                    }
                    let i = specs.len() as f64;
                    specs.push(CorridorSpec {
                        turn,
                        nav_left,
                        start_left,
                        approach_len: if variant == 0 { 150.0 } else { 200.0 },
                        exit_len: if variant == 0 { 80.0 } else { 100.0 },
                        light: (15.0, 3.0, 12.0, (i * 3.0) % 30.0),
                    });
                }
            }
        }
    }
    corridor_map(&specs, &CorridorGeometry::default()).expect("full map is valid")
}
