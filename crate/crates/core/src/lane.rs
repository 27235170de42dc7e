//! Straight multi-lane road with a blockage and a single open lane
//! (a desk-scale traffic jam). Vehicles follow a kinematic bicycle model.
//!
//! Lanes run along +x. Lane `k` occupies `y ∈ [k·w, (k+1)·w)`; lane 0 is the
//! open lane and "left" means towards larger `k`. Broken-down vehicles stand
//! at `x = road_x` in lanes `1..=blocked_lanes`.
//!
//! Actions: `0` keep, `1` change left, `2` change right, `3` brake, then one
//! action per throttle-table entry.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stlmarl_stl::{parse_formula, Formula};

use crate::env::{MultiAgentEnv, Transition};
use crate::error::{CoreError, Result};
use crate::shield::{self, ShieldAudit, ShieldConfig};

pub const KEEP: usize = 0;
pub const LEFT: usize = 1;
pub const RIGHT: usize = 2;
pub const BRAKE: usize = 3;

/// Which pairs the braking-distance spec constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginScope {
    /// Pairs two or more lanes apart are exempt.
    SameAndAdjacent,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneConfig {
    pub n_lanes: usize,
    pub lane_width: f64,
    pub blocked_lanes: usize,
    pub n_agents: usize,
    pub throttle: Vec<f64>,
    pub a_limit: f64,
    pub dt: f64,
    pub l_f: f64,
    pub l_r: f64,
    /// Time-headway factor ε of the safe distances.
    pub headway_eps: f64,
    /// Proximity radius around the narrow-road point.
    pub road_radius: f64,
    pub tau: usize,
    pub t_max: usize,
    pub v_stop: f64,
    pub v_max: f64,
    pub episode_length: usize,
    pub vehicle_radius: f64,
    pub steer_limit: f64,
    pub k_lateral: f64,
    pub k_heading: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    /// Constant of the destination reward; the initial distance when unset.
    pub dest_constant: Option<f64>,
    pub eps1: f64,
    pub eps2: f64,
    pub margin_scope: MarginScope,
    pub road_x: f64,
    /// Agents start this far (bumper to bumper, range) behind the blockage.
    pub spawn_gap_min: f64,
    pub spawn_gap_max: f64,
    pub dest_ahead: f64,
    pub dest_spacing: f64,
    pub shield: ShieldConfig,
}

impl Default for LaneConfig {
    fn default() -> Self {
        Self {
            n_lanes: 4,
            lane_width: 3.5,
            blocked_lanes: 3,
            n_agents: 3,
            throttle: vec![1.0, 2.0, -1.0],
            a_limit: 4.0,
            dt: 0.1,
            l_f: 1.5,
            l_r: 1.5,
            headway_eps: 0.1,
            road_radius: 15.0,
            tau: 20,
            t_max: 50,
            v_stop: 0.1,
            v_max: 15.0,
            episode_length: 150,
            vehicle_radius: 1.5,
            steer_limit: 0.5,
            k_lateral: 0.5,
            k_heading: 1.5,
            w1: 1.0,
            w2: 10.0,
            w3: 0.05,
            dest_constant: None,
            eps1: 0.25,
            eps2: 3.0,
            margin_scope: MarginScope::SameAndAdjacent,
            road_x: 60.0,
            spawn_gap_min: 1.0,
            spawn_gap_max: 12.0,
            dest_ahead: 30.0,
            dest_spacing: 8.0,
            shield: ShieldConfig::default(),
        }
    }
}

impl LaneConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lane_width", self.lane_width),
            ("a_limit", self.a_limit),
            ("dt", self.dt),
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("road_radius", self.road_radius),
            ("v_max", self.v_max),
            ("vehicle_radius", self.vehicle_radius),
            ("steer_limit", self.steer_limit),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(CoreError::Config(format!("lane.{name} must be positive")));
        }
        if self.blocked_lanes >= self.n_lanes {
            return Err(CoreError::Config(format!(
                "lane: {} blocked of {} lanes leaves no open lane",
                self.blocked_lanes, self.n_lanes
            )));
        }
        if self.n_agents == 0 || self.n_agents > self.n_lanes {
            return Err(CoreError::Config(format!(
                "lane.n_agents must be in 1..={} (one start lane each)",
                self.n_lanes
            )));
        }
        if self.throttle.is_empty() || self.throttle.iter().any(|a| !a.is_finite()) {
            return Err(CoreError::Config("lane.throttle needs at least one finite level".into()));
        }
        if self.t_max == 0 || self.episode_length == 0 {
            return Err(CoreError::Config("lane.t_max and episode_length must be at least 1".into()));
        }
        if !(self.spawn_gap_min >= 0.0 && self.spawn_gap_min <= self.spawn_gap_max) {
            return Err(CoreError::Config("lane spawn gaps must satisfy 0 <= min <= max".into()));
        }
        if ![self.w1, self.w2, self.w3, self.headway_eps, self.v_stop]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(CoreError::Config("lane weights must be finite".into()));
        }
        self.shield.validate()
    }

    pub fn n_actions(&self) -> usize {
        4 + self.throttle.len()
    }

    pub fn obs_dim(&self) -> usize {
        7 + 5 * (self.n_agents - 1)
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }

    pub fn road_width(&self) -> f64 {
        self.n_lanes as f64 * self.lane_width
    }

    pub fn lane_of(&self, y: f64) -> usize {
        ((y / self.lane_width).floor().max(0.0) as usize).min(self.n_lanes - 1)
    }

    /// Lanes whose band intersects `[y − r, y + r]`.
    pub fn footprint_lanes(&self, y: f64) -> std::ops::RangeInclusive<usize> {
        let r = self.vehicle_radius;
        self.lane_of(y - r)..=self.lane_of(y + r - 1e-9)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub a: f64,
    pub psi: f64,
    pub lane: usize,
    pub beta: f64,
    /// Lane the vehicle steers towards; differs from `lane` mid-maneuver.
    pub target_lane: usize,
    pub crashed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub lane: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneWorldState {
    pub vehicles: Vec<VehicleState>,
    pub obstacles: Vec<Obstacle>,
    pub p_road: [f64; 2],
    pub destinations: Vec<[f64; 2]>,
    pub t_wait: Vec<usize>,
    pub step: usize,
    pub reached: Vec<bool>,
    pub dest_constant: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub accel: f64,
    pub steer: f64,
}

/// Nominal control of a discrete action plus the maneuver it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nominal {
    pub control: Control,
    pub target_lane: usize,
    /// A lane change was requested towards a lane that does not exist.
    pub invalid_lane_change: bool,
}

/// Anything another vehicle has to keep clear of.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub target_lane: Option<usize>,
    pub agent: Option<usize>,
}

/// Per-step events besides those carried by [`Transition`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaneEvents {
    pub invalid_lane_change: Vec<bool>,
    /// Colliding pairs as body indices (agents first, then obstacles).
    pub collisions: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct LaneEnv {
    config: LaneConfig,
    state: LaneWorldState,
    shield_enabled: bool,
    audit: Vec<ShieldAudit>,
    events: LaneEvents,
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

impl LaneEnv {
    pub fn new(config: LaneConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_agents;
        let state = LaneWorldState {
            vehicles: Vec::new(),
            obstacles: Vec::new(),
            p_road: [config.road_x, config.lane_center(0)],
            destinations: vec![[0.0; 2]; n],
            t_wait: vec![0; n],
            step: 0,
            reached: vec![false; n],
            dest_constant: vec![0.0; n],
        };
        Ok(Self {
            config,
            state,
            shield_enabled: false,
            audit: Vec::new(),
            events: LaneEvents::default(),
        })
    }

    pub fn config(&self) -> &LaneConfig {
        &self.config
    }

    pub fn state(&self) -> &LaneWorldState {
        &self.state
    }

    pub fn set_state(&mut self, state: LaneWorldState) {
        self.state = state;
    }

    pub fn shield_enabled(&self) -> bool {
        self.shield_enabled
    }

    pub fn last_events(&self) -> &LaneEvents {
        &self.events
    }

    pub fn last_audit(&self) -> &[ShieldAudit] {
        &self.audit
    }

    /// Agents first (index = agent id), then broken-down vehicles.
    pub fn bodies(&self) -> Vec<Body> {
        let mut out: Vec<Body> = self
            .state
            .vehicles
            .iter()
            .enumerate()
            .map(|(i, v)| Body {
                x: v.x,
                y: v.y,
                v: v.v,
                target_lane: Some(v.target_lane),
                agent: Some(i),
            })
            .collect();
        out.extend(self.state.obstacles.iter().map(|o| Body {
            x: o.x,
            y: o.y,
            v: 0.0,
            target_lane: None,
            agent: None,
        }));
        out
    }

    /// Whether a body counts as present in `lane` for barrier purposes.
    pub fn body_in_lane(&self, body: &Body, lane: usize) -> bool {
        self.config.footprint_lanes(body.y).contains(&lane) || body.target_lane == Some(lane)
    }

    /// A vehicle at the given lateral position and lane, centred and aligned.
    pub fn vehicle_in_lane(&self, x: f64, lane: usize, v: f64) -> VehicleState {
        VehicleState {
            x,
            y: self.config.lane_center(lane),
            v,
            a: 0.0,
            psi: 0.0,
            lane,
            beta: 0.0,
            target_lane: lane,
            crashed: false,
        }
    }

    fn lane_keeping_steer(&self, veh: &VehicleState, target_lane: usize) -> f64 {
        let c = &self.config;
        let err = c.lane_center(target_lane) - veh.y;
        (c.k_lateral * err - c.k_heading * veh.psi).clamp(-c.steer_limit, c.steer_limit)
    }

    pub fn action_to_control(&self, i: usize, action: usize) -> Nominal {
        let c = &self.config;
        let veh = &self.state.vehicles[i];
        let mut target = veh.target_lane;
        let mut invalid = false;
        let mut accel = 0.0;
        match action {
            LEFT => {
                if veh.lane + 1 < c.n_lanes {
                    target = veh.lane + 1;
                } else {
                    invalid = true;
                }
            }
            RIGHT => {
                if veh.lane > 0 {
                    target = veh.lane - 1;
                } else {
                    invalid = true;
                }
            }
            BRAKE => accel = -c.a_limit,
            KEEP => {}
            k => accel = c.throttle[k - 4],
        }
        Nominal {
            control: Control {
                accel,
                steer: self.lane_keeping_steer(veh, target),
            },
            target_lane: target,
            invalid_lane_change: invalid,
        }
    }

    /// Nominal brake that abandons any maneuver in progress.
    pub fn abort_brake(&self, i: usize) -> Nominal {
        let veh = &self.state.vehicles[i];
        Nominal {
            control: Control {
                accel: -self.config.a_limit,
                steer: self.lane_keeping_steer(veh, veh.lane),
            },
            target_lane: veh.lane,
            invalid_lane_change: false,
        }
    }

    fn integrate(&self, veh: &mut VehicleState, u: Control) {
        let c = &self.config;
        let beta = (c.l_r / (c.l_f + c.l_r) * u.steer.tan()).atan();
        veh.x += veh.v * (veh.psi + beta).cos() * c.dt;
        let y = veh.y + veh.v * (veh.psi + beta).sin() * c.dt;
        veh.y = y.clamp(0.0, c.road_width());
        veh.psi = wrap_angle(veh.psi + veh.v / c.l_r * beta.sin() * c.dt);
        veh.v = (veh.v + u.accel * c.dt).clamp(0.0, c.v_max);
        veh.a = u.accel;
        veh.beta = beta;
        veh.lane = c.lane_of(veh.y);
    }

    pub fn dist_dest(&self, i: usize) -> f64 {
        let v = &self.state.vehicles[i];
        let d = self.state.destinations[i];
        (v.x - d[0]).hypot(v.y - d[1])
    }

    pub fn dist_road(&self, i: usize) -> f64 {
        let v = &self.state.vehicles[i];
        let p = self.state.p_road;
        (v.x - p[0]).hypot(v.y - p[1])
    }

    /// Clearance between two agents' bounding circles.
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.state.vehicles[i], &self.state.vehicles[j]);
        (a.x - b.x).hypot(a.y - b.y) - 2.0 * self.config.vehicle_radius
    }

    /// `gap_ij − (v_j − v_i)² / (2 a_l)`.
    pub fn margin(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.state.vehicles[i], &self.state.vehicles[j]);
        self.gap(i, j) - (b.v - a.v).powi(2) / (2.0 * self.config.a_limit)
    }

    pub fn baseline_reward(&self, i: usize, collisions: usize) -> f64 {
        let c = &self.config;
        let v = &self.state.vehicles[i];
        c.w1 * (v.v.abs() / c.v_max)
            + c.w2 * -(collisions as f64)
            + c.w3 * (-self.dist_dest(i) + self.state.dest_constant[i])
    }

    pub fn observe(&self, i: usize) -> Vec<f64> {
        let c = &self.config;
        let s = &self.state;
        let me = &s.vehicles[i];
        let (sx, sy) = (50.0, c.lane_width);
        let mut obs = Vec::with_capacity(c.obs_dim());
        obs.extend([
            (me.x - s.p_road[0]) / sx,
            (me.y - s.p_road[1]) / sy,
            me.v / c.v_max,
            me.a / c.a_limit,
            me.psi,
        ]);
        obs.push((s.destinations[i][0] - me.x) / sx);
        obs.push((s.destinations[i][1] - me.y) / sy);
        for (j, o) in s.vehicles.iter().enumerate() {
            if j != i {
                obs.extend([
                    (o.x - me.x) / sx,
                    (o.y - me.y) / sy,
                    o.v / c.v_max,
                    o.a / c.a_limit,
                    o.psi,
                ]);
            }
        }
        obs
    }

    pub fn observe_all(&self) -> Vec<Vec<f64>> {
        (0..self.config.n_agents).map(|i| self.observe(i)).collect()
    }

    pub fn channel_row(&self) -> Vec<f64> {
        let n = self.config.n_agents;
        let mut row = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                row.push(self.margin(i, j));
                let (li, lj) = (self.state.vehicles[i].lane, self.state.vehicles[j].lane);
                row.push(li.abs_diff(lj) as f64);
            }
        }
        for i in 0..n {
            row.push(self.dist_dest(i));
            row.push(self.dist_road(i));
            row.push(self.state.t_wait[i] as f64);
            row.push(self.state.vehicles[i].v - self.config.v_stop);
        }
        row
    }

    pub fn formula_texts(&self) -> Vec<Vec<String>> {
        let c = &self.config;
        let n = c.n_agents;
        let h = c.episode_length - 1;
        (1..=n)
            .map(|i| {
                let mut specs = Vec::new();
                if n > 1 {
                    let parts: Vec<String> = (1..=n)
                        .filter(|&j| j != i)
                        .map(|j| {
                            let (a, b) = (i.min(j), i.max(j));
                            let pred = format!("(margin_a{a}_a{b} >= {})", c.eps1);
                            match c.margin_scope {
                                MarginScope::All => pred,
                                MarginScope::SameAndAdjacent => {
                                    format!("((lanediff_a{a}_a{b} >= 1.5) | {pred})")
                                }
                            }
                        })
                        .collect();
                    specs.push(format!("G[0,{h}] ({})", parts.join(" & ")));
                }
                specs.push(format!("F[0,{h}] (dist_dest_a{i} <= {})", c.eps2));
                specs.push(format!(
                    "G[0,{h}] (!(dist_road_a{i} <= {}) | F[0,{}] (speed_a{i} <= 0))",
                    c.road_radius, c.tau
                ));
                specs.push(format!(
                    "G[0,{h}] (!(dist_road_a{i} <= {}) | (t_wait_a{i} <= {}))",
                    c.road_radius,
                    c.t_max - 1
                ));
                specs
            })
            .collect()
    }

    /// Pretty-printed JSON of the static layout and start state.
    pub fn layout_json(&self) -> String {
        #[derive(Serialize)]
        struct Layout<'a> {
            n_lanes: usize,
            lane_width: f64,
            p_road: [f64; 2],
            obstacles: &'a [Obstacle],
            vehicles: &'a [VehicleState],
            destinations: &'a [[f64; 2]],
        }
        serde_json::to_string_pretty(&Layout {
            n_lanes: self.config.n_lanes,
            lane_width: self.config.lane_width,
            p_road: self.state.p_road,
            obstacles: &self.state.obstacles,
            vehicles: &self.state.vehicles,
            destinations: &self.state.destinations,
        })
        .expect("layout serialises")
    }

    fn detect_collisions(&self) -> Vec<(usize, usize)> {
        let bodies = self.bodies();
        let min = 2.0 * self.config.vehicle_radius;
        let n = self.config.n_agents;
        let mut out = Vec::new();
        for i in 0..n {
            for (j, b) in bodies.iter().enumerate().skip(i + 1) {
                let a = &bodies[i];
                if (a.x - b.x).hypot(a.y - b.y) < min {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

impl MultiAgentEnv for LaneEnv {
    fn n_agents(&self) -> usize {
        self.config.n_agents
    }

    fn obs_dim(&self) -> usize {
        self.config.obs_dim()
    }

    fn n_actions(&self) -> usize {
        self.config.n_actions()
    }

    fn episode_length(&self) -> usize {
        self.config.episode_length
    }

    fn set_shield(&mut self, enabled: bool) -> Result<()> {
        self.shield_enabled = enabled;
        Ok(())
    }

    fn shield_audit(&self) -> &[ShieldAudit] {
        &self.audit
    }

    fn channel_names(&self) -> Vec<String> {
        let n = self.config.n_agents;
        let mut names = Vec::new();
        for i in 1..=n {
            for j in i + 1..=n {
                names.push(format!("margin_a{i}_a{j}"));
                names.push(format!("lanediff_a{i}_a{j}"));
            }
        }
        for i in 1..=n {
            names.push(format!("dist_dest_a{i}"));
            names.push(format!("dist_road_a{i}"));
            names.push(format!("t_wait_a{i}"));
            names.push(format!("speed_a{i}"));
        }
        names
    }

    fn formulas(&self) -> Vec<Vec<Formula>> {
        self.formula_texts()
            .into_iter()
            .map(|specs| {
                specs
                    .iter()
                    .map(|s| parse_formula(s).expect("generated formula parses"))
                    .collect()
            })
            .collect()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        let c = self.config.clone();
        let n = c.n_agents;
        let obstacles: Vec<Obstacle> = (1..=c.blocked_lanes)
            .map(|lane| Obstacle {
                x: c.road_x,
                y: c.lane_center(lane),
                lane,
            })
            .collect();
        let lanes = sample(rng, c.n_lanes, n).into_vec();
        let back = c.road_x - 2.0 * c.vehicle_radius;
        let vehicles: Vec<VehicleState> = lanes
            .iter()
            .map(|&lane| {
                let gap = rng.random_range(c.spawn_gap_min..=c.spawn_gap_max);
                self.vehicle_in_lane(back - gap, lane, 0.0)
            })
            .collect();
        let destinations: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                [
                    c.road_x + c.dest_ahead + c.dest_spacing * i as f64,
                    c.lane_center(0),
                ]
            })
            .collect();
        self.state = LaneWorldState {
            vehicles,
            obstacles,
            p_road: [c.road_x, c.lane_center(0)],
            destinations,
            t_wait: vec![0; n],
            step: 0,
            reached: vec![false; n],
            dest_constant: vec![0.0; n],
        };
        for i in 0..n {
            self.state.dest_constant[i] = c.dest_constant.unwrap_or_else(|| self.dist_dest(i));
            self.state.reached[i] = self.dist_dest(i) <= c.eps2;
        }
        self.audit.clear();
        self.events = LaneEvents::default();
        Ok(self.observe_all())
    }

    fn step(&mut self, requested: &[usize]) -> Result<Transition> {
        let c = self.config.clone();
        let n = c.n_agents;
        if requested.len() != n {
            return Err(CoreError::ActionCount {
                expected: n,
                got: requested.len(),
            });
        }
        if let Some(&a) = requested.iter().find(|&&a| a >= c.n_actions()) {
            return Err(CoreError::ActionIndex {
                action: a,
                count: c.n_actions(),
            });
        }
        let mut applied = requested.to_vec();
        let mut controls = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        let mut fallbacks = vec![false; n];
        let mut invalid = vec![false; n];
        self.audit.clear();
        for i in 0..n {
            if self.state.vehicles[i].crashed {
                controls.push(Control {
                    accel: 0.0,
                    steer: 0.0,
                });
                targets.push(self.state.vehicles[i].target_lane);
                continue;
            }
            let nominal = self.action_to_control(i, requested[i]);
            invalid[i] = nominal.invalid_lane_change;
            if self.shield_enabled {
                let out = shield::shield_action(self, i, requested[i], c.shield.gamma_cbf);
                applied[i] = out.applied_action;
                fallbacks[i] = out.decision.fallback;
                controls.push(out.decision.control);
                targets.push(out.target_lane);
                self.audit.push(out.audit(i, requested[i]));
            } else {
                controls.push(nominal.control);
                targets.push(nominal.target_lane);
            }
        }
        for i in 0..n {
            let mut veh = self.state.vehicles[i].clone();
            if !veh.crashed {
                veh.target_lane = targets[i];
                self.integrate(&mut veh, controls[i]);
            }
            self.state.vehicles[i] = veh;
        }
        self.state.step += 1;
        let pairs = self.detect_collisions();
        let mut agent_collisions = vec![0usize; n];
        for &(a, b) in &pairs {
            agent_collisions[a] += 1;
            if b < n {
                agent_collisions[b] += 1;
            }
        }
        for (i, &k) in agent_collisions.iter().enumerate() {
            if k > 0 {
                let veh = &mut self.state.vehicles[i];
                veh.crashed = true;
                veh.v = 0.0;
                veh.a = 0.0;
            }
        }
        for i in 0..n {
            if self.dist_road(i) <= c.road_radius && self.state.vehicles[i].v <= c.v_stop {
                self.state.t_wait[i] += 1;
            }
            if self.dist_dest(i) <= c.eps2 {
                self.state.reached[i] = true;
            }
        }
        self.events = LaneEvents {
            invalid_lane_change: invalid,
            collisions: pairs,
        };
        let baseline_rewards = (0..n)
            .map(|i| self.baseline_reward(i, agent_collisions[i]))
            .collect();
        Ok(Transition {
            observations: self.observe_all(),
            applied,
            baseline_rewards,
            agent_collisions,
            shield_fallbacks: fallbacks,
            reached: self.state.reached.clone(),
            channels: self.channel_row(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn env() -> LaneEnv {
        let mut e = LaneEnv::new(LaneConfig::default()).unwrap();
        e.reset(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        e
    }

    #[test]
    fn all_lanes_blocked_is_rejected() {
        let cfg = LaneConfig {
            blocked_lanes: 4,
            ..LaneConfig::default()
        };
        assert!(LaneEnv::new(cfg).is_err());
    }

    #[test]
    fn layout_has_one_open_lane() {
        let e = env();
        let blocked: Vec<usize> = e.state().obstacles.iter().map(|o| o.lane).collect();
        assert_eq!(blocked, vec![1, 2, 3]);
        assert_eq!(e.state().p_road, [60.0, 1.75]);
        let mut lanes: Vec<usize> = e.state().vehicles.iter().map(|v| v.lane).collect();
        lanes.sort();
        lanes.dedup();
        assert_eq!(lanes.len(), 3);
    }

    #[test]
    fn keep_when_centred_is_zero_control() {
        let e = env();
        let n = e.action_to_control(0, KEEP);
        assert_eq!(n.control, Control { accel: 0.0, steer: 0.0 });
    }

    #[test]
    fn change_left_from_leftmost_lane_is_flagged_keep() {
        let mut e = env();
        let mut s = e.state().clone();
        s.vehicles[0] = e.vehicle_in_lane(20.0, 3, 5.0);
        e.set_state(s);
        let n = e.action_to_control(0, LEFT);
        assert!(n.invalid_lane_change);
        assert_eq!(n.target_lane, 3);
        assert_eq!(n.control, e.action_to_control(0, KEEP).control);
    }

    #[test]
    fn lane_change_steers_towards_target() {
        let mut e = env();
        let mut s = e.state().clone();
        s.vehicles[0] = e.vehicle_in_lane(20.0, 1, 5.0);
        e.set_state(s);
        assert_eq!(e.action_to_control(0, LEFT).control.steer, 0.5);
        assert_eq!(e.action_to_control(0, RIGHT).control.steer, -0.5);
    }

    #[test]
    fn wrap_angle_stays_in_range() {
        for a in [-7.0, -3.2, 0.0, 3.2, 10.0] {
            let w = wrap_angle(a);
            assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&w));
            assert!(((a - w) / std::f64::consts::TAU).fract().abs() < 1e-12);
        }
    }
}
