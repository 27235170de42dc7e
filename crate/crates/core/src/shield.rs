//! CBF-QP safety shield for the lane world.
//!
//! Barriers are `h = gap − D` with the longitudinal bumper gap to the
//! nearest vehicle ahead (per relevant lane) and, during a lane change, to
//! the nearest vehicle behind in the target lane. The one-step condition
//! `h(x⁺) ≥ (1 − γ)·h(x)` is imposed on the longitudinal point-mass
//! surrogate `x⁺ = x + v·dt + ½a·dt²`, `v⁺ = v + a·dt`, with other vehicles
//! at constant speed. `D(v⁺)` is quadratic in `a`; it is replaced by its
//! tangent at `a = 0` plus the largest possible remainder `(a_l·dt)²/(2a_l)`,
//! which keeps every constraint affine and never weaker than the exact one.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::lane::{Control, LaneEnv, Nominal, BRAKE};
use crate::qp::{CbfConstraint, QpProblem, QpSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShieldConfig {
    pub gamma_cbf: f64,
    pub max_constraints: usize,
}

impl Default for ShieldConfig {
    fn default() -> Self {
        Self {
            gamma_cbf: 0.5,
            max_constraints: 4,
        }
    }
}

impl ShieldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma_cbf) {
            return Err(CoreError::Config("shield.gamma_cbf must lie in [0, 1]".into()));
        }
        if self.max_constraints < 4 {
            return Err(CoreError::Config(
                "shield.max_constraints must allow at least 4 barriers".into(),
            ));
        }
        Ok(())
    }
}

/// `(1+ε)·v + (v − v_fv)²/(2·a_l)`
pub fn safe_distance_front(v: f64, v_fv: f64, a_l: f64, eps: f64) -> f64 {
    (1.0 + eps) * v + (v - v_fv).powi(2) / (2.0 * a_l)
}

/// `(1+ε)·v + (v_bv − v)²/(2·a_l)`
pub fn safe_distance_back(v: f64, v_bv: f64, a_l: f64, eps: f64) -> f64 {
    (1.0 + eps) * v + (v_bv - v).powi(2) / (2.0 * a_l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    Front,
    Back,
}

/// One time-varying barrier between the ego vehicle and another body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub kind: BarrierKind,
    /// Index into [`LaneEnv::bodies`].
    pub body: usize,
    pub lane: usize,
    pub gap: f64,
    pub ego_v: f64,
    pub other_v: f64,
    pub h: f64,
}

/// Constants the barrier algebra needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub a_limit: f64,
    pub eps: f64,
    pub dt: f64,
}

impl BarrierParams {
    pub fn of(env: &LaneEnv) -> Self {
        let c = env.config();
        Self {
            a_limit: c.a_limit,
            eps: c.headway_eps,
            dt: c.dt,
        }
    }
}

impl Barrier {
    pub fn new(kind: BarrierKind, body: usize, lane: usize, gap: f64, ego_v: f64, other_v: f64, p: BarrierParams) -> Self {
        let d = match kind {
            BarrierKind::Front => safe_distance_front(ego_v, other_v, p.a_limit, p.eps),
            BarrierKind::Back => safe_distance_back(ego_v, other_v, p.a_limit, p.eps),
        };
        Self {
            kind,
            body,
            lane,
            gap,
            ego_v,
            other_v,
            h: gap - d,
        }
    }

    /// Barrier value after one surrogate step with ego acceleration `a`,
    /// using the exact (quadratic) safe distance.
    pub fn h_next(&self, a: f64, p: BarrierParams) -> f64 {
        let dt = p.dt;
        let v_next = self.ego_v + a * dt;
        match self.kind {
            BarrierKind::Front => {
                let gap = self.gap + (self.other_v - self.ego_v) * dt - 0.5 * a * dt * dt;
                gap - safe_distance_front(v_next, self.other_v, p.a_limit, p.eps)
            }
            BarrierKind::Back => {
                let gap = self.gap + (self.ego_v - self.other_v) * dt + 0.5 * a * dt * dt;
                gap - safe_distance_back(v_next, self.other_v, p.a_limit, p.eps)
            }
        }
    }

    /// Affine constraint on `u = (a, δ)` implying
    /// `h_next(a) ≥ (1 − γ)·h` for every `|a| ≤ a_l`.
    pub fn constraint(&self, gamma: f64, p: BarrierParams) -> CbfConstraint {
        let dt = p.dt;
        let (v, w) = (self.ego_v, self.other_v);
        let remainder = p.a_limit * dt * dt / 2.0;
        let (coef, offset) = match self.kind {
            BarrierKind::Front => {
                let d_v = (1.0 + p.eps) + (v - w) / p.a_limit;
                (-(0.5 * dt * dt + d_v * dt), (w - v) * dt)
            }
            BarrierKind::Back => {
                let d_v = (1.0 + p.eps) - (w - v) / p.a_limit;
                (0.5 * dt * dt - d_v * dt, (v - w) * dt)
            }
        };
        CbfConstraint {
            a: vec![coef, 0.0],
            b: gamma * self.h + offset - remainder,
            label: format!("{:?}:{}", self.kind, self.body).to_lowercase(),
        }
    }
}

fn nearest(env: &LaneEnv, i: usize, lane: usize, kind: BarrierKind) -> Option<Barrier> {
    let bodies = env.bodies();
    let ego = bodies[i];
    let r2 = 2.0 * env.config().vehicle_radius;
    let mut best: Option<(usize, f64)> = None;
    for (j, b) in bodies.iter().enumerate() {
        if j == i || !env.body_in_lane(b, lane) {
            continue;
        }
        let dx = match kind {
            BarrierKind::Front if b.x >= ego.x => b.x - ego.x,
            BarrierKind::Back if b.x < ego.x => ego.x - b.x,
            _ => continue,
        };
        if best.is_none_or(|(_, d)| dx < d) {
            best = Some((j, dx));
        }
    }
    best.map(|(j, dx)| {
        Barrier::new(kind, j, lane, dx - r2, ego.v, bodies[j].v, BarrierParams::of(env))
    })
}

/// `(h_fv, h_bv)` for agent `i` heading into `target_lane`; `+∞` when the
/// corresponding vehicle is absent (or, for the back barrier, when no lane
/// change is under way).
pub fn cbf_values(env: &LaneEnv, i: usize, target_lane: usize) -> (f64, f64) {
    let front = nearest(env, i, target_lane, BarrierKind::Front).map_or(f64::INFINITY, |b| b.h);
    let changing = env.state().vehicles[i].lane != target_lane;
    let back = if changing {
        nearest(env, i, target_lane, BarrierKind::Back).map_or(f64::INFINITY, |b| b.h)
    } else {
        f64::INFINITY
    };
    (front, back)
}

/// Barriers relevant to agent `i` when steering into `target_lane`: the
/// nearest vehicle ahead in every lane the ego footprint touches and in the
/// target lane, plus the nearest vehicle behind in the target lane during a
/// lane change.
pub fn barriers(env: &LaneEnv, i: usize, target_lane: usize) -> Vec<Barrier> {
    let veh = &env.state().vehicles[i];
    let mut lanes: Vec<usize> = env.config().footprint_lanes(veh.y).collect();
    if !lanes.contains(&target_lane) {
        lanes.push(target_lane);
    }
    let mut out: Vec<Barrier> = Vec::new();
    for lane in lanes {
        if let Some(b) = nearest(env, i, lane, BarrierKind::Front) {
            if !out.iter().any(|o| o.body == b.body) {
                out.push(b);
            }
        }
    }
    if veh.lane != target_lane {
        if let Some(b) = nearest(env, i, target_lane, BarrierKind::Back) {
            out.push(b);
        }
    }
    out
}

fn qp_for(env: &LaneEnv, i: usize, nominal: &Nominal, gamma: f64) -> (QpProblem, Vec<Barrier>) {
    let c = env.config();
    let p = BarrierParams::of(env);
    let bars = barriers(env, i, nominal.target_lane);
    let constraints = bars.iter().map(|b| b.constraint(gamma, p)).collect();
    let qp = QpProblem::new(
        vec![nominal.control.accel, nominal.control.steer],
        vec![-c.a_limit, -c.steer_limit],
        vec![c.a_limit, c.steer_limit],
        constraints,
        c.shield.max_constraints,
    )
    .expect("shield QPs are well formed by construction");
    (qp, bars)
}

/// The CBF-QP for agent `i` requesting `action`, with the barriers behind
/// each constraint (same order).
pub fn build_cbf_qp(env: &LaneEnv, i: usize, action: usize, gamma: f64) -> (QpProblem, Vec<Barrier>, Nominal) {
    let nominal = env.action_to_control(i, action);
    let (qp, bars) = qp_for(env, i, &nominal, gamma);
    (qp, bars, nominal)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShieldDecision {
    pub control: Control,
    pub feasible: bool,
    /// The requested action was replaced by the brake fallback.
    pub fallback: bool,
    /// Even the brake QP was infeasible; maximal braking applied open-loop.
    pub open_loop: bool,
    pub slacks: Vec<f64>,
    pub barriers: Vec<Barrier>,
    pub solution: QpSolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShieldOutcome {
    pub applied_action: usize,
    pub target_lane: usize,
    pub decision: ShieldDecision,
}

/// Per step, per agent record for the audit log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShieldAudit {
    pub agent: usize,
    pub requested: usize,
    pub applied: usize,
    pub h: Vec<f64>,
    pub slacks: Vec<f64>,
    pub feasible: bool,
    pub fallback: bool,
    pub open_loop: bool,
}

impl ShieldOutcome {
    pub fn audit(&self, agent: usize, requested: usize) -> ShieldAudit {
        ShieldAudit {
            agent,
            requested,
            applied: self.applied_action,
            h: self.decision.barriers.iter().map(|b| b.h).collect(),
            slacks: self.decision.slacks.clone(),
            feasible: self.decision.feasible,
            fallback: self.decision.fallback,
            open_loop: self.decision.open_loop,
        }
    }
}

/// Entering a lane is only admissible from inside the safe set of every
/// barrier that belongs to the new lane.
fn lane_change_admissible(env: &LaneEnv, i: usize, bars: &[Barrier]) -> bool {
    let lane = env.state().vehicles[i].lane;
    bars.iter().all(|b| b.lane == lane || b.h >= 0.0)
}

fn decide(qp: &QpProblem, bars: Vec<Barrier>, fallback: bool) -> ShieldDecision {
    let solution = qp.solve();
    ShieldDecision {
        control: Control {
            accel: solution.u[0],
            steer: solution.u[1],
        },
        feasible: solution.feasible,
        fallback,
        open_loop: false,
        slacks: solution.slacks.clone(),
        barriers: bars,
        solution,
    }
}

pub fn shield_action(env: &LaneEnv, i: usize, action: usize, gamma: f64) -> ShieldOutcome {
    let (qp, bars, nominal) = build_cbf_qp(env, i, action, gamma);
    let admissible = lane_change_admissible(env, i, &bars);
    let first = decide(&qp, bars, false);
    if first.feasible && admissible {
        return ShieldOutcome {
            applied_action: action,
            target_lane: nominal.target_lane,
            decision: first,
        };
    }
    let brake = env.abort_brake(i);
    let (qp, bars) = qp_for(env, i, &brake, gamma);
    let mut second = decide(&qp, bars, true);
    if !second.feasible {
        second.open_loop = true;
        second.control = brake.control;
    }
    ShieldOutcome {
        applied_action: BRAKE,
        target_lane: brake.target_lane,
        decision: second,
    }
}
