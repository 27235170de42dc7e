//! Discrete-action particle world with two landmark stages
//! ("coordination II" and "spread II").
//!
//! Observation layout for agent `i` (length `2 + 4N + 2(N−1)`):
//! own velocity, positions of the first-stage landmarks relative to the
//! agent, then the second-stage landmarks, then the other agents in index
//! order (skipping `i`).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stlmarl_stl::{parse_formula, Formula};

use crate::env::{MultiAgentEnv, Transition};
use crate::error::{CoreError, Result};

pub const ACTIONS: [&str; 5] = ["stay", "left", "right", "up", "down"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticleTask {
    Coordination,
    Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleConfig {
    pub task: ParticleTask,
    pub n_agents: usize,
    pub arena: f64,
    pub dt: f64,
    pub damping: f64,
    pub force: f64,
    pub mass: f64,
    pub collision_radius: f64,
    /// Added to the shared reward once per collision event.
    pub collision_penalty: f64,
    pub c1: f64,
    /// Weight of the distance to the non-goal stage; its sign is kept as
    /// given, so a negative value penalises proximity instead.
    pub c2: f64,
    pub episode_length: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub d_safe: f64,
    /// Inner hold window of the second-stage eventually-always spec.
    pub t_hold: usize,
    pub placement_attempts: usize,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            task: ParticleTask::Coordination,
            n_agents: 2,
            arena: 1.0,
            dt: 0.1,
            damping: 0.25,
            force: 1.0,
            mass: 1.0,
            collision_radius: 0.1,
            collision_penalty: -1.0,
            c1: 1.0,
            c2: 0.1,
            episode_length: 25,
            eps1: 0.1,
            eps2: 0.1,
            d_safe: 0.15,
            t_hold: 3,
            placement_attempts: 10_000,
        }
    }
}

impl ParticleConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("arena", self.arena),
            ("dt", self.dt),
            ("force", self.force),
            ("mass", self.mass),
            ("collision_radius", self.collision_radius),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("d_safe", self.d_safe),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(CoreError::Config(format!("particle.{name} must be positive")));
        }
        if self.n_agents == 0 {
            return Err(CoreError::Config("particle.n_agents must be at least 1".into()));
        }
        if self.episode_length == 0 {
            return Err(CoreError::Config("particle.episode_length must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(CoreError::Config("particle.damping must lie in [0, 1)".into()));
        }
        if ![self.c1, self.c2, self.collision_penalty].iter().all(|v| v.is_finite()) {
            return Err(CoreError::Config("particle reward weights must be finite".into()));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        let n = self.n_agents;
        2 + 4 * n + 2 * (n - 1)
    }
}

pub type Vec2 = [f64; 2];

fn dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    pub landmarks_first: Vec<Vec2>,
    pub landmarks_second: Vec<Vec2>,
    pub step: usize,
    /// First-stage landmarks visited so far (within `eps1`).
    pub visited_first: Vec<bool>,
    /// Flips once every first-stage landmark has been visited.
    pub second_stage: bool,
    pub covered_second: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct ParticleEnv {
    config: ParticleConfig,
    state: ParticleState,
}

impl ParticleEnv {
    pub fn new(config: ParticleConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_agents;
        let state = ParticleState {
            positions: vec![[0.0; 2]; n],
            velocities: vec![[0.0; 2]; n],
            landmarks_first: vec![[0.0; 2]; n],
            landmarks_second: vec![[0.0; 2]; n],
            step: 0,
            visited_first: vec![false; n],
            second_stage: false,
            covered_second: vec![false; n],
        };
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &ParticleConfig {
        &self.config
    }

    pub fn state(&self) -> &ParticleState {
        &self.state
    }

    /// Replaces the state wholesale (scripted scenarios and tests).
    pub fn set_state(&mut self, state: ParticleState) {
        self.state = state;
    }

    fn place(&self, rng: &mut ChaCha8Rng) -> Result<Vec<Vec2>> {
        let n = self.config.n_agents;
        let min_sep = 2.0 * self.config.collision_radius;
        let a = self.config.arena;
        let mut points: Vec<Vec2> = Vec::with_capacity(3 * n);
        for _ in 0..3 * n {
            let mut placed = false;
            for _ in 0..self.config.placement_attempts {
                let p = [rng.random_range(-a..=a), rng.random_range(-a..=a)];
                if points.iter().all(|q| dist(p, *q) > min_sep) {
                    points.push(p);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(CoreError::Placement {
                    what: "particle entities",
                    attempts: self.config.placement_attempts,
                });
            }
        }
        Ok(points)
    }

    pub fn observe(&self, i: usize) -> Vec<f64> {
        let s = &self.state;
        let p = s.positions[i];
        let mut obs = Vec::with_capacity(self.config.obs_dim());
        obs.extend_from_slice(&s.velocities[i]);
        for lm in s.landmarks_first.iter().chain(&s.landmarks_second) {
            obs.push(lm[0] - p[0]);
            obs.push(lm[1] - p[1]);
        }
        for (j, q) in s.positions.iter().enumerate() {
            if j != i {
                obs.push(q[0] - p[0]);
                obs.push(q[1] - p[1]);
            }
        }
        obs
    }

    pub fn observe_all(&self) -> Vec<Vec<f64>> {
        (0..self.config.n_agents).map(|i| self.observe(i)).collect()
    }

    /// Unordered agent pairs closer than two collision radii.
    pub fn collisions(&self) -> Vec<(usize, usize)> {
        let s = &self.state;
        let mut out = Vec::new();
        for i in 0..s.positions.len() {
            for j in i + 1..s.positions.len() {
                if dist(s.positions[i], s.positions[j]) < 2.0 * self.config.collision_radius {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Distance used for landmark `k` of a stage: agent `k`'s own distance
    /// in coordination, the closest agent in spread.
    fn stage_distance(&self, landmarks: &[Vec2], k: usize) -> f64 {
        let s = &self.state;
        match self.config.task {
            ParticleTask::Coordination => dist(s.positions[k], landmarks[k]),
            ParticleTask::Spread => s
                .positions
                .iter()
                .map(|p| dist(*p, landmarks[k]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Shared reward for the current state given this step's collision count.
    pub fn baseline_reward(&self, collision_events: usize) -> f64 {
        let s = &self.state;
        let (goal, others) = if s.second_stage {
            (&s.landmarks_second, &s.landmarks_first)
        } else {
            (&s.landmarks_first, &s.landmarks_second)
        };
        let n = self.config.n_agents;
        let to_goal: f64 = (0..n).map(|k| self.stage_distance(goal, k)).sum();
        let to_others: f64 = (0..n).map(|k| self.stage_distance(others, k)).sum();
        -self.config.c1 * to_goal
            + self.config.c2 * to_others
            + self.config.collision_penalty * collision_events as f64
    }

    fn update_stage_flags(&mut self) {
        let n = self.config.n_agents;
        for k in 0..n {
            if self.stage_distance(&self.state.landmarks_first, k) <= self.config.eps1 {
                self.state.visited_first[k] = true;
            }
        }
        if self.state.visited_first.iter().all(|&v| v) {
            self.state.second_stage = true;
        }
        if self.state.second_stage {
            for k in 0..n {
                if self.stage_distance(&self.state.landmarks_second, k) <= self.config.eps2 {
                    self.state.covered_second[k] = true;
                }
            }
        }
    }

    pub fn channel_row(&self) -> Vec<f64> {
        let s = &self.state;
        let n = self.config.n_agents;
        let mut row = Vec::with_capacity(2 * n * n + n * (n - 1) / 2);
        for i in 0..n {
            for lms in [&s.landmarks_first, &s.landmarks_second] {
                for lm in lms.iter() {
                    row.push(dist(s.positions[i], *lm));
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                row.push(dist(s.positions[i], s.positions[j]));
            }
        }
        row
    }

    /// Formula text per agent, in the order φ_i1, φ_i2, φ_i3 (the last is
    /// omitted for a single agent).
    pub fn formula_texts(&self) -> Vec<Vec<String>> {
        let c = &self.config;
        let n = c.n_agents;
        let horizon = c.episode_length - 1;
        let stage_dist = |stage: usize, k: usize| -> String {
            match c.task {
                ParticleTask::Coordination => format!("d_a{k}_lm{stage}_{k}"),
                ParticleTask::Spread => nested_min(
                    (1..=n).map(|j| format!("d_a{j}_lm{stage}_{k}")).collect(),
                ),
            }
        };
        (1..=n)
            .map(|i| {
                let mut specs = vec![
                    format!("F[0,{horizon}] ({} <= {})", stage_dist(1, i), c.eps1),
                    format!(
                        "F[0,{horizon}] G[0,{}] ({} <= {})",
                        c.t_hold,
                        stage_dist(2, i),
                        c.eps2
                    ),
                ];
                if n > 1 {
                    let parts: Vec<String> = (1..=n)
                        .filter(|&j| j != i)
                        .map(|j| format!("({} >= {})", pair_channel(i, j), c.d_safe))
                        .collect();
                    specs.push(format!("G[0,{horizon}] ({})", parts.join(" & ")));
                }
                specs
            })
            .collect()
    }
}

/// Channel name for the distance between 1-based agents `i` and `j`.
pub fn pair_channel(i: usize, j: usize) -> String {
    format!("d_a{}_a{}", i.min(j), i.max(j))
}

fn nested_min(mut terms: Vec<String>) -> String {
    let last = terms.pop().expect("at least one term");
    terms
        .into_iter()
        .rev()
        .fold(last, |acc, t| format!("min({t}, {acc})"))
}

impl MultiAgentEnv for ParticleEnv {
    fn n_agents(&self) -> usize {
        self.config.n_agents
    }

    fn obs_dim(&self) -> usize {
        self.config.obs_dim()
    }

    fn n_actions(&self) -> usize {
        ACTIONS.len()
    }

    fn episode_length(&self) -> usize {
        self.config.episode_length
    }

    fn channel_names(&self) -> Vec<String> {
        let n = self.config.n_agents;
        let mut names = Vec::new();
        for i in 1..=n {
            for stage in 1..=2 {
                for k in 1..=n {
                    names.push(format!("d_a{i}_lm{stage}_{k}"));
                }
            }
        }
        for i in 1..=n {
            for j in i + 1..=n {
                names.push(pair_channel(i, j));
            }
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
        let n = self.config.n_agents;
        let points = self.place(rng)?;
        self.state = ParticleState {
            positions: points[..n].to_vec(),
            velocities: vec![[0.0; 2]; n],
            landmarks_first: points[n..2 * n].to_vec(),
            landmarks_second: points[2 * n..].to_vec(),
            step: 0,
            visited_first: vec![false; n],
            second_stage: false,
            covered_second: vec![false; n],
        };
        self.update_stage_flags();
        Ok(self.observe_all())
    }

    fn step(&mut self, requested: &[usize]) -> Result<Transition> {
        let n = self.config.n_agents;
        if requested.len() != n {
            return Err(CoreError::ActionCount {
                expected: n,
                got: requested.len(),
            });
        }
        if let Some(&a) = requested.iter().find(|&&a| a >= ACTIONS.len()) {
            return Err(CoreError::ActionIndex {
                action: a,
                count: ACTIONS.len(),
            });
        }
        let c = &self.config;
        let acc = c.force / c.mass;
        for (i, &action) in requested.iter().enumerate() {
            let a = match action {
                1 => [-acc, 0.0],
                2 => [acc, 0.0],
                3 => [0.0, acc],
                4 => [0.0, -acc],
                _ => [0.0, 0.0],
            };
            let v = &mut self.state.velocities[i];
            let p = &mut self.state.positions[i];
            for d in 0..2 {
                v[d] = (1.0 - c.damping) * v[d] + a[d] * c.dt;
                p[d] = (p[d] + v[d] * c.dt).clamp(-c.arena, c.arena);
            }
        }
        self.state.step += 1;
        let pairs = self.collisions();
        let mut agent_collisions = vec![0; n];
        for &(i, j) in &pairs {
            agent_collisions[i] += 1;
            agent_collisions[j] += 1;
        }
        self.update_stage_flags();
        let r = self.baseline_reward(pairs.len());
        Ok(Transition {
            observations: self.observe_all(),
            applied: requested.to_vec(),
            baseline_rewards: vec![r; n],
            agent_collisions,
            shield_fallbacks: vec![false; n],
            reached: self.state.covered_second.clone(),
            channels: self.channel_row(),
        })
    }
}
