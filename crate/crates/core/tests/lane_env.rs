use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stlmarl_core::lane::{LaneConfig, LaneEnv, MarginScope, BRAKE, KEEP, LEFT};
use stlmarl_core::MultiAgentEnv;
use stlmarl_stl::{robustness, Trace};

fn fresh(cfg: LaneConfig, seed: u64) -> LaneEnv {
    let mut e = LaneEnv::new(cfg).unwrap();
    e.reset(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    e
}

/// Places the agents by hand: `(x, lane, v)` each.
fn place(e: &mut LaneEnv, cars: &[(f64, usize, f64)]) {
    let mut s = e.state().clone();
    for (i, &(x, lane, v)) in cars.iter().enumerate() {
        s.vehicles[i] = e.vehicle_in_lane(x, lane, v);
    }
    e.set_state(s);
}

#[test]
fn reset_layout() {
    let e = fresh(LaneConfig::default(), 1);
    let s = e.state();
    let blocked: Vec<usize> = s.obstacles.iter().map(|o| o.lane).collect();
    assert_eq!(blocked, vec![1, 2, 3]);
    assert!(s.obstacles.iter().all(|o| o.x == s.p_road[0]));
    let mut lanes: Vec<usize> = s.vehicles.iter().map(|v| v.lane).collect();
    lanes.sort();
    lanes.dedup();
    assert_eq!(lanes.len(), 3);
    assert!(s.vehicles.iter().all(|v| v.v == 0.0 && v.x < s.p_road[0]));
    assert!(s.destinations.iter().all(|d| d[0] > s.p_road[0]));
    let again = fresh(LaneConfig::default(), 1);
    assert_eq!(again.state(), s);
    let json: serde_json::Value = serde_json::from_str(&e.layout_json()).unwrap();
    assert_eq!(json["obstacles"].as_array().unwrap().len(), 3);
}

#[test]
fn zero_control_from_rest_changes_only_counters() {
    let mut e = fresh(LaneConfig::default(), 2);
    let before = e.state().clone();
    e.step(&[KEEP, KEEP, KEEP]).unwrap();
    assert_eq!(e.state().vehicles, before.vehicles);
    assert_eq!(e.state().step, 1);
}

#[test]
fn straight_line_acceleration_follows_euler_recurrence() {
    let cfg = LaneConfig {
        n_agents: 1,
        ..LaneConfig::default()
    };
    let mut e = fresh(cfg, 0);
    place(&mut e, &[(0.0, 0, 0.0)]);
    let throttle_two = 5;
    let (a, dt) = (2.0, 0.1);
    let mut x = 0.0;
    for k in 1..=10 {
        x += (k - 1) as f64 * a * dt * dt;
        e.step(&[throttle_two]).unwrap();
        let v = &e.state().vehicles[0];
        assert!((v.v - a * k as f64 * dt).abs() < 1e-12);
        assert!((v.x - x).abs() < 1e-12);
        assert_eq!(v.y, e.config().lane_center(0));
    }
}

#[test]
fn wait_timer_counts_stopped_steps_near_the_blockage() {
    let cfg = LaneConfig {
        n_agents: 1,
        ..LaneConfig::default()
    };
    let mut e = fresh(cfg, 0);
    place(&mut e, &[(55.0, 0, 0.0)]);
    for _ in 0..5 {
        e.step(&[BRAKE]).unwrap();
    }
    assert_eq!(e.state().t_wait[0], 5);
    assert_eq!(e.state().vehicles[0].v, 0.0);
}

#[test]
fn action_mapping() {
    let mut e = fresh(LaneConfig::default(), 3);
    place(&mut e, &[(10.0, 0, 0.0), (10.0, 3, 5.0), (30.0, 2, 5.0)]);
    let keep = e.action_to_control(0, KEEP);
    assert_eq!((keep.control.accel, keep.control.steer), (0.0, 0.0));
    let brake = e.action_to_control(0, BRAKE);
    assert_eq!((brake.control.accel, brake.control.steer), (-4.0, 0.0));
    let left = e.action_to_control(1, LEFT);
    assert!(left.invalid_lane_change);
    e.step(&[BRAKE, LEFT, KEEP]).unwrap();
    assert_eq!(e.state().vehicles[0].v, 0.0);
    assert_eq!(e.last_events().invalid_lane_change, vec![false, true, false]);
}

#[test]
fn baseline_reward_examples() {
    let cfg = LaneConfig {
        n_agents: 1,
        dest_constant: Some(7.0),
        ..LaneConfig::default()
    };
    let mut e = fresh(cfg, 0);
    let mut s = e.state().clone();
    s.vehicles[0] = e.vehicle_in_lane(s.destinations[0][0], 0, 0.0);
    e.set_state(s);
    assert!((e.baseline_reward(0, 0) - 0.05 * 7.0).abs() < 1e-12);
    place(&mut e, &[(20.0, 0, 15.0)]);
    let d = e.dist_dest(0);
    assert!((e.baseline_reward(0, 0) - (1.0 + 0.05 * (-d + 7.0))).abs() < 1e-12);
    assert!((e.baseline_reward(0, 1) - (1.0 - 10.0 + 0.05 * (-d + 7.0))).abs() < 1e-12);
}

#[test]
fn formulas_parse_and_behave_on_simple_traces() {
    let cfg = LaneConfig {
        margin_scope: MarginScope::All,
        ..LaneConfig::default()
    };
    let e = fresh(cfg, 0);
    let names = e.channel_names();
    let formulas = e.formulas();
    for specs in &formulas {
        assert_eq!(specs.len(), 4);
        for f in specs {
            for ch in f.channels() {
                assert!(names.contains(&ch), "{ch}");
            }
        }
    }
    // Far from the blockage, constant gap 6 and equal speeds.
    let g = 6.0;
    let value = |n: &str| -> f64 {
        if n.starts_with("margin") {
            g
        } else if n.starts_with("dist_road") {
            100.0
        } else if n.starts_with("speed") {
            4.9
        } else {
            0.0
        }
    };
    let trace = Trace::from_channels(names.iter().map(|n| (n.clone(), vec![value(n); 30])), 1.0).unwrap();
    let rho = |k: usize| robustness(&formulas[0][k], &trace, 0).unwrap();
    assert!((rho(0) - (g - 0.25)).abs() < 1e-12);
    assert!(rho(2) > 0.0);
    assert!(rho(3) > 0.0);
}

#[test]
fn margin_channel_matches_definition() {
    let mut e = fresh(LaneConfig::default(), 0);
    place(&mut e, &[(10.0, 0, 3.0), (20.0, 0, 7.0), (40.0, 2, 1.0)]);
    let gap = 10.0 - 3.0;
    assert!((e.margin(0, 1) - (gap - 16.0 / 8.0)).abs() < 1e-12);
    let row = e.channel_row();
    assert!((row[0] - e.margin(0, 1)).abs() < 1e-12);
    assert_eq!(row[1], 0.0);
}

#[test]
fn collisions_stop_vehicles() {
    let mut e = fresh(LaneConfig::default(), 0);
    let road_x = e.config().road_x;
    place(&mut e, &[(road_x - 3.05, 1, 5.0), (0.0, 0, 0.0), (10.0, 3, 0.0)]);
    let tr = e.step(&[KEEP, KEEP, KEEP]).unwrap();
    assert_eq!(tr.agent_collisions[0], 1);
    let v = &e.state().vehicles[0];
    assert!(v.crashed && v.v == 0.0);
    let x = v.x;
    e.step(&[5, KEEP, KEEP]).unwrap();
    assert_eq!(e.state().vehicles[0].x, x);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn invariants_under_random_actions(
        seed in any::<u64>(),
        shield in any::<bool>(),
        actions in proptest::collection::vec(proptest::collection::vec(0usize..7, 3), 1..80),
    ) {
        let run = || {
            let mut e = fresh(LaneConfig::default(), seed);
            e.set_shield(shield).unwrap();
            let mut out = Vec::new();
            let mut waits = e.state().t_wait.clone();
            for joint in &actions {
                let tr = e.step(joint).unwrap();
                let c = e.config().clone();
                for (i, v) in e.state().vehicles.iter().enumerate() {
                    assert!(v.v >= 0.0);
                    assert_eq!(v.lane, c.lane_of(v.y));
                    let w = e.state().t_wait[i];
                    let stopped_near = e.dist_road(i) <= c.road_radius && v.v <= c.v_stop;
                    assert_eq!(w, waits[i] + usize::from(stopped_near));
                }
                waits = e.state().t_wait.clone();
                if !shield {
                    assert_eq!(&tr.applied, joint);
                }
                out.push(tr);
            }
            out
        };
        prop_assert_eq!(run(), run());
    }
}
