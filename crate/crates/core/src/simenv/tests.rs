use super::*;
use crate::data::synthetic::loop_track;
use crate::data::TrajectoryRecord;
use proptest::prelude::*;

fn origin() -> GeoPoint {
    GeoPoint::new(39.98, 116.32).unwrap()
}

fn parked(id: &str, at: GeoPoint) -> Trajectory {
    Trajectory::new(
        id,
        vec![TrajectoryRecord {
            position: at,
            timestamp: 0.0,
        }],
    )
}

fn vehicle(i: usize) -> Vehicle {
    Vehicle {
        id: format!("v{i}"),
        local_hz: 1e9,
        tx_power_w: 0.5,
        range_m: 800.0,
    }
}

fn server(k: usize, at: GeoPoint, capacity_hz: f64) -> MecServer {
    MecServer {
        id: format!("s{k}"),
        position: at,
        capacity_hz,
        range_m: 1000.0,
    }
}

/// Vehicles parked at `vehicle_at`, servers at `server_at`.
fn static_scenario(vehicle_at: &[GeoPoint], server_at: &[GeoPoint]) -> Scenario {
    Scenario {
        servers: server_at
            .iter()
            .enumerate()
            .map(|(k, p)| server(k, *p, 10e9))
            .collect(),
        vehicles: (0..vehicle_at.len()).map(vehicle).collect(),
        trajectories: vehicle_at
            .iter()
            .enumerate()
            .map(|(i, p)| parked(&format!("v{i}"), *p))
            .collect(),
        channel: ChannelParams {
            subchannels: vehicle_at.len(),
            ..ChannelParams::default()
        },
        tasks: TaskDistribution::default(),
        weights: PriorityWeights::default(),
        slot_len_s: 1.0,
        miss_penalty: 6.0,
    }
}

fn moving_scenario(vehicles: usize, servers: usize) -> Scenario {
    let o = origin();
    let mut sc = static_scenario(
        &vec![o; vehicles],
        &(0..servers)
            .map(|k| o.offset_m(600.0 * (k as f64).sin(), 700.0 * (k as f64 * 1.7).cos()))
            .collect::<Vec<_>>(),
    );
    sc.trajectories = (0..vehicles)
        .map(|i| {
            loop_track(
                &format!("v{i}"),
                o,
                500.0 + 150.0 * i as f64,
                12.0,
                0.2,
                i % 2 == 0,
            )
        })
        .collect();
    sc
}

fn state_with(sc: &Scenario, tasks: Vec<Task>) -> SlotState {
    let pos: Vec<GeoPoint> = (0..sc.num_vehicles())
        .map(|v| sc.position_at(v, 0))
        .collect();
    SlotState {
        episode: 0,
        slot: 0,
        tasks,
        true_positions: pos.clone(),
        decision_positions: pos,
        loads: vec![ServerLoad::default(); sc.num_servers()],
    }
}

fn task(c: f64, priority: f64) -> Task {
    Task {
        data_bits: 1e6,
        cycles: c,
        deadline_s: 2.0,
        features: [1.0, 0.0, 0.0],
        priority,
    }
}

#[test]
fn allocate_examples() {
    let tasks = vec![task(1e9, 1.0), task(1e9, 1.0), task(1e9, 3.0)];
    let free = [1.0, 1.0];
    let all = [true; 3];

    let one = allocate(
        &JointAction(vec![Choice::Offload(0), Choice::Local, Choice::Local]),
        &tasks,
        &free,
        &all,
    );
    assert_eq!(one.shares, vec![Some(1.0), None, None]);

    let equal = allocate(
        &JointAction(vec![Choice::Offload(1), Choice::Offload(1), Choice::Local]),
        &tasks,
        &free,
        &all,
    );
    assert_eq!(equal.shares, vec![Some(0.5), Some(0.5), None]);

    let prop = allocate(
        &JointAction(vec![Choice::Offload(0), Choice::Local, Choice::Offload(0)]),
        &tasks,
        &free,
        &all,
    );
    assert_eq!(prop.shares, vec![Some(0.25), None, Some(0.75)]);
}

#[test]
fn allocate_scales_by_free_share_and_reports_full_servers() {
    let tasks = vec![task(1e9, 1.0), task(1e9, 1.0)];
    let a = JointAction(vec![Choice::Offload(0), Choice::Offload(1)]);
    let alloc = allocate(&a, &tasks, &[0.4, 0.0], &[true, true]);
    assert_eq!(alloc.shares, vec![Some(0.4), None]);
    assert_eq!(alloc.oversubscribed, vec![1]);
}

#[test]
fn zero_priority_still_gets_a_share() {
    let tasks = vec![task(1e9, 0.0), task(1e9, 0.0)];
    let a = JointAction(vec![Choice::Offload(0), Choice::Offload(0)]);
    let alloc = allocate(&a, &tasks, &[1.0], &[true, true]);
    assert_eq!(alloc.shares, vec![Some(0.5), Some(0.5)]);
}

#[test]
fn all_local_step_sums_local_delays_and_leaves_servers() {
    let o = origin();
    let sc = static_scenario(&[o, o], &[o]);
    let s = state_with(&sc, vec![task(1e9, 0.5), task(2.5e9, 0.5)]);
    let (out, loads) = transition(&sc, &s, &JointAction::all_local(2)).unwrap();
    assert_eq!(out.total_delay, 3.5);
    assert_eq!(out.vehicles[1].delay_s, 2.5);
    assert!(out.vehicles[0].deadline_met);
    assert!(!out.vehicles[1].deadline_met);
    assert_eq!(out.misses, 1);
    assert_eq!(loads, s.loads);
}

#[test]
fn single_offload_uses_full_share() {
    let o = origin();
    let s_at = o.offset_m(300.0, 0.0);
    let sc = static_scenario(&[o], &[s_at]);
    let t = task(1e9, 0.7);
    let s = state_with(&sc, vec![t]);
    let (out, loads) = transition(&sc, &s, &JointAction(vec![Choice::Offload(0)])).unwrap();
    let d = haversine_distance(o, s_at);
    let rate = transmission_rate(0.5, d, &sc.channel);
    let expected = offload_delay(&t, rate, 1.0, 10e9);
    assert_eq!(out.vehicles[0].delay_s, expected);
    assert_eq!(out.vehicles[0].share, 1.0);
    assert_eq!(out.total_delay, expected);
    assert_eq!(loads[0].commitments.len(), 1);
    assert_eq!(loads[0].commitments[0].release_slot, 1);
}

#[test]
fn unreachable_offload_falls_back_to_local() {
    let o = origin();
    let sc = static_scenario(&[o], &[o.offset_m(5_000.0, 0.0)]);
    let t = task(1e9, 0.5);
    let s = state_with(&sc, vec![t]);
    let (out, loads) = transition(&sc, &s, &JointAction(vec![Choice::Offload(0)])).unwrap();
    assert_eq!(out.vehicles[0].executed, Choice::Local);
    assert_eq!(out.vehicles[0].fallback, Some(Fallback::Unreachable));
    assert_eq!(out.total_delay, 1.0);
    assert_eq!(out.fallbacks, 1);
    assert!(loads[0].commitments.is_empty());
}

#[test]
fn committed_server_forces_local_and_releases_later() {
    let o = origin();
    let sc = static_scenario(&[o, o], &[o]);
    let mut s = state_with(&sc, vec![task(1e9, 0.5), task(1e9, 0.5)]);
    s.loads[0].commitments.push(Commitment {
        vehicle: 1,
        share: 1.0,
        release_slot: 3,
    });
    let (out, _) = transition(
        &sc,
        &s,
        &JointAction(vec![Choice::Offload(0), Choice::Local]),
    )
    .unwrap();
    assert_eq!(out.vehicles[0].fallback, Some(Fallback::Oversubscribed));
    let mut load = s.loads[0].clone();
    load.release_until(2);
    assert_eq!(load.free(), 0.0);
    load.release_until(3);
    assert_eq!(load.free(), 1.0);
}

#[test]
fn long_tasks_hold_their_share_across_slots() {
    let o = origin();
    let mut sc = static_scenario(&[o], &[o]);
    sc.servers[0].capacity_hz = 0.4e9;
    sc.tasks.cycles = UniformRange::new(1e9, 1e9);
    sc.tasks.data_bits = UniformRange::new(0.0, 0.0);
    let mut env = Env::new(Arc::new(sc), 1, 0).unwrap();
    let out = env.step(&JointAction(vec![Choice::Offload(0)])).unwrap();
    assert_eq!(out.vehicles[0].delay_s, 2.5);
    assert_eq!(env.state().loads[0].commitments[0].release_slot, 3);
    let out = env.step(&JointAction(vec![Choice::Offload(0)])).unwrap();
    assert_eq!(out.vehicles[0].fallback, Some(Fallback::Oversubscribed));
    env.step(&JointAction::all_local(1)).unwrap();
    assert_eq!(env.slot(), 3);
    assert_eq!(env.state().loads[0].free(), 1.0);
}

#[test]
fn malformed_actions_are_rejected() {
    let o = origin();
    let sc = static_scenario(&[o, o], &[o]);
    let s = state_with(&sc, vec![task(1e9, 0.5), task(1e9, 0.5)]);
    assert!(matches!(
        transition(&sc, &s, &JointAction::all_local(1)),
        Err(Error::Action(_))
    ));
    let bad = JointAction(vec![Choice::Offload(3), Choice::Local]);
    assert!(matches!(transition(&sc, &s, &bad), Err(Error::Action(_))));
}

#[test]
fn transition_is_pure() {
    let sc = moving_scenario(3, 4);
    let env = Env::new(Arc::new(sc.clone()), 5, 0).unwrap();
    let s = env.state().clone();
    let a = JointAction(vec![Choice::Offload(0), Choice::Offload(0), Choice::Local]);
    let first = transition(&sc, &s, &a).unwrap();
    let second = transition(&sc, &s, &a).unwrap();
    assert_eq!(first, second);
    assert_eq!(&s, env.state());
}

#[test]
fn reward_examples() {
    let mut out = SlotOutcome {
        episode: 0,
        slot: 0,
        vehicles: Vec::new(),
        total_delay: 0.0,
        misses: 0,
        fallbacks: 0,
    };
    assert_eq!(reward(&out, 6.0), 0.0);
    out.total_delay = 3.0;
    assert_eq!(reward(&out, 6.0), -3.0);
    let before = reward(&out, 6.0);
    out.misses = 1;
    assert!(reward(&out, 6.0) < before);
}

#[test]
fn spawn_tasks_respects_ranges_and_seeds() {
    let sc = moving_scenario(4, 2);
    let d = sc.tasks;
    for slot in 0..200 {
        for t in sc.spawn_tasks(3, 0, slot) {
            assert!(d.data_bits.contains(t.data_bits));
            assert!(d.cycles.contains(t.cycles));
            assert!(d.deadline_s.contains(t.deadline_s));
            assert!((0.0..=1.0).contains(&t.priority));
        }
    }
    assert_eq!(sc.spawn_tasks(3, 1, 7), sc.spawn_tasks(3, 1, 7));
    assert_ne!(sc.spawn_tasks(3, 1, 7), sc.spawn_tasks(4, 1, 7));
}

#[test]
fn degenerate_ranges_give_constant_tasks() {
    let mut sc = moving_scenario(1, 1);
    sc.tasks.data_bits = UniformRange::new(5e5, 5e5);
    sc.tasks.cycles = UniformRange::new(3e8, 3e8);
    sc.tasks.deadline_s = UniformRange::new(1.0, 1.0);
    let a = sc.spawn_task(1, 0, 0, 0);
    let b = sc.spawn_task(9, 3, 11, 0);
    assert_eq!(
        (a.data_bits, a.cycles, a.deadline_s),
        (b.data_bits, b.cycles, b.deadline_s)
    );
}

#[test]
fn invalid_ranges_are_config_errors() {
    let mut sc = moving_scenario(1, 1);
    sc.tasks.cycles = UniformRange::new(2.0, 1.0);
    assert!(matches!(sc.validate(), Err(Error::Config(_))));
}

#[test]
fn episode_total_matches_independent_sum() {
    let sc = Arc::new(moving_scenario(3, 3));
    let mut env = Env::new(sc.clone(), 2, 0).unwrap();
    let mut rng = substream(2, "test-actions", &[]);
    let mut total = 0.0;
    let mut independent = 0.0;
    for _ in 0..50 {
        let a = JointAction(
            (0..3)
                .map(|_| match rng.random_range(0..4) {
                    0 => Choice::Local,
                    k => Choice::Offload(k - 1),
                })
                .collect(),
        );
        let out = env.step(&a).unwrap();
        total += out.total_delay;
        independent += out.vehicles.iter().map(|v| v.delay_s).sum::<f64>();
    }
    assert!((total - independent).abs() < 1e-9);
}

#[test]
fn env_streams_do_not_depend_on_actions() {
    let sc = Arc::new(moving_scenario(3, 3));
    let mut a = Env::new(sc.clone(), 8, 1).unwrap();
    let mut b = Env::new(sc, 8, 1).unwrap();
    for _ in 0..30 {
        a.step(&JointAction::all_local(3)).unwrap();
        b.step(&JointAction(vec![Choice::Offload(0); 3])).unwrap();
    }
    assert_eq!(a.stream_digest(), b.stream_digest());
    assert_eq!(a.state().tasks, b.state().tasks);
}

#[test]
fn history_wraps_around_the_track() {
    let sc = Arc::new(moving_scenario(1, 1));
    let env = Env::new(sc.clone(), 0, 0).unwrap();
    let h = env.history(0, 8);
    let len = sc.trajectories[0].len() as u64;
    let now = env.track_index(0, 0);
    for (j, p) in h.iter().enumerate() {
        let idx = (now + len * 8 - (8 - j as u64)) % len;
        assert_eq!(*p, sc.position_at(0, idx));
    }
}

#[test]
fn one_hot_views() {
    let a = JointAction(vec![Choice::Local, Choice::Offload(1)]);
    assert_eq!(a.offload_flags(), vec![0, 1]);
    assert_eq!(a.server_one_hot(3), vec![vec![0, 0, 0], vec![0, 1, 0]]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shares_never_exceed_one(seed in 0u64..1000, picks in proptest::collection::vec(0usize..4, 60)) {
        let sc = Arc::new(moving_scenario(3, 3));
        let mut env = Env::new(sc, seed, 0).unwrap();
        for chunk in picks.chunks(3) {
            let a = JointAction(chunk.iter().map(|&p| if p == 0 { Choice::Local } else { Choice::Offload(p - 1) }).collect());
            let out = env.step(&a).unwrap();
            for load in &env.state().loads {
                prop_assert!(load.committed() <= 1.0 + 1e-12);
            }
            for (v, c) in out.vehicles.iter().zip(&a.0) {
                prop_assert_eq!(v.requested, *c);
                prop_assert!(v.delay_s.is_finite() && v.delay_s > 0.0);
            }
        }
    }
}
