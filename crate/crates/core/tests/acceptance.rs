//! End-to-end acceptance checks. Each test prints one `criterion N ...: PASS`
//! or `FAIL` line before asserting.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use tppd::config::Config;
use tppd::harness::{self, Algorithm, Artifacts, RunResult};
use tppd::nn::gradcheck::{grad_check_lstm_seeds, GradCheckSpec, DEFAULT_FD_STEP};
use tppd::policies::{train_agent, ActionCodec, Policy, RandomPolicy, ReplayBuffer, Variant};
use tppd::predictor;
use tppd::simenv::{
    offload_delay, transition, transmission_rate, Env, PositionSource, Task, UniformRange,
};

// Written straight to stderr so the line shows without --nocapture.
fn report(n: u32, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n} {name}: {verdict} ({detail})");
}

#[test]
fn criterion_1_gradient_check() {
    let t = Instant::now();
    let seeds = 24;
    let max = grad_check_lstm_seeds(GradCheckSpec::default(), 0..seeds, DEFAULT_FD_STEP).unwrap();
    let el = t.elapsed();
    let ok = max < 1e-4 && el.as_secs() < 60;
    report(
        1,
        "gradient correctness",
        ok,
        &format!("max rel error {max:.2e} over {seeds} seeds in {el:.1?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_2_predictor_quality() {
    let t = Instant::now();
    let cfg = Config::default().seeded(0);
    assert!(cfg.predictor.synthetic_points >= 2000);
    assert_eq!(cfg.predictor.synthetic_noise, 0.01);
    let (train, test) = harness::setup::predictor_split(&cfg, 0).unwrap();
    let p = predictor::train(&train, &cfg.predictor.model).unwrap();
    let r = p.evaluate(&test).unwrap();
    let el = t.elapsed();
    let ok = r.rmse < 0.05 && el.as_secs() < 300;
    report(
        2,
        "predictor quality",
        ok,
        &format!(
            "rmse {:.5} accuracy {:.4} on {} held-out windows in {el:.1?}",
            r.rmse,
            r.accuracy,
            test.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_3_ddqn_matches_exhaustive() {
    let t = Instant::now();
    let root = 0;
    let mut cfg = Config::default();
    cfg.scenario.vehicles = 2;
    cfg.scenario.servers = 3;
    cfg.agent.gamma = 0.5;
    assert!(cfg.agent.training_steps <= 20_000);
    let cfg = cfg.seeded(root);
    let sc = Arc::new(harness::build_scenario(&cfg, root).unwrap());
    let (agent, _) = train_agent(sc.clone(), &cfg.agent, Variant::Ddqn).unwrap();
    let mut exp = cfg.experiment.clone();
    exp.slots = 200;
    exp.episodes = 1;
    let art = Artifacts {
        ddqn: Some(agent),
        ..Default::default()
    };
    let env_seed = harness::eval_env_seed(root, 0);
    let run = |alg| harness::run_algorithm(alg, &sc, &art, env_seed, 0, &exp, None).unwrap();
    let (ddqn, oracle) = (run(Algorithm::DdqnRt), run(Algorithm::ExhaustiveRt));
    assert_eq!(ddqn.digest, oracle.digest);
    let ratio = (ddqn.completion_s / 200.0) / (oracle.completion_s / 200.0);
    let el = t.elapsed();
    let ok = ratio <= 1.10 && el.as_secs() < 600;
    report(
        3,
        "DDQN vs exhaustive (2x3)",
        ok,
        &format!(
            "per-slot delay {:.4} vs {:.4}, ratio {ratio:.3} in {el:.1?}",
            ddqn.completion_s / 200.0,
            oracle.completion_s / 200.0
        ),
    );
    assert!(ok);
}

fn mean_penalized(results: &[RunResult], alg: Algorithm) -> f64 {
    let xs: Vec<f64> = results
        .iter()
        .filter(|r| r.algorithm == alg)
        .map(|r| r.penalized_s)
        .collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn criterion_4_ordering() {
    let root = 0;
    let mut cfg = Config::default();
    assert_eq!((cfg.scenario.servers, cfg.scenario.vehicles), (6, 4));
    cfg.agent.train_every = 4;
    cfg.experiment.seeds = (0..5).collect();
    cfg.experiment.algorithms = [
        Algorithm::Tppd,
        Algorithm::DdqnRt,
        Algorithm::Random,
        Algorithm::AllLocal,
    ]
    .iter()
    .map(|a| a.name().to_string())
    .collect();
    let cfg = cfg.seeded(root);
    let sc = Arc::new(harness::build_scenario(&cfg, root).unwrap());
    let algs = harness::parse_algorithms(&cfg.experiment.algorithms).unwrap();
    let art = harness::prepare_artifacts(&cfg, &sc, &algs).unwrap();
    let res = harness::run_comparison(&cfg, root, &sc, &art).unwrap();
    let m = |a| mean_penalized(&res, a);
    let (tppd, rt, random) = (
        m(Algorithm::Tppd),
        m(Algorithm::DdqnRt),
        m(Algorithm::Random),
    );

    let mut heavy_sc = (*sc).clone();
    let top = cfg.tasks.cycles.max;
    heavy_sc.tasks.cycles = UniformRange::new(top, top);
    let heavy_sc = Arc::new(heavy_sc);
    let heavy = harness::run_comparison(&cfg, root, &heavy_sc, &art).unwrap();
    let (h_tppd, h_local) = (
        mean_penalized(&heavy, Algorithm::Tppd),
        mean_penalized(&heavy, Algorithm::AllLocal),
    );

    let ok_order = tppd <= rt && rt <= random;
    let ok_heavy = h_tppd < h_local;
    report(
        4,
        "ordering (6 servers x 4 vehicles, 5 seeds)",
        ok_order && ok_heavy,
        &format!(
            "tppd {tppd:.3} <= ddqn_rt {rt:.3} <= random {random:.3}: {ok_order}; \
             heavy c={top:e}: tppd {h_tppd:.3} < all_local {h_local:.3}: {ok_heavy}"
        ),
    );
    assert!(ok_order && ok_heavy);
}

#[test]
fn criterion_5_formula_identities() {
    let root = 5;
    let mut cfg = Config::default();
    cfg.scenario.vehicles = 2;
    cfg.scenario.servers = 3;
    cfg.agent.training_steps = 2000;
    cfg.agent.warmup_steps = 500;
    cfg.predictor.model.epochs = 5;
    cfg.experiment.slots = 50;
    cfg.experiment.seeds = vec![0, 1, 2];
    cfg.experiment.station_power_w = 7.3;
    let cfg = cfg.seeded(root);
    let sc = Arc::new(harness::build_scenario(&cfg, root).unwrap());
    let algs = harness::parse_algorithms(&cfg.experiment.algorithms).unwrap();
    let art = harness::prepare_artifacts(&cfg, &sc, &algs).unwrap();
    let res = harness::run_comparison(&cfg, root, &sc, &art).unwrap();
    let j = cfg.experiment.station_power_w;
    let identities = res.iter().all(|r| {
        r.penalized_s == r.completion_s + r.decision_s * r.psi && r.power == r.penalized_s * j
    });
    let mut ordering = true;
    for &seed in &cfg.experiment.seeds {
        let mut rs: Vec<&RunResult> = res.iter().filter(|r| r.seed == seed).collect();
        rs.sort_by(|a, b| a.penalized_s.total_cmp(&b.penalized_s));
        ordering &= rs.windows(2).all(|w| w[0].power <= w[1].power);
        rs.sort_by(|a, b| a.power.total_cmp(&b.power));
        ordering &= rs.windows(2).all(|w| w[0].penalized_s <= w[1].penalized_s);
    }
    report(
        5,
        "formula identities",
        identities && ordering,
        &format!(
            "{} results, identities {identities}, power ordering {ordering}",
            res.len()
        ),
    );
    assert!(identities && ordering);
}

#[test]
fn criterion_6_environment_invariants() {
    let root = 6;
    let cfg = Config::default().seeded(root);
    let sc = Arc::new(harness::build_scenario(&cfg, root).unwrap());
    let (n, k) = (sc.num_vehicles(), sc.num_servers());
    assert_eq!((n, k), (4, 6));
    let mut env = Env::new(sc.clone(), 1, 0).unwrap();
    let mut policy = RandomPolicy::new(2);
    let mut shares_ok = true;
    let mut one_hot_ok = true;
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let state = env.observe(PositionSource::True).unwrap();
        let action = policy.decide(&sc, &state).unwrap();
        let hot = action.server_one_hot(k);
        one_hot_ok &= hot
            .iter()
            .zip(action.offload_flags())
            .all(|(row, x)| row.iter().map(|&b| b as u32).sum::<u32>() == x as u32);
        let (_, during) = transition(&sc, &state, &action).unwrap();
        env.step(&action).unwrap();
        for l in during.iter().chain(&env.state().loads) {
            worst = worst.max(l.committed());
            shares_ok &= l.committed() <= 1.0 + 1e-9 && l.commitments.iter().all(|c| c.share > 0.0);
        }
    }

    let task = Task {
        data_bits: 1e6,
        cycles: 5e8,
        deadline_s: 1.0,
        features: [3.0, 0.5, 0.5],
        priority: 0.5,
    };
    let ch = sc.channel;
    let mut mono_ok = true;
    for w in (1..=10)
        .map(|i| i as f64 / 10.0)
        .collect::<Vec<_>>()
        .windows(2)
    {
        mono_ok &= offload_delay(&task, 1e7, w[1], 1e10) < offload_delay(&task, 1e7, w[0], 1e10);
    }
    for f in [[5e9, 1e10], [1e10, 2e10]] {
        mono_ok &= offload_delay(&task, 1e7, 0.5, f[1]) < offload_delay(&task, 1e7, 0.5, f[0]);
    }
    for d in [[10.0, 100.0], [100.0, 400.0], [400.0, 799.0]] {
        let r = d.map(|d| transmission_rate(0.5, d, &ch));
        mono_ok &= offload_delay(&task, r[1], 0.5, 1e10) > offload_delay(&task, r[0], 0.5, 1e10);
    }

    let mut buf = ReplayBuffer::new(100);
    (0..1000).for_each(|i| buf.push(i));
    let fifo_ok = buf.len() == 100 && buf.iter().copied().eq(900..1000);

    let codec = ActionCodec::new(4, 6).unwrap();
    let codec_ok = codec.size() == 2401
        && (0..codec.size()).all(|i| codec.encode(&codec.decode(i).unwrap()).unwrap() == i)
        && codec.decode(2401).is_err();

    let ok = shares_ok && one_hot_ok && mono_ok && fifo_ok && codec_ok;
    report(
        6,
        "environment invariants",
        ok,
        &format!(
            "shares {shares_ok} (max committed {worst:.6}), one-hot {one_hot_ok}, monotonicity {mono_ok}, \
             fifo {fifo_ok}, codec {codec_ok}"
        ),
    );
    assert!(ok);
}

fn pipeline(dir: &Path) {
    let root = 7;
    let mut cfg = Config::default();
    cfg.scenario.vehicles = 2;
    cfg.scenario.servers = 3;
    cfg.agent.training_steps = 600;
    cfg.agent.warmup_steps = 200;
    cfg.agent.hidden_sizes = vec![32, 32];
    cfg.predictor.model.hidden_size = 16;
    cfg.predictor.model.epochs = 3;
    cfg.predictor.synthetic_points = 400;
    cfg.experiment.slots = 40;
    cfg.experiment.seeds = vec![0, 1];
    cfg.experiment.synthetic_decision_time_s = Some(2e-3);
    let cfg = cfg.seeded(root);

    let (train, test) = harness::setup::predictor_split(&cfg, root).unwrap();
    let p = predictor::train(&train, &cfg.predictor.model).unwrap();
    p.save(&dir.join("predictor.json")).unwrap();
    std::fs::write(
        dir.join("predictor_eval.csv"),
        p.evaluate(&test).unwrap().csv_row(),
    )
    .unwrap();

    let sc = Arc::new(harness::build_scenario(&cfg, root).unwrap());
    let (agent, curve) = train_agent(sc.clone(), &cfg.agent, Variant::Dqn).unwrap();
    agent.save(&dir.join("agent_dqn.json")).unwrap();
    harness::write_learning_curve(&dir.join("learning_curve_dqn.csv"), &curve).unwrap();

    let algs = harness::parse_algorithms(&cfg.experiment.algorithms).unwrap();
    let art = harness::prepare_artifacts(&cfg, &sc, &algs).unwrap();
    let res = harness::run_comparison(&cfg, root, &sc, &art).unwrap();
    harness::write_comparison(&dir.join("comparison.csv"), &res).unwrap();
    harness::write_summary(&dir.join("summary.csv"), &harness::summarize(&res)).unwrap();
    let mut trace = Vec::new();
    harness::run_algorithm(
        Algorithm::Tppd,
        &sc,
        &art,
        11,
        0,
        &cfg.experiment,
        Some(&mut trace),
    )
    .unwrap();
    harness::write_trace(&dir.join("trace_tppd.csv"), &trace).unwrap();
}

#[test]
fn criterion_7_determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    dirs.iter().for_each(|d| pipeline(d.path()));
    let mut names: Vec<String> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| {
            std::fs::read(dirs[0].path().join(n)).unwrap()
                != std::fs::read(dirs[1].path().join(n)).unwrap()
        })
        .collect();
    let ok = names.len() == 7 && differing.is_empty();
    report(
        7,
        "determinism",
        ok,
        &format!("{} files compared, differing {differing:?}", names.len()),
    );
    assert!(ok);
}
