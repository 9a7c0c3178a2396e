use std::process::Command;

use phantom_core::collision_net::{Ccn, Cpn};
use phantom_core::kinematics::bundled;
use phantom_core::retarget::{build_mapping, Correspondence, Direction};
use phantom_core::Exec;
use phantom_session::config::NetworkPaths;
use phantom_session::eval::{endpoint_check, eval, measure_pipeline_latency, EvalOptions};
use phantom_session::{Scene, SceneConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene_with_untrained_networks(dir: &std::path::Path) -> Scene {
    let hand = bundled::hand16();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    Cpn::with_hidden(&hand, &[16], &mut rng).save(dir.join("cpn.json")).unwrap();
    Ccn::with_hidden(&hand, &[16], &mut rng).save(dir.join("ccn.json")).unwrap();
    std::fs::write(
        dir.join("scene.json"),
        r#"{"task":"eval","networks":{"cpn":"cpn.json","ccn":"ccn.json"},"gate_threshold":0.5}"#,
    )
    .unwrap();
    Scene::load(dir.join("scene.json")).unwrap()
}

#[test]
fn endpoint_check_accepts_solved_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.random_range(1..8);
        let limits: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let lo = rng.random_range(-2.0..1.0);
                (lo, lo + rng.random_range(0.1..2.0))
            })
            .collect();
        let entries: Vec<Correspondence> = (0..n)
            .map(|j| {
                let gmin = rng.random_range(-1.0..1.0);
                Correspondence {
                    robot_joint: j,
                    glove_channel: rng.random_range(0..27),
                    direction: if rng.random_bool(0.5) { Direction::Forward } else { Direction::Reverse },
                    glove_min: gmin,
                    glove_max: gmin + rng.random_range(0.05..3.0),
                }
            })
            .collect();
        let table = build_mapping(&entries, &limits).unwrap();
        let check = endpoint_check(&table, 1e-9);
        assert!(check.passed, "{check:?}");
        assert_eq!(check.joints, n);
    }
}

#[test]
fn latency_histogram_accounts_for_every_iteration() {
    let scene = Scene::build(SceneConfig::default()).unwrap();
    let h = measure_pipeline_latency(&scene.setup.mapping, None, 500, 0).unwrap();
    assert_eq!(h.iterations, 500);
    assert_eq!(h.counts.iter().sum::<usize>(), 500);
    assert!(h.median_ms <= h.p95_ms && h.p95_ms <= h.p99_ms && h.p99_ms <= h.max_ms);
}

#[test]
fn report_covers_networks_when_configured() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene_with_untrained_networks(dir.path());
    assert_eq!(
        scene.config.networks,
        Some(NetworkPaths {
            cpn: dir.path().join("cpn.json"),
            ccn: dir.path().join("ccn.json"),
        })
    );
    let opts = EvalOptions {
        iterations: 200,
        samples: 2_000,
        colliding: 100,
        seed: 9,
        exec: Exec::Parallel,
    };
    let report = eval(&scene, &opts).unwrap();
    assert_eq!(report.latency.iterations, 200);
    let cpn = report.cpn.unwrap();
    assert_eq!(cpn.per_link_accuracy.len(), scene.hand.link_count());
    assert!(cpn.per_link_accuracy.iter().all(|a| (0.0..=1.0).contains(a)));
    let ccn = report.ccn.unwrap();
    assert_eq!(ccn.colliding_configs, 100);
    assert!((0.0..=1.0).contains(&ccn.oracle_collision_rate));
    assert!(report.endpoints.passed);

    let bare = eval(&Scene::build(SceneConfig::default()).unwrap(), &opts).unwrap();
    assert!(bare.cpn.is_none() && bare.ccn.is_none());
    // the report is machine-readable
    let v: serde_json::Value = serde_json::to_value(&bare).unwrap();
    assert!(v["latency"]["median_ms"].is_number());
}

#[test]
fn mismatched_networks_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let toy = bundled::toy_finger();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    Cpn::with_hidden(&toy, &[4], &mut rng).save(dir.path().join("cpn.json")).unwrap();
    Ccn::with_hidden(&toy, &[4], &mut rng).save(dir.path().join("ccn.json")).unwrap();
    std::fs::write(dir.path().join("scene.json"), r#"{"networks":{"cpn":"cpn.json","ccn":"ccn.json"}}"#).unwrap();
    assert!(matches!(
        Scene::load(dir.path().join("scene.json")),
        Err(phantom_session::SessionError::Config { field, .. }) if field == "networks"
    ));
}

#[test]
fn command_line_replay_is_reproducible() {
    let bin = env!("CARGO_BIN_EXE_phantom");
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let ok = |args: &[&std::ffi::OsStr]| {
        let out = Command::new(bin).args(args).env("PHANTOM_LOG", "warn").output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out
    };
    let s = |x: &str| std::ffi::OsString::from(x);
    ok(&[s("synth-trace").as_ref(), s("--duration").as_ref(), s("3").as_ref(), s("--out").as_ref(), p("trace.jsonl").as_os_str()]);
    std::fs::write(p("pedal.jsonl"), "{\"t\":1.0,\"state\":\"down\"}\n{\"t\":1.5,\"state\":\"up\"}\n").unwrap();
    for out in ["a.jsonl", "b.jsonl"] {
        let o = ok(&[
            s("replay").as_ref(),
            s("--trace").as_ref(),
            p("trace.jsonl").as_os_str(),
            s("--pedal").as_ref(),
            p("pedal.jsonl").as_os_str(),
            s("--out").as_ref(),
            p(out).as_os_str(),
        ]);
        let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(summary["preview_intervals"], 1);
    }
    assert_eq!(std::fs::read(p("a.jsonl")).unwrap(), std::fs::read(p("b.jsonl")).unwrap());

    let o = ok(&[s("eval").as_ref(), s("--iterations").as_ref(), s("100").as_ref()]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["endpoints"]["passed"], true);

    let bad = Command::new(bin).args(["replay", "--trace", "/nonexistent", "--pedal", "x", "--out", "y"]).output().unwrap();
    assert!(!bad.status.success());
}
