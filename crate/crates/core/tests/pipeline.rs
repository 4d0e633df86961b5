use std::fs;

use onquench::config::ModelConfig;
use onquench::evolve::QuenchModel;
use onquench::pipeline::{run, ExperimentPlan, PlanKind, RunManifest};
use onquench::store::TrajectoryCache;

fn tiny(delta: f64) -> ModelConfig {
    let mut c = ModelConfig::desk().with_delta(delta);
    c.n_k = 400;
    c.n_s = 12;
    c.n_tot = 96;
    c.n_par = 6;
    c.t_end = 3.0;
    c.checkpoint_times = vec![0.0, 1.0, 2.0, 3.0];
    c
}

fn plan(kind: PlanKind, delta: f64) -> ExperimentPlan {
    let mut p = ExperimentPlan::new(kind, tiny(delta));
    p.n_s_list = vec![6, 12];
    p
}

#[test]
fn repeated_runs_produce_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cache = TrajectoryCache::new(dir.path().join("cache"));
    let p = plan(PlanKind::EntropyScan, -1.0);
    let a = run(&p, &dir.path().join("a"), &cache).unwrap();
    let b = run(&p, &dir.path().join("b"), &cache).unwrap();
    assert_eq!(a.manifest.content_hash, b.manifest.content_hash);
    assert_eq!(a.manifest.artifacts, b.manifest.artifacts);
    for art in &a.manifest.artifacts {
        let x = fs::read(dir.path().join("a").join(&art.path)).unwrap();
        let y = fs::read(dir.path().join("b").join(&art.path)).unwrap();
        assert_eq!(x, y, "{}", art.path);
    }
}

#[test]
fn manifest_detects_modified_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cache = TrajectoryCache::new(dir.path().join("cache"));
    let out = dir.path().join("out");
    let outcome = run(&plan(PlanKind::Evolve, -1.0), &out, &cache).unwrap();
    let loaded = RunManifest::load(&out).unwrap();
    assert_eq!(loaded, outcome.manifest);
    assert!(loaded.artifacts.iter().any(|a| a.path == "r_eff.csv"));

    let table = out.join("r_eff.csv");
    let mut text = fs::read_to_string(&table).unwrap();
    text.push_str("99,0\n");
    fs::write(&table, text).unwrap();
    let err = RunManifest::load(&out).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn manifest_requires_its_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cache = TrajectoryCache::new(dir.path().join("cache"));
    let out = dir.path().join("out");
    let outcome = run(&plan(PlanKind::EntropyScan, -1.0), &out, &cache).unwrap();
    assert!(!outcome.manifest.checkpoints.is_empty());
    fs::remove_file(&outcome.manifest.checkpoints[0]).unwrap();
    assert!(RunManifest::load(&out).is_err());
}

#[test]
fn cache_is_reused_and_keyed_by_dynamics() {
    let dir = tempfile::tempdir().unwrap();
    let cache = TrajectoryCache::new(dir.path());
    let cfg = tiny(-1.0);
    let first = cache.run(&cfg, &[1.0, 3.0]).unwrap();
    assert!(first.steps_integrated > 0);
    let again = cache.run(&cfg, &[1.0, 3.0]).unwrap();
    assert_eq!(again.steps_integrated, 0);
    for (x, y) in first.states.iter().zip(&again.states) {
        assert_eq!(x.f, y.f);
        assert_eq!(x.fdot, y.fdot);
    }

    // Sampling-only changes share the trajectory; dynamics changes do not.
    let mut wider = cfg.clone();
    wider.n_s = 20;
    assert_eq!(cache.run_dir(&wider), cache.run_dir(&cfg));
    let other = tiny(-2.0);
    assert_ne!(cache.run_dir(&other), cache.run_dir(&cfg));
    assert!(cache.run(&other, &[3.0]).unwrap().steps_integrated > 0);
}

#[test]
fn extending_a_cached_run_matches_a_direct_integration() {
    let dir = tempfile::tempdir().unwrap();
    let cache = TrajectoryCache::new(dir.path());
    let mut short = tiny(-1.0);
    short.t_end = 1.5;
    short.checkpoint_times.retain(|&t| t <= 1.5);
    cache.run(&short, &[1.5]).unwrap();
    let long = tiny(-1.0);
    let resumed = cache.run(&long, &[3.0]).unwrap();
    assert!(resumed.steps_integrated < long.n_steps());

    let direct = QuenchModel::new(long).unwrap().evolve(&[3.0]).unwrap();
    assert_eq!(resumed.states[0].f, direct.checkpoints[0].f);
    assert_eq!(resumed.states[0].fdot, direct.checkpoints[0].fdot);
    assert_eq!(resumed.states[0].r_eff, direct.checkpoints[0].r_eff);
}

#[test]
fn plans_round_trip_and_reject_unknown_fields() {
    let mut p = plan(PlanKind::Dispersion, -1.0);
    p.fit_window = Some((1e-3, 0.1));
    let text = serde_json::to_string(&p).unwrap();
    let back: ExperimentPlan = serde_json::from_str(&text).unwrap();
    assert_eq!(back, p);
    assert!(text.contains("\"dispersion\""));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["seed"] = serde_json::json!(7);
    assert!(serde_json::from_value::<ExperimentPlan>(v).is_err());
}

#[test]
fn invalid_plans_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cache = TrajectoryCache::new(dir.path().join("cache"));
    let mut p = plan(PlanKind::EntropyScan, -1.0);
    p.n_s_list = vec![500];
    let out = dir.path().join("out");
    let err = run(&p, &out, &cache).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.join("manifest.json").exists());

    let mut p = plan(PlanKind::DeltaScan, -1.0);
    p.deltas.clear();
    assert!(run(&p, &out, &cache).is_err());
}
