use kcq::dynamics::QoISpec;
use kcq::measurement::MeasurementModel;
use kcq::pipeline::{
    database_digest, load_database, offline_generate, store_database, RunConfig, SystemSelector,
};
use kcq::Error;

fn small_config(out_dir: Option<std::path::PathBuf>) -> RunConfig {
    let disp = QoISpec::displacement_dof(0);
    let vel = QoISpec::velocity_dof(0);
    RunConfig {
        system: SystemSelector::Sdof,
        n: 40,
        halton_seed: 42,
        probe_seed: 7,
        n_probe: 4000,
        dt: 0.05,
        n_steps: 20,
        tol: 1e-10,
        max_iter: 50,
        qois: vec![disp, vel],
        sensors: MeasurementModel::zero_mean(vec![vel], vec![0.03]).unwrap(),
        n_k: 2,
        grid_points: 400,
        max_failure_fraction: 0.001,
        out_dir,
    }
}

#[test]
fn store_load_round_trip_is_bitwise() {
    let db = offline_generate(&small_config(None)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    store_database(&db, dir.path()).unwrap();
    let loaded = load_database(dir.path()).unwrap();
    assert_eq!(db.sample_set.samples, loaded.sample_set.samples);
    assert_eq!(db.sample_set.weights, loaded.sample_set.weights);
    assert_eq!(db.times, loaded.times);
    for (a, b) in db.qoi_channels.iter().zip(&loaded.qoi_channels) {
        assert_eq!(a.spec, b.spec);
        assert_eq!(a.values, b.values);
    }
    for (a, b) in db.sensor_channels.iter().zip(&loaded.sensor_channels) {
        assert_eq!(a.values, b.values);
    }
    assert_eq!(db.provenance, loaded.provenance);
}

#[test]
fn truncated_file_is_reported_as_corruption() {
    let db = offline_generate(&small_config(None)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    store_database(&db, dir.path()).unwrap();
    let target = dir.path().join("qoi_0");
    let body = std::fs::read_to_string(&target).unwrap();
    std::fs::write(&target, &body[..body.len() / 2]).unwrap();
    assert!(matches!(
        load_database(dir.path()),
        Err(Error::Corruption(_))
    ));
}

#[test]
fn schema_version_mismatch_names_both_versions() {
    let db = offline_generate(&small_config(None)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    store_database(&db, dir.path()).unwrap();
    let meta_path = dir.path().join("meta");
    let meta = std::fs::read_to_string(&meta_path).unwrap();
    std::fs::write(&meta_path, meta.replace("schema_version=1", "schema_version=2")).unwrap();
    match load_database(dir.path()) {
        Err(Error::SchemaVersion { found, expected }) => {
            assert_eq!(found, 2);
            assert_eq!(expected, 1);
        }
        other => panic!("expected schema error, got {other:?}"),
    }
}

#[test]
fn interrupted_run_resumes_to_an_identical_database() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    offline_generate(&small_config(Some(dir_a.path().into()))).unwrap();

    // Simulate an interruption: keep only half the journal, then rerun.
    offline_generate(&small_config(Some(dir_b.path().into()))).unwrap();
    for i in 20..40 {
        std::fs::remove_file(dir_b.path().join("journal").join(format!("sample_{i}"))).unwrap();
    }
    for name in ["meta", "times", "samples", "weights", "qoi_0", "qoi_1", "sensor_0"] {
        std::fs::remove_file(dir_b.path().join(name)).unwrap();
    }
    offline_generate(&small_config(Some(dir_b.path().into()))).unwrap();

    assert_eq!(
        database_digest(dir_a.path()).unwrap(),
        database_digest(dir_b.path()).unwrap()
    );
}

#[test]
fn full_scale_database_shape() {
    let mut config = small_config(None);
    config.n = 500;
    config.n_steps = 200;
    config.n_probe = 50_000;
    let db = offline_generate(&config).unwrap();
    assert_eq!(db.n(), 500);
    assert_eq!(db.times.len(), 201);
    for c in db.qoi_channels.iter().chain(&db.sensor_channels) {
        assert_eq!(c.values.nrows(), 500);
        assert_eq!(c.values.ncols(), 201);
    }
}

#[test]
fn online_quantify_with_huge_noise_matches_nonconditional() {
    use kcq::estimators::nonconditional_stats;
    use kcq::measurement::simulate_measurements;

    let config = small_config(None);
    let db = offline_generate(&config).unwrap();
    let (system, _) = config.system.build().unwrap();
    let truth = kcq::dynamics::integrate(
        &system,
        &[0.05, -0.1],
        &nalgebra::DVector::zeros(2),
        config.dt,
        config.n_steps,
        config.tol,
        config.max_iter,
    )
    .unwrap();
    let huge_noise =
        MeasurementModel::zero_mean(vec![QoISpec::velocity_dof(0)], vec![1e6]).unwrap();
    let meas = simulate_measurements(&truth, &huge_noise, &system, 3).unwrap();
    let qoi = QoISpec::displacement_dof(0);
    let results = kcq::pipeline::online_quantify(&db, &meas, &qoi, &[20], 2, 400).unwrap();
    let baseline = nonconditional_stats(&db, &qoi, 20, 400).unwrap();
    let r = &results[0];
    assert!((r.mean - baseline.mean).abs() <= 1e-6 * baseline.mean.abs());
    assert!((r.sd - baseline.sd).abs() <= 1e-6 * baseline.sd);
}
