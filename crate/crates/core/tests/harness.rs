use swkrr::harness::config::Axis;
use swkrr::harness::report::csv_string;
use swkrr::harness::{build_dataset, evaluate_method, run_experiment, ExperimentConfig, GmmTaskConfig, Grids, Method, TaskConfig};

fn small() -> ExperimentConfig {
    let mut task = GmmTaskConfig::new(30, 20, 3, 2);
    task.val = 15;
    task.test = 15;
    ExperimentConfig {
        task: TaskConfig::GmmModes(task),
        methods: vec![Method::Mmd, Method::Sw2, Method::Sw1],
        directions: 16,
        levels: 16,
        repeats: 2,
        seed: 11,
        grids: Grids {
            lambda: Axis::new(1e-6, 1.0, 5),
            mmd_inner_gamma: Axis::new(1e-2, 1.0, 3),
            mmd_outer_gamma: Axis::new(1e-2, 10.0, 3),
            sw_gamma: Axis::new(1e-3, 1.0, 4),
            ..Grids::default()
        },
        out: None,
    }
}

fn strip_timing(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn reruns_are_identical() {
    let cfg = small();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.len(), 6);
    assert_eq!(strip_timing(&csv_string(&a).unwrap()), strip_timing(&csv_string(&b).unwrap()));
}

#[test]
fn seed_changes_data() {
    let mut cfg = small();
    cfg.repeats = 1;
    let a = run_experiment(&cfg).unwrap();
    cfg.seed += 1;
    let b = run_experiment(&cfg).unwrap();
    assert_ne!(strip_timing(&csv_string(&a).unwrap()), strip_timing(&csv_string(&b).unwrap()));
}

#[test]
fn test_split_does_not_influence_selection() {
    let cfg = small();
    let data = build_dataset(&cfg, None, 0).unwrap();
    let mut tampered = data.clone();
    for l in &mut tampered.test.labels {
        *l = 100;
    }
    tampered.test.measures.reverse();
    for method in [Method::Mmd, Method::Sw2] {
        let a = evaluate_method(method, &data, &cfg.grids, 0).unwrap();
        let b = evaluate_method(method, &tampered, &cfg.grids, 0).unwrap();
        assert_eq!((a.lambda, a.gamma, a.inner_gamma, a.val_score), (b.lambda, b.gamma, b.inner_gamma, b.val_score));
        assert_ne!(a.test_score, b.test_score);
    }
}

#[test]
fn report_written_to_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.repeats = 1;
    cfg.methods = vec![Method::Sw2];
    cfg.out = Some(dir.path().join("nested"));
    run_experiment(&cfg).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("nested/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("nested/summary.md").exists());
}
