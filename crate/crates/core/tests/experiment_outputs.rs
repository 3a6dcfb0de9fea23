use std::fs;
use std::path::Path;

use pursuit::experiment::{profile_from_live, strategy_from_live, Command, ExperimentSpec, StartStrategy};
use pursuit::{load_config, run_experiment, simulate, summarize, Error, RaceConfig, RiderOrder};

fn small_power_spec(dir: &Path) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(Command::OptimizePower);
    spec.orders = vec![RiderOrder::ABC, "CBA".parse().unwrap()];
    spec.repetitions = 3;
    spec.inner_budget = 150;
    spec.base_seed = 11;
    spec.output_dir = Some(dir.to_path_buf());
    spec
}

fn read_runs(dir: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(dir.join("runs.csv")).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

#[test]
fn summary_recomputes_from_runs_csv() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small_power_spec(dir.path()), &RaceConfig::default()).unwrap();
    let runs = read_runs(dir.path());
    assert_eq!(runs.len(), 6);

    let mut summary = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let headers = summary.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<_> = summary.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let label = &row[col("label")];
        let fitness: Vec<f64> = runs
            .iter()
            .filter(|r| &r[0] == label)
            .map(|r| r[5].parse().unwrap())
            .collect();
        assert_eq!(fitness.len(), 3);
        let s = summarize(&fitness).unwrap();
        assert_eq!(row[col("best_s")].parse::<f64>().unwrap(), s.best);
        assert_eq!(row[col("mean_s")].parse::<f64>().unwrap(), s.mean);
        assert_eq!(row[col("sd_s")].parse::<f64>().unwrap(), s.sd);
        assert!(s.best <= s.mean && s.sd >= 0.0);
    }
    assert_eq!(report.rows.len(), 2);
}

#[test]
fn best_run_resimulates_to_reported_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RaceConfig::default();
    let report = run_experiment(&small_power_spec(dir.path()), &cfg).unwrap();
    for row in &report.rows {
        let best = report.best_run(row);
        let again = simulate(&best.strategy, &best.profile, best.order, &cfg).unwrap();
        assert_eq!(again.total_time, row.summary.best);

        // The printed live entries carry enough precision to do the same.
        let mut summary = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
        let rec = summary
            .records()
            .map(|r| r.unwrap())
            .find(|r| r[0] == row.label)
            .unwrap();
        let hl: Vec<u32> = rec[7].split(' ').map(|x| x.parse().unwrap()).collect();
        let p: Vec<f64> = rec[8].split(' ').map(|x| x.parse().unwrap()).collect();
        let s = strategy_from_live(&hl, &cfg).unwrap();
        let prof = profile_from_live(&p, &cfg).unwrap();
        let replay = simulate(&s, &prof, best.order, &cfg).unwrap();
        assert_eq!(replay.total_time, row.summary.best);

        let trace = fs::read_to_string(dir.path().join(format!("best_trace_{}.csv", row.label))).unwrap();
        let last = trace.lines().last().unwrap();
        let t: f64 = last.split(',').next().unwrap().parse().unwrap();
        assert!((t - row.summary.best).abs() < 1e-9);
    }
}

#[test]
fn sweep_covers_requested_orders_with_full_repetitions() {
    let mut spec = small_power_spec(Path::new("unused"));
    spec.output_dir = None;
    spec.orders = vec!["BAC".parse().unwrap(), "CAB".parse().unwrap(), "BAC".parse().unwrap()];
    spec.repetitions = 2;
    spec.inner_budget = 30;
    let report = run_experiment(&spec, &RaceConfig::default()).unwrap();
    let labels: Vec<&str> = report.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["BAC", "CAB"]);
    assert!(report.rows.iter().all(|r| r.summary.n == 2));
    assert_eq!(report.runs.len(), 4);
}

#[test]
fn runs_are_reproducible_in_isolation() {
    let cfg = RaceConfig::default();
    let mut spec = ExperimentSpec::new(Command::OptimizePower);
    spec.inner_budget = 40;
    spec.repetitions = 3;
    spec.base_seed = 5;
    spec.orders = RiderOrder::all().to_vec();
    let full = run_experiment(&spec, &cfg).unwrap();

    spec.orders = vec!["CAB".parse().unwrap()];
    let single = run_experiment(&spec, &cfg).unwrap();
    let from_full: Vec<_> = full.runs.iter().filter(|r| r.label == "CAB").cloned().collect();
    assert_eq!(single.runs, from_full);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cfg = RaceConfig::default();
    for command in [
        Command::Simulate,
        Command::Baselines,
        Command::OptimizePower,
        Command::OptimizeStrategy,
    ] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut spec = ExperimentSpec::new(command);
        spec.orders = vec![RiderOrder::ABC];
        spec.repetitions = 1;
        spec.inner_budget = 40;
        spec.outer_budget = 4;
        spec.start = StartStrategy::Random;
        spec.base_seed = 77;
        for (dir, threads) in [(&a, Some(1)), (&b, Some(3))] {
            spec.output_dir = Some(dir.path().to_path_buf());
            spec.threads = threads;
            run_experiment(&spec, &cfg).unwrap();
        }
        let mut names: Vec<_> = fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(names.len() >= 4);
        for name in names {
            let x = fs::read(a.path().join(&name)).unwrap();
            let y = fs::read(b.path().join(&name)).unwrap();
            assert_eq!(x, y, "{command:?} {name:?}");
        }
    }
}

#[test]
fn config_echo_reloads_to_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RaceConfig::default();
    cfg.transition_time = 0.15;
    let mut spec = ExperimentSpec::new(Command::Simulate);
    spec.orders = vec![RiderOrder::ABC];
    spec.output_dir = Some(dir.path().to_path_buf());
    run_experiment(&spec, &cfg).unwrap();
    assert_eq!(load_config(dir.path().join("config.toml")).unwrap(), cfg);
}

#[test]
fn unwritable_output_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let mut spec = ExperimentSpec::new(Command::Baselines);
    spec.output_dir = Some(blocker.join("out"));
    let err = run_experiment(&spec, &RaceConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
}

#[test]
fn single_run_summary_has_zero_sd() {
    let mut spec = ExperimentSpec::new(Command::Simulate);
    spec.orders = vec![RiderOrder::ABC];
    let report = run_experiment(&spec, &RaceConfig::default()).unwrap();
    let s = report.rows[0].summary;
    assert_eq!((s.n, s.sd), (1, 0.0));
    assert_eq!(s.best, s.mean);
    assert!(report.render().contains("n/a"));
}
