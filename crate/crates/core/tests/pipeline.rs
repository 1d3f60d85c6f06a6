use std::collections::BTreeMap;
use std::path::Path;

use regretcast::evaluation::report::{
    ESTIMATES_FILE, FAILURES_FILE, FIG_PROFILE, FIG_MAPE, FIG_PARAMS,
    FIG_PLAUSIBILITY, FIG_SHADE, FITS_FILE, PREDICTIONS_FILE, SCORES_FILE, SUMMARY_CSV,
    SUMMARY_MD,
};
use regretcast::evaluation::Method;
use regretcast::forecast::{Mode, RuleKind};
use regretcast::pipeline::{
    cmd_prepare, cmd_report, cmd_run, cmd_simulate, simulate_and_prepare, PipelineError, RunConfig, CONFIG_ECHO_FILE,
    GROUND_TRUTH_FILE, MANIFEST_FILE, RAW_LOG_FILE,
};

fn small_config(n_bidders: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.market.n_bidders = n_bidders;
    cfg.run.jobs = 2;
    cfg
}

fn run_all(cfg: &RunConfig, dir: &Path) {
    cmd_simulate(cfg, dir).unwrap();
    cmd_prepare(cfg, dir).unwrap();
    cmd_run(cfg, dir).unwrap();
}

fn read_dir_sorted(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn full_method_matrix_writes_every_table_and_reruns_byte_identical() {
    let mut cfg = small_config(10);
    cfg.baselines.mlp_stepahead_retrain = false;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_all(&cfg, a.path());
    run_all(&cfg, b.path());

    let files = read_dir_sorted(a.path());
    for name in [
        RAW_LOG_FILE,
        GROUND_TRUTH_FILE,
        MANIFEST_FILE,
        CONFIG_ECHO_FILE,
        SCORES_FILE,
        PREDICTIONS_FILE,
        FAILURES_FILE,
        ESTIMATES_FILE,
        FITS_FILE,
        SUMMARY_CSV,
        SUMMARY_MD,
        FIG_MAPE,
        FIG_PROFILE,
        FIG_PARAMS,
        FIG_SHADE,
        FIG_PLAUSIBILITY,
    ] {
        assert!(files.contains_key(name), "missing {name}");
    }
    assert_eq!(files, read_dir_sorted(b.path()));

    let summary = String::from_utf8(files[SUMMARY_MD].clone()).unwrap();
    for m in Method::all() {
        assert!(summary.contains(m.name()), "summary lacks {m}");
    }
}

#[test]
fn report_rebuilds_identical_tables_from_records() {
    let mut cfg = small_config(6);
    cfg.run.methods = vec!["OGD".parse().unwrap(), "AR2".parse().unwrap()];
    let dir = tempfile::tempdir().unwrap();
    run_all(&cfg, dir.path());
    let before = read_dir_sorted(dir.path());
    cmd_report(&cfg, dir.path()).unwrap();
    assert_eq!(before, read_dir_sorted(dir.path()));
}

#[test]
fn ogdbias_never_trains_worse_than_ogd() {
    let mut cfg = small_config(20);
    cfg.run.methods = vec![Method::Rule(RuleKind::Ogd), Method::Rule(RuleKind::OgdBias)];
    cfg.run.modes = vec![Mode::Series];
    let (manifest, _) = simulate_and_prepare(&cfg);
    let report = regretcast::pipeline::run_manifest(&manifest, &cfg);
    let train = |m: Method| -> BTreeMap<String, f64> {
        report
            .fits
            .iter()
            .filter(|f| f.method == m)
            .map(|f| (f.bidder_id.clone(), f.train_mape))
            .collect()
    };
    let ogd = train(Method::Rule(RuleKind::Ogd));
    let bias = train(Method::Rule(RuleKind::OgdBias));
    assert_eq!(ogd.len(), manifest.series.len());
    assert_eq!(ogd.keys().collect::<Vec<_>>(), bias.keys().collect::<Vec<_>>());
    for (id, o) in &ogd {
        assert!(bias[id] <= *o, "{id}: OGDBias {} > OGD {o}", bias[id]);
    }
}

#[test]
fn shift_screen_finds_nothing_on_a_null_market() {
    // No day/night structure and memoryless bidders, so hourly bids are
    // independent given the curves. (Learners carry bid noise forward; the
    // resulting serial correlation lets a few days through the screen.)
    let mut cfg = small_config(30);
    cfg.market.diurnal_amplitude = 0.0;
    cfg.population.rules = vec![(RuleKind::Br, 1.0)];
    cfg.prepare.shift = true;
    let (manifest, _) = simulate_and_prepare(&cfg);
    assert!(!manifest.series.is_empty());
    assert!(manifest.shift_instances.is_empty(), "{} instances", manifest.shift_instances.len());
}

#[test]
fn filters_never_add_bidders() {
    let mut cfg = small_config(25);
    cfg.population.value = regretcast::simulator::Range::new(5.0, 200.0);
    let dir = tempfile::tempdir().unwrap();
    cmd_simulate(&cfg, dir.path()).unwrap();
    let m = cmd_prepare(&cfg, dir.path()).unwrap();
    assert!(m.series.len() <= cfg.market.n_bidders);
    assert_eq!(m.filter.input + m.too_short, cfg.market.n_bidders);
    assert_eq!(m.filter.kept, m.series.len());
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let cfg = small_config(5);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_simulate(&cfg, a.path()).unwrap();
    cmd_simulate(&cfg, b.path()).unwrap();
    assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()));

    let mut other = cfg.clone();
    other.set_seed(cfg.market.seed + 1);
    cmd_simulate(&other, b.path()).unwrap();
    assert_ne!(
        std::fs::read(a.path().join(RAW_LOG_FILE)).unwrap(),
        std::fs::read(b.path().join(RAW_LOG_FILE)).unwrap()
    );
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut cfg = small_config(8);
    cfg.run.methods = ["OGD", "FTRL", "RF2", "MLP2"].iter().map(|m| m.parse().unwrap()).collect();
    cfg.baselines.mlp.epochs = 5;
    let (manifest, _) = simulate_and_prepare(&cfg);
    cfg.run.jobs = 1;
    let one = regretcast::pipeline::run_manifest(&manifest, &cfg);
    cfg.run.jobs = 4;
    let four = regretcast::pipeline::run_manifest(&manifest, &cfg);
    assert_eq!(one, four);
}

#[test]
fn missing_output_directory_is_a_usage_error() {
    let cfg = small_config(2);
    let err = cmd_simulate(&cfg, Path::new("/definitely/not/here")).unwrap_err();
    assert!(matches!(err, PipelineError::MissingDir(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn malformed_raw_log_names_the_row() {
    let cfg = small_config(2);
    let dir = tempfile::tempdir().unwrap();
    cmd_simulate(&cfg, dir.path()).unwrap();
    let path = dir.path().join(RAW_LOG_FILE);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[5] = "b0001,not-an-hour,x,1.0,1.0,0.1,0.1";
    std::fs::write(&path, lines.join("\n")).unwrap();
    let err = cmd_prepare(&cfg, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("line 6"), "{err}");
}
