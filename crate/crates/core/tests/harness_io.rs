use gfdmcr::harness::{self, parse_grid, ExperimentConfig, QnMode, Scenario};
use gfdmcr::Error;

fn config_error(text: &str) -> bool {
    matches!(ExperimentConfig::parse(text), Err(Error::Config(_)))
}

#[test]
fn bad_configs_are_config_errors() {
    assert!(config_error("no_such_key = 1"));
    assert!(config_error("seed = 1\nseed = 2"));
    assert!(config_error("subcarriers"));
    assert!(config_error("subcarriers = 0"));
    assert!(config_error("rolloff = nan"));
    assert!(config_error("q_grid_dbm = 0:-1:10"));
    assert!(config_error("qn = sometimes"));
    assert!(config_error("filter = gaussian"));
    assert!(matches!(ExperimentConfig::from_file("/nonexistent/x.conf".as_ref()), Err(Error::Config(_))));
}

#[test]
fn comments_blank_lines_and_case() {
    let cfg = ExperimentConfig::parse("# header\n\n  SEED = 42   # trailing\nqn = table\nq_grid_dbm = -5:5:5\n").unwrap();
    assert_eq!(cfg.seed, 42);
    assert_eq!(cfg.qn, QnMode::Table);
    assert_eq!(cfg.q_grid_dbm, vec![-5.0, 0.0, 5.0]);
}

#[test]
fn grids() {
    assert_eq!(parse_grid("1, 2.5,4").unwrap(), vec![1.0, 2.5, 4.0]);
    assert_eq!(parse_grid("3").unwrap(), vec![3.0]);
    let g = parse_grid("0.01:0.01:0.5").unwrap();
    assert_eq!(g.len(), 50);
    assert_eq!(g[49], 0.01 + 0.01 * 49.0);
    assert!(parse_grid("1:2").is_err());
}

#[test]
fn shipped_configs_parse() {
    for name in ["reference.conf", "quick.conf"] {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        cfg.validate().unwrap();
    }
    let reference = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.conf");
    assert_eq!(ExperimentConfig::from_file(&reference).unwrap().hash(), ExperimentConfig::default().hash());
}

#[test]
fn outputs_are_csv_with_a_manifest() {
    let cfg = ExperimentConfig::parse("psd_frames = 4\npsd_nfft = 4096\ncompare_subsymbols = none\nseed = 3").unwrap();
    let out = harness::run(Scenario::Psd, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = out.write(dir.path(), &cfg).unwrap();
    assert!(files.iter().any(|f| f.ends_with("manifest.txt")));
    for t in &out.tables {
        let text = std::fs::read_to_string(dir.path().join(format!("{}.csv", t.name))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), t.columns.join(","));
        assert_eq!(lines.count(), t.rows.len());
    }
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains(&cfg.hash()));
    assert!(manifest.contains("seed"));
}

#[test]
fn seed_changes_results() {
    let text = "psd_frames = 4\npsd_nfft = 4096\ncompare_subsymbols = none\n";
    let a = ExperimentConfig::parse(&format!("{text}seed = 1")).unwrap();
    let b = ExperimentConfig::parse(&format!("{text}seed = 2")).unwrap();
    let ta = harness::run(Scenario::Psd, &a).unwrap();
    let tb = harness::run(Scenario::Psd, &b).unwrap();
    assert_ne!(ta.tables[0].to_csv_string(), tb.tables[0].to_csv_string());
    assert_eq!(ta.tables[0].to_csv_string(), harness::run(Scenario::Psd, &a).unwrap().tables[0].to_csv_string());
}
