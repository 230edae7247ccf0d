use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use netar::estimate::Family;
use netar::forecast::{difference, NetworkForecastPolicy};
use netar::harness::*;
use netar::model::{InnovationSpec, ModelDocument, NarSpec, ProcessSpec, SigmaSpec};
use netar::netdyn::{NeighborhoodFn, NetworkConfig};
use netar::Error;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Compares against a stored file; `NETAR_BLESS=1` rewrites it.
fn golden(name: &str, bytes: &[u8]) {
    let path = fixture(name);
    if std::env::var_os("NETAR_BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, bytes).unwrap();
    }
    let stored = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(
        stored == bytes,
        "{} differs from the stored copy",
        path.display()
    );
}

fn schema() -> jsonschema::Validator {
    let s: serde_json::Value = serde_json::from_str(EXPERIMENT_SCHEMA).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn zero_coefficient_config(b: usize, h: usize) -> ExperimentConfig {
    let d = 3;
    let spec =
        NarSpec::with_common_g(vec![DMatrix::zeros(d, d)], NeighborhoodFn::Transpose).unwrap();
    let innov = InnovationSpec::new(
        DVector::from_vec(vec![1.0, -2.0, 0.5]),
        SigmaSpec::identity(d),
    )
    .unwrap();
    ExperimentConfig {
        id: "zero".into(),
        scenario: ScenarioConfig::Custom {
            network: NetworkConfig::Static {
                matrix: DMatrix::from_element(d, d, 1.0),
            },
            model: ModelDocument::new(ProcessSpec::Nar(spec), innov).unwrap(),
        },
        sample_sizes: vec![60],
        horizons: h,
        replicates: b,
        seed: 5,
        methods: vec![
            MethodConfig::nar(NeighborhoodFn::Transpose, NetworkForecastPolicy::Known),
            MethodConfig::var(VarMask::None),
        ],
        p_max: 2,
        burn_in: 50,
        max_failure_rate: 0.01,
        write_errors: true,
        output_dir: None,
    }
}

fn small_example1(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_path(&configs_dir().join("table1.json")).unwrap();
    cfg.sample_sizes = vec![80, 120];
    cfg.replicates = 12;
    cfg.horizons = 3;
    cfg.seed = seed;
    cfg
}

#[test]
fn shipped_configs_load_and_match_the_schema() {
    let v = schema();
    for name in ["table1.json", "example2.json", "flip.json"] {
        let text = fs::read_to_string(configs_dir().join(name)).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        let errs: Vec<String> = v.iter_errors(&json).map(|e| e.to_string()).collect();
        assert!(errs.is_empty(), "{name}: {errs:?}");
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        let back: serde_json::Value = serde_json::from_str(&cfg.to_json()).unwrap();
        assert!(v.is_valid(&back), "{name} round trip leaves the schema");
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
    let rolling: RollingConfig =
        serde_json::from_str(&fs::read_to_string(configs_dir().join("rolling.json")).unwrap())
            .unwrap();
    rolling.validate().unwrap();
}

#[test]
fn custom_scenario_round_trips_through_json() {
    let cfg = zero_coefficient_config(3, 2);
    let text = cfg.to_json();
    assert!(schema().is_valid(&serde_json::from_str(&text).unwrap()));
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = serde_json::to_value(small_example1(1)).unwrap();
    let v = schema();
    let with = |f: &dyn Fn(&mut serde_json::Value)| {
        let mut j = base.clone();
        f(&mut j);
        j
    };
    let cases = [
        with(&|j| j["replicates"] = 0.into()),
        with(&|j| j["horizons"] = 0.into()),
        with(&|j| j["methods"] = serde_json::json!([])),
        with(&|j| j["typo"] = 1.into()),
        with(&|j| j["methods"][0]["G"] = serde_json::json!([{ "kind": "k_stage", "k": 0 }])),
        with(&|j| j["methods"][4]["G"] = serde_json::json!([{ "kind": "transpose" }])),
        with(&|j| j["scenario"] = serde_json::json!({ "kind": "example2" })),
    ];
    for (i, c) in cases.iter().enumerate() {
        assert!(
            ExperimentConfig::from_json(&c.to_string()).is_err(),
            "case {i} accepted"
        );
    }
    // the first five are also caught by the schema
    for c in &cases[..5] {
        assert!(!v.is_valid(c));
    }

    let mut dup = small_example1(1);
    dup.methods.push(MethodConfig::var(VarMask::None));
    assert!(matches!(dup.validate(), Err(Error::InvalidArgument(m)) if m.contains("duplicate")));
    let mut short = small_example1(1);
    short.sample_sizes = vec![5];
    assert!(short.validate().is_err());
    let mut nar_without_g = small_example1(1);
    nar_without_g.methods[0].g.clear();
    assert!(nar_without_g.validate().is_err());
}

#[test]
fn single_replicate_report_is_its_squared_error() {
    let cfg = zero_coefficient_config(1, 1);
    let r = run_experiment(&cfg).unwrap();
    assert_eq!(r.errors.len(), 2);
    for e in &r.errors {
        let want = e.errors.iter().map(|v| v * v).sum::<f64>() / 3.0;
        let got = r.mse(60, &e.method).unwrap();
        assert_eq!(got.len(), 1);
        assert!(
            (got[0] - want).abs() <= 1e-15 * want.max(1.0),
            "{} {want}",
            got[0]
        );
    }
}

#[test]
fn same_seed_gives_byte_identical_reports() {
    let cfg = small_example1(9);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&cfg).unwrap().write(a.path()).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    single.install(|| run_experiment(&cfg).unwrap().write(b.path()).unwrap());
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(
        names
            .iter()
            .map(|n| n.to_string_lossy().into_owned())
            .collect::<Vec<_>>(),
        [
            "errors.csv",
            "mse_by_component.csv",
            "mse_table.csv",
            "orders.csv",
            "relative_mse.csv",
            "summary.json"
        ]
    );
    for n in &names {
        assert_eq!(
            fs::read(a.path().join(n)).unwrap(),
            fs::read(b.path().join(n)).unwrap(),
            "{n:?}"
        );
    }
    let other = run_experiment(&small_example1(10)).unwrap();
    assert_ne!(other.results, run_experiment(&cfg).unwrap().results);
}

#[test]
fn relative_table_rows_for_var_are_one() {
    let r = run_experiment(&small_example1(2)).unwrap();
    let text = String::from_utf8(relative_mse_table_csv(&r.results, "VAR", 3).unwrap()).unwrap();
    let mut var_rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[1] == "VAR" {
            var_rows += 1;
            assert_eq!(&f[2..], ["1", "1", "1"]);
        }
    }
    assert_eq!(var_rows, 2);
    assert_eq!(r.var_base().as_deref(), Some("VAR"));
}

#[test]
fn failure_threshold() {
    assert!(check_failures(2, 200, 0.01).is_ok());
    assert!(matches!(
        check_failures(3, 200, 0.01),
        Err(Error::TooManyFailures {
            failed: 3,
            total: 200
        })
    ));
    assert!(check_failures(0, 1, 0.0).is_ok());
    assert!(check_failures(1, 1, 1.0).is_err());

    // too few rows for a fixed VAR(5): every replicate fails
    let mut cfg = zero_coefficient_config(4, 1);
    cfg.sample_sizes = vec![8];
    cfg.methods = vec![MethodConfig {
        order: Some(5),
        ..MethodConfig::var(VarMask::None)
    }];
    assert!(matches!(
        run_experiment(&cfg),
        Err(Error::TooManyFailures {
            failed: 4,
            total: 4
        })
    ));
}

#[test]
fn stored_errors_reproduce_the_stored_tables() {
    let cfg = small_example1(4);
    let report = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();
    golden(
        "experiment/errors.csv",
        &fs::read(dir.path().join("errors.csv")).unwrap(),
    );
    golden(
        "experiment/mse_table.csv",
        &fs::read(dir.path().join("mse_table.csv")).unwrap(),
    );

    let stored = fs::File::open(fixture("experiment/errors.csv")).unwrap();
    let rebuilt = results_from_errors_csv(stored).unwrap();
    let table = fs::read_to_string(fixture("experiment/mse_table.csv")).unwrap();
    let mut rows = table.lines().skip(1);
    for r in &rebuilt {
        let row: Vec<&str> = rows.next().unwrap().split(',').collect();
        assert_eq!(
            (row[0].parse::<usize>().unwrap(), row[1]),
            (r.n, r.method.as_str())
        );
        for (want, got) in row[2..].iter().zip(r.summary.mse()) {
            let want: f64 = want.parse().unwrap();
            assert!(
                (want - got).abs() <= 1e-12 * want.abs().max(1.0),
                "{} {want} {got}",
                r.method
            );
        }
    }
    assert!(rows.next().is_none());
}

#[test]
fn three_economy_weights_by_hand() {
    let t = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 4.0, 6.0, 0.0, 1.0, 3.0, 5.0, 0.0]);
    let w = trade_weights(&t).unwrap();
    // total trade: A 2+4+6+3 = 15, B 2+6+1+5 = 14, C 4+1+3+5 = 13
    #[rustfmt::skip]
    let want = DMatrix::from_row_slice(3, 3, &[
        0.0,       8.0 / 14.0, 7.0 / 13.0,
        8.0 / 15.0, 0.0,       6.0 / 13.0,
        7.0 / 15.0, 6.0 / 14.0, 0.0,
    ]);
    assert!((w - want).amax() < 1e-15);

    let uniform = trade_weights(&DMatrix::from_fn(
        5,
        5,
        |i, j| if i == j { 0.0 } else { 3.0 },
    ))
    .unwrap();
    for i in 0..5 {
        for j in 0..5 {
            assert_eq!(uniform[(i, j)], if i == j { 0.0 } else { 0.25 });
        }
    }
}

fn write_three_economy(
    dir: &Path,
    years: std::ops::RangeInclusive<i32>,
) -> (Vec<String>, Vec<String>, DMatrix<f64>) {
    let entities: Vec<String> = ["AAA", "BBB", "CCC"].map(String::from).to_vec();
    let periods: Vec<String> = (2000..2002)
        .flat_map(|y| (1..=4).map(move |q| format!("{y}Q{q}")))
        .collect();
    let levels = DMatrix::from_fn(3, periods.len(), |r, c| 100.0 + (r * 10 + c) as f64);
    let trade: BTreeMap<i32, DMatrix<f64>> = years
        .map(|y| {
            (
                y,
                DMatrix::from_fn(3, 3, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        (y - 1999) as f64 + (i + j) as f64
                    }
                }),
            )
        })
        .collect();
    write_panel_files(dir, &entities, &periods, &levels, &trade).unwrap();
    (entities, periods, levels)
}

#[test]
fn panel_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (entities, periods, levels) = write_three_economy(dir.path(), 2000..=2001);
    let paths = PanelPaths {
        levels: dir.path().join("levels.csv"),
        trade_dir: dir.path().join("trade"),
    };
    let data = ingest_panel(&paths, &PanelOptions::default()).unwrap();
    assert_eq!(
        (
            data.entities.clone(),
            data.periods.clone(),
            data.levels.clone()
        ),
        (entities, periods, levels)
    );
    assert!(data.column_stochastic && !data.row_stochastic);
    for k in 0..4 {
        assert_eq!(data.ads.at(k), data.ads.at(0));
        assert_eq!(data.ads.at(k + 4), data.ads.at(4));
    }
    assert_ne!(data.ads.at(0), data.ads.at(4));
}

#[test]
fn panel_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_three_economy(dir.path(), 2000..=2000);
    let paths = PanelPaths {
        levels: dir.path().join("levels.csv"),
        trade_dir: dir.path().join("trade"),
    };
    let err = ingest_panel(&paths, &PanelOptions::default())
        .unwrap_err()
        .to_string();
    assert!(err.contains("2001"), "{err}");

    let entities: Vec<String> = ["AAA", "BBB", "CCC"].map(String::from).to_vec();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "from,AAA,BBB,CCC\nAAA,0,1,2\nBBB,1,0,x\nCCC,2,3,0\n").unwrap();
    let err = read_trade_matrix(&bad, &entities).unwrap_err().to_string();
    assert!(
        err.contains("bad.csv") && err.contains("BBB") && err.contains("CCC"),
        "{err}"
    );
    fs::write(&bad, "from,AAA,BBB,CCC\nAAA,0,1,2\nBBB,1,0,-4\nCCC,2,3,0\n").unwrap();
    let err = read_trade_matrix(&bad, &entities).unwrap_err().to_string();
    assert!(err.contains("negative"), "{err}");
    fs::write(&bad, "from,AAA,BBB,CCC\nAAA,0,1,2\nCCC,2,3,0\n").unwrap();
    assert!(read_trade_matrix(&bad, &entities).is_err());

    let periods: Vec<String> = ["2000Q1", "2000Q2", "2000Q4"].map(String::from).to_vec();
    let trade = BTreeMap::from([(2000, DMatrix::from_element(3, 3, 1.0))]);
    let err = assemble_panel(
        entities.clone(),
        periods,
        DMatrix::zeros(3, 3),
        &trade,
        &PanelOptions::default(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("2000Q2"));
}

#[test]
fn perfect_foresight_has_zero_level_error() {
    let (data, _) = synthetic_panel(&SyntheticPanelSpec::default(), 3, 0).unwrap();
    let growth = difference(&data.levels).unwrap();
    for t in [40, 60, data.n() - 5] {
        let truth = growth.columns(t, 4).into_owned();
        let e = level_errors(&data.levels, t, &truth).unwrap();
        assert!(e.amax() < 1e-9, "origin {t}: {}", e.amax());
    }
    assert!(level_errors(&data.levels, data.n() - 2, &DMatrix::zeros(data.d(), 4)).is_err());
}

fn rolling_cfg() -> RollingConfig {
    serde_json::from_str(&fs::read_to_string(configs_dir().join("rolling.json")).unwrap()).unwrap()
}

#[test]
fn rolling_tables_match_golden_layout() {
    let (data, trade) = synthetic_panel(&SyntheticPanelSpec::default(), 17, 0).unwrap();
    let report = run_rolling_forecast(&data, &rolling_cfg()).unwrap();
    assert_eq!(report.origins.len(), 8);
    assert_eq!(
        report.origins.last().map(String::as_str),
        Some(data.periods[data.n() - 5].as_str())
    );
    golden("rolling/squared_errors.csv", &report.squared_csv().unwrap());
    golden(
        "rolling/absolute_errors.csv",
        &report.absolute_csv().unwrap(),
    );

    // the same panel read back from files gives the same tables
    let dir = tempfile::tempdir().unwrap();
    let paths = write_panel_files(
        dir.path(),
        &data.entities,
        &data.periods,
        &data.levels,
        &trade,
    )
    .unwrap();
    let again = ingest_panel(&paths, &PanelOptions::default()).unwrap();
    assert_eq!(again.ads, data.ads);
    let r2 = run_rolling_forecast(&again, &rolling_cfg()).unwrap();
    assert_eq!(r2.squared_csv().unwrap(), report.squared_csv().unwrap());
}

#[test]
fn short_panel_is_rejected() {
    let spec = SyntheticPanelSpec {
        years: 10,
        ..SyntheticPanelSpec::default()
    };
    let (data, _) = synthetic_panel(&spec, 1, 0).unwrap();
    assert!(matches!(
        run_rolling_forecast(&data, &rolling_cfg()),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn true_model_beats_var_on_synthetic_panels() {
    let cfg = rolling_cfg();
    assert_eq!(cfg.methods[0].family, Family::Lnar);
    let spec = SyntheticPanelSpec::default();
    let wins = (0..50)
        .filter(|&i| {
            let (data, _) = synthetic_panel(&spec, 2024, i).unwrap();
            let r = run_rolling_forecast(&data, &cfg).unwrap();
            r.total_squared(0) <= r.total_squared(1)
        })
        .count();
    assert!(wins >= 40, "LNAR won {wins} of 50");
}
