use ricclift_cli::experiment::{DistanceRow, LiftedRow, Violation};
use ricclift_cli::{
    check_invariants, parse_config, render_csv, render_svg, run_contraction_experiment, DistanceTable, LiftDepth,
    RunError, RunOptions, SvgOptions, EXAMPLE_CONFIG,
};
use serde_json::{json, Value};

fn example_with(edit: impl FnOnce(&mut Value)) -> ricclift_cli::ExperimentConfig {
    let mut v: Value = serde_json::from_str(EXAMPLE_CONFIG).unwrap();
    edit(&mut v);
    parse_config(&v.to_string()).unwrap()
}

#[test]
fn example_run_writes_expected_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_config(EXAMPLE_CONFIG).unwrap();
    let report = run_contraction_experiment(&config, &RunOptions::new(dir.path())).unwrap();

    let csv = std::fs::read_to_string(&report.csv_path).unwrap();
    let (first, second) = csv.split_once("\n\n").unwrap();
    let first: Vec<_> = first.lines().collect();
    let second: Vec<_> = second.lines().collect();
    assert_eq!(first[0], "k,riemannian,two_norm");
    assert_eq!(first.len(), 22);
    assert!(first[1].starts_with("20,") && first[21].starts_with("0,"));
    assert_eq!(second[0], "t,rho_bound,observed_ratio");
    assert_eq!(second.len(), 11);
    assert!(!csv.contains('\r'));

    // every number carries 17 significant digits
    for line in first[1..].iter().chain(&second[1..]) {
        for field in line.split(',').skip(1).filter(|f| !f.is_empty()) {
            let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
        }
    }

    let svg = std::fs::read_to_string(report.svg_path.unwrap()).unwrap();
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains(r#"version="1.1""#));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("Riemannian distance") && svg.contains("2-norm distance"));
}

#[test]
fn csv_is_deterministic() {
    let config = parse_config(EXAMPLE_CONFIG).unwrap();
    let read = || {
        let dir = tempfile::tempdir().unwrap();
        let report = run_contraction_experiment(&config, &RunOptions::new(dir.path())).unwrap();
        std::fs::read(report.csv_path).unwrap()
    };
    assert_eq!(read(), read());
}

#[test]
fn riemannian_series_decreases_while_two_norm_humps() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_config(EXAMPLE_CONFIG).unwrap();
    let table = run_contraction_experiment(&config, &RunOptions::new(dir.path()))
        .unwrap()
        .table;
    let rows = &table.rows;
    assert!(rows.windows(2).all(|w| w[1].riemannian <= w[0].riemannian + 1e-9));
    assert!(
        rows[1].two_norm > 10.0 * rows[0].two_norm,
        "expected a hump right after k = T"
    );
    assert!(rows.last().unwrap().riemannian < 1e-9);
}

#[test]
fn equal_boundaries_give_zero_distances() {
    let config = example_with(|v| v["boundaries"]["y"] = json!(0.01));
    let dir = tempfile::tempdir().unwrap();
    let report = run_contraction_experiment(&config, &RunOptions::new(dir.path())).unwrap();
    for r in &report.table.rows {
        assert!(r.riemannian <= 1e-10 && r.two_norm <= 1e-10, "{r:?}");
    }
    assert!(report.table.lifted.iter().all(|r| r.observed_ratio.is_none()));
    // identical recursions: the 2-norm is exactly zero and has nothing to draw on a log axis
    assert!(report.table.rows.iter().all(|r| r.two_norm == 0.0));
    let svg = std::fs::read_to_string(report.svg_path.unwrap()).unwrap();
    assert!(svg.matches("<polyline").count() <= 1);
    assert!(!svg.contains("NaN"));
}

#[test]
fn no_svg_and_custom_names() {
    let config = example_with(|v| v["output"] = json!({ "csv": "out.csv", "svg": "plot.svg", "log_y": false }));
    let dir = tempfile::tempdir().unwrap();
    let mut opts = RunOptions::new(dir.path().join("nested"));
    opts.svg = false;
    let report = run_contraction_experiment(&config, &opts).unwrap();
    assert!(report.svg_path.is_none());
    assert!(dir.path().join("nested/out.csv").exists());
    assert!(!dir.path().join("nested/plot.svg").exists());
}

#[test]
fn explicit_depth_one_runs_with_non_strict_bounds() {
    let config = parse_config(EXAMPLE_CONFIG).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut opts = RunOptions::new(dir.path());
    opts.depth = Some(LiftDepth::Fixed(1));
    let report = run_contraction_experiment(&config, &opts).unwrap();
    assert!(!report.depth.rank.pass);
    assert_eq!(report.table.lifted.len(), 20);
    assert!(report.table.lifted.iter().all(|r| !r.strict && r.rho_bound == 1.0));
}

#[test]
fn auto_depth_exhaustion_advises_explicit_depth() {
    // B = 0 is never controllable, whatever the depth
    let config = example_with(|v| {
        v["problem"]["parametric"]["base"]["B"] = json!([[0.0], [0.0]]);
        v["problem"]["parametric"]["perturbation"]["B"] = json!([[0.0], [0.0]]);
    });
    let dir = tempfile::tempdir().unwrap();
    let err = run_contraction_experiment(&config, &RunOptions::new(dir.path())).unwrap_err();
    assert!(matches!(err, RunError::DepthSearchExhausted { d_max: 8 }), "{err}");
    assert!(err.to_string().contains("--d"));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn invariant_checker_flags_violations() {
    let row = |k, riemannian| DistanceRow {
        k,
        riemannian,
        two_norm: 0.0,
    };
    let mut table = DistanceTable {
        rows: vec![row(4, 1.0), row(3, 0.5), row(2, 0.6), row(1, 0.1), row(0, 0.05)],
        lifted: vec![
            LiftedRow {
                t: 0,
                rho_bound: 0.9,
                strict: true,
                observed_ratio: Some(0.05 / 0.6),
            },
            LiftedRow {
                t: 1,
                rho_bound: 0.4,
                strict: true,
                observed_ratio: Some(0.6),
            },
        ],
    };
    let v = check_invariants(&table, 2);
    assert_eq!(v.len(), 2, "{v:?}");
    assert!(matches!(v[0], Violation::Expansion { k: 2, .. }));
    assert!(matches!(v[1], Violation::LiftedBound { t: 1, .. }));

    table.rows[2].riemannian = 0.5 + 5e-10;
    table.lifted.pop();
    assert!(check_invariants(&table, 2).is_empty());
}

#[test]
fn svg_of_empty_table_has_axes_only() {
    for log_y in [true, false] {
        let svg = render_svg(&DistanceTable::default(), &SvgOptions { log_y });
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(r#"id="axes""#));
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert!(svg.contains(">k</text>"));
    }
}

#[test]
fn svg_linear_scale_with_both_series() {
    let table = DistanceTable {
        rows: (0..=5)
            .rev()
            .map(|k| DistanceRow {
                k,
                riemannian: k as f64,
                two_norm: 2.0 * k as f64,
            })
            .collect(),
        lifted: vec![],
    };
    let svg = render_svg(&table, &SvgOptions { log_y: false });
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(!svg.contains("NaN") && !svg.contains("inf"));
    // the legend uses line elements, not polylines
    assert_eq!(svg.matches("<line ").count(), 2);
}

#[test]
fn csv_of_single_row() {
    let table = DistanceTable {
        rows: vec![DistanceRow {
            k: 20,
            riemannian: 0.0,
            two_norm: 0.0,
        }],
        lifted: vec![],
    };
    let csv = render_csv(&table);
    assert_eq!(csv.split("\n\n").next().unwrap().lines().count(), 2);
}
