use polycouple::optimize::mean_work_nm;
use polycouple::sweep::{emit_csv, gnuplot_script, parse_config, run_sweep, Cell, Table};
use polycouple::EngineError;

fn config(extra: &str) -> String {
    format!(
        r#"{{
            "engine": {{"n": 2, "m": 1, "omega_a": 1.0, "x": 0.5, "beta_a": 0.5, "y": 10.0}},
            "coupling": {{"mode": "alpha", "value": 0.4}}{extra}
        }}"#
    )
}

fn schema_path(doc: &str) -> String {
    match parse_config(doc) {
        Err(EngineError::Schema { path, .. }) => path,
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn one_by_one_table_is_two_lines() {
    let table = Table {
        header: vec!["mean_w".into()],
        rows: vec![vec![Cell::Num(0.25)]],
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    emit_csv(&table, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "mean_w\n2.5000000000000000e-1\n");
    assert!(!text.contains('\r'));
}

#[test]
fn empty_table_is_refused_without_a_file() {
    let table = Table {
        header: vec!["mean_w".into()],
        rows: vec![],
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    assert!(emit_csv(&table, &path).is_err());
    assert!(!path.exists());
}

#[test]
fn text_cells_are_quoted() {
    let table = Table {
        header: vec!["error".into()],
        rows: vec![vec![Cell::Text("a, \"b\"".into())]],
    };
    assert_eq!(table.to_csv_string().unwrap(), "error\n\"a, \"\"b\"\"\"\n");
}

#[test]
fn zero_coupling_point_gives_zero_work_and_nan_snr() {
    let cfg = parse_config(
        r#"{
            "engine": {"n": 1, "m": 1, "omega_a": 1.0, "omega_b": 0.5, "beta_a": 0.5, "beta_b": 10.0},
            "coupling": {"mode": "theta", "value": 0.0},
            "methods": ["pert2", "oracle"],
            "outputs": ["mean_w", "second_w", "var_w", "mean_qh", "mean_qc", "sigma", "snr"]
        }"#,
    )
    .unwrap();
    let table = run_sweep(&cfg, 1);
    assert_eq!(table.rows.len(), 2);
    for col in ["mean_w", "second_w", "var_w", "mean_qh", "mean_qc", "sigma"] {
        for v in table.numeric_column(col).unwrap() {
            assert_eq!(v, 0.0, "{col}");
        }
    }
    let csv = table.to_csv_string().unwrap();
    let snr = table.column_index("snr").unwrap();
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').nth(snr).unwrap(), "nan");
    }
}

#[test]
fn minimal_document_defaults_to_pert2() {
    let cfg = parse_config(&config("")).unwrap();
    let table = run_sweep(&cfg, 1);
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.header[0], "method");
    assert_eq!(table.rows[0][0], Cell::Text("pert2".into()));
    assert_eq!(table.header.last().unwrap(), "error");
}

#[test]
fn rows_are_axis_major_then_method() {
    let cfg = parse_config(&config(
        r#", "axes": [{"parameter": "beta_a", "values": [0.5, 1.0]}, {"parameter": "alpha", "values": [0.1, 0.2, 0.3]}],
            "methods": ["pert2", "pert4"]"#,
    ))
    .unwrap();
    let table = run_sweep(&cfg, 3);
    assert_eq!(table.rows.len(), 12);
    let keys: Vec<(String, String, String)> = table
        .rows
        .iter()
        .map(|r| (r[0].to_string(), r[1].to_string(), r[2].to_string()))
        .collect();
    assert_eq!(keys[0].0, keys[5].0);
    assert_ne!(keys[0].0, keys[6].0);
    assert_eq!(keys[0].1, keys[1].1);
    assert_eq!(keys[0].2, "pert2");
    assert_eq!(keys[1].2, "pert4");
    assert_ne!(keys[1].1, keys[2].1);
}

#[test]
fn distribution_columns_expand_rows() {
    let cfg = parse_config(&config(r#", "methods": ["pert2", "pert4"], "outputs": ["k", "probability"]"#)).unwrap();
    let table = run_sweep(&cfg, 1);
    assert_eq!(table.rows.len(), 3 + 5);
    let p = table.numeric_column("probability").unwrap();
    assert!((p[..3].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((p[3..].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(table.numeric_column("k").unwrap()[..3], [-1.0, 0.0, 1.0]);
}

#[test]
fn oracle_failures_are_recorded_not_fatal() {
    let cfg = parse_config(&config(
        r#", "axes": [{"parameter": "beta_a", "values": [0.001, 0.5]}],
            "methods": ["oracle"], "oracle": {"dims_cap": 64}"#,
    ))
    .unwrap();
    let table = run_sweep(&cfg, 1);
    let err = table.column_index("error").unwrap();
    assert!(table.rows[0][err].to_string().contains("cap 64"));
    assert!(table.numeric_column("mean_w").unwrap()[0].is_nan());
    assert_eq!(table.rows[1][err].to_string(), "");
    assert!(table.numeric_column("mean_w").unwrap()[1] > 0.0);
}

#[test]
fn coupling_bound_theta_grid() {
    let cfg = parse_config(
        r#"{
            "engine": {"n": 1, "m": 1, "omega_a": 1.0, "omega_b": 1.0, "beta_a": 0.1, "beta_b": 10.0},
            "coupling": {"mode": "theta", "value": 0.0},
            "axes": [{"parameter": "m", "min": 1, "max": 10, "points": 10},
                     {"parameter": "n", "min": 1, "max": 10, "points": 10}],
            "outputs": ["theta_bar_2"]
        }"#,
    )
    .unwrap();
    let table = run_sweep(&cfg, 4);
    let bars = table.numeric_column("theta_bar_2").unwrap();
    for row in bars.chunks(10) {
        assert!(row.windows(2).all(|w| w[1] < w[0]));
    }
    assert_eq!(table.rows[0][0], Cell::Int(1));
}

#[test]
fn discrete_x_axis_parses() {
    let cfg = parse_config(&config(
        r#", "axes": [{"parameter": "x", "values": [0.1, 0.3333333333333333, 0.5, 0.6666666666666666, 1.0, 1.5]},
                     {"parameter": "beta_a", "min": 0.01, "max": 10, "points": 50, "scale": "log"}],
            "methods": ["pert4"], "outputs": ["delta", "snr", "regime"]"#,
    ))
    .unwrap();
    assert_eq!(cfg.axes[0].values.len(), 6);
    assert_eq!(run_sweep(&cfg, 2).rows.len(), 300);
}

#[test]
fn shg_beats_swap_below_the_swap_window() {
    let cfg = parse_config(
        r#"{
            "engine": {"n": 1, "m": 2, "omega_a": 1.0, "x": 0.006666666666666667, "beta_a": 0.1, "y": 100.0},
            "coupling": {"mode": "alpha", "value": 0.5},
            "axes": [{"parameter": "omega_a", "min": 0.1, "max": 100, "points": 40, "scale": "log"}],
            "methods": ["pert2", "pert4"],
            "outputs": ["mean_w", "swap_mean_w"]
        }"#,
    )
    .unwrap();
    let table = run_sweep(&cfg, 1);
    let w = table.numeric_column("mean_w").unwrap();
    let swap = table.numeric_column("swap_mean_w").unwrap();
    for (a, b) in w.iter().zip(&swap) {
        assert!(a > b && *b <= 0.0);
    }
}

#[test]
fn continuous_xmax_axis_uses_second_order_closed_form() {
    let cfg = parse_config(
        r#"{
            "engine": {"n": 1, "m": 1, "omega_a": 1.0, "x": 0.2, "beta_a": 0.1, "y": 20.0},
            "coupling": {"mode": "alpha", "value": 0.5},
            "axes": [{"parameter": "x_max", "min": 0.25, "max": 3.75, "points": 15}],
            "methods": ["pert2", "pert4"],
            "outputs": ["mean_w"]
        }"#,
    )
    .unwrap();
    let table = run_sweep(&cfg, 1);
    let xm = table.numeric_column("x_max").unwrap();
    let w = table.numeric_column("mean_w").unwrap();
    let err = table.column_index("error").unwrap();
    for (i, row) in table.rows.iter().enumerate() {
        if row[1] == Cell::Text("pert2".into()) {
            let expected = mean_work_nm(0.5, 1.0, 0.1, 0.2, 20.0, xm[i], 1.0);
            assert!((w[i] - expected).abs() < 1e-14 * expected.abs().max(1.0));
        } else if xm[i].fract() != 0.0 {
            assert!(!row[err].to_string().is_empty());
        }
    }
}

#[test]
fn jobs_do_not_change_bytes() {
    let cfg = parse_config(&config(
        r#", "axes": [{"parameter": "alpha", "min": 0.05, "max": 0.35, "points": 4},
                     {"parameter": "y", "min": 2, "max": 20, "points": 3, "scale": "log"}],
            "methods": ["pert2", "pert4", "oracle"],
            "outputs": ["mean_w", "var_w", "snr", "rf", "eta", "theta_bar_4", "rf_sigma", "fourth_bound", "dim_a"]"#,
    ))
    .unwrap();
    let one = run_sweep(&cfg, 1).to_csv_string().unwrap();
    for jobs in [2, 8] {
        assert_eq!(run_sweep(&cfg, jobs).to_csv_string().unwrap(), one);
    }
}

#[test]
fn gnuplot_script_references_columns() {
    let cfg = parse_config(&config(r#", "axes": [{"parameter": "alpha", "values": [0.1, 0.2]}]"#)).unwrap();
    let table = run_sweep(&cfg, 1);
    let script = gnuplot_script(&table, "out.csv", "alpha", &["mean_w", "snr"]).unwrap();
    assert!(script.contains("set datafile separator ','"));
    assert!(script.contains("'out.csv' using 1:3"));
    assert!(gnuplot_script(&table, "out.csv", "alpha", &["nope"]).is_err());
}

#[test]
fn schema_errors_carry_paths() {
    assert_eq!(schema_path(&config(r#", "colour": 1"#)), "colour");
    assert_eq!(
        schema_path(&config(r#", "axes": [{"parameter": "alpha", "min": 0.1, "max": 0.2, "points": 1}]"#)),
        "axes[0].points"
    );
    assert_eq!(
        schema_path(&config(r#", "axes": [{"parameter": "alpha", "min": 0.1, "max": 0.2, "points": 3, "step": 1}]"#)),
        "axes[0].step"
    );
    assert_eq!(
        schema_path(&config(r#", "axes": [{"parameter": "gamma", "min": 0.1, "max": 0.2, "points": 3}]"#)),
        "axes[0].parameter"
    );
    assert_eq!(schema_path(&config(r#", "outputs": ["mean_w", "power"]"#)), "outputs[1]");
    assert_eq!(schema_path(&config(r#", "methods": ["pert3"]"#)), "methods[0]");
    assert_eq!(schema_path(&config(r#", "oracle": {"dims_cap": 2}"#)), "oracle");
    let three = r#", "axes": [{"parameter": "alpha", "values": [0.1, 0.2]}, {"parameter": "x", "values": [0.1, 0.2]}, {"parameter": "y", "values": [2, 3]}]"#;
    assert_eq!(schema_path(&config(three)), "axes");
    assert_eq!(
        schema_path(&config(r#", "axes": [{"parameter": "m", "values": [1, 1.5]}]"#)),
        "axes[0]"
    );
    let order = config("").replace(r#""value": 0.4"#, r#""value": 0.4, "order": 3"#);
    assert_eq!(schema_path(&order), "coupling.order");
    let both = config("").replace(r#""x": 0.5"#, r#""x": 0.5, "omega_b": 0.5"#);
    assert_eq!(schema_path(&both), "engine");
}

#[test]
fn unphysical_base_point_is_a_domain_error() {
    let doc = config("").replace(r#""beta_a": 0.5"#, r#""beta_a": -0.5"#);
    let err = parse_config(&doc).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}
