//! End-to-end CLI behavior through the real binary.

use std::path::Path;
use std::process::{Command, Output};

fn enwsn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enwsn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes a small chain layout plus constant traces and returns the dir.
fn chain_setup(dir: &Path) {
    std::fs::write(
        dir.join("topology.csv"),
        "# sink=0\n# comm_range_m=15\n# interference_range_m=30\nnode_id,x,y\n0,0,0\n1,10,0\n2,20,0\n",
    )
    .unwrap();
    std::fs::create_dir_all(dir.join("traces")).unwrap();
    for id in [1u32, 2] {
        let mut csv = String::from("t,v\n");
        for i in 0..64 {
            csv.push_str(&format!("{},{}\n", i * 30, 120));
        }
        std::fs::write(dir.join("traces").join(format!("node_{id}.csv")), csv).unwrap();
    }
}

#[test]
fn dbp_prints_stats_for_a_constant_trace() {
    let tmp = tempfile::tempdir().unwrap();
    chain_setup(tmp.path());
    let out = enwsn(
        &["dbp", "--trace", "traces/node_1.csv", "--out", "out"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("samples=64 transmissions=1"), "{text}");
    assert!(text.contains("suppression=0.984375"), "{text}");
    let events = std::fs::read_to_string(tmp.path().join("out/dbp_events.csv")).unwrap();
    assert!(events.starts_with("t,slope,anchor_t,anchor_v\n"));
    assert!(events.contains("# transmissions=1"));
}

#[test]
fn missing_input_exits_two_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let out = enwsn(&["dbp", "--trace", "nope.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no such input"), "{}", stderr(&out));
}

#[test]
fn malformed_trace_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.csv"), "t,v\n0,1\n0,2\n").unwrap();
    let out = enwsn(&["dbp", "--trace", "bad.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("duplicate timestamp"));
}

#[test]
fn sweep_emits_table_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    chain_setup(tmp.path());
    let out = enwsn(
        &[
            "sweep",
            "--topology",
            "topology.csv",
            "--traces",
            "traces",
            "--out",
            "out",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let table = stdout(&out);
    assert!(table.contains("no-DBP [uW]"));
    assert!(table.contains("ID 18 DBP infeasible: no data retention"), "{table}");
    let csv = std::fs::read_to_string(tmp.path().join("out/sweep.csv")).unwrap();
    assert!(csv.starts_with("id,mcu,radio,wakeup,software,avg_uw,ratio,status\n"));
    assert_eq!(csv.lines().count(), 1 + 23 * 3);
    // baseline ratio renders as exactly 1
    let baseline = csv
        .lines()
        .find(|l| l.starts_with("1,Standby,LPM1,none,no-DBP"))
        .unwrap();
    assert!(baseline.contains(",1.00000,ok"), "{baseline}");
}

#[test]
fn sweep_only_id_filters_rows() {
    let tmp = tempfile::tempdir().unwrap();
    chain_setup(tmp.path());
    let out = enwsn(
        &[
            "sweep",
            "--topology",
            "topology.csv",
            "--traces",
            "traces",
            "--only-id",
            "11",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let table = stdout(&out);
    let rows: Vec<&str> = table
        .lines()
        .filter(|l| !l.starts_with('#') && !l.contains("MCU"))
        .collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].trim_start().starts_with("11"));
}

#[test]
fn sweep_with_every_cell_infeasible_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    chain_setup(tmp.path());
    let out = enwsn(
        &[
            "sweep",
            "--topology",
            "topology.csv",
            "--traces",
            "traces",
            "--only-id",
            "23",
            "--modes",
            "dbp",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("infeasible"));
}

#[test]
fn sweep_respects_catalog_override() {
    let tmp = tempfile::tempdir().unwrap();
    chain_setup(tmp.path());
    // an absurdly hot sleep mode should inflate every WuR-row floor
    std::fs::write(tmp.path().join("hot.catalog"), "mcu.sleep_w = 1e-3\n").unwrap();
    let base = enwsn(
        &["sweep", "--topology", "topology.csv", "--traces", "traces", "--only-id", "11"],
        tmp.path(),
    );
    let hot = enwsn(
        &[
            "sweep",
            "--catalog",
            "hot.catalog",
            "--topology",
            "topology.csv",
            "--traces",
            "traces",
            "--only-id",
            "11",
        ],
        tmp.path(),
    );
    assert!(base.status.success() && hot.status.success());
    assert_ne!(stdout(&base), stdout(&hot));
}

#[test]
fn sustain_zero_light_means_nobody_is_neutral() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("topology.csv"),
        "# sink=0\n# comm_range_m=15\nnode_id,x,y\n0,0,0\n1,10,0\n",
    )
    .unwrap();
    std::fs::create_dir_all(tmp.path().join("traces")).unwrap();
    let mut csv = String::from("t,v\n");
    for i in 0..64 {
        csv.push_str(&format!("{},0\n", i * 30));
    }
    std::fs::write(tmp.path().join("traces/node_1.csv"), csv).unwrap();
    let out = enwsn(
        &["sustain", "--topology", "topology.csv", "--traces", "traces"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("1,"), "{text}");
    assert!(text.contains(",false,unattainable"), "{text}");
    assert!(text.contains("# total_cells=unattainable"));
}

#[test]
fn sustain_refuses_infeasible_selection_with_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    chain_setup(tmp.path());
    let out = enwsn(
        &[
            "sustain",
            "--topology",
            "topology.csv",
            "--traces",
            "traces",
            "--config-id",
            "23",
            "--software",
            "dbp",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no data retention"));
}

#[test]
fn sustain_outputs_parse_back_through_the_library() {
    let tmp = tempfile::tempdir().unwrap();
    chain_setup(tmp.path());
    let out = enwsn(
        &[
            "sustain",
            "--topology",
            "topology.csv",
            "--traces",
            "traces",
            "--out",
            "out",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["sustain.csv", "sustain_series.dat", "sustain.gp"] {
        assert!(tmp.path().join("out").join(name).exists(), "{name} missing");
    }
    // the trace the synth writes parses back with our own parser; so must
    // the series file as whitespace rows
    let series = std::fs::read_to_string(tmp.path().join("out/sustain_series.dat")).unwrap();
    for line in series.lines().filter(|l| !l.starts_with('#')) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields.len(), 3);
        fields[1].parse::<f64>().unwrap();
        fields[2].parse::<f64>().unwrap();
    }
}

#[test]
fn synth_single_trace_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = enwsn(
        &[
            "synth", "--days", "1", "--base", "200", "--amplitude", "50", "--sigma", "2",
            "--steps-per-day", "1", "--step-magnitude", "30", "--seed", "9",
            "--out", "trace.csv",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2880);
    let reparse = enwsn(&["dbp", "--trace", "trace.csv"], tmp.path());
    assert!(reparse.status.success());
}

#[test]
fn synth_tunnel_profile_writes_the_whole_network() {
    let tmp = tempfile::tempdir().unwrap();
    let out = enwsn(
        &["synth", "--profile", "tunnel", "--days", "1", "--seed", "3", "--out", "net"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let files = std::fs::read_dir(tmp.path().join("net")).unwrap().count();
    assert_eq!(files, 41); // 40 traces + topology.csv
}

#[test]
fn topo_reports_chain_depth() {
    let tmp = tempfile::tempdir().unwrap();
    chain_setup(tmp.path());
    let out = enwsn(&["topo", "--topology", "topology.csv"], tmp.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("max_depth=2"), "{text}");
    assert!(text.contains("2,2,1,0"), "{text}"); // node 2: depth 2, parent 1, leaf
}

#[test]
fn topo_reports_tunnel_fixture_depth_fifteen() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = enwsn(
        &["synth", "--profile", "tunnel", "--days", "1", "--seed", "1", "--out", "net"],
        tmp.path(),
    );
    assert!(gen.status.success());
    let out = enwsn(&["topo", "--topology", "net/topology.csv"], tmp.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("max_depth=15"));
}

#[test]
fn calibration_maps_raw_readings_before_prediction() {
    let tmp = tempfile::tempdir().unwrap();
    // raw counts 0..63 hold one flat segment under a squashing calibration
    let mut csv = String::from("t,v\n");
    for i in 0..64 {
        csv.push_str(&format!("{},{}\n", i * 30, i));
    }
    std::fs::write(tmp.path().join("raw.csv"), csv).unwrap();
    std::fs::write(tmp.path().join("cal.csv"), "raw,value\n0,0\n1000,10\n").unwrap();
    let out = enwsn(
        &["dbp", "--trace", "raw.csv", "--calibration", "cal.csv"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    // calibrated values span 0..0.63 lux: one model suffices
    assert!(stdout(&out).contains("transmissions=1"), "{}", stdout(&out));
    // without calibration the 0..63 ramp still fits one linear model, but
    // a broken calibration file must be rejected
    std::fs::write(tmp.path().join("bad_cal.csv"), "raw,value\n5,1\n").unwrap();
    let bad = enwsn(
        &["dbp", "--trace", "raw.csv", "--calibration", "bad_cal.csv"],
        tmp.path(),
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn catalog_env_var_is_the_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    chain_setup(tmp.path());
    std::fs::write(tmp.path().join("hot.catalog"), "mcu.sleep_w = 1e-3\n").unwrap();
    let base = enwsn(
        &["sweep", "--topology", "topology.csv", "--traces", "traces", "--only-id", "11"],
        tmp.path(),
    );
    let via_env = Command::new(env!("CARGO_BIN_EXE_enwsn"))
        .args(["sweep", "--topology", "topology.csv", "--traces", "traces", "--only-id", "11"])
        .env("ENWSN_CATALOG", tmp.path().join("hot.catalog"))
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(base.status.success() && via_env.status.success());
    assert_ne!(stdout(&base), stdout(&via_env));
    // a missing env-referenced file is an input error
    let missing = Command::new(env!("CARGO_BIN_EXE_enwsn"))
        .args(["sweep", "--topology", "topology.csv", "--traces", "traces"])
        .env("ENWSN_CATALOG", tmp.path().join("absent.catalog"))
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn bad_dbp_flag_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    chain_setup(tmp.path());
    let out = enwsn(
        &["dbp", "--trace", "traces/node_1.csv", "--dbp", "m=4,l=9"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}
