//! CLI half of the acceptance suite: determinism of whole invocations
//! (criterion 10 end to end — byte-identical outputs for identical runs).

use std::path::Path;
use std::process::{Command, Output};

fn enwsn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enwsn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn criterion_10_cli_invocations_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    for run in ["a", "b"] {
        let gen = enwsn(
            &["synth", "--profile", "tunnel", "--days", "2", "--seed", "11", "--out", run],
            root,
        );
        assert!(gen.status.success());
        let run_dir = root.join(run);
        let sweep = enwsn(
            &[
                "sweep",
                "--topology", "topology.csv",
                "--traces", ".",
                "--out", "out",
                "--per-node",
            ],
            &run_dir,
        );
        assert!(
            sweep.status.success(),
            "{}",
            String::from_utf8_lossy(&sweep.stderr)
        );
        std::fs::write(run_dir.join("out/table.txt"), &sweep.stdout).unwrap();
        let dbp = enwsn(
            &["dbp", "--trace", "node_7.csv", "--out", "out"],
            &run_dir,
        );
        assert!(dbp.status.success());
        let sustain = enwsn(
            &[
                "sustain",
                "--topology", "topology.csv",
                "--traces", ".",
                "--config-id", "11",
                "--software", "mbs",
                "--out", "out",
            ],
            &run_dir,
        );
        assert!(sustain.status.success());
    }
    let a = root.join("a");
    let b = root.join("b");
    // the generated inputs themselves
    for id in [1u32, 7, 20, 40] {
        assert_eq!(
            read(&a, &format!("node_{id}.csv")),
            read(&b, &format!("node_{id}.csv")),
            "trace node_{id} differs between identical runs"
        );
    }
    // every produced artifact
    for name in [
        "out/table.txt",
        "out/sweep.csv",
        "out/per_node.csv",
        "out/dbp_events.csv",
        "out/sustain.csv",
        "out/sustain_series.dat",
        "out/sustain.gp",
    ] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs between identical runs");
    }
    println!("criterion 10: PASS - identical CLI invocations produced byte-identical outputs");
}
