//! End-to-end exercises of the compiled binary: dataset generation, a full
//! level-1 run over loopback TCP, reveal/verify, and exit-code contracts.

use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_psa-cli");
const DEALER: &str = "6f00000000000000000000000000000000000000000000000000000000000000";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn psa-cli")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn gen(dir: &Path, n: u32, m: u32, alpha: f64, seed: u64) -> (PathBuf, PathBuf) {
    let d1 = dir.join("d1.csv");
    let d2 = dir.join("d2.csv");
    let out = run(&[
        "gen",
        "--n",
        &n.to_string(),
        "--m",
        &m.to_string(),
        "--alpha",
        &alpha.to_string(),
        "--seed",
        &seed.to_string(),
        "--out1",
        d1.to_str().unwrap(),
        "--out2",
        d2.to_str().unwrap(),
    ]);
    assert_ok(&out);
    (d1, d2)
}

fn shared_id_count(path: &Path) -> usize {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.starts_with('c'))
        .count()
}

#[test]
fn gen_controls_overlap_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2) = gen(dir.path(), 16, 12, 0.5, 9);
    assert_eq!(shared_id_count(&d1), 6);
    assert_eq!(shared_id_count(&d2), 6);
    let first = std::fs::read_to_string(&d1).unwrap();
    let (d1b, _) = gen(dir.path(), 16, 12, 0.5, 9);
    assert_eq!(first, std::fs::read_to_string(&d1b).unwrap());

    let (e1, e2) = gen(dir.path(), 10, 10, 0.0, 1);
    assert_eq!(shared_id_count(&e1) + shared_id_count(&e2), 0);
}

#[test]
fn estimate_he_matches_reference_point() {
    let out = run(&["estimate-he", "--n", "65536", "--alpha", "0.5"]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"comm_mib\":96"), "got {text}");
}

struct KillOnDrop(Child);
impl Drop for KillOnDrop {
    fn drop(&mut self) {
        let _ = self.0.kill();
    }
}

#[test]
fn level1_pipeline_reveal_verify_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2) = gen(dir.path(), 32, 24, 0.5, 42);
    let addr = "127.0.0.1:47811";
    let p1_shares = dir.path().join("p1.csv");
    let p2_shares = dir.path().join("p2.csv");
    let inter = dir.path().join("inter.txt");

    let p2 = KillOnDrop(
        Command::new(BIN)
            .args([
                "run",
                "--role",
                "p2",
                "--level",
                "1",
                "--dataset",
                d2.to_str().unwrap(),
                "--u-width",
                "8",
                "--listen",
                addr,
                "--dealer-seed",
                DEALER,
                "--shares-out",
                p2_shares.to_str().unwrap(),
            ])
            .spawn()
            .unwrap(),
    );
    let p1_out = run(&[
        "run",
        "--role",
        "p1",
        "--level",
        "1",
        "--dataset",
        d1.to_str().unwrap(),
        "--v-width",
        "8",
        "--connect",
        addr,
        "--dealer-seed",
        DEALER,
        "--shares-out",
        p1_shares.to_str().unwrap(),
        "--intersection-out",
        inter.to_str().unwrap(),
    ]);
    assert_ok(&p1_out);
    let mut p2 = p2;
    assert!(p2.0.wait().unwrap().success());

    let stats = String::from_utf8_lossy(&p1_out.stdout);
    assert!(stats.contains("\"c\":12"), "stats: {stats}");
    assert_eq!(std::fs::read_to_string(&inter).unwrap().lines().count(), 12);

    let join = dir.path().join("join.csv");
    assert_ok(&run(&[
        "reveal",
        "--shares-p1",
        p1_shares.to_str().unwrap(),
        "--shares-p2",
        p2_shares.to_str().unwrap(),
        "--out",
        join.to_str().unwrap(),
    ]));
    assert_ok(&run(&[
        "verify",
        "--join",
        join.to_str().unwrap(),
        "--dataset1",
        d1.to_str().unwrap(),
        "--dataset2",
        d2.to_str().unwrap(),
    ]));

    // Tamper with one byte of one share: verification must fail with the
    // protocol exit code.
    let mut share_text = std::fs::read_to_string(&p1_shares).unwrap();
    let pos = share_text.find("\n1,").unwrap() + 3;
    let orig = share_text.as_bytes()[pos];
    let flipped = if orig == b'0' { 'f' } else { '0' };
    share_text.replace_range(pos..pos + 1, &flipped.to_string());
    let tampered = dir.path().join("tampered.csv");
    std::fs::write(&tampered, share_text).unwrap();
    let bad_join = dir.path().join("bad.csv");
    assert_ok(&run(&[
        "reveal",
        "--shares-p1",
        tampered.to_str().unwrap(),
        "--shares-p2",
        p2_shares.to_str().unwrap(),
        "--out",
        bad_join.to_str().unwrap(),
    ]));
    let bad = run(&[
        "verify",
        "--join",
        bad_join.to_str().unwrap(),
        "--dataset1",
        d1.to_str().unwrap(),
        "--dataset2",
        d2.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));

    // Usage errors exit with code 1.
    let usage = run(&["gen", "--n", "0", "--m", "1", "--alpha", "0.5", "--out1", "/tmp/x", "--out2", "/tmp/y"]);
    assert_eq!(usage.status.code(), Some(1));
    let seed_gate = run(&[
        "run",
        "--role",
        "p1",
        "--level",
        "1",
        "--dataset",
        d1.to_str().unwrap(),
        "--v-width",
        "8",
        "--connect",
        "127.0.0.1:1",
        "--dealer-seed",
        DEALER,
        "--seed",
        DEALER,
    ]);
    assert_eq!(seed_gate.status.code(), Some(1));
    let bad_flags = run(&["run", "--role", "server", "--level", "1", "--dealer-seed", DEALER]);
    assert_eq!(bad_flags.status.code(), Some(1));
}
