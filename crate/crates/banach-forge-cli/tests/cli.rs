//! End-to-end command tests, including the mutation-sensitivity criterion:
//! corrupting any single matrix entry of a passing manifest must make
//! `verify` fail naming the broken structure.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_banach-forge"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_linf2(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("linf2.space");
    fs::write(
        &path,
        "space linf2 dim 2\nvertex 1 1\nvertex 1 -1\nvertex -1 1\nvertex -1 -1\n",
    )
    .unwrap();
    path
}

#[test]
fn norm_prints_canonical_value() {
    let dir = tempfile::tempdir().unwrap();
    let space = write_linf2(dir.path());
    let out = run_ok(&["norm", space.to_str().unwrap(), "1/2", "1/3"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1/2");
    let out = run_ok(&["norm", space.to_str().unwrap(), "0", "0"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0");
}

#[test]
fn norm_exit_codes_distinguish_parse_and_shape() {
    let dir = tempfile::tempdir().unwrap();
    let space = write_linf2(dir.path());
    // parse error: float literal
    let out = bin()
        .args(["norm", space.to_str().unwrap(), "0.5", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // shape error: wrong dimension
    let out = bin()
        .args(["norm", space.to_str().unwrap(), "1/2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    // parse error: malformed space file
    let bad = dir.path().join("bad.space");
    fs::write(&bad, "space s dim 2\nvertex 1\n").unwrap();
    let out = bin()
        .args(["norm", bad.to_str().unwrap(), "1", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generic_runs_are_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let run_a = dir.path().join("a");
    let run_b = dir.path().join("b");
    let flags = [
        "--steps",
        "6",
        "--budget-dim",
        "2",
        "--budget-den",
        "2",
        "--budget-vertices",
        "6",
        "--seed",
        "7",
    ];
    for out_dir in [&run_a, &run_b] {
        let mut args = vec!["generic"];
        args.extend_from_slice(&flags);
        args.extend_from_slice(&["--out", out_dir.to_str().unwrap()]);
        run_ok(&args);
    }
    let ma = fs::read(run_a.join("manifest.json")).unwrap();
    let mb = fs::read(run_b.join("manifest.json")).unwrap();
    assert_eq!(ma, mb, "same flags must produce byte-identical manifests");
    // resuming to a larger step count continues the same construction
    let mut args = vec!["generic"];
    args.extend_from_slice(&["--steps", "8", "--budget-dim", "2", "--budget-den", "2"]);
    args.extend_from_slice(&["--budget-vertices", "6", "--seed", "7"]);
    args.extend_from_slice(&["--out", run_a.to_str().unwrap()]);
    run_ok(&args);
    run_ok(&["verify", "--run", run_a.to_str().unwrap()]);
    // mismatched flags on an existing run are rejected
    let mut args = vec!["generic"];
    args.extend_from_slice(&["--steps", "9", "--budget-dim", "2", "--budget-den", "2"]);
    args.extend_from_slice(&["--budget-vertices", "6", "--seed", "8"]);
    args.extend_from_slice(&["--out", run_a.to_str().unwrap()]);
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn budget_cap_env_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("capped");
    // Cap to dimension 1, magnitude 1: the enumeration drains quickly and
    // the command reports budget exhaustion with exit code 4.
    let out = bin()
        .env("BANACH_FORGE_BUDGET_CAP", "1,1")
        .args([
            "generic",
            "--steps",
            "40",
            "--budget-dim",
            "3",
            "--budget-den",
            "2",
            "--seed",
            "1",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("budget exhausted"), "stderr: {err}");
}

#[test]
fn embed_and_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    run_ok(&[
        "generic",
        "--steps",
        "4",
        "--budget-dim",
        "2",
        "--budget-den",
        "2",
        "--seed",
        "3",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    let chain = dir.path().join("chain.txt");
    fs::write(
        &chain,
        "space stage1 dim 1\nvertex 1\nvertex -1\n\
         space stage2 dim 2\nvertex 1 1\nvertex 1 -1\nvertex -1 1\nvertex -1 -1\n\
         operator bond1.embed stage1 stage2\nrow 1\nrow 0\n\
         operator bond1.project stage2 stage1\nrow 1 0\n",
    )
    .unwrap();
    let out = run_ok(&[
        "embed",
        "--run",
        run_dir.to_str().unwrap(),
        "--chain",
        chain.to_str().unwrap(),
        "--stages",
        "2",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ladder certified"), "{stdout}");
    assert!(run_dir.join("reports/embed_2.json").exists());
    run_ok(&["verify", "--run", run_dir.to_str().unwrap()]);
}

/// Criterion 10: ten seeded single-entry corruptions each make verify fail
/// with the broken stage or condition named.
#[test]
fn criterion_10_mutation_sensitivity() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    run_ok(&[
        "generic",
        "--steps",
        "6",
        "--budget-dim",
        "2",
        "--budget-den",
        "2",
        "--seed",
        "5",
        "--out",
        clean.to_str().unwrap(),
    ]);
    run_ok(&["verify", "--run", clean.to_str().unwrap()]);

    for seed in 0..10u64 {
        let mutated = dir.path().join(format!("mut{seed}"));
        copy_dir(&clean, &mutated);
        let (file, _, _) =
            banach_forge::manifest::corrupt_one_entry(&mutated, seed).expect("corrupt");
        let out = bin()
            .args(["verify", "--run", mutated.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(5),
            "seed {seed} ({file}): verify should fail"
        );
        let stdout = String::from_utf8_lossy(&out.stdout);
        // The report must name a precise broken structure, not merely the
        // digest.
        let named = stdout.lines().any(|l| {
            l.starts_with("FAIL")
                && !l.contains("digest")
                && (l.contains("bond") || l.contains("requirement") || l.contains("stage"))
        });
        assert!(
            named,
            "seed {seed} ({file}): no named failing condition in\n{stdout}"
        );
    }
    println!("acceptance criterion 10 (mutation sensitivity, 10 seeded corruptions): PASS");
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), &target).unwrap();
        }
    }
}
