//! End-to-end tests of the command-line interface: subcommand plumbing,
//! file outputs, determinism at the process level, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn siamsa(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_siamsa"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary must run")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn full_workflow_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write(
        &root.join("zoom.spec"),
        "name = cli_zoom\nframes = 5\nwidth = 160\nheight = 120\n\
         object = 60,44,36,30\narea_growth = 5\n",
    );
    write(
        &root.join("still.spec"),
        "name = cli_still\nframes = 4\nwidth = 160\nheight = 120\nobject = 70,50,30,26\n",
    );
    write(&root.join("tracker.cfg"), "seed = 21\n");

    let out = siamsa(
        &[
            "synth",
            "--spec",
            "zoom.spec",
            "--out",
            "data",
            "--seed",
            "5",
        ],
        root,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("SV"),
        "zoom sequence must carry the SV tag: {stdout}"
    );
    let out = siamsa(
        &[
            "synth",
            "--spec",
            "still.spec",
            "--out",
            "data",
            "--seed",
            "6",
        ],
        root,
    );
    assert!(out.status.success());

    // Dataset layout on disk.
    assert!(root.join("data/cli_zoom/img/0001.png").is_file());
    assert!(root.join("data/cli_zoom/groundtruth_rect.txt").is_file());
    assert!(root.join("data/cli_zoom/attributes.txt").is_file());

    for (results, workers) in [("r1", "1"), ("r2", "1"), ("r4", "4")] {
        let out = siamsa(
            &[
                "track",
                "--dataset",
                "data",
                "--out",
                results,
                "--config",
                "tracker.cfg",
                "--workers",
                workers,
            ],
            root,
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    // Result files are byte-identical across reruns and worker counts.
    for seq in ["cli_zoom", "cli_still"] {
        let a = std::fs::read(root.join("r1").join(format!("{seq}.txt"))).unwrap();
        let b = std::fs::read(root.join("r2").join(format!("{seq}.txt"))).unwrap();
        let c = std::fs::read(root.join("r4").join(format!("{seq}.txt"))).unwrap();
        assert_eq!(a, b, "{seq}: rerun changed bytes");
        assert_eq!(a, c, "{seq}: worker count changed bytes");
        // First line is the init box from the ground truth.
        let gt = std::fs::read_to_string(root.join("data").join(seq).join("groundtruth_rect.txt"))
            .unwrap();
        let first_pred = String::from_utf8(a).unwrap();
        assert_eq!(
            first_pred.lines().next().unwrap(),
            gt.lines().next().unwrap(),
            "{seq}: one-pass evaluation must start from the ground truth"
        );
    }

    for (results, report) in [("r1", "rep1.txt"), ("r2", "rep2.txt")] {
        let out = siamsa(
            &[
                "eval",
                "--dataset",
                "data",
                "--results",
                results,
                "--report",
                report,
            ],
            root,
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let rep1 = std::fs::read(root.join("rep1.txt")).unwrap();
    let rep2 = std::fs::read(root.join("rep2.txt")).unwrap();
    assert_eq!(rep1, rep2, "reports must be byte-identical");
    assert!(root.join("rep1.txt.success.csv").is_file());
    assert!(root.join("rep1.txt.np.csv").is_file());
    assert!(root.join("rep1.txt.sv.csv").is_file());

    let out = siamsa(
        &[
            "report",
            "--report",
            "rep1.txt",
            "--attribute-plots",
            "--sv-histogram",
        ],
        root,
    );
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("success AUC"));
    assert!(text.contains("SV"));
    assert!(text.contains("|log2 R| histogram"));
}

#[test]
fn ablation_flags_change_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write(
        &root.join("s.spec"),
        "name = flagseq\nframes = 4\nwidth = 160\nheight = 120\nobject = 62,44,36,30\n",
    );
    write(&root.join("tracker.cfg"), "seed = 33\n");
    assert!(
        siamsa(&["synth", "--spec", "s.spec", "--out", "data"], root)
            .status
            .success()
    );
    assert!(siamsa(
        &[
            "track",
            "--dataset",
            "data",
            "--out",
            "full",
            "--config",
            "tracker.cfg"
        ],
        root
    )
    .status
    .success());
    assert!(siamsa(
        &[
            "track",
            "--dataset",
            "data",
            "--out",
            "bare",
            "--config",
            "tracker.cfg",
            "--disable-psan",
            "--disable-sa-apn",
        ],
        root
    )
    .status
    .success());
    let full = std::fs::read(root.join("full/flagseq.txt")).unwrap();
    let bare = std::fs::read(root.join("bare/flagseq.txt")).unwrap();
    assert_ne!(full, bare, "flags must alter the pipeline output");
}

#[test]
fn weights_files_round_trip_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write(
        &root.join("s.spec"),
        "name = wseq\nframes = 3\nwidth = 160\nheight = 120\nobject = 62,44,36,30\n",
    );
    write(&root.join("tracker.cfg"), "seed = 12\n");
    assert!(
        siamsa(&["synth", "--spec", "s.spec", "--out", "data"], root)
            .status
            .success()
    );
    // First run saves the seeded bank; second run reloads it and must agree.
    assert!(siamsa(
        &[
            "track",
            "--dataset",
            "data",
            "--out",
            "a",
            "--config",
            "tracker.cfg",
            "--save-weights",
            "w.txt",
        ],
        root
    )
    .status
    .success());
    assert!(root.join("w.txt").is_file());
    assert!(siamsa(
        &[
            "track",
            "--dataset",
            "data",
            "--out",
            "b",
            "--config",
            "tracker.cfg",
            "--weights",
            "w.txt",
        ],
        root
    )
    .status
    .success());
    let a = std::fs::read(root.join("a/wseq.txt")).unwrap();
    let b = std::fs::read(root.join("b/wseq.txt")).unwrap();
    assert_eq!(a, b, "a reloaded weights file must reproduce the run");
}

#[test]
fn exit_codes_reflect_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // Invalid input: missing dataset.
    write(&root.join("tracker.cfg"), "seed = 1\n");
    let out = siamsa(
        &[
            "track",
            "--dataset",
            "nope",
            "--out",
            "o",
            "--config",
            "tracker.cfg",
        ],
        root,
    );
    assert_eq!(out.status.code(), Some(1));

    // Invalid input: malformed config.
    std::fs::create_dir_all(root.join("data")).unwrap();
    write(&root.join("bad.cfg"), "window_influence = 3.0\n");
    let out = siamsa(
        &[
            "track",
            "--dataset",
            "data",
            "--out",
            "o",
            "--config",
            "bad.cfg",
        ],
        root,
    );
    assert_eq!(out.status.code(), Some(1));

    // Invalid usage: unknown flag.
    let out = siamsa(&["track", "--bogus"], root);
    assert_eq!(out.status.code(), Some(1));

    // Help and version succeed.
    assert_eq!(siamsa(&["--help"], root).status.code(), Some(0));
    assert_eq!(siamsa(&["--version"], root).status.code(), Some(0));

    // Selftest succeeds.
    let out = siamsa(&["selftest"], root);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("all checks passed"));
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write(
        &root.join("s.spec"),
        "name = seedseq\nframes = 3\nwidth = 160\nheight = 120\nobject = 62,44,36,30\n",
    );
    write(&root.join("tracker.cfg"), "seed = 1\n");
    assert!(
        siamsa(&["synth", "--spec", "s.spec", "--out", "data"], root)
            .status
            .success()
    );
    for (out_dir, seed) in [("s1", "50"), ("s2", "50"), ("s3", "51")] {
        assert!(siamsa(
            &[
                "track",
                "--dataset",
                "data",
                "--out",
                out_dir,
                "--config",
                "tracker.cfg",
                "--seed",
                seed,
            ],
            root
        )
        .status
        .success());
    }
    let a = std::fs::read(root.join("s1/seedseq.txt")).unwrap();
    let b = std::fs::read(root.join("s2/seedseq.txt")).unwrap();
    let c = std::fs::read(root.join("s3/seedseq.txt")).unwrap();
    assert_eq!(a, b);
    assert_ne!(
        a, c,
        "different seeds must change the weights and the output"
    );
    // The meta file records the effective seed.
    let meta = std::fs::read_to_string(root.join("s1/run_meta.txt")).unwrap();
    assert!(meta.contains("seed = 50"));
}
