//! The command-line tool end to end: synth, segment, eval, ablate and
//! export-ply, plus exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pointprompt::io::labels::read_labels;
use pointprompt::io::ply::{label_color, read_ply};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pointprompt"))
        .args(args)
        .env_remove("SP3D_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_segment_eval_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let out = dir.path().join("out");
    let masks = dir.path().join("masks");
    let prompts = dir.path().join("prompts");
    let said = ok(&[
        "synth",
        "--scene",
        "room-8",
        "--frames",
        "4",
        "--out",
        p(&scene),
    ]);
    assert!(said.contains("4 frames"), "{said}");
    for f in [
        "cloud.ply",
        "gt.labels.bin",
        "scene.json",
        "frames/intrinsics.txt",
        "frames/0.pose.txt",
        "frames/3.inst.bin",
    ] {
        assert!(scene.join(f).is_file(), "{f}");
    }

    let said = ok(&[
        "--threads",
        "2",
        "segment",
        "--scene",
        p(&scene),
        "--out",
        p(&out),
        "--export-masks",
        p(&masks),
        "--export-prompts",
        p(&prompts),
    ]);
    assert!(said.contains("instances"), "{said}");
    assert!(masks.join("masks.json").is_file());
    assert!(prompts.join("0.prompts.json").is_file());

    let report = dir.path().join("report.json");
    let said = ok(&[
        "eval",
        "--pred",
        p(&out.join("labels.bin")),
        "--gt",
        p(&scene.join("gt.labels.bin")),
        "--report",
        p(&report),
    ]);
    assert!(said.contains("AP50 1.0000"), "{said}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["ap50"], 1.0);
    ok(&[
        "eval",
        "--pred",
        p(&out.join("labels.bin")),
        "--gt",
        p(&scene.join("gt.labels.bin")),
        "--grouped",
    ]);

    // Replaying the archive reproduces the labels byte for byte.
    let replay = dir.path().join("replay");
    ok(&[
        "segment",
        "--scene",
        p(&scene),
        "--out",
        p(&replay),
        "--provider",
        "file",
        "--masks",
        p(&masks),
    ]);
    assert_eq!(
        fs::read(out.join("labels.bin")).unwrap(),
        fs::read(replay.join("labels.bin")).unwrap()
    );

    let ply = dir.path().join("labeled.ply");
    ok(&[
        "export-ply",
        "--cloud",
        p(&scene),
        "--labels",
        p(&out.join("labels.bin")),
        "--out",
        p(&ply),
        "--ascii",
    ]);
    assert!(fs::read_to_string(&ply)
        .unwrap()
        .starts_with("ply\nformat ascii 1.0"));
    let colored = read_ply(&ply).unwrap();
    let labels = read_labels(&out.join("labels.bin")).unwrap();
    assert_eq!(colored.len(), labels.len());
    let colors = colored.colors().unwrap();
    assert!(labels
        .iter()
        .zip(colors)
        .all(|(&l, c)| label_color(l) == *c));
}

#[test]
fn noisy_flags_and_ablation() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    ok(&[
        "synth",
        "--scene",
        "room-8",
        "--frames",
        "3",
        "--out",
        p(&scene),
    ]);
    let noisy = [
        "--provider",
        "oracle-noisy",
        "--noise-radius",
        "1",
        "--noise-jitter",
        "10",
        "--spill-prob",
        "0.2",
        "--noise-seed",
        "4",
    ];
    let mut labels = Vec::new();
    for scope in ["prompt", "record"] {
        let out = dir.path().join(scope);
        let mut args = vec![
            "segment",
            "--scene",
            p(&scene),
            "--out",
            p(&out),
            "--jitter-scope",
            scope,
        ];
        args.extend(noisy);
        ok(&args);
        let run: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
        assert_eq!(run["noise_seed"], 4);
        assert_eq!(run["config"]["provider"]["noise"]["jitter_scope"], scope);
        labels.push(fs::read(out.join("labels.bin")).unwrap());
    }
    assert_eq!(labels.len(), 2);

    let csv = dir.path().join("grid.csv");
    let table = ok(&[
        "ablate",
        "--scene",
        p(&scene),
        "--sweep",
        "off=none,selection,consolidation",
        "--sweep",
        "theta_retain=0.5",
        "--csv",
        p(&csv),
    ]);
    assert_eq!(table.lines().count(), 4, "{table}");
    assert_eq!(fs::read_to_string(&csv).unwrap(), table);
    assert!(table.lines().nth(1).unwrap().starts_with("full "));
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    // Configuration errors.
    assert_eq!(
        code(&["synth", "--scene", "atlantis", "--out", p(&missing)]),
        2
    );
    assert_eq!(
        code(&[
            "synth",
            "--scene",
            "room-8",
            "--frames",
            "0",
            "--out",
            p(&missing)
        ]),
        2
    );
    // Unreadable input.
    assert_eq!(
        code(&[
            "segment",
            "--scene",
            p(&missing),
            "--out",
            p(&dir.path().join("o"))
        ]),
        3
    );
    assert_eq!(
        code(&["eval", "--pred", p(&missing), "--gt", p(&missing)]),
        3
    );

    let scene = dir.path().join("scene");
    ok(&[
        "synth",
        "--scene",
        "room-8",
        "--frames",
        "2",
        "--out",
        p(&scene),
    ]);
    assert_eq!(
        code(&[
            "segment",
            "--scene",
            p(&scene),
            "--out",
            p(&missing),
            "--prompt-ratio",
            "0"
        ]),
        2
    );
    assert_eq!(
        code(&["ablate", "--scene", p(&scene), "--sweep", "bogus"]),
        2
    );
    // An archive without the requested frames is a provider failure.
    let masks = dir.path().join("masks");
    ok(&[
        "segment",
        "--scene",
        p(&scene),
        "--out",
        p(&dir.path().join("a")),
        "--frame-stride",
        "2",
        "--export-masks",
        p(&masks),
    ]);
    assert_eq!(
        code(&[
            "segment",
            "--scene",
            p(&scene),
            "--out",
            p(&missing),
            "--provider",
            "file",
            "--masks",
            p(&masks)
        ]),
        4
    );
    // Clap usage errors.
    assert_eq!(code(&["segment"]), 2);
}
