use std::path::Path;
use std::process::{Command, Output};

use mifs_core::importance::{Criterion, ImportanceTable};
use mifs_core::Dataset;

fn mifs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mifs"))
        .args(args)
        .env_remove("MIFS_OUT")
        .env_remove("MIFS_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = mifs(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn code(args: &[&str]) -> i32 {
    mifs(args).status.code().unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn small_dataset(dir: &Path) -> String {
    let ds = dir.join("ds");
    ok(&["--out", &s(&ds), "synth", "--samples", "16"]);
    s(&ds.join("manifest.json"))
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = mifs(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(code(&["rank", "--bogus"]), 2);
}

#[test]
fn rank_writes_a_valid_table() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let out = dir.path().join("r");
    ok(&["--out", &s(&out), "rank", "--criterion", "mi", "--manifest", &manifest, "--task", "2"]);
    let table = ImportanceTable::read(&out.join("importance_mi_t2.json")).unwrap();
    assert_eq!(table.criterion, Criterion::Mi);
    assert_eq!(table.task_id, Some(2));
    assert_eq!(table.ordering.len(), 32);
    let csv = std::fs::read_to_string(out.join("importance_mi_t2.csv")).unwrap();
    assert!(csv.starts_with("rank,channel_id,score\n"));
    assert_eq!(csv.lines().count(), 33);
}

#[test]
fn json_format_writes_json_reports() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let out = dir.path().join("e");
    ok(&["--out", &s(&out), "--format", "json", "estimate-mi", "--manifest", &manifest, "--tasks", "0"]);
    let text = std::fs::read_to_string(out.join("mi_estimates.json")).unwrap();
    let rows: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 32);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let out = s(&dir.path().join("x"));
    assert_eq!(code(&["--out", &out, "rank", "--manifest", "/nonexistent/m.json"]), 4);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"version\": 1}").unwrap();
    assert_eq!(code(&["--out", &out, "rank", "--manifest", &s(&bad)]), 5);

    let junk = dir.path().join("junk.ften");
    std::fs::write(&junk, b"NOPE").unwrap();
    let table = dir.path().join("r");
    ok(&["--out", &s(&table), "rank", "--criterion", "l2", "--manifest", &manifest]);
    let ranking = s(&table.join("importance_l2.json"));
    assert_eq!(code(&["--out", &out, "select-hard", "--input", &s(&junk), "--ranking", &ranking]), 5);

    assert_eq!(
        code(&["--out", &out, "select-soft", "--input", &manifest, "--ranking", &ranking, "--qp", "60"]),
        3
    );
    assert_eq!(
        code(&["--out", &out, "select-hard", "--input", &manifest, "--ranking", &ranking, "--keep", "1.5"]),
        3
    );
    assert_eq!(
        code(&[
            "--out", &out, "select-soft", "--input", &manifest, "--ranking", &ranking,
            "--codec-cmd", "exit 1", "--codec-decode-cmd", "exit 1",
        ]),
        6
    );
}

#[test]
fn hard_selection_manifest_is_loadable_and_zeroes_dropped_channels() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let r = dir.path().join("r");
    ok(&["--out", &s(&r), "rank", "--manifest", &manifest, "--task", "0"]);
    let ranking = r.join("importance_mi_t0.json");
    let out = dir.path().join("h");
    ok(&["--out", &s(&out), "select-hard", "--input", &manifest, "--ranking", &s(&ranking), "--keep", "0.5"]);
    let derived = Dataset::open(&out.join("hard_c16/manifest.json")).unwrap();
    let source = Dataset::open(Path::new(&manifest)).unwrap();
    assert_eq!(derived.outputs, source.outputs);
    let table = ImportanceTable::read(&ranking).unwrap();
    for (d, o) in derived.features.iter().zip(&source.features) {
        for (rank, &id) in table.ordering.iter().enumerate() {
            let c = id as usize;
            if rank < 16 {
                assert_eq!(d.channel(c), o.channel(c));
            } else {
                assert!(d.channel(c).iter().all(|&v| v == 0.0));
            }
        }
    }
}

#[test]
fn external_copy_codec_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let r = dir.path().join("r");
    ok(&["--out", &s(&r), "rank", "--criterion", "l1", "--manifest", &manifest]);
    let ranking = s(&r.join("importance_l1.json"));
    let config = dir.path().join("codec.json");
    std::fs::write(&config, r#"{"encode": "cp {input} {output}", "decode": "cp {input} {output}"}"#).unwrap();
    let soft = dir.path().join("soft");
    ok(&[
        "--out", &s(&soft), "select-soft", "--input", &manifest, "--ranking", &ranking, "--qp", "30",
        "--codec-config", &s(&config),
    ]);
    let index = s(&soft.join("soft_c16_qp30/payloads.json"));
    // The payload records an external stream; decoding it needs the codec again.
    assert_eq!(code(&["--out", &s(&dir.path().join("x")), "reconstruct", "--input", &index]), 3);
    let rec = dir.path().join("rec");
    ok(&["--out", &s(&rec), "reconstruct", "--input", &index, "--codec-config", &s(&config)]);
    let back = Dataset::open(&rec.join("manifest.json")).unwrap();
    let source = Dataset::open(Path::new(&manifest)).unwrap();
    for (b, o) in back.features.iter().zip(&source.features) {
        for c in 0..32 {
            let plane = o.channel(c);
            let lo = plane.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = plane.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let bound = (hi - lo) / 510.0 + f32::EPSILON * lo.abs().max(hi.abs());
            for (x, y) in b.channel(c).iter().zip(plane) {
                assert!((x - y).abs() <= bound);
            }
        }
    }
}

#[test]
fn replay_of_a_replay_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    ok(&["--out", &s(&a), "synth", "--samples", "4"]);
    let b = dir.path().join("b");
    ok(&["--out", &s(&b), "replay", "--run", &s(&a.join("run.json"))]);
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("run.json")).unwrap()).unwrap();
    assert_eq!(record["command"]["subcommand"], "synth");
    let fake = dir.path().join("fake.json");
    std::fs::write(
        &fake,
        format!(
            r#"{{"tool":"mifs","version":"0","seed":0,"format":"csv","command":{{"subcommand":"replay","run":"{}"}}}}"#,
            s(&a.join("run.json"))
        ),
    )
    .unwrap();
    assert_eq!(code(&["--out", &s(&dir.path().join("c")), "replay", "--run", &s(&fake)]), 3);
}

#[test]
fn seed_changes_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["--out", &s(&a), "synth", "--samples", "2"]);
    ok(&["--out", &s(&b), "--seed", "8", "synth", "--samples", "2"]);
    let f = "features/s00000.ften";
    assert_ne!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
}

#[test]
fn distortion_and_sweep_from_a_hand_written_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("acc.csv");
    std::fs::write(
        &table,
        "task_id,metric,direction,criterion,keep_count,qp,accuracy\n\
         0,proxy,higher-better,full,,,100\n\
         0,proxy,higher-better,mi,2,,90\n\
         0,proxy,higher-better,l2,2,,80\n\
         1,proxy,higher-better,full,,,100\n\
         1,proxy,higher-better,mi,2,,70\n\
         1,proxy,higher-better,l2,2,,95\n",
    )
    .unwrap();
    let out = dir.path().join("d");
    ok(&["--out", &s(&out), "distortion", "--accuracy", &s(&table), "--keep-count", "2", "--weights", "0.5,0.5"]);
    let text = std::fs::read_to_string(out.join("distortion.csv")).unwrap();
    assert!(text.contains("mi,total,1,0.2\n"), "{text}");
    assert!(text.contains("l2,total,1,0.125\n"), "{text}");
    assert_eq!(
        code(&["--out", &s(&out), "distortion", "--accuracy", &s(&table), "--keep-count", "2", "--weights", "0.5,0.6"]),
        3
    );
    let sw = dir.path().join("s");
    ok(&["--out", &s(&sw), "sweep-simplex", "--accuracy", &s(&table), "--keep-count", "2", "--resolution", "4"]);
    let map = std::fs::read_to_string(sw.join("winner_map.csv")).unwrap();
    assert_eq!(map.lines().count(), 6);
    // D_mi = (0.1, 0.3), D_l2 = (0.2, 0.05): mi wins only when w1 > 5/7.
    assert!(map.lines().nth(5).unwrap().contains(",mi,"), "{map}");
    assert!(map.lines().nth(1).unwrap().contains(",l2,"), "{map}");
}
