use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use zeroflood::raster::{read_binary_raster, write_binary_raster, GeoTransform, RasterGrid};

fn zeroflood(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeroflood")).args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = zeroflood(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn fixture(grid: &str, extra: &[&str]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["synth", "--out", ".", "--grid", grid];
    args.extend_from_slice(extra);
    ok(&args, dir.path());
    dir
}

/// Pixel-scan per fixture tile followed by a direct reading of the selection rule.
fn oracle_keys(dir: &Path, grid: usize, tile: usize) -> Vec<String> {
    let fsm = read_binary_raster(dir.join("fsm.zfr")).unwrap();
    let codes = fsm.as_categorical().unwrap();
    let side = grid * tile;
    let mut cells = vec![];
    for gy in 0..grid {
        for gx in 0..grid {
            let (mut flood, mut water) = (0u64, 0u64);
            for r in gy * tile..(gy + 1) * tile {
                for c in gx * tile..(gx + 1) * tile {
                    match codes[r * side + c] {
                        1 => flood += 1,
                        2 => water += 1,
                        _ => {}
                    }
                }
            }
            cells.push((format!("S{gy:02}{gx:02}"), flood, water));
        }
    }
    cells.retain(|&(_, f, w)| f >= 1 && w >= 1);
    if cells.is_empty() {
        return vec![];
    }
    let q1 = |pick: fn(&(String, u64, u64)) -> u64| {
        let mut v: Vec<u64> = cells.iter().map(pick).collect();
        v.sort_unstable();
        let pos = (v.len() - 1) as f64 / 4.0;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(v.len() - 1);
        v[lo] as f64 + (pos - lo as f64) * (v[hi] as f64 - v[lo] as f64)
    };
    let (qf, qw) = (q1(|c| c.1), q1(|c| c.2));
    cells
        .into_iter()
        .filter(|(_, f, w)| !(*f as f64 <= qf && *w as f64 <= qw))
        .filter(|(_, f, w)| (0.1..=1.0).contains(&(*w as f64 / *f as f64)))
        .map(|c| c.0)
        .collect()
}

#[test]
fn select_matches_pixel_scan_oracle() {
    for seed in ["7", "8", "9"] {
        let dir = fixture("6", &["--seed", seed]);
        ok(&["select", "-c", "pipeline.cfg"], dir.path());
        let sel = json(dir.path().join("out/selection.json"));
        let keys: Vec<String> = sel["keys"].as_array().unwrap().iter().map(|k| k.as_str().unwrap().to_owned()).collect();
        assert_eq!(keys, oracle_keys(dir.path(), 6, 32), "seed {seed}");
        assert!(dir.path().join("out/zonal_stats.json").exists());
    }
}

#[test]
fn dry_fixture_exits_with_empty_selection() {
    let dir = fixture("3", &["--dry"]);
    let out = zeroflood(&["select", "-c", "pipeline.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let sel = json(dir.path().join("out/selection.json"));
    assert_eq!(sel["keys"].as_array().unwrap().len(), 0);
    assert_eq!(sel["report"]["stage1_removed"], 9);
    assert_eq!(zeroflood(&["split", "-c", "pipeline.cfg"], dir.path()).status.code(), Some(2));
}

#[test]
fn missing_inputs_fail_cleanly() {
    let dir = fixture("2", &[]);
    std::fs::remove_file(dir.path().join("fsm.zfr")).unwrap();
    let out = zeroflood(&["select", "-c", "pipeline.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fsm_raster"), "{err}");

    let out = zeroflood(&["select", "-c", "nope.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(zeroflood(&["frobnicate"], dir.path()).status.code(), Some(1));
}

#[test]
fn malformed_inputs_do_not_crash() {
    let dir = fixture("4", &[]);
    let p = dir.path();
    std::fs::write(p.join("bad.cfg"), "paths.fsm_raster = fsm.zfr\npaths.fsm_raster = again\n").unwrap();
    std::fs::write(p.join("garbage.cfg"), [0xffu8, 0x00, 0x13, 0x37]).unwrap();
    std::fs::write(p.join("broken.zfm"), b"ZFM1 not really").unwrap();
    for args in [
        vec!["select", "-c", "bad.cfg"],
        vec!["select", "-c", "garbage.cfg"],
        vec!["split", "-c", "pipeline.cfg", "--counts", "1,x,3"],
        vec!["split", "-c", "pipeline.cfg", "--selection", "fsm.zfr"],
        vec!["train", "-c", "pipeline.cfg", "--tim", "radar"],
        vec!["eval", "-c", "pipeline.cfg", "--checkpoint", "broken.zfm"],
        vec!["render", "-c", "pipeline.cfg", "--input", "samples.csv", "--out", "x.pgm"],
    ] {
        let out = zeroflood(&args, p);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with("zeroflood: error:"), "{args:?}: {err}");
        assert!(!err.contains("panicked"), "{args:?}: {err}");
    }
}

#[test]
fn split_defaults_seed_and_count_override() {
    let dir = fixture("8", &[]);
    let p = dir.path();
    ok(&["select", "-c", "pipeline.cfg"], p);
    let n = json(p.join("out/selection.json"))["keys"].as_array().unwrap().len();
    assert!(n >= 10, "fixture selected only {n} cells");

    ok(&["split", "-c", "pipeline.cfg"], p);
    let first = std::fs::read(p.join("out/manifest.json")).unwrap();
    ok(&["split", "-c", "pipeline.cfg"], p);
    assert_eq!(first, std::fs::read(p.join("out/manifest.json")).unwrap());
    let m: Value = serde_json::from_slice(&first).unwrap();
    let (val, test) = (n / 5, n / 5);
    assert_eq!(m["counts"]["train"], n - val - test);
    assert_eq!(m["counts"]["val"], val);
    assert_eq!(m["counts"]["test"], test);

    ok(&["split", "-c", "pipeline.cfg", "--seed", "12"], p);
    assert_ne!(first, std::fs::read(p.join("out/manifest.json")).unwrap());

    let counts = format!("{},3,1", n - 4);
    ok(&["split", "-c", "pipeline.cfg", "--counts", &counts], p);
    let m = json(p.join("out/manifest.json"));
    assert_eq!((m["counts"]["val"].as_u64(), m["counts"]["test"].as_u64()), (Some(3), Some(1)));
    let entries = m["entries"].as_array().unwrap();
    assert_eq!(entries.iter().filter(|e| e["split"] == "test").count(), 1);

    let too_many = format!("{},3,1", n);
    assert_eq!(zeroflood(&["split", "-c", "pipeline.cfg", "--counts", &too_many], p).status.code(), Some(1));
}

#[test]
fn train_eval_and_render_on_fixture() {
    let dir = fixture("8", &[]);
    let p = dir.path();
    ok(&["select", "-c", "pipeline.cfg"], p);
    ok(&["split", "-c", "pipeline.cfg"], p);
    ok(&["train", "-c", "pipeline.cfg"], p);
    let log = std::fs::read(p.join("out/train_log.csv")).unwrap();
    assert!(log.starts_with(b"epoch,train_loss,val_loss\n"));
    ok(&["train", "-c", "pipeline.cfg"], p);
    assert_eq!(log, std::fs::read(p.join("out/train_log.csv")).unwrap());

    ok(&["eval", "-c", "pipeline.cfg"], p);
    let report = json(p.join("out/report.json"));
    let f1 = report["micro"]["f1"].as_f64().unwrap();
    assert!(f1 >= 95.0, "F1 {f1}");
    let manifest = json(p.join("out/manifest.json"));
    let tests: Vec<&str> = manifest["entries"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["split"] == "test")
        .map(|e| e["key"].as_str().unwrap())
        .collect();
    for key in &tests {
        let pred = read_binary_raster(p.join(format!("out/pred/{key}.zfr"))).unwrap();
        assert!(pred.as_categorical().unwrap().iter().all(|&v| v == 0 || v == 1 || v == 255));
    }

    // Threshold 1 predicts nothing as flooded: every defined HR is zero.
    ok(&["eval", "-c", "pipeline.cfg", "--threshold", "1"], p);
    let report = json(p.join("out/report.json"));
    assert_eq!(report["micro"]["hr"].as_f64(), Some(0.0));

    let out = ok(&["render", "-c", "pipeline.cfg"], p);
    assert!(out.contains(&format!("rendered {}", tests.len())), "{out}");
    let img = std::fs::read(p.join(format!("out/render/{}.pgm", tests[0]))).unwrap();
    assert!(img.starts_with(b"P5\n"));

    ok(&["train", "-c", "pipeline.cfg", "--tim", "s2,dem", "--seed", "5"], p);
    assert_ne!(log, std::fs::read(p.join("out/train_log.csv")).unwrap());
}

#[test]
fn training_into_a_file_path_fails() {
    let dir = fixture("8", &[]);
    let p = dir.path();
    ok(&["select", "-c", "pipeline.cfg"], p);
    ok(&["split", "-c", "pipeline.cfg"], p);
    std::fs::write(p.join("blocker"), b"").unwrap();
    let cfg = std::fs::read_to_string(p.join("pipeline.cfg")).unwrap();
    let cfg = cfg.replace("paths.output_dir = out", "paths.output_dir = blocker");
    std::fs::write(p.join("blocked.cfg"), cfg).unwrap();
    let manifest = p.join("out/manifest.json");
    let out = zeroflood(&["train", "-c", "blocked.cfg", "--manifest", manifest.to_str().unwrap()], p);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn render_small_mask_to_exact_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let t = GeoTransform::new(0.0, 2.0, 1.0, 1.0).unwrap();
    let mask = RasterGrid::categorical(2, 2, t, "", 255, vec![1, 0, 0, 1]).unwrap();
    write_binary_raster(&mask, p.join("m.zfr")).unwrap();
    std::fs::write(p.join("dummy.cfg"), "").unwrap();
    ok(&["render", "-c", "dummy.cfg", "--input", "m.zfr", "--out", "m.pgm"], p);
    assert_eq!(std::fs::read(p.join("m.pgm")).unwrap(), b"P5\n2 2\n255\n\xff\x00\x00\xff");
}
