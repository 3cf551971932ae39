//! End-to-end tests of the command-line interface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpcview"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("mpcview-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn scene_json(dir: &Path, frames: u32) -> PathBuf {
    let path = dir.join("scene.json");
    let rig_entry = |id: &str, tx: f64, ty: f64, role: &str| {
        format!(
            r#"{{"id":"{id}","fx":120.0,"fy":120.0,"cx":48.0,"cy":36.0,"width":96,"height":72,
                "rotation":[1,0,0,0,1,0,0,0,1],"translation":[{tx},{ty},0.0],"role":"{role}"}}"#
        )
    };
    let cameras = [
        rig_entry("in0", -0.4, 0.0, "input"),
        rig_entry("in1", 0.4, 0.0, "input"),
        rig_entry("in2", 0.0, -0.3, "input"),
        rig_entry("in3", 0.0, 0.3, "input"),
        rig_entry("gt0", 0.05, 0.02, "groundtruth"),
        rig_entry("nv0", -0.05, -0.02, "novel"),
    ]
    .join(",");
    let json = format!(
        r#"{{
        "primitives": [
            {{"kind":"sphere","center":[0.0,0.0,2.0],"radius":0.3,
              "albedo":[0.7,0.4,0.3],
              "texture":{{"type":"sine_grid","amplitude":0.4,"period":0.08}},
              "foreground":true}}
        ],
        "background": {{"kind":"plane","normal":[0.0,0.0,1.0],"offset":3.5,
              "albedo":[0.4,0.45,0.5],"foreground":false}},
        "miss_color": [0.0,0.0,0.0],
        "sensor": {{"bias":{{"depth_points":[[0.0,0.0]],"incidence_coeff":0.0,
                    "incidence_ref":1.0,"max_abs":0.05}},"noise_sigma":0.001,"seed":9}},
        "rig": {{"cameras":[{cameras}]}},
        "num_frames": {frames}
    }}"#
    );
    std::fs::write(&path, json).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((
                    p.strip_prefix(root).unwrap().to_string_lossy().into_owned(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn simulate_twice_is_byte_identical() {
    let dir = tmp("sim-det");
    let scene = scene_json(&dir, 3);
    for out in ["a", "b"] {
        let st = run(bin()
            .args(["simulate", "--scene"])
            .arg(&scene)
            .arg("--out")
            .arg(dir.join(out)));
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    assert_eq!(tree_bytes(&dir.join("a")), tree_bytes(&dir.join("b")));
}

#[test]
fn simulate_rejects_zero_frames() {
    let dir = tmp("sim-zero");
    let scene = scene_json(&dir, 2);
    let out = run(bin()
        .args(["simulate", "--scene"])
        .arg(&scene)
        .arg("--out")
        .arg(dir.join("seq"))
        .args(["--frames", "0"]));
    assert_eq!(out.status.code(), Some(2), "usage errors exit with 2");
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--frames"), "stderr: {err}");
}

#[test]
fn simulate_preset_emits_angle_suite() {
    let dir = tmp("sim-preset");
    let out = run(bin()
        .args(["simulate", "--scene", "preset:slant-sweep", "--size", "96x72", "--out"])
        .arg(dir.join("suite")));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut angles: Vec<String> = std::fs::read_dir(dir.join("suite"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    angles.sort();
    assert_eq!(angles.len(), 18);
    assert_eq!(angles[0], "angle_00");
    assert_eq!(angles[17], "angle_85");
    // Every sequence carries its provenance.
    assert!(dir.join("suite/angle_40/scene.json").exists());
    assert!(dir.join("suite/angle_40/meta.json").exists());
}

#[test]
fn render_and_eval_pipeline() {
    let dir = tmp("render-eval");
    let scene = scene_json(&dir, 2);
    let seq = dir.join("seq");
    assert!(run(bin()
        .args(["simulate", "--scene"])
        .arg(&scene)
        .arg("--out")
        .arg(&seq))
    .status
    .success());

    let out_dir = dir.join("out");
    let render = run(bin()
        .args(["render", "--sequence"])
        .arg(&seq)
        .arg("--out")
        .arg(&out_dir)
        .args(["--jobs", "2"]));
    assert!(render.status.success(), "{}", String::from_utf8_lossy(&render.stderr));
    let stdout = String::from_utf8_lossy(&render.stdout);
    assert!(stdout.contains("aggregate"), "timing lines expected: {stdout}");
    // Targets default to novel + ground truth cameras.
    assert!(out_dir.join("renders/gt0/frame_0.ppm").exists());
    assert!(out_dir.join("renders/nv0/frame_1.ppm").exists());
    assert!(out_dir.join("logs/timings.csv").exists());

    let eval = run(bin()
        .args(["eval", "--sequence"])
        .arg(&seq)
        .arg("--out")
        .arg(&out_dir));
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let csv = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    // Header plus frames x ground-truth cameras.
    assert_eq!(csv.lines().count(), 1 + 2);
    assert!(out_dir.join("metrics.json").exists());
}

#[test]
fn render_volume_flag_selects_sweep() {
    let dir = tmp("volume-flag");
    let scene = scene_json(&dir, 1);
    let seq = dir.join("seq");
    assert!(run(bin()
        .args(["simulate", "--scene"])
        .arg(&scene)
        .arg("--out")
        .arg(&seq))
    .status
    .success());
    let out_dir = dir.join("out");
    let render = run(bin()
        .args(["render", "--volume", "sweep", "--sequence"])
        .arg(&seq)
        .arg("--out")
        .arg(&out_dir));
    assert!(render.status.success());
    let echoed = std::fs::read_to_string(out_dir.join("run_config.json")).unwrap();
    assert!(echoed.contains("\"kind\": \"sweep\""));

    let bad = run(bin()
        .args(["render", "--volume", "bogus", "--sequence"])
        .arg(&seq)
        .arg("--out")
        .arg(dir.join("out2")));
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn output_dir_env_var_overrides() {
    let dir = tmp("env-override");
    let scene = scene_json(&dir, 1);
    let seq = dir.join("seq");
    assert!(run(bin()
        .args(["simulate", "--scene"])
        .arg(&scene)
        .arg("--out")
        .arg(&seq))
    .status
    .success());
    let ignored = dir.join("ignored");
    let actual = dir.join("actual");
    let render = run(bin()
        .env("MPCVIEW_OUTPUT_DIR", &actual)
        .args(["render", "--sequence"])
        .arg(&seq)
        .arg("--out")
        .arg(&ignored));
    assert!(render.status.success(), "{}", String::from_utf8_lossy(&render.stderr));
    assert!(actual.join("renders").exists());
    assert!(!ignored.exists());
}

#[test]
fn render_reads_config_file_with_flag_overrides() {
    let dir = tmp("config-file");
    let scene = scene_json(&dir, 1);
    let seq = dir.join("seq");
    assert!(run(bin()
        .args(["simulate", "--scene"])
        .arg(&scene)
        .arg("--out")
        .arg(&seq))
    .status
    .success());
    let out_dir = dir.join("out");
    let cfg_path = dir.join("run.json");
    std::fs::write(
        &cfg_path,
        serde_json::json!({
            "sequence_dir": seq,
            "output_dir": out_dir,
            "volume": {
                "kind": "mpc",
                "offsets": [-0.01, 0.0, 0.01],
                "sweep_planes": 12,
                "sweep_step": 0.01,
                "splat_radius": 1
            },
            "render": {
                "highres": false,
                "temporal_window": 1,
                "background_fill": [0.0, 0.0, 0.0],
                "targets": "groundtruth",
                "dump_volumes": false,
                "dump_float": true
            }
        })
        .to_string(),
    )
    .unwrap();
    // Flags win over the config file: switch the volume to sweep.
    let render = run(bin()
        .args(["render", "--config"])
        .arg(&cfg_path)
        .args(["--volume", "sweep"]));
    assert!(render.status.success(), "{}", String::from_utf8_lossy(&render.stderr));
    assert!(out_dir.join("renders/gt0/frame_0.ppm").exists());
    // Float dumps from the config file.
    assert!(out_dir.join("renders/gt0/frame_0_r.pfm").exists());
    assert!(out_dir.join("renders/gt0/frame_0_b.pfm").exists());
    let echoed = std::fs::read_to_string(out_dir.join("run_config.json")).unwrap();
    assert!(echoed.contains("\"kind\": \"sweep\""));
}

#[test]
fn render_missing_sequence_fails_with_marker() {
    let dir = tmp("missing-seq");
    let out_dir = dir.join("out");
    let render = run(bin()
        .args(["render", "--sequence"])
        .arg(dir.join("nope"))
        .arg("--out")
        .arg(&out_dir));
    assert_eq!(render.status.code(), Some(1));
    assert!(out_dir.join("_FAILED").exists());
}

#[test]
fn volume_dump_prints_header() {
    let dir = tmp("volume-dump");
    let scene = scene_json(&dir, 1);
    let seq = dir.join("seq");
    assert!(run(bin()
        .args(["simulate", "--scene"])
        .arg(&scene)
        .arg("--out")
        .arg(&seq))
    .status
    .success());
    let out_dir = dir.join("out");
    assert!(run(bin()
        .args(["render", "--dump-volumes", "--sequence"])
        .arg(&seq)
        .arg("--out")
        .arg(&out_dir))
    .status
    .success());
    let dump = run(bin()
        .arg("volume-dump")
        .arg(out_dir.join("renders/gt0/volume_0.mpcv")));
    assert!(dump.status.success());
    let text = String::from_utf8_lossy(&dump.stdout);
    assert!(text.contains("4 views x 3 offsets"), "{text}");
    assert!(text.contains("96"), "{text}");

    let missing = run(bin().arg("volume-dump").arg(dir.join("nope.mpcv")));
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn compare_sweep_runs_on_mini_suite() {
    let dir = tmp("cli-compare");
    let suite = dir.join("suite");
    // Tiny suite via the preset generator path (full-size suite is covered
    // by the acceptance tests).
    assert!(run(bin()
        .args(["simulate", "--scene", "preset:slant-sweep", "--size", "96x72", "--out"])
        .arg(&suite))
    .status
    .success());
    // Keep three moderate angles for speed; at this thumbnail resolution the
    // steepest slants erode to nothing (the acceptance suite runs full-size).
    for entry in std::fs::read_dir(&suite).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        if !["angle_00", "angle_30", "angle_60"].contains(&name.as_str()) {
            std::fs::remove_dir_all(&p).unwrap();
        }
    }
    let out_dir = dir.join("cmp");
    let cmp = run(bin()
        .args(["compare-sweep", "--suite"])
        .arg(&suite)
        .arg("--out")
        .arg(&out_dir));
    assert!(cmp.status.success(), "{}", String::from_utf8_lossy(&cmp.stderr));
    let csv = std::fs::read_to_string(out_dir.join("coverage.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
    assert!(out_dir.join("summary.json").exists());
    let text = String::from_utf8_lossy(&cmp.stdout);
    assert!(text.contains("cover(mpc)"), "{text}");
    // The coverage ordering itself is asserted at full resolution in the
    // acceptance suite; at this thumbnail size splat quantization dominates
    // the millimeter-scale geometry.
}
