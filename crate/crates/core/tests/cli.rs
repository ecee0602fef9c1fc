use std::path::Path;
use std::process::{Command, Output};

use vts_core::config::DetectorConfig;
use vts_core::detector::{extract_quads, feature_mask};
use vts_core::geometry::polygon_iou;
use vts_core::io::{load_annotations, load_decisions, load_detections, save_tensor_grid, TensorGrid};
use vts_core::metrics::{rcr, MatchingConfig};
use vts_core::pipeline::{detect, load_maps};

fn vts(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vts"));
    cmd.args(args).env_remove("VTS_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sim(dir: &Path, spec: &str) {
    let spec_path = dir.with_extension("toml");
    write(&spec_path, spec);
    ok(&vts(&["sim", "--config", p(&spec_path), "--out", p(dir)], &[]));
}

const RENDERED: &str = "n_streams = 3\nframes_per_stream = [3, 3]\nlanes = 3\nseed = 4\n\
                        recognizer_error = { high = 0.0, moderate = 0.0, low = 0.0 }\n[render]\n";

#[test]
fn missing_input_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, "[paths]\nmaps = \"nowhere\"\n");
    let out = vts(&["detect", "--config", p(&cfg)], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
    let out = vts(&["spot", "--config", p(&cfg)], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn format_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    sim(&scene, RENDERED);
    std::fs::write(scene.join("maps/confidence/000001.grid"), b"not a grid").unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, "[paths]\nmaps = \"scene/maps\"\n");
    assert_eq!(vts(&["detect", "--config", p(&cfg)], &[]).status.code(), Some(3));

    write(&cfg, "[detector]\nwindow = 2\n");
    assert_eq!(vts(&["detect", "--config", p(&cfg)], &[]).status.code(), Some(3));

    write(&cfg, "[paths]\nannotations = \"bad.txt\"\ndecisions = \"bad.txt\"\n");
    write(&dir.path().join("bad.txt"), "0,1,2\n");
    assert_eq!(vts(&["eval", "--config", p(&cfg)], &[]).status.code(), Some(3));
}

#[test]
fn zero_frames_give_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["features", "confidence", "geometry"] {
        std::fs::create_dir_all(dir.path().join("maps").join(sub)).unwrap();
    }
    let cfg = dir.path().join("run.toml");
    write(&cfg, "");
    let out = vts(&["detect", "--config", p(&cfg)], &[]);
    ok(&out);
    assert!(out.stdout.is_empty());
    assert!(load_detections(dir.path().join("out/detections.txt")).unwrap().is_empty());
}

#[test]
fn detections_match_generated_labels() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    sim(&scene, RENDERED);
    let cfg = dir.path().join("run.toml");
    write(&cfg, "[paths]\nmaps = \"scene/maps\"\n");
    let out = vts(&["detect", "--config", p(&cfg)], &[]);
    ok(&out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
    let dets = load_detections(dir.path().join("out/detections.txt")).unwrap();
    let gt = load_annotations(scene.join("annotations.txt")).unwrap();
    assert_eq!(dets.len(), gt.len());
    for g in &gt {
        let best = dets
            .iter()
            .filter(|d| d.frame == g.frame)
            .map(|d| polygon_iou(&d.region.quad, &g.quad))
            .fold(0.0, f64::max);
        assert!(best >= 0.9, "frame {} id {}: best IoU {best}", g.frame, g.id);
    }
}

#[test]
fn single_frame_window_is_mask_only() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    sim(&scene, RENDERED);
    // perturb one confidence map so the mask-only path is not trivially all-ones
    let conf_path = scene.join("maps/confidence/000001.grid");
    let conf = vts_core::io::load_tensor_grid(&conf_path).unwrap();
    let damped: Vec<f64> = conf.data().iter().enumerate().map(|(i, v)| if i % 3 == 0 { v * 0.5 } else { *v }).collect();
    save_tensor_grid(&conf_path, &TensorGrid::new(conf.height(), conf.width(), 1, damped).unwrap()).unwrap();

    let maps = load_maps(&scene.join("maps"), 4.0).unwrap();
    let cfg = DetectorConfig { window_n: 0, ..DetectorConfig::default() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let got = detect(&maps, &cfg, None, &pool).unwrap();
    let mut want = Vec::new();
    for f in &maps.frames {
        let mask = feature_mask(&f.features, cfg.mask_threshold);
        let refined: Vec<f64> = f.confidence.data().iter().zip(mask.data()).map(|(c, m)| c * m).collect();
        let refined = TensorGrid::new(f.confidence.height(), f.confidence.width(), 1, refined).unwrap();
        for q in extract_quads(&refined, &f.geometry, cfg.stride, cfg.conf_threshold, cfg.nms_threshold).unwrap() {
            want.push((f.frame, q));
        }
    }
    let got: Vec<_> = got.into_iter().map(|d| (d.frame, d.region)).collect();
    assert_eq!(got, want);

    let run = dir.path().join("run.toml");
    write(&run, "[paths]\nmaps = \"scene/maps\"\n");
    ok(&vts(&["detect", "--config", p(&run), "--window-n", "0"], &[]));
    let cli: Vec<_> = load_detections(dir.path().join("out/detections.txt")).unwrap().into_iter().map(|d| (d.frame, d.region)).collect();
    assert_eq!(cli.len(), want.len());
}

#[test]
fn single_stream_gives_one_decision() {
    let dir = tempfile::tempdir().unwrap();
    sim(&dir.path().join("scene"), "n_streams = 1\nseed = 3\n");
    let cfg = dir.path().join("run.toml");
    write(&cfg, "[paths]\nobservations = \"scene/observations.jsonl\"\nannotations = \"scene/annotations.txt\"\n");
    let out = vts(&["spot", "--config", p(&cfg), "--policy", "pcw"], &[]);
    ok(&out);
    assert_eq!(load_decisions(dir.path().join("out/decisions.txt")).unwrap().len(), 1);
    let manifest = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(manifest.contains("streams=1") || manifest.contains("streams 1"), "{manifest}");
}

const EXTREME: &str = "n_streams = 30\nrecognizer_error = { high = 0.0, moderate = 0.4, low = 0.85 }\n\
                       [quality_profile.curve]\nkind = \"random\"\np_high = 0.2\np_moderate = 0.3\n";

fn extreme_setup(root: &Path) -> std::path::PathBuf {
    sim(&root.join("train"), &format!("seed = 500\n{EXTREME}"));
    sim(&root.join("test"), &format!("seed = 501\n{EXTREME}"));
    let cfg = root.join("run.toml");
    write(
        &cfg,
        "[paths]\nobservations = \"test/observations.jsonl\"\nannotations = \"test/annotations.txt\"\n\
         training_observations = \"train/observations.jsonl\"\ntraining_annotations = \"train/annotations.txt\"\n",
    );
    cfg
}

#[test]
fn tr_reads_at_least_as_well_as_hfp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = extreme_setup(dir.path());
    let gt = load_annotations(dir.path().join("test/annotations.txt")).unwrap();
    let mut scores = Vec::new();
    for policy in ["tr", "hfp"] {
        let out = dir.path().join(policy);
        ok(&vts(&["spot", "--config", p(&cfg), "--policy", policy, "--out", p(&out)], &[]));
        let d = load_decisions(out.join("decisions.txt")).unwrap();
        scores.push(rcr(&d, &gt, &MatchingConfig::default()));
    }
    assert!(scores[0] >= scores[1], "TR {} vs HFP {}", scores[0], scores[1]);
}

#[test]
fn outputs_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = extreme_setup(dir.path());
    let files = ["streams.txt", "decisions.txt", "manifest.txt", "student.json", "report.txt", "metrics.txt"];
    let mut runs = Vec::new();
    for (i, threads) in ["1", "1", "3", "8"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let env = [("VTS_THREADS", *threads)];
        ok(&vts(&["spot", "--config", p(&cfg), "--out", p(&out)], &env));
        let eval = vts(&["eval", "--config", p(&cfg), "--out", p(&out)], &env);
        ok(&eval);
        let mut bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(out.join(f)).unwrap()).collect();
        bytes.push(eval.stdout);
        runs.push(bytes);
    }
    assert!(runs.iter().all(|r| *r == runs[0]));

    let bad = vts(&["spot", "--config", p(&cfg)], &[("VTS_THREADS", "zero")]);
    assert_eq!(bad.status.code(), Some(3));
}
