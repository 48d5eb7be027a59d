use std::path::Path;
use std::process::{Command, Output};

fn roadclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadclass")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = roadclass(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
seed = 5
[synthetic]
width = 640
height = 640
origin_x = 600200.0
origin_y = 200500.0
[synthetic.network]
roads = 6
max_length = 500.0
[probabilities]
source = "oracle"
"#;

#[test]
fn default_config_is_accepted_back() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&["default-config"]);
    assert!(text.contains("[assignment]") && text.contains("delta = 10.0"));
    let path = dir.path().join("c.toml");
    std::fs::write(&path, &text).unwrap();
    // the config loads, so the failure is the missing network (data, 3), not the config (2)
    let out = roadclass(&["assign", "--config", s(&path), "--network", "nowhere.geojson", "--field", "f", "--output", "o"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.geojson"));
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.png");
    let out = roadclass(&["morph", "--input", s(&missing), "--output", s(&dir.path().join("m.png"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.png"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[assignment]\ndelat = 3.0\n").unwrap();
    let out = roadclass(&["pipeline", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delat"));

    let out = roadclass(&["assign", "--network", "a", "--field", "b", "--output", "c", "--delta", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = roadclass(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stages_chain_from_paint_to_render() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |name: &str| d.join(name);
    let manifest = p("manifest.jsonl");
    let m = s(&manifest);
    ok(&[
        "paint", "--out-dir", s(d), "--stem", "t", "--width", "600", "--height", "600", "--roads", "5", "--seed", "3",
        "--manifest", m,
    ]);
    for f in ["t_map.png", "t_map.pgw", "t_labels.png", "t_region.png", "t_assignment.geojson", "t_network.geojson"] {
        assert!(p(f).exists(), "{f} missing");
    }
    ok(&["tile", "--input", s(&p("t_map.png")), "--out-dir", s(&p("tiles")), "--sheet", "t", "--manifest", m]);
    assert!(p("tiles/t_0_0.png").exists() && p("tiles/t_1_1.pgw").exists());
    ok(&["stitch", "--tiles-dir", s(&p("tiles")), "--sheet", "t", "--output", s(&p("stitched.png")), "--manifest", m]);
    assert_eq!(std::fs::read(p("stitched.png")).unwrap(), std::fs::read(p("t_map.png")).unwrap());

    ok(&["morph", "--input", s(&p("t_region.png")), "--output", s(&p("mask.png")), "--manifest", m]);
    ok(&["skeleton", "--input", s(&p("mask.png")), "--output", s(&p("skel.png")), "--manifest", m]);
    let v = ok(&["vectorize", "--input", s(&p("skel.png")), "--output", s(&p("net.geojson")), "--manifest", m]);
    assert!(v.contains("segments"));
    ok(&["gridfilter", "--input", s(&p("net.geojson")), "--output", s(&p("roads.geojson")), "--manifest", m]);
    ok(&[
        "classify-baseline", "--map", s(&p("t_map.png")), "--region", s(&p("t_region.png")), "--output",
        s(&p("base.probf")), "--manifest", m,
    ]);
    ok(&["mask", "--field", s(&p("base.probf")), "--region", s(&p("mask.png")), "--output", s(&p("masked.probf")), "--manifest", m]);
    ok(&["ensemble", "--output", s(&p("field.probf")), s(&p("masked.probf")), s(&p("masked.probf")), "--manifest", m]);
    let a = ok(&[
        "assign", "--network", s(&p("roads.geojson")), "--field", s(&p("field.probf")), "--output",
        s(&p("classified.geojson")), "--delta", "10", "--min-length", "80", "--beta", "6", "--profiles", s(&p("profiles")),
        "--manifest", m,
    ]);
    assert!(a.contains("0 failed"), "{a}");
    assert!(std::fs::read_dir(p("profiles")).unwrap().count() > 0);
    let e = ok(&[
        "eval", "--ground-truth", s(&p("t_assignment.geojson")), "--predicted", s(&p("classified.geojson")), "--field",
        s(&p("field.probf")), "--labels", s(&p("t_labels.png")), "--output", s(&p("report.json")), "--manifest", m,
    ]);
    assert!(e.contains("weighted") && e.contains("Brier"), "{e}");
    ok(&["render", "--map", s(&p("t_map.png")), "--classified", s(&p("classified.geojson")), "--output", s(&p("overlay.png")), "--manifest", m]);
    assert!(p("overlay.pgw").exists());

    let lines = std::fs::read_to_string(&manifest).unwrap();
    let stages: Vec<String> = lines
        .lines()
        .map(|l| l.split("\"stage\":\"").nth(1).unwrap().split('"').next().unwrap().to_string())
        .collect();
    assert_eq!(
        stages,
        [
            "paint", "tile", "stitch", "morph", "skeleton", "vectorize", "gridfilter", "classify_baseline", "mask", "ensemble",
            "assign", "eval", "render"
        ]
    );

    // rerunning a stage with the same inputs gives the same bytes
    let first = std::fs::read(p("classified.geojson")).unwrap();
    ok(&["assign", "--network", s(&p("roads.geojson")), "--field", s(&p("field.probf")), "--output", s(&p("classified.geojson"))]);
    assert_eq!(std::fs::read(p("classified.geojson")).unwrap(), first);
}

#[test]
fn synthetic_pipeline_with_render_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("run");
    let text = ok(&[
        "pipeline", "--synthetic", "--config", s(&cfg), "--output-dir", s(&out), "--render", "--sweep", "delta=5,20 l=40 beta=4",
    ]);
    assert!(text.contains("weighted"), "{text}");
    assert!(text.contains("5 sweep cells"), "{text}");
    for f in ["overlay.png", "classified.geojson", "report.json", "manifest.jsonl", "sweep.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "delta_m,min_length_m,beta_m,completeness,correctness,sections");
    let swept = ok(&["sweep", "--config", s(&cfg), "--output-dir", s(&out), "--grid", "delta=5,20 l=40 beta=4"]);
    assert!(swept.contains("complete %"));
    assert_eq!(std::fs::read_to_string(out.join("sweep.csv")).unwrap(), csv);
}
