mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ecc_imaging::metrics;
use ecc_imaging::scene;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecc-imaging"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_pattern_matches_golden_glyph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.pbm");
    assert!(cli(&["gen-pattern", "glyph-GI", "-o", path(&out)]).status.success());
    let golden = fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/glyph_gi_64.pbm")).unwrap();
    assert_eq!(fs::read(&out).unwrap(), golden);
    assert_eq!(scene::read_image(&golden).unwrap(), common::glyph());
}

#[test]
fn gen_pattern_rejects_unknown_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["gen-pattern", "spiral", "-o", path(&dir.path().join("x.pbm"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("spiral"));
}

#[test]
fn simulate_then_decode_noiseless() {
    let dir = tempfile::tempdir().unwrap();
    let (g, m, img, trace, remap) = (
        dir.path().join("graph.txt"),
        dir.path().join("m.csv"),
        dir.path().join("out.pbm"),
        dir.path().join("trace.csv"),
        dir.path().join("remap.csv"),
    );
    let sim = cli(&[
        "simulate",
        "--graph-out",
        path(&g),
        "--measurements-out",
        path(&m),
        "--seed",
        "2",
    ]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let dec = cli(&[
        "decode",
        "--graph",
        path(&g),
        "--measurements",
        path(&m),
        "-o",
        path(&img),
        "--mode",
        "hard",
        "--trace",
        path(&trace),
        "--dump-remap",
        path(&remap),
    ]);
    assert!(dec.status.success(), "{}", String::from_utf8_lossy(&dec.stderr));

    let graph = ecc_imaging::ltcode::EncodingGraph::from_text(&fs::read_to_string(&g).unwrap()).unwrap();
    let uncovered = graph.uncovered_pixels();
    let truth = common::glyph();
    let decoded = scene::read_image(&fs::read(&img).unwrap()).unwrap();
    let wrong = (0..truth.len())
        .filter(|j| !uncovered.contains(j) && decoded.pixels()[*j] != truth.pixels()[*j])
        .count();
    assert_eq!(wrong, 0);
    let trace = fs::read_to_string(&trace).unwrap();
    assert!(trace.starts_with("iteration,unsatisfied,mean_abs_llr\n"));
    let remap = fs::read_to_string(&remap).unwrap();
    assert!(remap.starts_with("shot,y,m_star,delta_l,llr\n"));
    assert_eq!(remap.lines().count(), 8193);
}

#[test]
fn decode_reports_mismatched_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (g, m) = (dir.path().join("g.txt"), dir.path().join("m.csv"));
    let base = ["--graph-out", path(&g), "--measurements-out", path(&m)];
    assert!(cli(&[&["simulate", "--shots", "100"][..], &base[..]].concat()).status.success());
    let (g2, other) = (dir.path().join("g2.txt"), dir.path().join("m2.csv"));
    let base2 = ["--graph-out", path(&g2), "--measurements-out", path(&other)];
    assert!(cli(&[&["simulate", "--shots", "50"][..], &base2[..]].concat()).status.success());
    let out = cli(&[
        "decode",
        "--graph",
        path(&g),
        "--measurements",
        path(&other),
        "-o",
        path(&dir.path().join("o.pbm")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("remap"));
}

#[test]
fn run_writes_results_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"width": 16, "height": 16, "shots": 256, "snr_grid": [1, -2], "seeds": [4],
            "gp_iterations": 10, "trace": true, "dump_remap": true}"#,
    )
    .unwrap();
    let results = dir.path().join("out");
    let out = cli(&["run", path(&cfg), "--output-dir", path(&results)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = metrics::read_scores(fs::File::open(results.join("results.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(results.join("summary.csv").exists());
    let coded = results.join("coded").join("-2").join("4");
    for f in ["reconstruction.pbm", "remap_block0.csv", "bp_trace_block0.csv"] {
        assert!(coded.join(f).exists(), "{f}");
    }
    assert!(results.join("gp").join("1").join("4").join("reconstruction.pgm").exists());
}

#[test]
fn run_exits_2_on_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // an all-zero scene cannot be calibrated to any SNR
    fs::write(
        &cfg,
        format!(
            r#"{{"scene": "blank", "width": 16, "height": 16, "shots": 64, "snr_grid": [0],
                "seeds": [1], "output_dir": {:?}}}"#,
            path(&dir.path().join("out"))
        ),
    )
    .unwrap();
    let out = cli(&["run", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("calibrat"));
}

#[test]
fn run_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seeds": []}"#).unwrap();
    let out = cli(&["run", path(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seeds"));
}

#[test]
fn run_help_documents_every_key() {
    let help = String::from_utf8(cli(&["run", "--help"]).stdout).unwrap();
    let json = serde_json::to_value(ecc_imaging::harness::ExperimentConfig::default()).unwrap();
    for key in json.as_object().unwrap().keys() {
        assert!(help.contains(key.as_str()), "{key} missing from --help");
    }
}
