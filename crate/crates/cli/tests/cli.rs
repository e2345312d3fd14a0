use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use savcd_core::augment::demo_image;
use savcd_core::suite::{demo_script, hallucination_injection_suite};
use savcd_core::{RasterImage, SyntheticBackend, SyntheticScript};
use savcd_http::StubServer;

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/demo")
}

fn demo(name: &str) -> PathBuf {
    demo_dir().join(name)
}

fn savcd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_savcd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = savcd(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    savcd(args).status.code().expect("exited normally")
}

fn summary(args: &[&str]) -> Value {
    serde_json::from_str(ok(args).trim()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bundled_assets_match_export() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["export-demo", "--dir", s(dir.path())]);
    for (name, bytes) in savcd_cli::demo::files() {
        let shipped = std::fs::read(demo(name)).unwrap();
        assert_eq!(shipped, bytes, "{name} is stale; rerun export-demo");
        assert_eq!(std::fs::read(dir.path().join(name)).unwrap(), bytes);
    }
    let script = SyntheticScript::from_json(&std::fs::read_to_string(demo("script.json")).unwrap());
    assert_eq!(script.unwrap(), demo_script());
}

#[test]
fn demo_traces_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let config = demo("config.toml");
    ok(&["decode", "--config", s(&config), "--trace", s(&a)]);
    ok(&["decode", "--config", s(&config), "--trace", s(&b)]);
    let a = std::fs::read(a).unwrap();
    assert_eq!(a, std::fs::read(b).unwrap());
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_trace_seed7.jsonl");
    assert_eq!(a, std::fs::read(golden).unwrap());
}

#[test]
fn trace_lines_match_schema() {
    let schema: Value = serde_json::from_str(savcd_cli::demo::TRACE_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let script = demo("script.json");
    let mut lines = 0;
    for mode in ["none", "apc", "sat", "hns"] {
        let trace = dir.path().join(format!("{mode}.jsonl"));
        ok(&[
            "decode",
            "--script",
            s(&script),
            "--no-sas",
            "--threshold-mode",
            mode,
            "--seed",
            "3",
            "--trace",
            s(&trace),
        ]);
        for line in std::fs::read_to_string(&trace).unwrap().lines() {
            let value: Value = serde_json::from_str(line).unwrap();
            assert!(validator.is_valid(&value), "{line}");
            lines += 1;
        }
    }
    assert!(lines >= 4);
    let bad: Value = serde_json::json!({"t": 0, "beta_t": 0.3});
    assert!(!validator.is_valid(&bad));
}

#[test]
fn truncation_shrinks_candidate_sets() {
    let script = demo("script.json");
    let run = |mode: &str| {
        summary(&[
            "decode",
            "--script",
            s(&script),
            "--no-sas",
            "--threshold-mode",
            mode,
            "--sampling",
            "greedy",
        ])["mean_candidates"]
            .as_f64()
            .unwrap()
    };
    let (none, sat) = (run("none"), run("sat"));
    assert_eq!(none, 8.0);
    assert!(sat < none, "sat {sat} none {none}");
}

#[test]
fn augmentation_override_and_selection() {
    let script = demo("script.json");
    let fixed = summary(&[
        "decode",
        "--script",
        s(&script),
        "--no-sas",
        "--augmentation",
        "noise",
    ]);
    assert_eq!(fixed["augmentation"], "noise");
    assert_eq!(fixed["sas_valid"], Value::Null);
    let chosen = summary(&[
        "decode",
        "--script",
        s(&script),
        "--query",
        "What color is the painting?",
    ]);
    assert_eq!(chosen["augmentation"], "color_inversion");
    assert_eq!(chosen["sas_valid"], true);
    let max = summary(&[
        "decode",
        "--script",
        s(&script),
        "--no-sas",
        "--max-tokens",
        "2",
    ]);
    assert_eq!(max["token_count"], 2);
    assert_eq!(max["stop_reason"], "max_tokens");
}

#[test]
fn dump_config_shows_defaults() {
    let text = ok(&["decode", "--dump-config"]);
    let table: toml::Table = text.parse().unwrap();
    assert_eq!(table["alpha"].as_float(), Some(1.0));
    assert_eq!(table["beta"].as_float(), Some(0.1));
    assert_eq!(table["gamma"].as_float(), Some(-0.5));
    assert_eq!(table["threshold-mode"].as_str(), Some("sat"));
    let text = ok(&[
        "decode",
        "--dump-config",
        "--alpha",
        "2.5",
        "--threshold-mode",
        "apc",
    ]);
    assert!(text.contains("alpha = 2.5") && text.contains("threshold-mode = \"apc\""));
}

#[test]
fn exit_codes_follow_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let script = demo("script.json");
    let script = s(&script);

    // configuration
    assert_eq!(code(&["decode", "--no-sas"]), 2);
    assert_eq!(code(&["decode", "--script", script]), 2);
    assert_eq!(code(&["decode", "--script", script, "--gamma", "0.2"]), 2);
    assert_eq!(
        code(&["decode", "--script", script, "--threshold-mode", "topk"]),
        2
    );
    assert_eq!(code(&["decode", "--config", "/definitely/missing.toml"]), 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "gama = -1\n").unwrap();
    assert_eq!(code(&["decode", "--config", s(&bad)]), 2);
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"vocab_size\": 0}").unwrap();
    assert_eq!(code(&["decode", "--script", s(&broken), "--no-sas"]), 2);

    // backend
    assert_eq!(
        code(&["decode", "--backend", "http://127.0.0.1:9", "--no-sas"]),
        3
    );
    let mut strict = demo_script();
    strict.strict = true;
    strict.expert.truncate(2);
    let strict_path = dir.path().join("strict.json");
    std::fs::write(&strict_path, strict.to_json_pretty()).unwrap();
    assert_eq!(
        code(&["decode", "--script", s(&strict_path), "--no-sas"]),
        3
    );

    // image and file I/O
    assert_eq!(
        code(&[
            "decode",
            "--script",
            script,
            "--no-sas",
            "--image",
            "/missing.png"
        ]),
        4
    );
    let not_png = dir.path().join("x.png");
    std::fs::write(&not_png, "text").unwrap();
    assert_eq!(
        code(&[
            "decode",
            "--script",
            script,
            "--no-sas",
            "--image",
            s(&not_png)
        ]),
        4
    );
    let trace = dir.path().join("no/such/dir/t.jsonl");
    assert_eq!(
        code(&[
            "decode",
            "--script",
            script,
            "--no-sas",
            "--trace",
            s(&trace)
        ]),
        4
    );
    assert_eq!(
        code(&[
            "augment",
            "--image",
            "/missing.png",
            "--augmentation",
            "hflip",
            "--out",
            "/tmp/x.png"
        ]),
        4
    );
}

fn write_png(image: &RasterImage, path: &Path) {
    std::fs::write(path, image.to_png_bytes().unwrap()).unwrap();
}

fn read_png(path: &Path) -> RasterImage {
    RasterImage::from_png_bytes(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn augment_command() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    write_png(&demo_image(), &p("in.png"));
    ok(&[
        "augment",
        "--image",
        s(&p("in.png")),
        "--augmentation",
        "hflip",
        "--out",
        s(&p("f1.png")),
    ]);
    ok(&[
        "augment",
        "--image",
        s(&p("f1.png")),
        "--augmentation",
        "horizontal_flip",
        "--out",
        s(&p("f2.png")),
    ]);
    assert_ne!(read_png(&p("f1.png")), demo_image());
    assert_eq!(
        std::fs::read(p("f2.png")).unwrap(),
        std::fs::read(p("in.png")).unwrap()
    );

    write_png(
        &RasterImage::filled(8, 8, [255; 3]).unwrap(),
        &p("white.png"),
    );
    ok(&[
        "augment",
        "--image",
        s(&p("white.png")),
        "--augmentation",
        "invert",
        "--out",
        s(&p("black.png")),
    ]);
    assert_eq!(
        read_png(&p("black.png")),
        RasterImage::filled(8, 8, [0; 3]).unwrap()
    );

    for seed in ["1", "2"] {
        ok(&[
            "augment",
            "--image",
            s(&p("in.png")),
            "--augmentation",
            "random_mask",
            "--seed",
            seed,
            "--out",
            s(&p(&format!("m{seed}.png"))),
        ]);
    }
    assert_ne!(read_png(&p("m1.png")), read_png(&p("m2.png")));
    assert_eq!(
        code(&[
            "augment",
            "--image",
            s(&p("in.png")),
            "--augmentation",
            "noise",
            "--step",
            "0",
            "--out",
            s(&p("n.png"))
        ]),
        2
    );
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn ablate_command() {
    let rows = csv_rows(&ok(&[
        "ablate",
        "--modes",
        "sat",
        "--gammas",
        "-0.1,-0.5,-1.0",
    ]));
    assert_eq!(rows.len(), 3);
    let betas: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(betas[0] > betas[1] && betas[1] > betas[2], "{betas:?}");

    let rows = csv_rows(&ok(&["ablate", "--modes", "apc", "--betas", "0"]));
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 8.0);

    let text = ok(&["ablate", "--modes", "sat,hns,none"]);
    let rows = csv_rows(&text);
    let rate = |i: usize| rows[i][4].parse::<f64>().unwrap();
    assert!(rate(0) >= rate(1) && rate(0) >= rate(2));
    assert_eq!(text, ok(&["ablate", "--modes", "sat,hns,none"]));

    let grid = demo("grid.toml");
    let suite = demo("suite.json");
    let from_files = ok(&["ablate", "--grid", s(&grid), "--suite", s(&suite)]);
    assert_eq!(from_files.lines().count(), 1 + 1 + 2 + 3 + 3);
    assert_eq!(
        savcd_core::suite::BenchmarkSuite::from_json(&std::fs::read_to_string(&suite).unwrap())
            .unwrap(),
        hallucination_injection_suite()
    );

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    ok(&["ablate", "--modes", "sat", "--out", s(&out)]);
    assert!(std::fs::read_to_string(out)
        .unwrap()
        .starts_with("mode,gamma,"));
    assert_eq!(code(&["ablate", "--modes", "sat", "--gammas", "0.4"]), 2);
    assert_eq!(code(&["ablate", "--suite", "/missing.json"]), 2);
}

#[test]
fn decode_over_http_matches_scripted_decode() {
    let image = demo_image();
    let stub = StubServer::spawn(
        SyntheticBackend::new(demo_script())
            .unwrap()
            .with_clean_image(&image),
    )
    .unwrap();
    let script = demo("script.json");
    let common = ["--query", "What color is the painting?", "--seed", "11"];
    let mut local = vec!["decode", "--script", s(&script)];
    local.extend(common);
    let url = stub.url();
    let mut remote = vec!["decode", "--backend", &url, "--prompt-tokens", "0"];
    remote.extend(common);
    let (a, b) = (summary(&local), summary(&remote));
    assert_eq!(a["tokens"], b["tokens"]);
    assert_eq!(a["augmentation"], b["augmentation"]);
    assert_eq!(a["mean_beta_t"], b["mean_beta_t"]);
}
