use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lek::raster::{decode_image, decode_mask, encode_image, encode_mask, BinaryMask, RasterImage};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn lek(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lek"))
        .args(args)
        .env("LEK_NO_COLOR", "1")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn copy_fixtures(dst: &Path) {
    let src = repo().join("fixtures/synthetic");
    for sub in ["images", "truth", "deeplab", "maskrcnn"] {
        fs::create_dir_all(dst.join(sub)).unwrap();
        for entry in fs::read_dir(src.join(sub)).unwrap() {
            let p = entry.unwrap().path();
            fs::copy(&p, dst.join(sub).join(p.file_name().unwrap())).unwrap();
        }
    }
    fs::copy(src.join("manifest.csv"), dst.join("manifest.csv")).unwrap();
}

#[test]
fn evaluate_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let manifest = repo().join("fixtures/synthetic/manifest.csv");
    let o = lek(&[
        "evaluate",
        "--manifest",
        s(&manifest),
        "--strategy",
        "add",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        fs::read(&out).unwrap(),
        fs::read(repo().join("fixtures/golden/evaluate-add.json")).unwrap()
    );
}

#[test]
fn evaluate_single_model_and_formats() {
    let manifest = repo().join("fixtures/synthetic/manifest.csv");
    let o = lek(&[
        "evaluate",
        "--manifest",
        s(&manifest),
        "--model",
        "maskrcnn",
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("scope,name,cases,accuracy,dice,jsi,sensitivity,specificity,mcc\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("case,")).count(), 10);

    let o = lek(&["evaluate", "--manifest", s(&manifest), "--model", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_strategy_is_a_usage_error() {
    let manifest = repo().join("fixtures/synthetic/manifest.csv");
    let o = lek(&[
        "evaluate",
        "--manifest",
        s(&manifest),
        "--strategy",
        "median",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr)
        .to_lowercase()
        .contains("usage"));
}

#[test]
fn missing_mask_names_the_case_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixtures(dir.path());
    fs::remove_file(dir.path().join("deeplab/synth_006.png")).unwrap();
    let out = dir.path().join("report.json");
    let o = lek(&[
        "evaluate",
        "--manifest",
        s(&dir.path().join("manifest.csv")),
        "--strategy",
        "large",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("synth_006"), "{stderr}");
    assert!(!stderr.contains('\x1b'));
    assert!(!out.exists());
}

#[test]
fn score_prints_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let truth = BinaryMask::from_fn(8, 8, |x, y| x < 4 && y < 4);
    let pred = BinaryMask::from_fn(8, 8, |x, y| x < 4 && y < 2);
    fs::write(dir.path().join("t.png"), encode_mask(&truth)).unwrap();
    fs::write(dir.path().join("p.png"), encode_mask(&pred)).unwrap();
    let o = lek(&[
        "score",
        s(&dir.path().join("p.png")),
        s(&dir.path().join("t.png")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["sensitivity"], 0.5);
    assert_eq!(v["specificity"], 1.0);
    assert_eq!(v["jsi"], 0.5);
}

#[test]
fn stage_commands_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);

    let img = RasterImage::from_fn(40, 30, |x, _| [180, 120, (x * 3) as u8]);
    fs::write(p("img.png"), encode_image(&img)).unwrap();
    let o = lek(&[
        "preprocess",
        s(&p("img.png")),
        "--p",
        "6",
        "--out",
        s(&p("pre.png")),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let pre = decode_image(&fs::read(p("pre.png")).unwrap()).unwrap();
    assert_eq!((pre.width(), pre.height()), (500, 375));

    let holey = BinaryMask::from_fn(20, 20, |x, y| {
        (3..15).contains(&x) && (3..15).contains(&y) && !(x == 8 && y == 8) || (x == 18 && y == 18)
    });
    fs::write(p("raw.png"), encode_mask(&holey)).unwrap();
    let o = lek(&[
        "postprocess",
        s(&p("raw.png")),
        "--min-area",
        "4",
        "--out",
        s(&p("clean.png")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let cleaned = decode_mask(&fs::read(p("clean.png")).unwrap(), 128).unwrap();
    assert_eq!(
        cleaned,
        BinaryMask::from_fn(20, 20, |x, y| (3..15).contains(&x) && (3..15).contains(&y))
    );

    let blank = BinaryMask::empty(20, 20);
    fs::write(p("blank.png"), encode_mask(&blank)).unwrap();
    for strategy in ["add", "large", "small"] {
        let o = lek(&[
            "ensemble",
            s(&p("blank.png")),
            s(&p("clean.png")),
            "--strategy",
            strategy,
            "--out",
            s(&p("fused.png")),
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(
            decode_mask(&fs::read(p("fused.png")).unwrap(), 128).unwrap(),
            cleaned
        );
    }

    let o = lek(&[
        "threshold",
        s(&p("clean.png")),
        "--cutoff",
        "1.5",
        "--out",
        s(&p("th.png")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_renders_markdown() {
    let o = lek(&[
        "report",
        s(&repo().join("fixtures/golden/evaluate-small.json")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let md = String::from_utf8(o.stdout).unwrap();
    assert!(md.contains("| Method | Accuracy | Dice | Jaccard Index | Sensitivity | Specificity |"));
    assert!(md.contains("SK denotes seborrhoeic keratosis."));
}

#[test]
fn generated_fixtures_match_committed_set() {
    let dir = tempfile::tempdir().unwrap();
    let o = lek(&["generate-fixtures", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    for rel in [
        "manifest.csv",
        "truth/synth_005.png",
        "maskrcnn/synth_009.png",
        "images/synth_000.png",
    ] {
        assert_eq!(
            fs::read(dir.path().join(rel)).unwrap(),
            fs::read(repo().join("fixtures/synthetic").join(rel)).unwrap(),
            "{rel}"
        );
    }
}
