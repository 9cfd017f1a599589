use std::path::Path;
use std::process::{Command, Output};

use snn_nlm::io::{load_image, save_image};
use snn_nlm::Image;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_snn-nlm"));
    c.env_remove("SNN_NLM_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn snn-nlm")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gray(w: usize, h: usize) -> Image {
    Image::from_fn(w, h, 1, |x, y, _| ((x * 9 + y * 5) % 32) as f64 / 40.0 + if x > w / 2 { 0.15 } else { 0.0 }).unwrap()
}

fn rgb(w: usize, h: usize) -> Image {
    Image::from_fn(w, h, 3, |x, y, c| 0.2 + 0.5 * x as f64 / w as f64 + 0.2 * y as f64 / h as f64 + 0.03 * c as f64).unwrap()
}

/// Value of `key=` on the line starting with `prefix`.
fn field(text: &str, prefix: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(prefix)).unwrap_or_else(|| panic!("no line {prefix}"));
    line.split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn toy_defaults_report_known_errors() {
    let o = run(&["toy"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!((field(&text, "nn analytic normalized", "mse") - 0.181).abs() < 0.005, "{text}");
    assert!((field(&text, "snn analytic normalized", "bias_sq") - 0.040).abs() < 0.005);
    assert!((field(&text, "nn analytic raw", "bias_sq") - 0.028786).abs() < 1e-6);
}

#[test]
fn toy_oracle_is_seeded_and_thread_independent() {
    let a = run(&["toy", "--oracle", "5000", "--seed", "7", "--threads", "1"]);
    let b = run(&["toy", "--oracle", "5000", "--seed", "7", "--threads", "3"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("nn oracle raw"));
}

#[test]
fn toy_curve_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let o = run(&["toy", "--curve", p(&path), "--curve-points", "11"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("mu_r,E_nn,Std_nn,E_snn,Std_snn"));
    assert_eq!(lines.count(), 11);
}

#[test]
fn toy_rejects_bad_scenario() {
    assert_eq!(run(&["toy", "--neighbors", "101"]).status.code(), Some(2));
    assert_eq!(run(&["toy", "--sigma", "0"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["denoise", "--in", "a.png"]).status.code(), Some(2));
}

#[test]
fn missing_input_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.png");
    let o = run(&["denoise", "--in", p(&dir.path().join("none.png")), "--out", p(&out), "--sigma", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(!o.stderr.is_empty());
}

#[test]
fn undecodable_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.png");
    std::fs::write(&bad, b"definitely not a png").unwrap();
    let out = dir.path().join("out.png");
    let o = run(&["denoise", "--in", p(&bad), "--out", p(&out), "--sigma", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn denoise_reports_quality_and_keeps_shape() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.png");
    let noisy = dir.path().join("noisy.pgm");
    let out = dir.path().join("out.png");
    save_image(&gray(40, 32), &clean).unwrap();
    assert!(run(&["add-noise", "--in", p(&clean), "--out", p(&noisy), "--sigma", "20", "--seed", "3"]).status.success());
    let o = run(&[
        "denoise", "--in", p(&noisy), "--out", p(&out), "--sigma", "20", "--neighbors", "16", "--offset", "0.8",
        "--reference", p(&clean),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("psnr=") && text.contains(" ssim="), "{text}");
    let img = load_image(&out).unwrap();
    assert_eq!((img.width(), img.height(), img.channels()), (40, 32, 1));
}

#[test]
fn classic_nlm_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    save_image(&gray(24, 24), &input).unwrap();
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    let common = ["--sigma", "15", "--neighbors", "361", "--search", "19", "--patch", "3"];
    let mut args = vec!["denoise", "--in", p(&input), "--out", p(&a), "--offset", "0"];
    args.extend(common);
    assert!(run(&args).status.success());
    let mut args = vec!["denoise", "--in", p(&input), "--out", p(&b), "--offset", "1", "--strategy", "snn"];
    args.extend(common);
    assert!(run(&args).status.success());
    // selecting every candidate makes the two rules identical
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn denoise_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    save_image(&rgb(36, 20), &input).unwrap();
    let outs: Vec<Vec<u8>> = ["1", "2", "8"]
        .iter()
        .map(|t| {
            let out = dir.path().join(format!("o{t}.ppm"));
            let o = bin()
                .args(["denoise", "--in", p(&input), "--out", p(&out), "--sigma", "25"])
                .env("SNN_NLM_THREADS", t)
                .output()
                .unwrap();
            assert!(o.status.success());
            std::fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
}

#[test]
fn zero_noise_export_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.png"), dir.path().join("b.png"), dir.path().join("c.png"));
    save_image(&rgb(16, 16), &a).unwrap();
    assert!(run(&["add-noise", "--in", p(&a), "--out", p(&b), "--sigma", "0"]).status.success());
    assert!(run(&["add-noise", "--in", p(&b), "--out", p(&c), "--sigma", "0"]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read(&b).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn bayer_noise_sidecar_drives_denoise() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.png");
    let noisy = dir.path().join("noisy.png");
    let out = dir.path().join("out.png");
    save_image(&rgb(32, 32), &clean).unwrap();
    let o = run(&["add-noise", "--in", p(&clean), "--out", p(&noisy), "--sigma", "20", "--domain", "bayer", "--pattern", "grbg"]);
    assert!(o.status.success());
    let sidecar = dir.path().join("noisy.png.sigma");
    let text = std::fs::read_to_string(&sidecar).unwrap();
    assert!(text.contains("sigma_r=") && text.contains("sigma_g=") && text.contains("sigma_b="));
    let o = run(&["denoise", "--in", p(&noisy), "--out", p(&out), "--sigma-sidecar", p(&sidecar), "--neighbors", "32"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(&sidecar, "sigma_r=1\n").unwrap();
    let o = run(&["denoise", "--in", p(&noisy), "--out", p(&out), "--sigma-sidecar", p(&sidecar)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bayer_rejects_odd_images() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("odd.png");
    save_image(&rgb(15, 16), &clean).unwrap();
    let o = run(&["add-noise", "--in", p(&clean), "--out", p(&dir.path().join("x.png")), "--sigma", "5", "--domain", "bayer"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_single_config() {
    let dir = tempfile::tempdir().unwrap();
    save_image(&gray(24, 24), dir.path().join("one.png")).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let csv = dir.path().join("out.csv");
    let o = run(&[
        "bench", "--dir", p(dir.path()), "--out", p(&csv), "--sigmas", "20", "--offsets", "0.8", "--neighbors", "16",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "image,sigma,strategy,n_neighbors,offset,psnr,ssim,wall_ms");
    assert!(lines[1].starts_with("one,20,snn,16,0.8,"));
    assert!(lines[2].starts_with("mean,20,snn,16,0.8,"));
}

#[test]
fn bench_empty_dir_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["bench", "--dir", p(dir.path())]).status.code(), Some(2));
}
