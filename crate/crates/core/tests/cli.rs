use std::fs;
use std::path::{Path, PathBuf};

use blupkit::cli::{self, read_table};
use blupkit::gpr::gpr_predict;
use blupkit::kernels::{semivariogram_of, Dataset, KernelSpec, MeanSpec};
use blupkit::kriging::{ordinary_krige, simple_krige, universal_krige};
use blupkit::kernels::Basis;
use nalgebra::DMatrix;
use tempfile::TempDir;

const SE_OK: &str = r#"{"kernel": {"family": "squared_exponential", "variance": 1.0, "lengthscales": [1.0]},
 "mean": {"type": "constant_unknown"}, "noise_variance": 0.0, "variant": "ok"}"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn blupkit(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["blupkit"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p: PathBuf = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn predict_two_point_ok() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "d.csv", "x1,y\n0,1\n1,2\n");
    let cfg = write(dir.path(), "m.json", SE_OK);
    let r = blupkit(&["predict", "--data", &data, "--config", &cfg, "--grid", "0.5:0.5:1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "x1,mean,error_variance");
    let d = Dataset::from_1d(&[0.0, 1.0], &[1.0, 2.0], 0.0).unwrap();
    let k = KernelSpec::squared_exponential(1.0, 1.0).unwrap();
    let p = ordinary_krige(&d, &k, &[0.5]).unwrap();
    assert_eq!(lines[1], format!("0.5,{},{}", p.mean, p.error_variance));
    let row = &rows(&r.stdout)[0];
    assert!((row[1] - 1.5).abs() < 1e-12);
}

#[test]
fn predict_sk_at_training_point() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "d.csv", "x1,y\n0,1\n1,2\n2.5,0.3\n");
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{"kernel": {"family": "matern32", "variance": 1.5, "lengthscales": [0.7]},
            "mean": {"type": "known", "value": 0.5}, "variant": "sk"}"#,
    );
    let out = dir.path().join("out.csv");
    let r = blupkit(&["predict", "--data", &data, "--config", &cfg, "--grid", "1:1:1", "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let row = &rows(&fs::read_to_string(out).unwrap())[0];
    assert!((row[1] - 2.0).abs() <= 1e-12);
    assert!(row[2].abs() <= 1e-12);
}

#[test]
fn predict_matches_library_for_every_variant() {
    let dir = TempDir::new().unwrap();
    let xs = [0.0, 0.4, 1.1, 1.9, 2.6, 3.3];
    let ys = [1.0, 0.2, -0.4, 0.9, 1.7, 1.1];
    let body: String = std::iter::once("x1,y\n".to_string())
        .chain(xs.iter().zip(ys).map(|(x, y)| format!("{x},{y}\n")))
        .collect();
    let data = write(dir.path(), "d.csv", &body);
    let d = Dataset::from_1d(&xs, &ys, 0.0).unwrap();
    let k = KernelSpec::squared_exponential(1.0, 0.9).unwrap();
    let kernel = r#"{"family": "squared_exponential", "variance": 1.0, "lengthscales": [0.9]}"#;
    let grid = ["-0.5:4:10"];
    let targets: Vec<f64> = (0..10).map(|i| if i == 9 { 4.0 } else { -0.5 + 0.5 * i as f64 }).collect();

    let cases = [
        ("sk", r#"{"type": "known", "value": 0.3}"#),
        ("ok", r#"{"type": "constant_unknown"}"#),
        ("uk", r#"{"type": "basis", "functions": ["1", "x1"]}"#),
        ("gpr", r#"{"type": "known", "value": 0.3}"#),
        ("gpr-basis", r#"{"type": "basis", "functions": ["1", "x1"]}"#),
    ];
    for (variant, mean) in cases {
        let cfg = write(
            dir.path(),
            "m.json",
            &format!(r#"{{"kernel": {kernel}, "mean": {mean}, "variant": "{variant}"}}"#),
        );
        let r = blupkit(&["predict", "--data", &data, "--config", &cfg, "--grid", grid[0]]);
        assert_eq!(r.code, 0, "{variant}: {}", r.stderr);
        let got = rows(&r.stdout);
        for (i, &t) in targets.iter().enumerate() {
            let (m, v) = match variant {
                "sk" => {
                    let p = simple_krige(&d, &k, &MeanSpec::constant(0.3), &[t]).unwrap();
                    (p.mean, p.error_variance)
                }
                "ok" => {
                    let p = ordinary_krige(&d, &k, &[t]).unwrap();
                    (p.mean, p.error_variance)
                }
                "uk" | "gpr-basis" => {
                    let p = universal_krige(&d, &k, &Basis::linear(1), &[t]).unwrap();
                    (p.mean, p.error_variance)
                }
                _ => {
                    let p = gpr_predict(&d, &k, &MeanSpec::constant(0.3), &DMatrix::from_element(1, 1, t)).unwrap();
                    (p.mean[0], p.covariance[(0, 0)])
                }
            };
            assert_eq!(got[i][0], t);
            if variant == "gpr-basis" {
                assert!((got[i][1] - m).abs() <= 1e-10 && (got[i][2] - v).abs() <= 1e-10);
            } else {
                assert_eq!(got[i][1].to_bits(), m.to_bits(), "{variant} mean at {t}");
                assert_eq!(got[i][2].to_bits(), v.to_bits(), "{variant} variance at {t}");
            }
        }
    }
}

#[test]
fn predict_two_dimensional_points_file() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "d.csv", "x1,x2,y\n0,0,1\n1,0,2\n0,1,0\n1,1,1.5\n");
    let pts = write(dir.path(), "p.csv", "x1,x2\n0.5,0.5\n0,0\n");
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{"kernel": {"family": "exponential", "variance": 1.0, "lengthscales": [1.0, 2.0]},
            "mean": {"type": "constant_unknown"}}"#,
    );
    let r = blupkit(&["predict", "--data", &data, "--config", &cfg, "--points", &pts]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("x1,x2,mean,error_variance\n"));
    let got = rows(&r.stdout);
    assert_eq!(got.len(), 2);
    assert!((got[1][2] - 1.0).abs() < 1e-12);

    let r = blupkit(&["predict", "--data", &data, "--config", &cfg, "--grid", "0:1:2", "--grid", "0:1:3"]);
    assert_eq!(r.code, 0);
    let got = rows(&r.stdout);
    assert_eq!(got.len(), 6);
    assert_eq!((got[1][0], got[1][1]), (0.0, 0.5));
}

#[test]
fn malformed_row_is_reported() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "d.csv", "x1,y\n0,1\n1,oops\n2,3\n");
    let cfg = write(dir.path(), "m.json", SE_OK);
    let r = blupkit(&["predict", "--data", &data, "--config", &cfg, "--grid", "0:1:2"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("row 2") && r.stderr.contains("line 3"), "{}", r.stderr);

    let short = write(dir.path(), "s.csv", "x1,y\n0,1\n1\n");
    let r = blupkit(&["predict", "--data", &short, "--config", &cfg, "--grid", "0:1:2"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("row 2"), "{}", r.stderr);
}

#[test]
fn bad_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "d.csv", "x1,y\n0,1\n1,2\n");
    let cfg = write(dir.path(), "m.json", SE_OK);
    let broken = write(dir.path(), "b.json", "{\"kernel\": ");
    let odd = write(dir.path(), "v.json", &SE_OK.replace("\"ok\"", "\"bogus\""));
    for args in [
        vec!["predict", "--data", &data, "--config", &broken, "--grid", "0:1:2"],
        vec!["predict", "--data", &data, "--config", &odd, "--grid", "0:1:2"],
        vec!["predict", "--data", &data, "--config", &cfg],
        vec!["predict", "--data", &data, "--config", &cfg, "--grid", "0:1"],
        vec!["predict", "--data", "missing.csv", "--config", &cfg, "--grid", "0:1:2"],
        vec!["frobnicate"],
    ] {
        assert_eq!(blupkit(&args).code, 2, "{args:?}");
    }
    assert_eq!(blupkit(&["--help"]).code, 0);
}

#[test]
fn variogram_columns() {
    let dir = TempDir::new().unwrap();
    let flat = write(dir.path(), "c.csv", "x1,y\n0,3\n0.5,3\n1.2,3\n2,3\n");
    let r = blupkit(&["variogram", "--data", &flat, "--bins", "4", "--max-lag", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mut lines = r.stdout.lines();
    assert_eq!(lines.next(), Some("lag_center,pair_count,empirical_semivariance"));
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        if f[1] != "0" {
            assert_eq!(f[2], "0");
        } else {
            assert_eq!(f[2], "");
        }
    }

    let pair = write(dir.path(), "p.csv", "x1,y\n0,1\n0.7,4\n");
    let cfg = write(dir.path(), "m.json", SE_OK);
    let r = blupkit(&["variogram", "--data", &pair, "--bins", "1", "--max-lag", "1", "--config", &cfg]);
    assert_eq!(r.code, 0);
    let line = r.stdout.lines().nth(1).unwrap();
    let k = KernelSpec::squared_exponential(1.0, 1.0).unwrap();
    assert_eq!(line, format!("0.5,1,4.5,{}", semivariogram_of(&k, 0.5).unwrap()));

    let one = write(dir.path(), "o.csv", "x1,y\n0,1\n");
    assert_eq!(blupkit(&["variogram", "--data", &one, "--bins", "1", "--max-lag", "1"]).code, 2);
}

#[test]
fn verify_passes_and_skips_when_noisy() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "d.csv", "x1,y\n0,1\n0.3,2\n0.9,1.4\n1.7,-0.5\n2.5,0.2\n");
    let cfg = write(dir.path(), "m.json", SE_OK);
    let r = blupkit(&["verify", "--data", &data, "--config", &cfg, "--grid", "-1:3:9"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert_eq!(r.stdout.lines().count(), 6);
    assert!(r.stdout.lines().all(|l| l.ends_with("pass")));

    let noisy = write(dir.path(), "n.json", &SE_OK.replace("\"noise_variance\": 0.0", "\"noise_variance\": 0.1"));
    let r = blupkit(&["verify", "--data", &data, "--config", &noisy, "--grid", "-1:3:9"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("skipped (noisy)"));
}

#[test]
fn verify_duplicate_points_is_singular() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "d.csv", "x1,y\n0,1\n0,2\n1,0\n");
    let cfg = write(dir.path(), "m.json", SE_OK);
    let r = blupkit(&["verify", "--data", &data, "--config", &cfg, "--grid", "0:1:3"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.contains("singular"));
}

const STUDY: &str = r#"{"kernel": {"family": "squared_exponential", "variance": 1.0, "lengthscales": [0.2]},
  "true_mean": {"type": "known", "value": 5.0}, "noise_variance": 0.01,
  "n_train": 12, "n_test": 5, "domain": [[0.0, 1.0]], "replicates": 3, "seed": 9,
  "predictors": ["ls", "sk", "ok", "uk", "gpr"]}"#;

#[test]
fn study_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.json", STUDY);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let r = blupkit(&["study", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let report: serde_json::Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(report["seed"], 9);
    assert_eq!(report["predictors"].as_array().unwrap().len(), 5);
    let rate = report["gpr_coverage"]["rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));

    let r = blupkit(&["study", "--config", &cfg, "--seed", "10"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("\"seed\": 10"));
    assert_ne!(r.stdout.as_bytes(), ta.as_slice());
}

#[test]
fn study_failures() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "b.json", &STUDY.replace("\"replicates\": 3", "\"replicates\": 0"));
    assert_eq!(blupkit(&["study", "--config", &bad]).code, 2);
    let hopeless = write(
        dir.path(),
        "h.json",
        &STUDY
            .replace("[[0.0, 1.0]]", "[[0.5, 0.5]]")
            .replace(r#"["ls", "sk", "ok", "uk", "gpr"]"#, r#"["uk"]"#),
    );
    let r = blupkit(&["study", "--config", &hopeless]);
    assert_eq!(r.code, 4, "{}", r.stderr);
}

#[test]
fn points_table_reader() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "t.csv", "y, x2 ,x1\n1, 2, 3\n");
    let t = read_table(Path::new(&p), true).unwrap();
    assert_eq!(t.x.row(0).iter().copied().collect::<Vec<_>>(), vec![3.0, 2.0]);
    assert_eq!(t.y.unwrap()[0], 1.0);
    let q = write(dir.path(), "q.csv", "x1,x3,y\n1,2,3\n");
    assert!(read_table(Path::new(&q), true).is_err());
    let inf = write(dir.path(), "i.csv", "x1,y\ninf,1\n");
    assert!(read_table(Path::new(&inf), true).is_err());
}
