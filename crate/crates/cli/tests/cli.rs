use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn workdir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(kind: &str, config: &str, dir: &Path, extra: &[&str]) -> std::process::Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_ssep-lab"))
        .arg(kind)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .env("RUST_BACKTRACE", "0")
        .output()
        .unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

#[test]
fn unbiased_pde_reproduces_the_stationary_kernel() {
    let dir = workdir("pde");
    let out = run("pde", "bias = \"zero\"\n[params]\nn = 10\nrho_minus = 0.2\nrho_plus = 0.8\n[grid]\nm = 64\n", &dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.join("out/kernel.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert!(header.iter().all(|h| h.contains('[')), "{header:?}");
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let v: Vec<f64> = rec.iter().map(|s| s.parse().unwrap()).collect();
        let (x, y) = (v[0].min(v[1]), v[0].max(v[1]));
        let k0 = -0.5 * 0.09 * (1.0 + x) * (1.0 - y);
        assert!((v[3] - k0).abs() <= 5e-3);
        rows += 1;
    }
    assert_eq!(rows, 65 * 66 / 2);
    assert!(dir.join("out/manifest.json").exists());
}

#[test]
fn reversible_dv_report_matches_the_dirichlet_form() {
    let dir = workdir("dv");
    let out = run("dv", "seed = 5\n[params]\nn = 2\nrho_minus = 0.5\nrho_plus = 0.5\n", &dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir);
    assert_eq!(r["results"]["reversible"], Value::Bool(true));
    let gap = r["results"]["max_abs_variational_minus_dirichlet_form"].as_f64().unwrap();
    assert!(gap <= 1e-6, "{gap}");
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let cfg = "seed = 9\n[params]\nn = 6\n[simulate]\ntime = 20.0\nburn_in = 2.0\nbatches = 4\nreplicas = 3\n";
    let files = ["pairs.csv", "report.json"];
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "2", "3"].iter().enumerate() {
        let dir = workdir(&format!("det{k}"));
        let out = run("simulate", cfg, &dir, &["--threads", threads]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(files.map(|f| fs::read(dir.join("out").join(f)).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));

    let dir = workdir("det_seed");
    run("simulate", cfg, &dir, &["--seed", "10"]);
    assert_ne!(fs::read(dir.join("out/pairs.csv")).unwrap(), outputs[0][0]);
}

#[test]
fn configuration_errors_name_the_field() {
    let dir = workdir("bad");
    let out = run("pde", "[grid]\nm = 7\n", &dir, &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.m"));

    let out = run("simulate", "[params]\nn = 4\n", &dir, &[]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed: required"));

    let out = run("pde", "[params]\nnn = 4\n", &dir, &[]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nn"));

    let out = run("pde", "bias = \"gaussian\"\n", &dir, &[]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bias: unknown form"));
}
