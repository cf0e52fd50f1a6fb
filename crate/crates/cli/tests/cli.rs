use std::path::Path;
use std::process::Command;

use zcsim::{cmd_ber, cmd_encode, cmd_gamma, cmd_psd, Config, RunManifest};

const SMALL: &str = r#"
seed = 5

[link]
n_symbols = 6

[gamma]
bandwidth_grid = [1.22, 2.44]
sequences = 2

[ber]
snr_db = [0.0, 6.0]
min_bits = 300
max_bits = 300

[psd]
blocks = 4
segment_len = 64
"#;

fn small() -> Config {
    Config::parse(SMALL).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn zcsim(dir: &Path, args: &[&str]) -> std::process::Output {
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    Command::new(env!("CARGO_BIN_EXE_zcsim"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("RUST_LOG")
        .env("RUST_BACKTRACE", "0")
        .output()
        .unwrap()
}

#[test]
fn encode_reproduces_table_rows() {
    assert_eq!(cmd_encode("000", 2, 1).unwrap().pattern, vec![1, 1, 1, 1, 1]);
    let r = cmd_encode("010", 2, 1).unwrap();
    assert_eq!(r.pattern, vec![1, 1, -1, -1, -1]);
    assert_eq!(r.crossings, vec![2]);
    assert_eq!(r.bits_per_symbol, 1.5);
    assert!((r.conversion_loss - (3f64.log2() - 1.5)).abs() < 1e-12);
    assert!(cmd_encode("", 2, 1).is_err());
    assert!(cmd_encode("01a", 2, 1).is_err());
    assert!(cmd_encode("0101", 2, 1).is_err());
}

#[test]
fn encode_binary_prints_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let out = zcsim(dir.path(), &["encode", "010"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("1 1 -1 -1 -1"));
    assert!(text.contains("bits per symbol: 1.5"));
    let bad = zcsim(dir.path(), &["encode", ""]);
    assert!(!bad.status.success());
}

#[test]
fn default_grid_is_the_fourteen_point_abscissa() {
    let g = Config::default().gamma.bandwidth_grid;
    let expected = [0.871, 0.938, 1.017, 1.109, 1.22, 1.356, 1.525, 1.743, 2.033, 2.44, 3.05, 4.067, 6.1, 12.2];
    assert_eq!(g.len(), 14);
    for (a, b) in g.iter().zip(expected) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn empty_grid_is_a_usage_error() {
    let mut cfg = small();
    cfg.gamma.bandwidth_grid.clear();
    let dir = tempfile::tempdir().unwrap();
    assert!(cmd_gamma(&cfg, dir.path()).is_err());
    assert!(!dir.path().join("gamma.csv").exists());
}

#[test]
fn gamma_rerun_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = cmd_gamma(&small(), a.path()).unwrap();
    let mb = cmd_gamma(&small(), b.path()).unwrap();
    let csv = read(a.path(), "gamma.csv");
    assert_eq!(csv, read(b.path(), "gamma.csv"));
    assert_eq!(ma.files, mb.files);
    assert!(csv.starts_with("wtx_t,scheme,gamma_mean,n_sequences\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(!csv.contains('\r'));
    assert!(read(a.path(), "gamma.svg").contains("<polyline"));
}

#[test]
fn ber_csv_holds_all_scheme_families() {
    let dir = tempfile::tempdir().unwrap();
    cmd_ber(&small(), dir.path()).unwrap();
    let csv = read(dir.path(), "ber.csv");
    assert!(csv.starts_with("snr_db,scheme,m_rx,m_tx,bits_sent,bit_errors,ber,erasures\n"));
    for scheme in ["zc", "fm", "qpsk"] {
        assert_eq!(csv.lines().filter(|l| l.split(',').nth(1) == Some(scheme)).count(), 2, "{csv}");
    }
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let (bits, errors, ber): (u64, u64, f64) = (cells[4].parse().unwrap(), cells[5].parse().unwrap(), cells[6].parse().unwrap());
        assert_eq!(ber, errors as f64 / bits as f64);
    }
}

#[test]
fn snr_list_flag_sets_the_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = zcsim(dir.path(), &["ber", "--snr-list", "0,2,4", "--scheme", "qpsk,zc"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("out"), "ber.csv");
    for scheme in ["zc", "qpsk"] {
        let snrs: Vec<&str> = csv.lines().filter(|l| l.split(',').nth(1) == Some(scheme)).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(snrs, vec!["0", "2", "4"]);
    }
    assert!(!csv.contains(",fm,"));
}

#[test]
fn environment_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_zcsim"))
        .arg("ber")
        .env("ZCSIM_CONFIG", &cfg)
        .env("ZCSIM_OUT", dir.path().join("env"))
        .env("ZCSIM_SEED", "77")
        .env("ZCSIM_SCHEME", "qpsk")
        .env("ZCSIM_SNR_LIST", "-2,3")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: RunManifest = serde_json::from_str(&read(&dir.path().join("env"), "manifest.json")).unwrap();
    assert_eq!(m.seed, 77);
    assert_eq!(read(&dir.path().join("env"), "ber.csv").lines().count(), 3);
}

#[test]
fn manifest_digests_track_output_bytes() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = small();
    cfg.ber.schemes = vec![zcprecode::sim::Scheme::Qpsk];
    let ma = cmd_ber(&cfg, a.path()).unwrap();
    let mb = cmd_ber(&cfg, b.path()).unwrap();
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.config_sha256, mb.config_sha256);
    cfg.seed += 1;
    let mc = cmd_ber(&cfg, c.path()).unwrap();
    assert_ne!(ma.config_sha256, mc.config_sha256);
    for (x, y) in ma.files.iter().zip(&mc.files) {
        let same_bytes = read(a.path(), &x.name) == read(c.path(), &y.name);
        assert_eq!(same_bytes, x.sha256 == y.sha256, "{}", x.name);
    }
    let on_disk: RunManifest = serde_json::from_str(&read(a.path(), "manifest.json")).unwrap();
    assert_eq!(on_disk.files, ma.files);
    assert!(!on_disk.partial);
}

#[test]
fn psd_outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let m = cmd_psd(&small(), dir.path()).unwrap();
    let names: Vec<&str> = m.files.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, vec!["psd.csv", "psd.svg"]);
    let csv = read(dir.path(), "psd.csv");
    assert!(csv.starts_with("source,freq_t,psd_db\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 64);
}

#[test]
fn bad_config_key_fails_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[gamma]\nsequence = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_zcsim")).args(["gamma", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sequence") && err.contains("line 2"), "{err}");
}
