//! Batch driver for zero-crossing precoding experiments: margin versus
//! bandwidth, BER versus SNR and transmit spectra, written as CSV tables,
//! SVG charts and a manifest of content digests.

pub mod config;
pub mod output;
pub mod svg;

use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use zcprecode::sim::{estimate_psd, run_ber, run_gamma_sweep, BerRecord, GammaRecord, GammaSweepConfig, PsdEstimate, Scheme, SimConfig};
use zcprecode::zc::{GrayCoder, ZcCodebook};

pub use config::{Config, Overrides};
pub use output::{OutputDir, RunManifest};

use output::{sha256_hex, Csv};
use svg::{Chart, Series};

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn manifest(cfg: &Config, command: &str, started: String, partial: bool) -> Result<RunManifest> {
    Ok(RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: cfg.seed,
        config_sha256: sha256_hex(cfg.to_toml()?.as_bytes()),
        started,
        finished: now(),
        partial,
        files: Vec::new(),
    })
}

pub fn gamma_csv(records: &[GammaRecord]) -> String {
    let mut csv = Csv::new(&["wtx_t", "scheme", "gamma_mean", "n_sequences"]);
    for r in records {
        csv.row(&[&r.wtx_t, &r.scheme, &r.gamma_mean, &r.n_sequences]);
    }
    csv.as_str().to_owned()
}

pub fn ber_csv(records: &[BerRecord]) -> String {
    let mut csv = Csv::new(&["snr_db", "scheme", "m_rx", "m_tx", "bits_sent", "bit_errors", "ber", "erasures"]);
    for r in records {
        csv.row(&[&r.snr_db, &r.scheme, &r.m_rx, &r.m_tx, &r.bits_sent, &r.bit_errors, &r.ber, &r.erasures]);
    }
    csv.as_str().to_owned()
}

pub fn psd_csv(estimates: &[PsdEstimate]) -> String {
    let mut csv = Csv::new(&["source", "freq_t", "psd_db"]);
    for e in estimates {
        let name = source_name(e);
        for (f, p) in e.freq.iter().zip(&e.psd_db) {
            csv.row(&[&name, f, p]);
        }
    }
    csv.as_str().to_owned()
}

fn source_name(e: &PsdEstimate) -> String {
    format!("{:?}", e.source).to_ascii_lowercase()
}

fn by_scheme<T>(records: &[T], scheme_of: impl Fn(&T) -> Scheme, point: impl Fn(&T) -> (f64, f64)) -> Vec<Series> {
    let mut schemes: Vec<Scheme> = records.iter().map(&scheme_of).collect();
    schemes.dedup();
    schemes
        .into_iter()
        .map(|s| Series {
            name: s.to_string(),
            points: records.iter().filter(|r| scheme_of(r) == s).map(&point).collect(),
        })
        .collect()
}

fn check_gamma(cfg: &GammaSweepConfig) -> Result<()> {
    cfg.solver.validate()?;
    if cfg.bandwidth_grid.is_empty() {
        bail!("the bandwidth grid is empty; set gamma.bandwidth_grid");
    }
    if cfg.sequences == 0 {
        bail!("gamma.sequences must be positive");
    }
    if cfg.schemes.contains(&Scheme::Qpsk) {
        bail!("the margin sweep covers zc and fm only");
    }
    Ok(())
}

/// Margin-versus-bandwidth sweep: `gamma.csv`, `gamma.svg`, `manifest.json`.
/// A campaign error still flushes the finished schemes, flagged partial.
pub fn cmd_gamma(cfg: &Config, out: &Path) -> Result<RunManifest> {
    let started = now();
    let gc = cfg.gamma_config();
    check_gamma(&gc)?;
    let mut records = Vec::new();
    let mut failure = None;
    for &scheme in &gc.schemes {
        match run_gamma_sweep(&GammaSweepConfig { schemes: vec![scheme], ..gc.clone() }) {
            Ok(r) => records.extend(r),
            Err(e) => {
                failure = Some(anyhow!(e).context(format!("{scheme} margin sweep")));
                break;
            }
        }
    }
    let mut dir = OutputDir::create(out)?;
    dir.write("gamma.csv", &gamma_csv(&records))?;
    let chart = Chart {
        title: "Margin versus bandwidth",
        x_label: "W_Tx·T",
        y_label: "mean γ",
        log_y: true,
        series: by_scheme(&records, |r| r.scheme, |r| (r.wtx_t, r.gamma_mean)),
    };
    dir.write("gamma.svg", &chart.render())?;
    let m = dir.finish(manifest(cfg, "gamma", started, failure.is_some())?)?;
    match failure {
        Some(e) => Err(e.context("partial results written")),
        None => Ok(m),
    }
}

/// BER versus SNR: `ber.csv`, `ber.svg`, `manifest.json`.
pub fn cmd_ber(cfg: &Config, out: &Path) -> Result<RunManifest> {
    let started = now();
    let sc = cfg.ber_config();
    sc.validate()?;
    let mut records = Vec::new();
    let mut failure = None;
    for &scheme in &sc.schemes {
        match run_ber(&SimConfig { schemes: vec![scheme], ..sc.clone() }) {
            Ok(r) => {
                for rec in &r {
                    log::info!("{scheme} {} dB: {} errors in {} bits", rec.snr_db, rec.bit_errors, rec.bits_sent);
                }
                records.extend(r)
            }
            Err(e) => {
                failure = Some(anyhow!(e).context(format!("{scheme} BER campaign")));
                break;
            }
        }
    }
    let mut dir = OutputDir::create(out)?;
    dir.write("ber.csv", &ber_csv(&records))?;
    let chart = Chart {
        title: "BER versus SNR",
        x_label: "SNR [dB]",
        y_label: "BER",
        log_y: true,
        series: by_scheme(&records, |r| r.scheme, |r| (r.snr_db, r.ber)),
    };
    dir.write("ber.svg", &chart.render())?;
    let m = dir.finish(manifest(cfg, "ber", started, failure.is_some())?)?;
    match failure {
        Some(e) => Err(e.context("partial results written")),
        None => Ok(m),
    }
}

/// Transmit spectra: `psd.csv`, `psd.svg`, `manifest.json`.
pub fn cmd_psd(cfg: &Config, out: &Path) -> Result<RunManifest> {
    let started = now();
    let estimates = estimate_psd(&cfg.psd_config())?;
    for e in &estimates {
        log::info!("{}: −30 dB bandwidth {}·(1/T)", source_name(e), e.bandwidth_30db);
    }
    let mut dir = OutputDir::create(out)?;
    dir.write("psd.csv", &psd_csv(&estimates))?;
    let chart = Chart {
        title: "Transmit power spectral density",
        x_label: "f·T",
        y_label: "PSD [dB]",
        log_y: false,
        series: estimates
            .iter()
            .map(|e| Series {
                name: source_name(e),
                points: e.freq.iter().zip(&e.psd_db).map(|(&f, &p)| (f, p.max(-80.0))).collect(),
            })
            .collect(),
    };
    dir.write("psd.svg", &chart.render())?;
    dir.finish(manifest(cfg, "psd", started, false)?)
}

/// All three campaigns into one directory under a single manifest.
pub fn cmd_all(cfg: &Config, out: &Path) -> Result<RunManifest> {
    let started = now();
    let mut files = Vec::new();
    let mut failure = None;
    for (name, run) in [("gamma", cmd_gamma as fn(&Config, &Path) -> Result<RunManifest>), ("ber", cmd_ber), ("psd", cmd_psd)] {
        match run(cfg, out) {
            Ok(m) => files.extend(m.files),
            Err(e) => {
                // a failed campaign may still have flushed partial tables
                if let Ok(text) = std::fs::read_to_string(out.join("manifest.json")) {
                    if let Ok(m) = serde_json::from_str::<RunManifest>(&text) {
                        if m.command == name && m.partial {
                            files.extend(m.files);
                        }
                    }
                }
                failure = Some(e.context(format!("{name} campaign")));
                break;
            }
        }
    }
    let mut dir = OutputDir::create(out)?;
    dir.adopt(files);
    let m = dir.finish(manifest(cfg, "all", started, failure.is_some())?)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(m),
    }
}

/// Target pattern for a bit string, with its zero crossings.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeReport {
    pub pattern: Vec<i8>,
    /// Sample indices `k` with `c[k] ≠ c[k−1]`.
    pub crossings: Vec<usize>,
    pub bits_per_symbol: f64,
    pub conversion_loss: f64,
}

impl fmt::Display for EncodeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens: Vec<String> = self.pattern.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", tokens.join(" "))?;
        if self.crossings.is_empty() {
            writeln!(f, "crossings: none")?;
        } else {
            let pos: Vec<String> = self.crossings.iter().map(|k| k.to_string()).collect();
            writeln!(f, "crossings: {}", pos.join(" "))?;
        }
        writeln!(f, "bits per symbol: {}", self.bits_per_symbol)?;
        writeln!(f, "conversion loss: {} bits per symbol", self.conversion_loss)
    }
}

/// Gray-map `bits` and build the pattern that starts with pilot `pb`.
pub fn cmd_encode(bits: &str, m_rx: usize, pb: i8) -> Result<EncodeReport> {
    if bits.is_empty() {
        bail!("empty bit string");
    }
    let parsed: Vec<u8> = bits
        .chars()
        .enumerate()
        .map(|(i, c)| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(anyhow!("invalid bit character {other:?} at position {i}")),
        })
        .collect::<Result<_>>()?;
    let gray = GrayCoder::new(m_rx).with_context(|| format!("M_Rx = {m_rx}"))?;
    let symbols = gray.bits_to_symbols(&parsed)?;
    let pattern = ZcCodebook::new(m_rx, pb)?.encode_pattern(&symbols)?;
    let crossings = (1..pattern.len()).filter(|&k| pattern[k] != pattern[k - 1]).collect();
    let report = EncodeReport {
        pattern,
        crossings,
        bits_per_symbol: gray.bits_per_symbol(),
        conversion_loss: gray.conversion_loss(),
    };
    log::info!("conversion loss of {} bits per symbol", report.conversion_loss);
    Ok(report)
}
