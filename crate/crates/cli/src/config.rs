//! Run configuration: one TOML document with a section per campaign.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use zcprecode::channel::ChannelParams;
use zcprecode::qcqp::SolverSettings;
use zcprecode::sim::{default_bandwidth_grid, GammaSweepConfig, LinkConfig, PsdConfig, PsdSource, Scheme, SimConfig};
use zcprecode::zc::RhoChaining;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub link: LinkConfig,
    pub channel: ChannelParams,
    pub solver: SolverSettings,
    pub gamma: GammaSection,
    pub ber: BerSection,
    pub psd: PsdSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            link: LinkConfig::default(),
            channel: ChannelParams::default(),
            solver: SolverSettings::default(),
            gamma: GammaSection::default(),
            ber: BerSection::default(),
            psd: PsdSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaSection {
    pub schemes: Vec<Scheme>,
    /// `W_Tx·T` values.
    pub bandwidth_grid: Vec<f64>,
    pub sequences: usize,
    pub e_tx: f64,
    pub pilot: i8,
}

impl Default for GammaSection {
    fn default() -> Self {
        let d = GammaSweepConfig::default();
        GammaSection {
            schemes: d.schemes,
            bandwidth_grid: default_bandwidth_grid(d.link.roll_off_tx),
            sequences: d.sequences,
            e_tx: d.e_tx,
            pilot: d.pilot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BerSection {
    pub schemes: Vec<Scheme>,
    pub snr_db: Vec<f64>,
    pub e0: f64,
    pub pilot: i8,
    pub chaining: RhoChaining,
    pub min_bits: u64,
    pub max_bits: u64,
    pub target_errors: u64,
    pub max_trials: u64,
    pub batch_trials: usize,
}

impl Default for BerSection {
    fn default() -> Self {
        let d = SimConfig::default();
        BerSection {
            schemes: d.schemes,
            snr_db: d.snr_db,
            e0: d.e0,
            pilot: d.pilot,
            chaining: d.chaining,
            min_bits: d.min_bits,
            max_bits: d.max_bits,
            target_errors: d.target_errors,
            max_trials: d.max_trials,
            batch_trials: d.batch_trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdSection {
    pub sources: Vec<PsdSource>,
    pub blocks: usize,
    pub oversample: usize,
    pub segment_len: usize,
    pub pulse_span: f64,
    pub pilot: i8,
}

impl Default for PsdSection {
    fn default() -> Self {
        let d = PsdConfig::default();
        PsdSection {
            sources: d.sources,
            blocks: d.blocks,
            oversample: d.oversample,
            segment_len: d.segment_len,
            pulse_span: d.pulse_span,
            pilot: d.pilot,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub snr_list: Option<Vec<f64>>,
    /// Symbol sequences (gamma), blocks (psd) or channel trials per SNR point (ber).
    pub trials: Option<usize>,
    /// Schemes for the gamma and ber campaigns.
    pub schemes: Option<Vec<Scheme>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(snr) = &o.snr_list {
            if snr.is_empty() {
                bail!("--snr-list is empty");
            }
            self.ber.snr_db = snr.clone();
        }
        if let Some(n) = o.trials {
            if n == 0 {
                bail!("--trials must be positive");
            }
            self.gamma.sequences = n;
            self.psd.blocks = n;
            self.ber.max_trials = n as u64;
        }
        if let Some(s) = &o.schemes {
            if s.is_empty() {
                bail!("--scheme is empty");
            }
            self.gamma.schemes = s.clone();
            self.ber.schemes = s.clone();
        }
        Ok(())
    }

    pub fn gamma_config(&self) -> GammaSweepConfig {
        GammaSweepConfig {
            link: self.link,
            schemes: self.gamma.schemes.clone(),
            bandwidth_grid: self.gamma.bandwidth_grid.clone(),
            sequences: self.gamma.sequences,
            e_tx: self.gamma.e_tx,
            pilot: self.gamma.pilot,
            seed: self.seed,
            solver: self.solver,
        }
    }

    pub fn ber_config(&self) -> SimConfig {
        let b = &self.ber;
        SimConfig {
            link: self.link,
            channel: self.channel,
            schemes: b.schemes.clone(),
            snr_db: b.snr_db.clone(),
            e0: b.e0,
            seed: self.seed,
            pilot: b.pilot,
            chaining: b.chaining,
            min_bits: b.min_bits,
            max_bits: b.max_bits,
            target_errors: b.target_errors,
            max_trials: b.max_trials,
            batch_trials: b.batch_trials,
            solver: self.solver,
        }
    }

    pub fn psd_config(&self) -> PsdConfig {
        let p = &self.psd;
        PsdConfig {
            link: self.link,
            sources: p.sources.clone(),
            blocks: p.blocks,
            oversample: p.oversample,
            segment_len: p.segment_len,
            pulse_span: p.pulse_span,
            pilot: p.pilot,
            seed: self.seed,
            solver: self.solver,
        }
    }
}
