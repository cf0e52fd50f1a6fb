//! Experiment campaigns: margin versus bandwidth, Monte Carlo BER, the QPSK
//! reference and transmit power spectral density.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams, NoiseModel};
use crate::error::{Error, Result};
use crate::precoder::{precode, PrecodeContext};
use crate::qcqp::SolverSettings;
use crate::rng::{stream_rng, Stream};
use crate::signal::{convolve, BlockModel, PulseKind, PulseSpec, SystemDims};
use crate::zc::{GrayCoder, Mapping, RhoChaining};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Zc,
    Fm,
    Qpsk,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Zc => "zc",
            Scheme::Fm => "fm",
            Scheme::Qpsk => "qpsk",
        }
    }

    pub fn mapping(&self, m_rx: usize, pilot: i8, chaining: RhoChaining) -> Result<Mapping> {
        match self {
            Scheme::Zc => {
                let Mapping::ZeroCrossing { codebook, .. } = Mapping::zero_crossing(m_rx, pilot)? else {
                    unreachable!()
                };
                Ok(Mapping::ZeroCrossing { codebook, chaining })
            }
            Scheme::Fm => Mapping::forward(m_rx, pilot),
            Scheme::Qpsk => Err(Error::Parameter("qpsk has no sign-pattern mapping".into())),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zc" => Ok(Scheme::Zc),
            "fm" => Ok(Scheme::Fm),
            "qpsk" => Ok(Scheme::Qpsk),
            other => Err(Error::Parameter(format!("unknown scheme '{other}' (expected zc, fm or qpsk)"))),
        }
    }
}

/// Block geometry and pulse shaping shared by every campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub n_symbols: usize,
    pub m_tx: usize,
    pub m_rx: usize,
    pub roll_off_tx: f64,
    pub roll_off_rx: f64,
    /// Signaling interval relative to the symbol duration, `T_s/T`.
    pub ts_over_t: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig { n_symbols: 50, m_tx: 2, m_rx: 2, roll_off_tx: 0.22, roll_off_rx: 0.22, ts_over_t: 1.0 }
    }
}

impl LinkConfig {
    pub fn dims(&self) -> Result<SystemDims> {
        SystemDims::new(self.n_symbols, self.m_tx, self.m_rx, 1.0)
    }

    /// Transmit bandwidth times symbol duration, `W_Tx·T`.
    pub fn wtx_t(&self) -> f64 {
        (1.0 + self.roll_off_tx) / self.ts_over_t
    }

    pub fn tx_pulse(&self) -> Result<PulseSpec> {
        PulseSpec::new(PulseKind::RaisedCosine, self.roll_off_tx, self.ts_over_t)
    }

    pub fn rx_pulse(&self) -> Result<PulseSpec> {
        PulseSpec::new(PulseKind::RootRaisedCosine, self.roll_off_rx, self.ts_over_t)
    }

    pub fn block_model(&self) -> Result<BlockModel> {
        BlockModel::new(self.dims()?, self.tx_pulse()?, self.rx_pulse()?)
    }

    /// Same link at a different `W_Tx·T`.
    pub fn at_bandwidth(&self, wtx_t: f64) -> Result<Self> {
        if !(wtx_t.is_finite() && wtx_t > 0.0) {
            return Err(Error::Parameter(format!("W_Tx·T = {wtx_t} must be positive")));
        }
        Ok(LinkConfig { ts_over_t: (1.0 + self.roll_off_tx) / wtx_t, ..*self })
    }
}

/// `T_s/T` ratios 1.4, 1.3, …, 0.1 expressed as `W_Tx·T`, ascending.
pub fn default_bandwidth_grid(roll_off: f64) -> Vec<f64> {
    (1..=14).map(|k| (1.0 + roll_off) / (k as f64 / 10.0)).rev().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaSweepConfig {
    pub link: LinkConfig,
    pub schemes: Vec<Scheme>,
    /// `W_Tx·T` values.
    pub bandwidth_grid: Vec<f64>,
    /// Random symbol sequences averaged per point.
    pub sequences: usize,
    /// Per-user block energy `E_Tx`.
    pub e_tx: f64,
    pub pilot: i8,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl Default for GammaSweepConfig {
    fn default() -> Self {
        GammaSweepConfig {
            link: LinkConfig::default(),
            schemes: vec![Scheme::Zc, Scheme::Fm],
            bandwidth_grid: default_bandwidth_grid(0.22),
            sequences: 20,
            e_tx: 1.0,
            pilot: 1,
            seed: 1,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaRecord {
    pub wtx_t: f64,
    pub scheme: Scheme,
    pub gamma_mean: f64,
    pub n_sequences: usize,
    /// Sequences whose solve did not reach optimality; excluded from the mean.
    pub failures: usize,
}

fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

fn bits_per_block(gray: &GrayCoder, n_symbols: usize) -> Result<usize> {
    if !n_symbols.is_multiple_of(gray.block_symbols()) {
        return Err(Error::Parameter(format!(
            "N = {n_symbols} is not a multiple of the {}-symbol Gray block",
            gray.block_symbols()
        )));
    }
    Ok(n_symbols / gray.block_symbols() * gray.block_bits())
}

/// Mean optimal margin per bandwidth point in the single-stream setting
/// (`β = 1`), over random symbol sequences shared by all schemes.
pub fn run_gamma_sweep(cfg: &GammaSweepConfig) -> Result<Vec<GammaRecord>> {
    cfg.solver.validate()?;
    if cfg.bandwidth_grid.is_empty() {
        return Err(Error::Parameter("bandwidth grid is empty".into()));
    }
    if cfg.sequences == 0 {
        return Err(Error::Parameter("need at least one symbol sequence".into()));
    }
    for s in &cfg.schemes {
        if *s == Scheme::Qpsk {
            return Err(Error::Parameter("the margin sweep covers zc and fm only".into()));
        }
    }
    let gray = GrayCoder::new(cfg.link.m_rx)?;
    let n_bits = bits_per_block(&gray, cfg.link.n_symbols)?;
    let sequences: Vec<Vec<usize>> = (0..cfg.sequences)
        .map(|i| gray.bits_to_symbols(&random_bits(&mut stream_rng(cfg.seed, Stream::Sequence, &[i as u64]), n_bits)))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &wt in &cfg.bandwidth_grid {
        let link = cfg.link.at_bandwidth(wt)?;
        let ctx = PrecodeContext::new(Arc::new(link.block_model()?), 1.0, cfg.e_tx)?;
        for &scheme in &cfg.schemes {
            let mapping = scheme.mapping(link.m_rx, cfg.pilot, RhoChaining::Raw)?;
            let started = Instant::now();
            let blocks = map_indexed(sequences.len(), |i| precode(&sequences[i], &ctx, &mapping, &cfg.solver))?;
            let ok: Vec<f64> = blocks.iter().filter(|b| !b.is_erasure()).map(|b| b.gamma).collect();
            let failures = blocks.len() - ok.len();
            if failures > 0 {
                log::warn!("W_Tx·T = {wt}: {failures} {scheme} solves failed");
            }
            let gamma_mean = if ok.is_empty() { f64::NAN } else { ok.iter().sum::<f64>() / ok.len() as f64 };
            log::info!("W_Tx·T = {wt:.4} {scheme}: γ = {gamma_mean:.5} ({:.1?})", started.elapsed());
            out.push(GammaRecord { wtx_t: wt, scheme, gamma_mean, n_sequences: ok.len(), failures });
        }
    }
    Ok(out)
}

#[cfg(feature = "parallel")]
fn map_indexed<T: Send, F: Fn(usize) -> Result<T> + Sync + Send>(n: usize, f: F) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T, F: Fn(usize) -> Result<T>>(n: usize, f: F) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub link: LinkConfig,
    pub channel: ChannelParams,
    pub schemes: Vec<Scheme>,
    pub snr_db: Vec<f64>,
    /// Total transmit energy per block over all users, `E_0`.
    pub e0: f64,
    pub seed: u64,
    pub pilot: i8,
    pub chaining: RhoChaining,
    /// Information bits per SNR point before early stopping may trigger.
    pub min_bits: u64,
    /// Hard cap on information bits per SNR point.
    pub max_bits: u64,
    /// Stop a point once this many bit errors were counted.
    pub target_errors: u64,
    /// Channel trials per SNR point at most; 0 for no cap.
    pub max_trials: u64,
    /// Trials per scheduling round; results do not depend on it.
    pub batch_trials: usize,
    pub solver: SolverSettings,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            link: LinkConfig::default(),
            channel: ChannelParams::default(),
            schemes: vec![Scheme::Zc, Scheme::Fm, Scheme::Qpsk],
            snr_db: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            e0: 1.0,
            seed: 1,
            pilot: 1,
            chaining: RhoChaining::Raw,
            min_bits: 10_000,
            max_bits: 200_000,
            target_errors: 200,
            max_trials: 0,
            batch_trials: 8,
            solver: SolverSettings::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.snr_db.is_empty() {
            return Err(Error::Parameter("need at least one SNR point".into()));
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::Parameter(format!("SNR {s} is not finite")));
        }
        if self.schemes.is_empty() {
            return Err(Error::Parameter("need at least one scheme".into()));
        }
        if self.max_bits == 0 || self.min_bits > self.max_bits {
            return Err(Error::Parameter(format!(
                "bit budget must satisfy 0 < min_bits ≤ max_bits, got {} and {}",
                self.min_bits, self.max_bits
            )));
        }
        if self.batch_trials == 0 {
            return Err(Error::Parameter("batch_trials must be positive".into()));
        }
        if self.e0.is_nan() || self.e0 <= 0.0 {
            return Err(Error::Parameter(format!("E_0 = {} must be positive", self.e0)));
        }
        self.channel.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerRecord {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub m_rx: usize,
    pub m_tx: usize,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// Blocks dropped because their solve failed.
    pub erasures: u64,
    pub trials: u64,
    /// Channel draws rejected as singular.
    pub channel_redraws: u64,
    pub wallclock_s: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    bits: u64,
    errors: u64,
    erasures: u64,
}

struct TrialOutcome {
    per_point: Vec<Tally>,
    redraws: u64,
}

const MAX_REDRAWS: u64 = 100;

fn draw_zf(params: &ChannelParams, seed: u64, trial: u64) -> Result<(f64, u64)> {
    for attempt in 0..MAX_REDRAWS {
        let mut rng = stream_rng(seed, Stream::Channel, &[trial, attempt]);
        let ch = channel::draw_channel(params, &mut rng)?;
        match channel::zf_precoder(&ch.h) {
            Ok(zf) => return Ok((zf.beta, attempt)),
            Err(Error::Singular(msg)) => log::debug!("trial {trial}: redraw ({msg})"),
            Err(e) => return Err(e),
        }
    }
    Err(Error::Singular(format!("trial {trial}: {MAX_REDRAWS} singular channel draws in a row")))
}

fn noise_rng(seed: u64, snr_db: f64, trial: u64, user: usize, dim: usize) -> rand_chacha::ChaCha8Rng {
    stream_rng(seed, Stream::Noise, &[snr_db.to_bits(), trial, user as u64, dim as u64])
}

fn user_bits(seed: u64, trial: u64, user: usize, dim: usize, n: usize) -> Vec<u8> {
    random_bits(&mut stream_rng(seed, Stream::Bits, &[trial, user as u64, dim as u64]), n)
}

fn count_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

/// Shared per-scheme state for BER trials.
enum Chain {
    Sign { ctx: PrecodeContext, mapping: Mapping, gray: GrayCoder, n_bits: usize },
    Qpsk { ctx: PrecodeContext },
}

fn build_chain(cfg: &SimConfig, scheme: Scheme) -> Result<Chain> {
    let e_tx = cfg.e0 / cfg.channel.n_users as f64;
    match scheme {
        Scheme::Qpsk => {
            let link = LinkConfig { m_tx: 1, m_rx: 1, roll_off_rx: cfg.link.roll_off_tx, ..cfg.link };
            let dims = link.dims()?;
            let pulse = PulseSpec::new(PulseKind::RootRaisedCosine, link.roll_off_tx, link.ts_over_t)?;
            let model = BlockModel::new(dims, pulse, pulse)?;
            Ok(Chain::Qpsk { ctx: PrecodeContext::new(Arc::new(model), 1.0, e_tx)? })
        }
        _ => {
            let gray = GrayCoder::new(cfg.link.m_rx)?;
            let n_bits = bits_per_block(&gray, cfg.link.n_symbols)?;
            let mapping = scheme.mapping(cfg.link.m_rx, cfg.pilot, cfg.chaining)?;
            let ctx = PrecodeContext::new(Arc::new(cfg.link.block_model()?), 1.0, e_tx)?;
            Ok(Chain::Sign { ctx, mapping, gray, n_bits })
        }
    }
}

fn run_trial(
    cfg: &SimConfig,
    chain: &Chain,
    noise: &[NoiseModel],
    active: &[usize],
    trial: u64,
) -> Result<TrialOutcome> {
    let (beta, redraws) = draw_zf(&cfg.channel, cfg.seed, trial)?;
    let mut per_point = vec![Tally::default(); active.len()];
    let nu = cfg.channel.n_users;
    match chain {
        Chain::Sign { ctx, mapping, gray, n_bits } => {
            let ctx = ctx.with_beta(beta)?;
            for user in 0..nu {
                for dim in 0..2 {
                    let bits = user_bits(cfg.seed, trial, user, dim, *n_bits);
                    let symbols = gray.bits_to_symbols(&bits)?;
                    let block = precode(&symbols, &ctx, mapping, &cfg.solver)?;
                    if block.is_erasure() {
                        per_point.iter_mut().for_each(|t| t.erasures += 1);
                        continue;
                    }
                    for (slot, &k) in active.iter().enumerate() {
                        let mut rng = noise_rng(cfg.seed, cfg.snr_db[k], trial, user, dim);
                        let z = channel::receive_quantize(&block.p_x, &ctx, &noise[k], &mut rng)?;
                        let decided = gray.symbols_to_bits(&mapping.detect(&z)?)?;
                        per_point[slot].bits += *n_bits as u64;
                        per_point[slot].errors += count_errors(&bits, &decided);
                    }
                }
            }
        }
        Chain::Qpsk { ctx } => {
            let ctx = ctx.with_beta(beta)?;
            let n = cfg.link.n_symbols;
            // E_s = E_Tx/N per complex symbol, half of it per real dimension
            let amp = (ctx.e_tx / n as f64 / 2.0).sqrt();
            for user in 0..nu {
                for dim in 0..2 {
                    let bits = user_bits(cfg.seed, trial, user, dim, n);
                    let mut p = vec![0.0; ctx.dims().n_q()];
                    for (v, &b) in p.iter_mut().zip(&bits) {
                        *v = if b == 0 { amp } else { -amp };
                    }
                    for (slot, &k) in active.iter().enumerate() {
                        let mut rng = noise_rng(cfg.seed, cfg.snr_db[k], trial, user, dim);
                        let z = channel::receive_quantize(&p, &ctx, &noise[k], &mut rng)?;
                        let decided: Vec<u8> = z[..n].iter().map(|&s| u8::from(s < 0)).collect();
                        per_point[slot].bits += n as u64;
                        per_point[slot].errors += count_errors(&bits, &decided);
                    }
                }
            }
        }
    }
    Ok(TrialOutcome { per_point, redraws })
}

fn noise_models(cfg: &SimConfig, chain: &Chain) -> Result<Vec<NoiseModel>> {
    // the SNR is defined on the precoded system's block regardless of scheme
    let dims = cfg.link.dims()?;
    let sample_dims = match chain {
        Chain::Sign { ctx, .. } | Chain::Qpsk { ctx } => *ctx.dims(),
    };
    cfg.snr_db
        .iter()
        .map(|&snr| {
            let mut nm = channel::noise_from_snr(snr, cfg.e0, &dims, cfg.link.roll_off_rx)?;
            nm.sigma2 = channel::sample_variance(nm.n0, &sample_dims);
            Ok(nm)
        })
        .collect()
}

/// Monte Carlo BER over SNR points for every configured scheme.
pub fn run_ber(cfg: &SimConfig) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &scheme in &cfg.schemes {
        out.extend(run_scheme(cfg, scheme)?);
    }
    Ok(out)
}

/// The conventional QPSK curve alone.
pub fn run_qpsk_reference(cfg: &SimConfig) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    run_scheme(cfg, Scheme::Qpsk)
}

fn run_scheme(cfg: &SimConfig, scheme: Scheme) -> Result<Vec<BerRecord>> {
    let chain = build_chain(cfg, scheme)?;
    let noise = noise_models(cfg, &chain)?;
    let npts = cfg.snr_db.len();
    let mut tally = vec![Tally::default(); npts];
    let mut trials = vec![0u64; npts];
    let mut elapsed = vec![0.0f64; npts];
    let mut redraws = 0u64;
    let mut done = vec![false; npts];
    let bits_per_trial = match &chain {
        Chain::Sign { n_bits, .. } => *n_bits as u64,
        Chain::Qpsk { .. } => cfg.link.n_symbols as u64,
    } * 2
        * cfg.channel.n_users as u64;
    let mut next = 0u64;
    while done.iter().any(|d| !d) {
        let active: Vec<usize> = (0..npts).filter(|&k| !done[k]).collect();
        let started = Instant::now();
        let batch = map_indexed(cfg.batch_trials, |i| run_trial(cfg, &chain, &noise, &active, next + i as u64))?;
        let secs = started.elapsed().as_secs_f64() / active.len() as f64;
        next += cfg.batch_trials as u64;
        for outcome in batch {
            redraws += outcome.redraws;
            for (slot, &k) in active.iter().enumerate() {
                if done[k] {
                    continue;
                }
                let t = outcome.per_point[slot];
                tally[k].bits += t.bits;
                tally[k].errors += t.errors;
                tally[k].erasures += t.erasures;
                trials[k] += 1;
                let attempted = tally[k].bits + tally[k].erasures * bits_per_trial / (2 * cfg.channel.n_users as u64);
                if (tally[k].bits >= cfg.min_bits && tally[k].errors >= cfg.target_errors)
                    || attempted >= cfg.max_bits
                    || trials[k] == cfg.max_trials
                {
                    done[k] = true;
                }
            }
        }
        for &k in &active {
            elapsed[k] += secs;
        }
        log::debug!("{scheme}: {next} trials, {} points open", done.iter().filter(|d| !**d).count());
    }
    Ok((0..npts)
        .map(|k| {
            let t = tally[k];
            BerRecord {
                snr_db: cfg.snr_db[k],
                scheme,
                m_rx: if scheme == Scheme::Qpsk { 1 } else { cfg.link.m_rx },
                m_tx: if scheme == Scheme::Qpsk { 1 } else { cfg.link.m_tx },
                bits_sent: t.bits,
                bit_errors: t.errors,
                ber: if t.bits > 0 { t.errors as f64 / t.bits as f64 } else { f64::NAN },
                erasures: t.erasures,
                trials: trials[k],
                channel_redraws: redraws,
                wallclock_s: elapsed[k],
            }
        })
        .collect())
}

/// What drives the transmit filter in a spectrum estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsdSource {
    Zc,
    Fm,
    /// i.i.d. ±1 samples, a control whose spectrum is the pulse's.
    White,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdConfig {
    pub link: LinkConfig,
    pub sources: Vec<PsdSource>,
    /// Consecutive blocks in the analysed stream.
    pub blocks: usize,
    /// Fine-grid points per receive sampling interval.
    pub oversample: usize,
    pub segment_len: usize,
    /// Pulse truncation for the reconstruction, in signaling intervals.
    pub pulse_span: f64,
    pub pilot: i8,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl Default for PsdConfig {
    fn default() -> Self {
        PsdConfig {
            link: LinkConfig::default(),
            sources: vec![PsdSource::Zc, PsdSource::Fm],
            blocks: 16,
            oversample: 8,
            segment_len: 512,
            pulse_span: 16.0,
            pilot: 1,
            seed: 1,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdEstimate {
    pub source: PsdSource,
    /// Frequency times symbol duration, ascending, two-sided.
    pub freq: Vec<f64>,
    /// Density normalized to a 0 dB peak.
    pub psd_db: Vec<f64>,
    /// Unnormalized two-sided density.
    pub psd: Vec<f64>,
    pub df: f64,
    /// Time-domain energy over duration of the analysed stream.
    pub mean_power: f64,
    /// Two-sided width of the region above −30 dB, times `T`.
    pub bandwidth_30db: f64,
}

impl PsdEstimate {
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.df
    }

    /// Two-sided width of the region above `level_db` (negative).
    pub fn bandwidth_at(&self, level_db: f64) -> f64 {
        let f_max = self
            .freq
            .iter()
            .zip(&self.psd_db)
            .filter(|(_, &p)| p >= level_db)
            .map(|(f, _)| f.abs())
            .fold(0.0, f64::max);
        2.0 * f_max
    }
}

/// Welch estimate with a Hann window and half-segment overlap.
pub fn welch(x: &[f64], step: f64, segment_len: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if segment_len < 8 || x.len() < segment_len {
        return Err(Error::Parameter(format!(
            "need a segment of at least 8 samples within the {} available, got {segment_len}",
            x.len()
        )));
    }
    let window: Vec<f64> = (0..segment_len)
        .map(|n| {
            let s = (std::f64::consts::PI * n as f64 / segment_len as f64).sin();
            s * s
        })
        .collect();
    let wpow: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let hop = segment_len / 2;
    let mut acc = vec![0.0; segment_len];
    let mut count = 0usize;
    let mut start = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    while start + segment_len <= x.len() {
        for (b, (v, w)) in buf.iter_mut().zip(x[start..start + segment_len].iter().zip(&window)) {
            *b = Complex::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = step / (wpow * count as f64);
    let df = 1.0 / (segment_len as f64 * step);
    let half = segment_len / 2;
    let mut freq = Vec::with_capacity(segment_len);
    let mut psd = Vec::with_capacity(segment_len);
    for i in 0..segment_len {
        let k = (i + half) % segment_len;
        let signed = k as i64 - if k >= half { segment_len as i64 } else { 0 };
        freq.push(signed as f64 * df);
        psd.push(acc[k] * scale);
    }
    Ok((freq, psd))
}

/// Continuous transmit signal of back-to-back blocks on a grid of step
/// `T/(M_Rx·oversample)`.
pub fn reconstruct_stream(blocks: &[Vec<f64>], link: &LinkConfig, oversample: usize, pulse_span: f64) -> Result<(Vec<f64>, f64)> {
    let dims = link.dims()?;
    if oversample == 0 {
        return Err(Error::Parameter("oversample must be positive".into()));
    }
    let per_tx = dims.m() * oversample;
    let step = dims.rx_interval() / oversample as f64;
    let per_block = dims.n_symbols * dims.m_tx * per_tx;
    let nq = dims.n_q();
    let mut impulses = vec![0.0; per_block * blocks.len() + (nq - 1) * per_tx + 1];
    for (b, p) in blocks.iter().enumerate() {
        if p.len() != nq {
            return Err(Error::Dimensions(format!("block {b} has {} samples, expected {nq}", p.len())));
        }
        for (n, v) in p.iter().enumerate() {
            impulses[b * per_block + n * per_tx] += v;
        }
    }
    let pulse = link.tx_pulse()?.sample(step, pulse_span * link.ts_over_t);
    Ok((convolve(&impulses, &pulse.samples), step))
}

fn source_blocks(cfg: &PsdConfig, source: PsdSource) -> Result<Vec<Vec<f64>>> {
    let dims = cfg.link.dims()?;
    match source {
        PsdSource::White => Ok((0..cfg.blocks)
            .map(|b| {
                let mut rng = stream_rng(cfg.seed, Stream::Psd, &[b as u64]);
                (0..dims.n_q()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
            })
            .collect()),
        PsdSource::Zc | PsdSource::Fm => {
            let scheme = if source == PsdSource::Zc { Scheme::Zc } else { Scheme::Fm };
            let gray = GrayCoder::new(cfg.link.m_rx)?;
            let n_bits = bits_per_block(&gray, cfg.link.n_symbols)?;
            let mapping = scheme.mapping(cfg.link.m_rx, cfg.pilot, RhoChaining::Raw)?;
            let ctx = PrecodeContext::new(Arc::new(cfg.link.block_model()?), 1.0, 1.0)?;
            map_indexed(cfg.blocks, |b| {
                let bits = random_bits(&mut stream_rng(cfg.seed, Stream::Psd, &[b as u64]), n_bits);
                let blk = precode(&gray.bits_to_symbols(&bits)?, &ctx, &mapping, &cfg.solver)?;
                if blk.is_erasure() {
                    log::warn!("psd block {b}: solve did not converge, using its best iterate");
                }
                Ok(blk.p_x)
            })
        }
    }
}

/// Power spectral density of the transmit signal for each configured source.
pub fn estimate_psd(cfg: &PsdConfig) -> Result<Vec<PsdEstimate>> {
    cfg.solver.validate()?;
    if cfg.blocks == 0 {
        return Err(Error::Parameter("need at least one block".into()));
    }
    cfg.sources
        .iter()
        .map(|&source| {
            let blocks = source_blocks(cfg, source)?;
            let (x, step) = reconstruct_stream(&blocks, &cfg.link, cfg.oversample, cfg.pulse_span)?;
            let (freq, psd) = welch(&x, step, cfg.segment_len)?;
            let peak = psd.iter().fold(f64::MIN_POSITIVE, |a, &v| a.max(v));
            let psd_db = psd.iter().map(|&v| 10.0 * (v.max(1e-300) / peak).log10()).collect();
            let mean_power = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
            let df = 1.0 / (cfg.segment_len as f64 * step);
            let mut est = PsdEstimate { source, freq, psd_db, psd, df, mean_power, bandwidth_30db: 0.0 };
            est.bandwidth_30db = est.bandwidth_at(-30.0);
            Ok(est)
        })
        .collect()
}

/// Squared magnitude of the raised-cosine spectrum for a peak-normalized pulse.
pub fn rc_spectrum_sq(f: f64, pulse: &PulseSpec) -> f64 {
    let ts = pulse.symbol_duration;
    let eps = pulse.roll_off;
    let f = f.abs();
    let lo = (1.0 - eps) / (2.0 * ts);
    let hi = (1.0 + eps) / (2.0 * ts);
    let g = if f <= lo {
        ts
    } else if f <= hi {
        ts / 2.0 * (1.0 + (std::f64::consts::PI * ts / eps * (f - lo)).cos())
    } else {
        0.0
    };
    g * g
}

/// Matrix of per-block transmit signals `G_Txᵀ·U·p_x`, one column per block.
pub fn transmit_signals(model: &BlockModel, blocks: &[Vec<f64>]) -> DMatrix<f64> {
    let p = DMatrix::from_fn(model.dims.n_q(), blocks.len(), |i, j| blocks[j][i]);
    &model.gtx_u * p
}
