//! Browser bindings for the zero-crossing precoder: encode a bit string,
//! precode a short block and sweep its margin over the transmit bandwidth.
//!
//! The `try_*` functions are plain Rust and carry the logic; the exported
//! wrappers only convert errors for JavaScript.

use std::sync::Arc;

use wasm_bindgen::prelude::*;
use zcprecode::precoder::{noiseless_receive, precode, PrecodeContext};
use zcprecode::qcqp::SolverSettings;
use zcprecode::sim::{reconstruct_stream, LinkConfig, Scheme};
use zcprecode::zc::{GrayCoder, ZcCodebook};
use zcprecode::{Error, Result};

/// Longest block the page will solve; beyond this the solve stalls the tab.
pub const MAX_SYMBOLS: usize = 24;
const OVERSAMPLE: usize = 16;
const PULSE_SPAN: f64 = 8.0;

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pattern: Vec<i8>,
    crossings: Vec<u32>,
    symbols: Vec<u32>,
    bits_per_symbol: f64,
    conversion_loss: f64,
}

#[wasm_bindgen]
impl Encoded {
    #[wasm_bindgen(getter)]
    pub fn pattern(&self) -> Vec<i8> {
        self.pattern.clone()
    }
    /// Sample indices where the pattern changes sign.
    #[wasm_bindgen(getter)]
    pub fn crossings(&self) -> Vec<u32> {
        self.crossings.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn symbols(&self) -> Vec<u32> {
        self.symbols.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn bits_per_symbol(&self) -> f64 {
        self.bits_per_symbol
    }
    #[wasm_bindgen(getter)]
    pub fn conversion_loss(&self) -> f64 {
        self.conversion_loss
    }
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Precoded {
    gamma: f64,
    pattern: Vec<i8>,
    received: Vec<f64>,
    waveform: Vec<f64>,
    step: f64,
    rx_interval: f64,
    converged: bool,
}

#[wasm_bindgen]
impl Precoded {
    #[wasm_bindgen(getter)]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    #[wasm_bindgen(getter)]
    pub fn pattern(&self) -> Vec<i8> {
        self.pattern.clone()
    }
    /// Noiseless receive samples, one per receive interval.
    #[wasm_bindgen(getter)]
    pub fn received(&self) -> Vec<f64> {
        self.received.clone()
    }
    /// Transmit signal on a fine grid starting at the first transmit sample.
    #[wasm_bindgen(getter)]
    pub fn waveform(&self) -> Vec<f64> {
        self.waveform.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn step(&self) -> f64 {
        self.step
    }
    #[wasm_bindgen(getter)]
    pub fn rx_interval(&self) -> f64 {
        self.rx_interval
    }
    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }
}

fn parse_bits(bits: &str) -> Result<Vec<u8>> {
    bits.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Parameter(format!("invalid bit character {other:?}"))),
        })
        .collect()
}

fn symbols_of(bits: &str, m_rx: usize) -> Result<Vec<usize>> {
    let bits = parse_bits(bits)?;
    if bits.is_empty() {
        return Err(Error::Parameter("empty bit string".into()));
    }
    let symbols = GrayCoder::new(m_rx)?.bits_to_symbols(&bits)?;
    if symbols.len() > MAX_SYMBOLS {
        return Err(Error::Parameter(format!("{} symbols; the demo takes at most {MAX_SYMBOLS}", symbols.len())));
    }
    Ok(symbols)
}

fn link(n_symbols: usize, m_rx: usize, wtx_t: f64) -> Result<LinkConfig> {
    LinkConfig { n_symbols, m_tx: m_rx, m_rx, ..Default::default() }.at_bandwidth(wtx_t)
}

pub fn try_encode(bits: &str, m_rx: usize, pilot: i8) -> Result<Encoded> {
    let symbols = symbols_of(bits, m_rx)?;
    let pattern = ZcCodebook::new(m_rx, pilot)?.encode_pattern(&symbols)?;
    let crossings = (1..pattern.len()).filter(|&k| pattern[k] != pattern[k - 1]).map(|k| k as u32).collect();
    let gray = GrayCoder::new(m_rx)?;
    Ok(Encoded {
        pattern,
        crossings,
        symbols: symbols.iter().map(|&s| s as u32).collect(),
        bits_per_symbol: gray.bits_per_symbol(),
        conversion_loss: gray.conversion_loss(),
    })
}

/// Precode the Gray-mapped bits with unit energy and unit channel gain.
pub fn try_precode(bits: &str, scheme: &str, m_rx: usize, wtx_t: f64) -> Result<Precoded> {
    let scheme: Scheme = scheme.parse()?;
    if scheme == Scheme::Qpsk {
        return Err(Error::Parameter("choose zc or fm".into()));
    }
    let symbols = symbols_of(bits, m_rx)?;
    let link = link(symbols.len(), m_rx, wtx_t)?;
    let ctx = PrecodeContext::new(Arc::new(link.block_model()?), 1.0, 1.0)?;
    let mapping = scheme.mapping(m_rx, 1, Default::default())?;
    let blk = precode(&symbols, &ctx, &mapping, &SolverSettings::default())?;
    let received = noiseless_receive(&blk.p_x, &ctx)?;
    let (waveform, step) = reconstruct_stream(std::slice::from_ref(&blk.p_x), &link, OVERSAMPLE, PULSE_SPAN)?;
    // drop the leading pulse tail so that index 0 is the first transmit sample
    let lead = (PULSE_SPAN * link.ts_over_t / step).round() as usize;
    Ok(Precoded {
        gamma: blk.gamma,
        converged: !blk.is_erasure(),
        pattern: blk.pattern,
        received,
        waveform: waveform.get(lead..).unwrap_or_default().to_vec(),
        step,
        rx_interval: ctx.dims().rx_interval(),
    })
}

/// Optimal margin of one bit sequence at each `W_Tx·T`, zc then fm,
/// flattened as `[zc_0, …, zc_k, fm_0, …, fm_k]`.
pub fn try_margin_sweep(bits: &str, m_rx: usize, grid: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * grid.len());
    for scheme in ["zc", "fm"] {
        for &wt in grid {
            out.push(try_precode(bits, scheme, m_rx, wt)?.gamma);
        }
    }
    Ok(out)
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn encode(bits: &str, m_rx: usize, pilot: i8) -> std::result::Result<Encoded, JsError> {
    try_encode(bits, m_rx, pilot).map_err(js)
}

#[wasm_bindgen]
pub fn precode_bits(bits: &str, scheme: &str, m_rx: usize, wtx_t: f64) -> std::result::Result<Precoded, JsError> {
    try_precode(bits, scheme, m_rx, wtx_t).map_err(js)
}

#[wasm_bindgen]
pub fn margin_sweep(bits: &str, m_rx: usize, grid: Vec<f64>) -> std::result::Result<Vec<f64>, JsError> {
    try_margin_sweep(bits, m_rx, &grid).map_err(js)
}
