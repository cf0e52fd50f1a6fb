//! Zero-crossing symbol alphabet, output patterns, Gray mapping and detection.
//!
//! A symbol interval holds `M_Rx` receive samples. Symbol `j < M_Rx` places a
//! single sign change in sub-interval `j + 1`; symbol `M_Rx` means the sign
//! is held for the whole interval. Segments are chained through `ρ`, the last
//! sample of the previous segment, and the pattern opens with a pilot sample.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A ±1 sample sequence.
pub type Pattern = Vec<i8>;

/// Alphabet of `M_Rx + 1` zero-crossing symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZcAlphabet {
    m_rx: usize,
}

impl ZcAlphabet {
    pub fn new(m_rx: usize) -> Result<Self> {
        if m_rx == 0 {
            return Err(Error::Parameter("M_Rx must be positive".into()));
        }
        Ok(ZcAlphabet { m_rx })
    }

    pub fn m_rx(&self) -> usize {
        self.m_rx
    }

    pub fn cardinality(&self) -> usize {
        self.m_rx + 1
    }

    /// Index of the "no zero-crossing" symbol.
    pub fn no_crossing(&self) -> usize {
        self.m_rx
    }

    /// Symbol for a crossing in one-based sub-interval `j`.
    pub fn crossing(&self, j: usize) -> Option<usize> {
        (1..=self.m_rx).contains(&j).then(|| j - 1)
    }

    fn check(&self, symbol: usize) -> Result<()> {
        if symbol > self.m_rx {
            return Err(Error::Symbol { symbol, cardinality: self.cardinality() });
        }
        Ok(())
    }
}

/// How the detector carries `ρ̂` from one block to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoChaining {
    /// Last received sample of the block.
    #[default]
    Raw,
    /// Last sample of the codeword the block was decided as.
    Corrected,
}

/// A valid codeword `[ρ, c_s]` and the symbol it decodes to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword {
    pub rho: i8,
    pub symbol: usize,
    pub word: Pattern,
}

#[derive(Debug, Clone)]
pub struct ZcCodebook {
    alphabet: ZcAlphabet,
    pilot: i8,
    codewords: Vec<Codeword>,
    lookup: HashMap<Pattern, usize>,
}

fn check_sign(v: i8) -> Result<i8> {
    match v {
        1 | -1 => Ok(v),
        _ => Err(Error::Parameter(format!("expected ±1, got {v}"))),
    }
}

/// Segment of `m_rx` samples following `rho` that encodes `symbol`.
fn segment(m_rx: usize, symbol: usize, rho: i8) -> Pattern {
    (0..m_rx).map(|k| if symbol < m_rx && k >= symbol { -rho } else { rho }).collect()
}

impl ZcCodebook {
    pub fn new(m_rx: usize, pilot: i8) -> Result<Self> {
        let alphabet = ZcAlphabet::new(m_rx)?;
        let pilot = check_sign(pilot)?;
        // fixed enumeration: ρ = +1 before ρ = −1, symbols in index order
        let mut codewords = Vec::with_capacity(2 * alphabet.cardinality());
        for rho in [1i8, -1] {
            for symbol in 0..alphabet.cardinality() {
                let mut word = vec![rho];
                word.extend(segment(m_rx, symbol, rho));
                codewords.push(Codeword { rho, symbol, word });
            }
        }
        let lookup = codewords.iter().enumerate().map(|(i, c)| (c.word.clone(), i)).collect();
        Ok(ZcCodebook { alphabet, pilot, codewords, lookup })
    }

    pub fn alphabet(&self) -> ZcAlphabet {
        self.alphabet
    }

    pub fn m_rx(&self) -> usize {
        self.alphabet.m_rx
    }

    pub fn pilot(&self) -> i8 {
        self.pilot
    }

    /// The valid codewords in their fixed enumeration order.
    pub fn codewords(&self) -> &[Codeword] {
        &self.codewords
    }

    pub fn segment_for(&self, symbol: usize, rho_prev: i8) -> Result<Pattern> {
        self.alphabet.check(symbol)?;
        Ok(segment(self.m_rx(), symbol, check_sign(rho_prev)?))
    }

    /// Target pattern `[pb, c_s,0, …, c_s,N−1]` of length `N·M_Rx + 1`.
    pub fn encode_pattern(&self, symbols: &[usize]) -> Result<Pattern> {
        let m = self.m_rx();
        let mut out = Vec::with_capacity(symbols.len() * m + 1);
        out.push(self.pilot);
        let mut rho = self.pilot;
        for &s in symbols {
            self.alphabet.check(s)?;
            out.extend(segment(m, s, rho));
            rho = *out.last().unwrap();
        }
        Ok(out)
    }

    /// Codeword index nearest to `block` in Hamming distance; exact matches
    /// short-circuit, ties go to the lowest index.
    pub fn nearest_codeword(&self, block: &[i8]) -> usize {
        if let Some(&i) = self.lookup.get(block) {
            return i;
        }
        let mut best = 0;
        let mut best_d = usize::MAX;
        for (i, c) in self.codewords.iter().enumerate() {
            let d = hamming_distance(block, &c.word);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Backward mapping with Hamming fallback.
    pub fn detect(&self, z: &[i8], chaining: RhoChaining) -> Result<Vec<usize>> {
        let m = self.m_rx();
        if z.is_empty() || !(z.len() - 1).is_multiple_of(m) {
            return Err(Error::Dimensions(format!(
                "received pattern of length {} is not N·{m} + 1",
                z.len()
            )));
        }
        let n = (z.len() - 1) / m;
        let mut out = Vec::with_capacity(n);
        let mut rho = self.pilot;
        let mut block = vec![0i8; m + 1];
        for i in 0..n {
            block[0] = rho;
            block[1..].copy_from_slice(&z[1 + i * m..1 + (i + 1) * m]);
            let c = &self.codewords[self.nearest_codeword(&block)];
            out.push(c.symbol);
            rho = match chaining {
                RhoChaining::Raw => block[m],
                RhoChaining::Corrected => c.word[m],
            };
        }
        Ok(out)
    }
}

fn hamming_distance(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// `Σ ½|a − b|` over ±1 sequences, i.e. the number of differing positions.
pub fn hamming_metric(a: &[i8], b: &[i8]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::Dimensions(format!("lengths {} and {} differ", a.len(), b.len())));
    }
    Ok(hamming_distance(a, b))
}

/// Number of sign changes between consecutive samples.
pub fn zero_crossings(pattern: &[i8]) -> usize {
    pattern.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Stateless forward-mapping stand-in used as the comparison baseline.
///
/// Each of the `M_Rx + 1` symbols maps to a fixed segment regardless of the
/// preceding sample: the single-flip segments anchored at `ρ = +1` for the
/// crossing symbols and the all-ones segment for the remaining one.
#[derive(Debug, Clone)]
pub struct FmCodebook {
    m_rx: usize,
    pilot: i8,
    segments: Vec<Pattern>,
}

impl FmCodebook {
    pub fn new(m_rx: usize, pilot: i8) -> Result<Self> {
        let alphabet = ZcAlphabet::new(m_rx)?;
        let pilot = check_sign(pilot)?;
        let segments = (0..alphabet.cardinality()).map(|s| segment(m_rx, s, 1)).collect();
        Ok(FmCodebook { m_rx, pilot, segments })
    }

    pub fn m_rx(&self) -> usize {
        self.m_rx
    }

    pub fn segments(&self) -> &[Pattern] {
        &self.segments
    }

    pub fn encode_pattern(&self, symbols: &[usize]) -> Result<Pattern> {
        let mut out = Vec::with_capacity(symbols.len() * self.m_rx + 1);
        out.push(self.pilot);
        for &s in symbols {
            let seg = self
                .segments
                .get(s)
                .ok_or(Error::Symbol { symbol: s, cardinality: self.segments.len() })?;
            out.extend_from_slice(seg);
        }
        Ok(out)
    }

    /// Per-segment nearest-segment decision (ties to the lowest symbol).
    pub fn detect(&self, z: &[i8]) -> Result<Vec<usize>> {
        let m = self.m_rx;
        if z.is_empty() || !(z.len() - 1).is_multiple_of(m) {
            return Err(Error::Dimensions(format!(
                "received pattern of length {} is not N·{m} + 1",
                z.len()
            )));
        }
        Ok(z[1..]
            .chunks(m)
            .map(|chunk| {
                self.segments
                    .iter()
                    .enumerate()
                    .min_by_key(|(i, s)| (hamming_distance(chunk, s), *i))
                    .map(|(i, _)| i)
                    .unwrap()
            })
            .collect())
    }
}

/// `fm_pattern` convenience: forward-mapped pattern for `symbols`.
pub fn fm_pattern(symbols: &[usize], m_rx: usize, pilot: i8) -> Result<Pattern> {
    FmCodebook::new(m_rx, pilot)?.encode_pattern(symbols)
}

/// Symbol-to-pattern mapping used by a precoding scheme.
#[derive(Debug, Clone)]
pub enum Mapping {
    ZeroCrossing { codebook: ZcCodebook, chaining: RhoChaining },
    Forward(FmCodebook),
}

impl Mapping {
    pub fn zero_crossing(m_rx: usize, pilot: i8) -> Result<Self> {
        Ok(Mapping::ZeroCrossing { codebook: ZcCodebook::new(m_rx, pilot)?, chaining: RhoChaining::Raw })
    }

    pub fn forward(m_rx: usize, pilot: i8) -> Result<Self> {
        Ok(Mapping::Forward(FmCodebook::new(m_rx, pilot)?))
    }

    pub fn m_rx(&self) -> usize {
        match self {
            Mapping::ZeroCrossing { codebook, .. } => codebook.m_rx(),
            Mapping::Forward(fm) => fm.m_rx(),
        }
    }

    pub fn encode(&self, symbols: &[usize]) -> Result<Pattern> {
        match self {
            Mapping::ZeroCrossing { codebook, .. } => codebook.encode_pattern(symbols),
            Mapping::Forward(fm) => fm.encode_pattern(symbols),
        }
    }

    pub fn detect(&self, z: &[i8]) -> Result<Vec<usize>> {
        match self {
            Mapping::ZeroCrossing { codebook, chaining } => codebook.detect(z, *chaining),
            Mapping::Forward(fm) => fm.detect(z),
        }
    }
}

/// Bijection between bit blocks and symbol blocks.
#[derive(Debug, Clone)]
pub struct GrayCoder {
    m_rx: usize,
    block_symbols: usize,
    block_bits: usize,
    /// Indexed by the bit block read MSB-first.
    table: Vec<Vec<usize>>,
    inverse: HashMap<Vec<usize>, usize>,
}

// Symbol pairs for M_Rx = 2 (0: crossing in sub-interval 1, 1: crossing in
// sub-interval 2, 2: no crossing), indexed by the 3-bit label.
const PAIR_TABLE_M2: [[usize; 2]; 8] = [
    [2, 2], // 000
    [2, 1], // 001
    [1, 2], // 010
    [2, 0], // 011
    [0, 0], // 100
    [0, 2], // 101
    [1, 1], // 110
    [0, 1], // 111
];

impl GrayCoder {
    pub fn new(m_rx: usize) -> Result<Self> {
        let r_in = m_rx + 1;
        let (block_symbols, block_bits, table): (usize, usize, Vec<Vec<usize>>) = if m_rx == 2 {
            (2, 3, PAIR_TABLE_M2.iter().map(|p| p.to_vec()).collect())
        } else if m_rx >= 1 && r_in.is_power_of_two() {
            let bits = r_in.trailing_zeros() as usize;
            // position k in the order (none, crossing 1, …, crossing M_Rx)
            // carries label k ^ (k >> 1)
            let mut table = vec![Vec::new(); r_in];
            for k in 0..r_in {
                let symbol = if k == 0 { m_rx } else { k - 1 };
                table[k ^ (k >> 1)] = vec![symbol];
            }
            (1, bits, table)
        } else {
            return Err(Error::Unsupported(r_in));
        };
        let inverse = table.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(GrayCoder { m_rx, block_symbols, block_bits, table, inverse })
    }

    pub fn m_rx(&self) -> usize {
        self.m_rx
    }

    pub fn block_symbols(&self) -> usize {
        self.block_symbols
    }

    pub fn block_bits(&self) -> usize {
        self.block_bits
    }

    pub fn bits_per_symbol(&self) -> f64 {
        self.block_bits as f64 / self.block_symbols as f64
    }

    /// `log2(M_Rx + 1)` minus the achieved bits per symbol.
    pub fn conversion_loss(&self) -> f64 {
        ((self.m_rx + 1) as f64).log2() - self.bits_per_symbol()
    }

    /// Symbol block for a bit block given as an integer label.
    pub fn symbols_for_label(&self, label: usize) -> Option<&[usize]> {
        self.table.get(label).map(|v| v.as_slice())
    }

    pub fn bits_to_symbols(&self, bits: &[u8]) -> Result<Vec<usize>> {
        if !bits.len().is_multiple_of(self.block_bits) {
            return Err(Error::BitLength { len: bits.len(), block: self.block_bits });
        }
        let mut out = Vec::with_capacity(bits.len() / self.block_bits * self.block_symbols);
        for chunk in bits.chunks(self.block_bits) {
            let label = chunk.iter().try_fold(0usize, |acc, &b| match b {
                0 | 1 => Ok(acc << 1 | b as usize),
                _ => Err(Error::Parameter(format!("bit value {b}"))),
            })?;
            out.extend_from_slice(&self.table[label]);
        }
        Ok(out)
    }

    /// Inverse of [`bits_to_symbols`](Self::bits_to_symbols). Symbol blocks
    /// outside the table (the unused pair for `M_Rx = 2`) decode to the label
    /// of the nearest table entry by symbol-wise agreement, first entry on
    /// ties.
    pub fn symbols_to_bits(&self, symbols: &[usize]) -> Result<Vec<u8>> {
        if !symbols.len().is_multiple_of(self.block_symbols) {
            return Err(Error::BitLength { len: symbols.len(), block: self.block_symbols });
        }
        let mut out = Vec::with_capacity(symbols.len() / self.block_symbols * self.block_bits);
        for chunk in symbols.chunks(self.block_symbols) {
            if let Some(&s) = chunk.iter().find(|&&s| s > self.m_rx) {
                return Err(Error::Symbol { symbol: s, cardinality: self.m_rx + 1 });
            }
            let label = match self.inverse.get(chunk) {
                Some(&l) => l,
                None => self
                    .table
                    .iter()
                    .enumerate()
                    .max_by_key(|(i, t)| {
                        (t.iter().zip(chunk).filter(|(a, b)| a == b).count(), usize::MAX - i)
                    })
                    .map(|(i, _)| i)
                    .unwrap(),
            };
            for k in (0..self.block_bits).rev() {
                out.push(((label >> k) & 1) as u8);
            }
        }
        Ok(out)
    }
}
