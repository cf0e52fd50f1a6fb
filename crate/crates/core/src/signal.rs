//! Pulses, sampled waveforms and the structural matrices of the block model.
//!
//! A block of `N` symbols of duration `T` is represented by `N_q = M_Tx·N + 1`
//! transmit samples and `N_tot = M_Rx·N + 1` receive samples. The noiseless
//! receive samples are `V·U·p`, the transmit waveform sampled at the receive
//! rate is `G_Txᵀ·U·p`, and filtered noise is `G_Rx·n`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of fine-grid points per receive sample interval.
pub const DEFAULT_GRID_OVERSAMPLING: usize = 64;

/// Block-size bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemDims {
    /// Symbols per block (`N`).
    pub n_symbols: usize,
    /// Transmit samples per symbol (`M_Tx`).
    pub m_tx: usize,
    /// Receive samples per symbol (`M_Rx`).
    pub m_rx: usize,
    /// Symbol duration `T` in seconds.
    pub symbol_duration: f64,
}

impl SystemDims {
    pub fn new(n_symbols: usize, m_tx: usize, m_rx: usize, symbol_duration: f64) -> Result<Self> {
        if n_symbols == 0 {
            return Err(Error::Dimensions("block must contain at least one symbol".into()));
        }
        if m_tx == 0 || m_rx == 0 {
            return Err(Error::Dimensions("oversampling factors must be positive".into()));
        }
        if !m_rx.is_multiple_of(m_tx) {
            return Err(Error::Dimensions(format!(
                "M_Rx = {m_rx} is not an integer multiple of M_Tx = {m_tx}"
            )));
        }
        if !(symbol_duration.is_finite() && symbol_duration > 0.0) {
            return Err(Error::Parameter(format!("symbol duration {symbol_duration} must be positive")));
        }
        Ok(SystemDims { n_symbols, m_tx, m_rx, symbol_duration })
    }

    /// Rate ratio `M = M_Rx / M_Tx`.
    pub fn m(&self) -> usize {
        self.m_rx / self.m_tx
    }

    /// Transmit samples per block, `N_q = M_Tx·N + 1`.
    pub fn n_q(&self) -> usize {
        self.m_tx * self.n_symbols + 1
    }

    /// Receive samples per block, `N_tot = M_Rx·N + 1`.
    pub fn n_tot(&self) -> usize {
        self.m_rx * self.n_symbols + 1
    }

    /// Receive sample interval `T / M_Rx`.
    pub fn rx_interval(&self) -> f64 {
        self.symbol_duration / self.m_rx as f64
    }

    /// Transmit sample interval `T / M_Tx`.
    pub fn tx_interval(&self) -> f64 {
        self.symbol_duration / self.m_tx as f64
    }

    /// Half-width `T(N + 1/M_Rx)` of the window the pulses are truncated to.
    pub fn filter_half_width(&self) -> f64 {
        self.symbol_duration * (self.n_symbols as f64 + 1.0 / self.m_rx as f64)
    }

    /// Fine-grid step used for the combined waveform by default.
    pub fn default_grid_step(&self) -> f64 {
        self.rx_interval() / DEFAULT_GRID_OVERSAMPLING as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseKind {
    RaisedCosine,
    RootRaisedCosine,
}

/// A raised-cosine family pulse with signaling interval `T_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub kind: PulseKind,
    pub roll_off: f64,
    /// Signaling interval `T_s` in seconds.
    pub symbol_duration: f64,
}

impl PulseSpec {
    pub fn new(kind: PulseKind, roll_off: f64, symbol_duration: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&roll_off) {
            return Err(Error::Parameter(format!("roll-off {roll_off} outside [0, 1]")));
        }
        if !(symbol_duration.is_finite() && symbol_duration > 0.0) {
            return Err(Error::Parameter(format!("pulse interval {symbol_duration} must be positive")));
        }
        Ok(PulseSpec { kind, roll_off, symbol_duration })
    }

    /// Pulse whose bandwidth `(1 + ε)/T_s` equals `wt / T`.
    pub fn from_bandwidth(kind: PulseKind, roll_off: f64, wt: f64, symbol_duration: f64) -> Result<Self> {
        if !(wt.is_finite() && wt > 0.0) {
            return Err(Error::Parameter(format!("bandwidth-duration product {wt} must be positive")));
        }
        Self::new(kind, roll_off, (1.0 + roll_off) * symbol_duration / wt)
    }

    /// Filter bandwidth `W = (1 + ε)/T_s`.
    pub fn bandwidth(&self) -> f64 {
        (1.0 + self.roll_off) / self.symbol_duration
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.kind {
            PulseKind::RaisedCosine => rc_pulse(t, self),
            PulseKind::RootRaisedCosine => rrc_pulse(t, self),
        }
    }

    /// Samples on `k·step` for `|k·step| ≤ half_width`.
    pub fn sample(&self, step: f64, half_width: f64) -> SampledWaveform {
        let k = (half_width / step).round() as i64;
        let samples = (-k..=k).map(|i| self.eval(i as f64 * step)).collect();
        SampledWaveform { samples, sample_interval: step, origin_index: k as usize }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Raised-cosine pulse, peak-normalized to 1 at `t = 0`.
pub fn rc_pulse(t: f64, spec: &PulseSpec) -> f64 {
    let ts = spec.symbol_duration;
    let eps = spec.roll_off;
    let x = t / ts;
    if eps == 0.0 {
        return sinc(x);
    }
    let den = 1.0 - (2.0 * eps * x).powi(2);
    if den.abs() < 1e-9 {
        // t = ±T_s/(2ε)
        return PI / 4.0 * sinc(1.0 / (2.0 * eps));
    }
    sinc(x) * (PI * eps * x).cos() / den
}

/// Root-raised-cosine pulse with unit energy.
pub fn rrc_pulse(t: f64, spec: &PulseSpec) -> f64 {
    let ts = spec.symbol_duration;
    let eps = spec.roll_off;
    let amp = 1.0 / ts.sqrt();
    let x = t / ts;
    if eps == 0.0 {
        return amp * sinc(x);
    }
    if x.abs() < 1e-12 {
        return amp * (1.0 - eps + 4.0 * eps / PI);
    }
    let den = PI * x * (1.0 - (4.0 * eps * x).powi(2));
    if (1.0 - (4.0 * eps * x).powi(2)).abs() < 1e-9 {
        // t = ±T_s/(4ε)
        let arg = PI / (4.0 * eps);
        return amp * eps / 2f64.sqrt()
            * ((1.0 + 2.0 / PI) * arg.sin() + (1.0 - 2.0 / PI) * arg.cos());
    }
    let num = (PI * x * (1.0 - eps)).sin() + 4.0 * eps * x * (PI * x * (1.0 + eps)).cos();
    amp * num / den
}

/// A real sequence on a uniform time grid, `t_k = (k − origin_index)·sample_interval`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub samples: Vec<f64>,
    pub sample_interval: f64,
    pub origin_index: usize,
}

impl SampledWaveform {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_at(&self, k: usize) -> f64 {
        (k as f64 - self.origin_index as f64) * self.sample_interval
    }

    /// Sample at signed grid offset from the origin.
    pub fn at_offset(&self, offset: i64) -> Result<f64> {
        let idx = self.origin_index as i64 + offset;
        if idx < 0 || idx >= self.samples.len() as i64 {
            return Err(Error::Lookup {
                offset,
                min: -(self.origin_index as i64),
                max: self.samples.len() as i64 - 1 - self.origin_index as i64,
            });
        }
        Ok(self.samples[idx as usize])
    }

    /// Discrete energy `Δ·Σ x²`.
    pub fn energy(&self) -> f64 {
        self.sample_interval * self.samples.iter().map(|x| x * x).sum::<f64>()
    }
}

/// Full linear convolution of two real sequences via FFT.
pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(n, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

fn check_divides(coarse: f64, fine: f64) -> Result<usize> {
    if !(fine.is_finite() && fine > 0.0) {
        return Err(Error::Parameter(format!("grid step {fine} must be positive")));
    }
    let ratio = coarse / fine;
    let r = ratio.round();
    if r < 1.0 || (ratio - r).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Parameter(format!(
            "grid step {fine} does not divide the receive sample interval {coarse}"
        )));
    }
    Ok(r as usize)
}

/// Combined waveform `v = g_Tx ∗ g_Rx` on a fine grid spanning `±T(N + 1/M_Rx)`.
///
/// Both pulses are truncated to the same window before the convolution.
pub fn combined_pulse(
    tx: &PulseSpec,
    rx: &PulseSpec,
    dims: &SystemDims,
    grid_step: f64,
) -> Result<SampledWaveform> {
    check_divides(dims.rx_interval(), grid_step)?;
    let half = dims.filter_half_width();
    let gt = tx.sample(grid_step, half);
    let gr = rx.sample(grid_step, half);
    let full = convolve(&gt.samples, &gr.samples);
    // full has its origin at 2K; keep [K, 3K]
    let k = gt.origin_index;
    let mut samples: Vec<f64> = full[k..=3 * k].iter().map(|x| x * grid_step).collect();
    // both pulse families are even; remove the FFT round-off asymmetry
    for i in 1..=k {
        let avg = 0.5 * (samples[k + i] + samples[k - i]);
        samples[k + i] = avg;
        samples[k - i] = avg;
    }
    Ok(SampledWaveform { samples, sample_interval: grid_step, origin_index: k })
}

/// Waveform matrix with entries `V[i][j] = v((j − i)·T/M_Rx)`.
pub fn build_v(dims: &SystemDims, v: &SampledWaveform) -> Result<DMatrix<f64>> {
    let stride = check_divides(dims.rx_interval(), v.sample_interval)? as i64;
    let n = dims.n_tot();
    // one lookup per diagonal
    let diag: Vec<f64> = (-(n as i64 - 1)..=(n as i64 - 1))
        .map(|d| v.at_offset(d * stride))
        .collect::<Result<_>>()?;
    let off = n as i64 - 1;
    Ok(DMatrix::from_fn(n, n, |i, j| diag[(j as i64 - i as i64 + off) as usize]))
}

/// `M`-fold upsampling matrix of size `N_tot × N_q`.
///
/// The one-based rule `U[m][n] = 1` for `m = M·(n − 1) + 1` becomes
/// `U[M·n][n] = 1` with zero-based indices.
pub fn build_u(dims: &SystemDims) -> DMatrix<f64> {
    let m = dims.m();
    let mut u = DMatrix::zeros(dims.n_tot(), dims.n_q());
    for n in 0..dims.n_q() {
        u[(m * n, n)] = 1.0;
    }
    u
}

/// Filter taps on the receive grid, `g(−T(N + 1/M_Rx) + k·T/M_Rx)` for
/// `k = 0..2·N_tot`.
pub fn filter_taps(pulse: &PulseSpec, dims: &SystemDims) -> SampledWaveform {
    pulse.sample(dims.rx_interval(), dims.filter_half_width())
}

/// Scale `(T/M_Rx)^{1/2}` applied to both filter matrices.
pub fn filter_scale(dims: &SystemDims) -> f64 {
    dims.rx_interval().sqrt()
}

/// Banded Toeplitz filter matrix of size `N_tot × 3·N_tot`; row `r` holds
/// `scale·gᵀ` starting at column `r`.
pub fn build_filter_toeplitz(g: &SampledWaveform, dims: &SystemDims, scale: f64) -> Result<DMatrix<f64>> {
    let n = dims.n_tot();
    if g.len() != 2 * n + 1 {
        return Err(Error::Dimensions(format!(
            "filter has {} taps, the 3·N_tot band needs {}",
            g.len(),
            2 * n + 1
        )));
    }
    let mut m = DMatrix::zeros(n, 3 * n);
    for r in 0..n {
        for (k, &gk) in g.samples.iter().enumerate() {
            m[(r, r + k)] = scale * gk;
        }
    }
    Ok(m)
}

/// Fraction of a pulse's energy that falls outside the truncation window.
pub fn truncation_energy_loss(pulse: &PulseSpec, dims: &SystemDims) -> f64 {
    let step = dims.rx_interval() / 16.0;
    let half = dims.filter_half_width();
    let inside = pulse.sample(step, half).energy();
    let wide = pulse.sample(step, 4.0 * half).energy();
    if wide > 0.0 {
        ((wide - inside) / wide).max(0.0)
    } else {
        0.0
    }
}

/// How block transmit energy is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyModel {
    /// Continuous-time energy `∫x²(t)dt` via the transmit pulse's
    /// autocorrelation on the fine grid.
    #[default]
    Continuous,
    /// `‖G_Txᵀ·U·p‖²` with `G_Tx` sampled at the receive rate. Overstates the
    /// energy once the pulse is narrower than a receive sampling interval.
    Sampled,
}

/// Energy Gram matrix `Q[n][m] = ρ((n − m)·T/M_Tx)`, `ρ` the autocorrelation
/// of the truncated transmit pulse.
pub fn continuous_energy_gram(tx: &PulseSpec, dims: &SystemDims, grid_step: f64) -> Result<DMatrix<f64>> {
    let rho = combined_pulse(tx, tx, dims, grid_step)?;
    let stride = check_divides(dims.tx_interval(), grid_step)? as i64;
    let nq = dims.n_q();
    let diag: Vec<f64> = (0..nq as i64).map(|d| rho.at_offset(d * stride)).collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(nq, nq, |i, j| diag[(i as i64 - j as i64).unsigned_abs() as usize]))
}

/// A factor `E` with `EᵀE = q` from the eigendecomposition, negative
/// round-off eigenvalues clipped to zero.
fn psd_root(q: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = q.clone().symmetric_eigen();
    let n = q.nrows();
    DMatrix::from_fn(n, n, |i, j| eig.eigenvalues[i].max(0.0).sqrt() * eig.eigenvectors[(j, i)])
}

/// All structural matrices of one block configuration.
#[derive(Debug, Clone)]
pub struct BlockModel {
    pub dims: SystemDims,
    pub tx_pulse: PulseSpec,
    pub rx_pulse: PulseSpec,
    pub v: SampledWaveform,
    pub v_mat: DMatrix<f64>,
    pub u_mat: DMatrix<f64>,
    pub g_tx: DMatrix<f64>,
    pub g_rx: DMatrix<f64>,
    /// `V·U`, `N_tot × N_q`.
    pub vu: DMatrix<f64>,
    /// `G_Txᵀ·U`, `3·N_tot × N_q`.
    pub gtx_u: DMatrix<f64>,
    pub energy_model: EnergyModel,
    /// `Q` with block energy `pᵀ·Q·p`.
    pub energy_gram: DMatrix<f64>,
    /// Any `E` with `EᵀE = Q`; the energy rows of the precoding program.
    pub energy_map: DMatrix<f64>,
}

impl BlockModel {
    pub fn new(dims: SystemDims, tx_pulse: PulseSpec, rx_pulse: PulseSpec) -> Result<Self> {
        Self::with_options(dims, tx_pulse, rx_pulse, dims.default_grid_step(), EnergyModel::default())
    }

    pub fn with_grid_step(dims: SystemDims, tx_pulse: PulseSpec, rx_pulse: PulseSpec, grid_step: f64) -> Result<Self> {
        Self::with_options(dims, tx_pulse, rx_pulse, grid_step, EnergyModel::default())
    }

    pub fn with_options(
        dims: SystemDims,
        tx_pulse: PulseSpec,
        rx_pulse: PulseSpec,
        grid_step: f64,
        energy_model: EnergyModel,
    ) -> Result<Self> {
        let v = combined_pulse(&tx_pulse, &rx_pulse, &dims, grid_step)?;
        let v_mat = build_v(&dims, &v)?;
        let u_mat = build_u(&dims);
        let scale = filter_scale(&dims);
        let g_tx = build_filter_toeplitz(&filter_taps(&tx_pulse, &dims), &dims, scale)?;
        let g_rx = build_filter_toeplitz(&filter_taps(&rx_pulse, &dims), &dims, scale)?;
        let vu = &v_mat * &u_mat;
        let gtx_u = g_tx.transpose() * &u_mat;
        for (name, p) in [("transmit", &tx_pulse), ("receive", &rx_pulse)] {
            let loss = truncation_energy_loss(p, &dims);
            log::debug!("{name} pulse truncation drops {:.3e} of its energy", loss);
        }
        let (energy_gram, energy_map) = match energy_model {
            EnergyModel::Continuous => {
                let q = continuous_energy_gram(&tx_pulse, &dims, grid_step)?;
                let e = psd_root(&q);
                (q, e)
            }
            EnergyModel::Sampled => (gtx_u.transpose() * &gtx_u, gtx_u.clone()),
        };
        Ok(BlockModel {
            dims,
            tx_pulse,
            rx_pulse,
            v,
            v_mat,
            u_mat,
            g_tx,
            g_rx,
            vu,
            gtx_u,
            energy_model,
            energy_gram,
            energy_map,
        })
    }

    /// Block transmit energy under the model's energy measure.
    pub fn transmit_energy(&self, p: &[f64]) -> f64 {
        let p = nalgebra::DVector::from_column_slice(p);
        p.dot(&(&self.energy_gram * &p))
    }

    /// `‖G_Txᵀ·U·p‖²`, the receive-rate sampled energy.
    pub fn sampled_energy(&self, p: &[f64]) -> f64 {
        let p = nalgebra::DVector::from_column_slice(p);
        (&self.gtx_u * p).norm_squared()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rc(eps: f64, ts: f64) -> PulseSpec {
        PulseSpec::new(PulseKind::RaisedCosine, eps, ts).unwrap()
    }

    fn rrc(eps: f64, ts: f64) -> PulseSpec {
        PulseSpec::new(PulseKind::RootRaisedCosine, eps, ts).unwrap()
    }

    #[test]
    fn dims_bookkeeping() {
        let d = SystemDims::new(50, 2, 4, 1.0).unwrap();
        assert_eq!(d.m(), 2);
        assert_eq!(d.n_q(), 101);
        assert_eq!(d.n_tot(), 201);
        assert_eq!(d.n_tot(), d.m() * (d.n_q() - 1) + 1);
        assert!(SystemDims::new(5, 2, 3, 1.0).is_err());
        assert!(SystemDims::new(0, 1, 1, 1.0).is_err());
    }

    #[test]
    fn rc_peak_and_nyquist_zeros() {
        let p = rc(0.22, 1.0);
        assert_eq!(rc_pulse(0.0, &p), 1.0);
        for k in 1..6 {
            assert!(rc_pulse(k as f64, &p).abs() < 1e-15);
        }
    }

    #[test]
    fn rc_singular_point_matches_neighbours() {
        let p = rc(0.22, 1.0);
        let ts = 1.0 / (2.0 * 0.22);
        let at = rc_pulse(ts, &p);
        let lim = PI / 4.0 * sinc(1.0 / 0.44);
        assert_relative_eq!(at, lim, epsilon = 1e-15);
        let left = rc_pulse(ts - 1e-6, &p);
        let right = rc_pulse(ts + 1e-6, &p);
        assert!((left - at).abs() < 1e-6 && (right - at).abs() < 1e-6);
    }

    #[test]
    fn rrc_origin_and_energy() {
        let p = rrc(0.22, 1.0);
        assert_relative_eq!(rrc_pulse(0.0, &p), 1.0 - 0.22 + 0.88 / PI, epsilon = 1e-15);
        let e = p.sample(1e-3, 200.0).energy();
        assert!((e - 1.0).abs() < 1e-4, "energy {e}");
        let p2 = rrc(0.22, 0.5);
        let e2 = p2.sample(1e-3, 100.0).energy();
        assert!((e2 - 1.0).abs() < 1e-4, "energy {e2}");
    }

    #[test]
    fn rrc_singular_point_matches_neighbours() {
        let p = rrc(0.22, 1.0);
        let t = 1.0 / (4.0 * 0.22);
        let at = rrc_pulse(t, &p);
        assert!((rrc_pulse(t - 1e-6, &p) - at).abs() < 1e-5);
        assert!((rrc_pulse(t + 1e-6, &p) - at).abs() < 1e-5);
    }

    #[test]
    fn rrc_zero_roll_off_is_sinc() {
        let p = rrc(0.0, 1.0);
        assert_relative_eq!(rrc_pulse(0.5, &p), 2.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn rrc_autocorrelation_is_nyquist() {
        let p = rrc(0.22, 1.0);
        let step = 1e-3;
        let g = p.sample(step, 300.0);
        let lag = (1.0 / step).round() as usize;
        let acf: f64 = g.samples[lag..]
            .iter()
            .zip(&g.samples)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * step;
        assert!(acf.abs() < 1e-3, "acf at T = {acf}");
    }

    #[test]
    fn combined_pulse_is_even_and_peaks_at_origin() {
        let dims = SystemDims::new(6, 2, 2, 1.0).unwrap();
        let v = combined_pulse(&rc(0.22, 1.0), &rrc(0.22, 1.0), &dims, dims.default_grid_step()).unwrap();
        let k = v.origin_index;
        for i in 1..=k {
            assert!((v.samples[k + i] - v.samples[k - i]).abs() < 1e-12);
        }
        let argmax = v
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, k);
    }

    #[test]
    fn combined_pulse_rejects_bad_step() {
        let dims = SystemDims::new(4, 1, 2, 1.0).unwrap();
        let err = combined_pulse(&rc(0.22, 1.0), &rrc(0.22, 1.0), &dims, 0.3);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn v_first_row_and_toeplitz() {
        let dims = SystemDims::new(4, 1, 2, 1.0).unwrap();
        let v = combined_pulse(&rc(0.22, 1.0), &rrc(0.22, 1.0), &dims, dims.default_grid_step()).unwrap();
        let m = build_v(&dims, &v).unwrap();
        let stride = DEFAULT_GRID_OVERSAMPLING as i64;
        assert_eq!(m[(0, 0)], v.at_offset(0).unwrap());
        assert_eq!(m[(0, 1)], v.at_offset(stride).unwrap());
        let n = dims.n_tot();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                assert_eq!(m[(i, j)], m[(i + 1, j + 1)]);
            }
        }
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn v_from_delta_is_identity() {
        let dims = SystemDims::new(3, 1, 2, 1.0).unwrap();
        let k = dims.n_tot() * 2;
        let mut samples = vec![0.0; 2 * k + 1];
        samples[k] = 1.0;
        let v = SampledWaveform { samples, sample_interval: dims.rx_interval(), origin_index: k };
        let m = build_v(&dims, &v).unwrap();
        assert_eq!(m, DMatrix::identity(dims.n_tot(), dims.n_tot()));
    }

    #[test]
    fn v_lookup_out_of_range_is_an_error() {
        let dims = SystemDims::new(3, 1, 2, 1.0).unwrap();
        let v = SampledWaveform { samples: vec![1.0; 3], sample_interval: dims.rx_interval(), origin_index: 1 };
        assert!(matches!(build_v(&dims, &v), Err(Error::Lookup { .. })));
    }

    #[test]
    fn u_places_ones_per_one_based_rule() {
        // M = 2, N_q = 3, N_tot = 5: ones at (1,1), (3,2), (5,3) one-based
        let dims = SystemDims::new(2, 1, 2, 1.0).unwrap();
        let u = build_u(&dims);
        assert_eq!(u.shape(), (5, 3));
        let ones: Vec<(usize, usize)> = (0..5)
            .flat_map(|m| (0..3).map(move |n| (m, n)))
            .filter(|&(m, n)| u[(m, n)] == 1.0)
            .map(|(m, n)| (m + 1, n + 1))
            .collect();
        assert_eq!(ones, vec![(1, 1), (3, 2), (5, 3)]);
        assert_eq!(u.transpose() * &u, DMatrix::identity(3, 3));
    }

    #[test]
    fn u_is_identity_without_rate_change() {
        let dims = SystemDims::new(4, 3, 3, 1.0).unwrap();
        assert_eq!(build_u(&dims), DMatrix::identity(13, 13));
    }

    #[test]
    fn filter_toeplitz_layout() {
        let dims = SystemDims::new(2, 1, 2, 1.0).unwrap();
        let taps = filter_taps(&rrc(0.22, 1.0), &dims);
        assert_eq!(taps.len(), 2 * dims.n_tot() + 1);
        let a = filter_scale(&dims);
        assert_relative_eq!(a, (0.5f64).sqrt());
        let g = build_filter_toeplitz(&taps, &dims, a).unwrap();
        assert_eq!(g.shape(), (5, 15));
        assert_eq!(g[(0, 0)], a * taps.samples[0]);
        assert_eq!(g[(1, 0)], 0.0);
        assert_eq!(g[(1, 1)], a * taps.samples[0]);
        let short = SampledWaveform { samples: vec![1.0; 4], sample_interval: 0.5, origin_index: 2 };
        assert!(matches!(build_filter_toeplitz(&short, &dims, a), Err(Error::Dimensions(_))));
    }

    #[test]
    fn filter_toeplitz_from_delta_shifts() {
        let dims = SystemDims::new(2, 1, 2, 1.0).unwrap();
        let n = dims.n_tot();
        let mut samples = vec![0.0; 2 * n + 1];
        samples[n] = 1.0;
        let g = SampledWaveform { samples, sample_interval: dims.rx_interval(), origin_index: n };
        let m = build_filter_toeplitz(&g, &dims, 2.0).unwrap();
        let x = nalgebra::DVector::from_fn(3 * n, |i, _| i as f64);
        let y = &m * x;
        for r in 0..n {
            assert_eq!(y[r], 2.0 * (r + n) as f64);
        }
    }

    #[test]
    fn block_model_shapes() {
        let dims = SystemDims::new(5, 1, 2, 1.0).unwrap();
        let bm = BlockModel::new(dims, rc(0.22, 1.0), rrc(0.22, 1.0)).unwrap();
        assert_eq!(bm.vu.shape(), (dims.n_tot(), dims.n_q()));
        assert_eq!(bm.gtx_u.shape(), (3 * dims.n_tot(), dims.n_q()));
    }
}
