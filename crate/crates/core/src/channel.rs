//! Flat-fading multiuser channel, spatial zero-forcing and the 1-bit receive path.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precoder::PrecodeContext;
use crate::signal::SystemDims;

pub type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub n_users: usize,
    pub n_tx_antennas: usize,
    /// Cell radius in meters.
    pub cell_radius: f64,
    /// User distance in meters.
    pub distance: f64,
    /// Shadowing standard deviation in dB.
    pub shadow_sigma_db: f64,
    pub path_loss_exponent: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            n_users: 5,
            n_tx_antennas: 50,
            cell_radius: 1000.0,
            distance: 300.0,
            shadow_sigma_db: 8.0,
            path_loss_exponent: 3.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_tx_antennas < self.n_users {
            return Err(Error::Parameter(format!(
                "need 1 ≤ N_u ≤ N_t, got N_u = {}, N_t = {}",
                self.n_users, self.n_tx_antennas
            )));
        }
        if !(self.distance > 0.0 && self.distance <= self.cell_radius) {
            return Err(Error::Parameter(format!(
                "distance {} must lie in (0, {}]",
                self.distance, self.cell_radius
            )));
        }
        if self.path_loss_exponent.is_nan() || self.path_loss_exponent <= 0.0 || self.shadow_sigma_db.is_nan() || self.shadow_sigma_db < 0.0 {
            return Err(Error::Parameter("path-loss exponent must be > 0 and shadowing ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: DMatrix<C64>,
    pub g_h: DMatrix<C64>,
    /// Diagonal of D_H.
    pub d_h: DVector<f64>,
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

/// Rayleigh fast fading times log-normal shadowing and path loss.
pub fn draw_channel<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> Result<ChannelRealization> {
    params.validate()?;
    let (nu, nt) = (params.n_users, params.n_tx_antennas);
    let g_h = DMatrix::from_fn(nu, nt, |_, _| complex_gaussian(rng, 1.0));
    let path = (params.distance / params.cell_radius).powf(params.path_loss_exponent);
    let d_h = DVector::from_fn(nu, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        10f64.powf(params.shadow_sigma_db * z / 10.0) / path
    });
    let h = DMatrix::from_fn(nu, nt, |i, j| g_h[(i, j)] * d_h[i].sqrt());
    Ok(ChannelRealization { h, g_h, d_h })
}

#[derive(Debug, Clone)]
pub struct ZfPrecoder {
    pub p_zf: DMatrix<C64>,
    pub c_zf: f64,
    pub beta: f64,
}

/// `P = c_zf·Hᴴ(HHᴴ)⁻¹` with `c_zf = (N_u / tr((HHᴴ)⁻¹))^{1/2}`.
pub fn zf_precoder(h: &DMatrix<C64>) -> Result<ZfPrecoder> {
    let nu = h.nrows();
    if nu == 0 || h.ncols() < nu {
        return Err(Error::Dimensions(format!("channel is {}×{}", nu, h.ncols())));
    }
    let hh = h * h.adjoint();
    let scale = (0..nu).map(|i| hh[(i, i)].re).fold(0.0, f64::max);
    let chol = hh
        .cholesky()
        .ok_or_else(|| Error::Singular("HHᴴ is not positive definite".into()))?;
    let l = chol.l_dirty();
    if (0..nu).any(|i| l[(i, i)].re.powi(2) <= 1e-12 * scale) {
        return Err(Error::Singular("HHᴴ is numerically rank deficient".into()));
    }
    let inv = chol.inverse();
    let tr: f64 = (0..nu).map(|i| inv[(i, i)].re).sum();
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Singular(format!("trace of (HHᴴ)⁻¹ is {tr}")));
    }
    let c_zf = (nu as f64 / tr).sqrt();
    let p_zf = h.adjoint() * inv * C64::new(c_zf, 0.0);
    Ok(ZfPrecoder { p_zf, c_zf, beta: c_zf })
}

/// `‖H·P − β·I‖∞` (entrywise max modulus).
pub fn zf_residual(h: &DMatrix<C64>, zf: &ZfPrecoder) -> f64 {
    let hp = h * &zf.p_zf;
    let mut worst = 0.0f64;
    for i in 0..hp.nrows() {
        for j in 0..hp.ncols() {
            let target = if i == j { zf.beta } else { 0.0 };
            worst = worst.max((hp[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Noise power density N_0.
    pub n0: f64,
    /// Complex per-sample variance at the simulation rate.
    pub sigma2: f64,
    pub snr_db: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel { n0: 0.0, sigma2: 0.0, snr_db: f64::INFINITY }
    }

    /// Standard deviation of each real noise sample before receive filtering.
    pub fn real_std(&self) -> f64 {
        (self.sigma2 / 2.0).sqrt()
    }
}

/// Density to per-sample variance: a flat density sampled at rate `M_Rx/T`.
pub fn sample_variance(n0: f64, dims: &SystemDims) -> f64 {
    n0 * dims.m_rx as f64 / dims.symbol_duration
}

/// `N_0 = E_0 / (N_q·(1+ε_Rx)·10^{SNR/10})`.
pub fn noise_from_snr(snr_db: f64, e0: f64, dims: &SystemDims, eps_rx: f64) -> Result<NoiseModel> {
    if !snr_db.is_finite() {
        return Err(Error::Parameter(format!("SNR must be finite, got {snr_db}")));
    }
    if e0.is_nan() || e0 <= 0.0 {
        return Err(Error::Parameter(format!("total energy {e0} must be positive")));
    }
    let n0 = e0 / (dims.n_q() as f64 * (1.0 + eps_rx) * 10f64.powf(snr_db / 10.0));
    Ok(NoiseModel { n0, sigma2: sample_variance(n0, dims), snr_db })
}

/// 1-bit receive of one real dimension: `sign(β·V·U·p_x + G_Rx·n)`, `sign(0) = +1`.
pub fn receive_quantize<R: Rng + ?Sized>(
    p_x: &[f64],
    ctx: &PrecodeContext,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<i8>> {
    let y = crate::precoder::noiseless_receive(p_x, ctx)?;
    let g_rx = &ctx.model.g_rx;
    let s = noise.real_std();
    let y = if s > 0.0 {
        let normal = Normal::new(0.0, s).map_err(|e| Error::Parameter(e.to_string()))?;
        let n = DVector::from_fn(g_rx.ncols(), |_, _| normal.sample(rng));
        let filtered = g_rx * n;
        y.iter().zip(filtered.iter()).map(|(a, b)| a + b).collect()
    } else {
        y
    };
    Ok(y.iter().map(|&v| quantize(v)).collect())
}

#[inline]
pub fn quantize(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Per-sample noise variance after the receive filter: `diag(G_Rx·G_Rxᵀ)·σ²/2`.
pub fn filtered_noise_variance(ctx: &PrecodeContext, noise: &NoiseModel) -> Vec<f64> {
    let g = &ctx.model.g_rx;
    (0..g.nrows())
        .map(|i| g.row(i).norm_squared() * noise.sigma2 / 2.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use crate::signal::{BlockModel, PulseKind, PulseSpec};
    use std::sync::Arc;

    fn ctx(n: usize) -> PrecodeContext {
        let dims = SystemDims::new(n, 2, 2, 1.0).unwrap();
        let tx = PulseSpec::from_bandwidth(PulseKind::RaisedCosine, 0.22, 1.22, 1.0).unwrap();
        let rx = PulseSpec::from_bandwidth(PulseKind::RootRaisedCosine, 0.22, 1.22, 1.0).unwrap();
        PrecodeContext::new(Arc::new(BlockModel::new(dims, tx, rx).unwrap()), 1.0, 1.0).unwrap()
    }

    #[test]
    fn fading_statistics() {
        let mut rng = stream_rng(11, Stream::Channel, &[]);
        let p = ChannelParams { n_users: 10, n_tx_antennas: 100, ..Default::default() };
        let mut pow = 0.0;
        let mut shadows = Vec::new();
        let path = 0.3f64.powi(3);
        for _ in 0..100 {
            let ch = draw_channel(&p, &mut rng).unwrap();
            pow += ch.g_h.iter().map(|c| c.norm_sqr()).sum::<f64>();
            shadows.extend(ch.d_h.iter().map(|d| 10.0 * (d * path).log10()));
        }
        let pow = pow / 1e5;
        assert!((pow - 1.0).abs() < 0.02, "{pow}");
        let mut rng = stream_rng(12, Stream::Channel, &[]);
        let p1 = ChannelParams { n_users: 100, n_tx_antennas: 100, ..Default::default() };
        for _ in 0..990 {
            let ch = draw_channel(&p1, &mut rng).unwrap();
            shadows.extend(ch.d_h.iter().map(|d| 10.0 * (d * path).log10()));
        }
        let n = shadows.len() as f64;
        let mean = shadows.iter().sum::<f64>() / n;
        let std = (shadows.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 0.2 && (std - 8.0).abs() < 0.2, "{mean} {std}");
    }

    #[test]
    fn no_shadow_at_cell_edge() {
        let p = ChannelParams { distance: 1000.0, shadow_sigma_db: 0.0, ..Default::default() };
        let ch = draw_channel(&p, &mut stream_rng(1, Stream::Channel, &[])).unwrap();
        assert!(ch.d_h.iter().all(|&d| d == 1.0));
        assert_eq!(ch.h, ch.g_h);
    }

    #[test]
    fn zf_closed_forms() {
        let id = DMatrix::<C64>::identity(2, 2);
        let zf = zf_precoder(&id).unwrap();
        assert!((zf.c_zf - 1.0).abs() < 1e-15);
        assert!((&zf.p_zf - &id).iter().all(|c| c.norm() < 1e-15));
        let zf2 = zf_precoder(&(id.clone() * C64::new(2.0, 0.0))).unwrap();
        assert!((zf2.beta - 2.0).abs() < 1e-14);
        assert!((&zf2.p_zf - &id).iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn zf_diagonalizes_random_channels() {
        let mut rng = stream_rng(3, Stream::Channel, &[]);
        for _ in 0..20 {
            let ch = draw_channel(&ChannelParams::default(), &mut rng).unwrap();
            let zf = zf_precoder(&ch.h).unwrap();
            assert!(zf_residual(&ch.h, &zf) <= 1e-9 * zf.beta);
            let fro: f64 = zf.p_zf.iter().map(|c| c.norm_sqr()).sum();
            assert!((fro - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_channel_is_rejected() {
        let h = DMatrix::from_fn(2, 3, |_, j| C64::new(j as f64, 1.0));
        assert!(matches!(zf_precoder(&h), Err(Error::Singular(_))));
    }

    #[test]
    fn snr_inversion() {
        let dims = SystemDims::new(50, 2, 2, 1.0).unwrap();
        let e0 = dims.n_q() as f64 * 1.22;
        let nm = noise_from_snr(0.0, e0, &dims, 0.22).unwrap();
        assert!((nm.n0 - 1.0).abs() < 1e-12);
        assert!((nm.sigma2 - 2.0).abs() < 1e-12);
        let nm10 = noise_from_snr(10.0, e0, &dims, 0.22).unwrap();
        assert!((nm10.n0 - 0.1).abs() < 1e-12);
        assert!(noise_from_snr(f64::NAN, e0, &dims, 0.22).is_err());
    }

    #[test]
    fn filtered_noise_power_matches_analytic() {
        let c = ctx(8);
        let nm = NoiseModel { n0: 0.5, sigma2: 1.0, snr_db: 0.0 };
        let analytic = filtered_noise_variance(&c, &nm);
        let mut rng = stream_rng(5, Stream::Noise, &[]);
        let s = nm.real_std();
        let g = &c.model.g_rx;
        let trials = 20000;
        let mut acc = vec![0.0; g.nrows()];
        for _ in 0..trials {
            let n = DVector::from_fn(g.ncols(), |_, _| { let z: f64 = StandardNormal.sample(&mut rng); s * z });
            for (a, v) in acc.iter_mut().zip((g * n).iter()) {
                *a += v * v;
            }
        }
        let k = g.nrows() / 2;
        let emp = acc[k] / trials as f64;
        assert!((emp / analytic[k] - 1.0).abs() < 0.03, "{emp} vs {}", analytic[k]);
        // unit-energy receive filter: in-band noise power equals the density
        assert!((analytic[k] - nm.n0 * c.dims().m_rx as f64 / 2.0 * g.row(k).norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn quantizer_limits() {
        let c = ctx(6);
        let p: Vec<f64> = (0..c.dims().n_q()).map(|k| ((k * 7) % 5) as f64 - 2.0).collect();
        let y = crate::precoder::noiseless_receive(&p, &c).unwrap();
        let mut rng = stream_rng(9, Stream::Noise, &[]);
        let z = receive_quantize(&p, &c, &NoiseModel::noiseless(), &mut rng).unwrap();
        assert_eq!(z, y.iter().map(|&v| quantize(v)).collect::<Vec<_>>());
        assert_eq!(z.iter().map(|&v| quantize(v as f64)).collect::<Vec<_>>(), z);
        let loud = NoiseModel { n0: 1e12, sigma2: 1e12, snr_db: -200.0 };
        let mut sum = 0i64;
        let mut count = 0;
        while count < 100_000 {
            let z = receive_quantize(&p, &c, &loud, &mut rng).unwrap();
            sum += z.iter().map(|&v| v as i64).sum::<i64>();
            count += z.len();
        }
        assert!((sum as f64 / count as f64).abs() < 0.02);
        assert_eq!(quantize(0.0), 1);
        assert_eq!(quantize(-0.0), 1);
    }

    #[test]
    fn flip_rate_follows_gaussian_tail() {
        // Q(2.326348) = 0.01
        let c = ctx(4);
        let nm = NoiseModel { n0: 1.0, sigma2: 2.0, snr_db: 0.0 };
        let var = filtered_noise_variance(&c, &nm);
        let k = c.dims().n_tot() / 2;
        let margin = 2.326348 * var[k].sqrt();
        let g = &c.model.g_rx;
        let mut rng = stream_rng(21, Stream::Noise, &[]);
        let normal = Normal::new(0.0, nm.real_std()).unwrap();
        let trials = 200_000;
        let mut flips = 0;
        for _ in 0..trials {
            let v: f64 = (0..g.ncols()).map(|j| g[(k, j)] * normal.sample(&mut rng)).sum();
            if quantize(margin + v) < 0 {
                flips += 1;
            }
        }
        let rate = flips as f64 / trials as f64;
        assert!((rate / 0.01 - 1.0).abs() < 0.1, "{rate}");
    }
}
