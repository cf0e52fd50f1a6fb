use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zcprecode::precoder::{precode, PrecodeContext};
use zcprecode::qcqp::SolverSettings;
use zcprecode::signal::{BlockModel, EnergyModel};
use zcprecode::sim::{reconstruct_stream, LinkConfig, Scheme};
use zcprecode::zc::RhoChaining;

fn link(wt: f64) -> LinkConfig {
    LinkConfig { n_symbols: 10, ..Default::default() }.at_bandwidth(wt).unwrap()
}

fn random_block(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `∫x²(t)dt` of the reconstructed waveform on a grid 64 times finer than
/// the receive rate.
fn fine_grid_energy(link: &LinkConfig, p: &[f64]) -> f64 {
    let dims = link.dims().unwrap();
    let span = dims.filter_half_width() / link.ts_over_t;
    let (x, step) = reconstruct_stream(&[p.to_vec()], link, 64, span).unwrap();
    x.iter().map(|v| v * v).sum::<f64>() * step
}

#[test]
fn continuous_energy_matches_waveform_integral() {
    for (i, wt) in [0.871, 1.22, 2.44, 6.1, 12.2].into_iter().enumerate() {
        let l = link(wt);
        let model = l.block_model().unwrap();
        let p = random_block(i as u64, model.dims.n_q());
        let e = model.transmit_energy(&p);
        let reference = fine_grid_energy(&l, &p);
        assert!((e / reference - 1.0).abs() < 0.01, "W·T = {wt}: {e} vs {reference}");
    }
}

#[test]
fn sampled_energy_agrees_below_twice_the_receive_rate() {
    for (i, wt) in [0.871, 1.22, 1.525].into_iter().enumerate() {
        let l = link(wt);
        let model = l.block_model().unwrap();
        let p = random_block(10 + i as u64, model.dims.n_q());
        let (c, s) = (model.transmit_energy(&p), model.sampled_energy(&p));
        assert!((s / c - 1.0).abs() < 0.01, "W·T = {wt}: sampled {s} vs continuous {c}");
    }
}

#[test]
fn sampled_energy_overstates_narrow_pulses() {
    let l = link(12.2);
    let model = l.block_model().unwrap();
    let p = random_block(3, model.dims.n_q());
    assert!(model.sampled_energy(&p) > 2.0 * model.transmit_energy(&p));
}

#[test]
fn sampled_model_uses_receive_rate_gram() {
    let l = link(2.44);
    let model = BlockModel::with_options(
        l.dims().unwrap(),
        l.tx_pulse().unwrap(),
        l.rx_pulse().unwrap(),
        l.dims().unwrap().default_grid_step(),
        EnergyModel::Sampled,
    )
    .unwrap();
    let p = random_block(4, model.dims.n_q());
    assert!((model.transmit_energy(&p) - model.sampled_energy(&p)).abs() < 1e-12 * model.sampled_energy(&p));
}

#[test]
fn precoded_blocks_spend_the_per_dimension_budget() {
    let settings = SolverSettings::default();
    for wt in [1.22, 4.07] {
        let l = link(wt);
        let ctx = PrecodeContext::new(Arc::new(l.block_model().unwrap()), 1.0, 2.0).unwrap();
        let mapping = Scheme::Zc.mapping(2, 1, RhoChaining::Raw).unwrap();
        let symbols: Vec<usize> = (0..10).map(|i| (i * 7) % 3).collect();
        let blk = precode(&symbols, &ctx, &mapping, &settings).unwrap();
        assert!(!blk.is_erasure());
        let e = ctx.model.transmit_energy(&blk.p_x);
        assert!((e - 1.0).abs() < 1e-5, "W·T = {wt}: energy {e}");
    }
}
