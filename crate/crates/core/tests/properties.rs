use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zcprecode::channel::{draw_channel, zf_precoder, zf_residual, ChannelParams, C64};
use zcprecode::qcqp::{check_feasibility, solve, EpigraphProblem, SolveStatus, SolverSettings};
use zcprecode::zc::{GrayCoder, ZcCodebook};

fn instance(rows: &[f64], k: usize, bound: f64) -> EpigraphProblem {
    let m = rows.len() / k;
    // force every row toward the all-ones direction so the margin is positive
    let b = DMatrix::from_fn(m, k + 1, |i, j| if j < k { -(rows[i * k + j].abs() + 0.1) } else { -1.0 });
    let w = DMatrix::from_fn(k, k + 1, |i, j| if i == j { 1.0 } else { 0.0 });
    let mut a = DVector::zeros(k + 1);
    a[k] = 1.0;
    EpigraphProblem::new(a, b, w, bound).unwrap()
}

fn problem_strategy() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (2usize..6).prop_flat_map(|k| (prop::collection::vec(-2.0f64..2.0, k * (k + 2)), Just(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn margin_scales_with_root_energy((rows, k) in problem_strategy(), s in 0.5f64..3.0) {
        let settings = SolverSettings::default();
        let a = solve(&instance(&rows, k, 1.0), &settings);
        let b = solve(&instance(&rows, k, s * s), &settings);
        prop_assert_eq!(a.status, SolveStatus::Optimal);
        prop_assert_eq!(b.status, SolveStatus::Optimal);
        prop_assert!((b.gamma - s * a.gamma).abs() <= 1e-5 * b.gamma.max(1e-9));
    }

    #[test]
    fn margin_is_monotone_in_the_bound((rows, k) in problem_strategy(), lo in 0.1f64..1.0, extra in 0.0f64..1.0) {
        let settings = SolverSettings::default();
        let a = solve(&instance(&rows, k, lo), &settings);
        let b = solve(&instance(&rows, k, lo + extra), &settings);
        prop_assert!(b.gamma >= a.gamma * (1.0 - 1e-7));
    }

    #[test]
    fn midpoints_of_feasible_points_are_feasible((rows, k) in problem_strategy(), t in 0.0f64..1.0) {
        let p = instance(&rows, k, 1.0);
        let s = solve(&p, &SolverSettings::default());
        // the origin is feasible; so is every point on the segment to the optimum
        let mid = &s.r * t;
        let rep = check_feasibility(&p, &mid).unwrap();
        prop_assert!(rep.inequality <= 1e-9 && rep.energy <= 1e-9, "{:?}", rep);
    }

    #[test]
    fn zf_diagonalizes_and_scales(seed in any::<u64>(), a in 0.1f64..10.0) {
        let params = ChannelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = draw_channel(&params, &mut rng).unwrap().h;
        let zf = zf_precoder(&h).unwrap();
        prop_assert!(zf_residual(&h, &zf) <= 1e-8 * zf.beta);
        let scaled = zf_precoder(&(&h * C64::new(a, 0.0))).unwrap();
        prop_assert!((scaled.c_zf - a * zf.c_zf).abs() <= 1e-9 * scaled.c_zf);
    }

    #[test]
    fn gray_round_trip(m_rx in prop::sample::select(vec![1usize, 2, 3, 7, 15]), bits in prop::collection::vec(0u8..2, 0..60)) {
        let g = GrayCoder::new(m_rx).unwrap();
        let bits = &bits[..bits.len() / g.block_bits() * g.block_bits()];
        let symbols = g.bits_to_symbols(bits).unwrap();
        prop_assert_eq!(g.symbols_to_bits(&symbols).unwrap(), bits.to_vec());
    }

    #[test]
    fn nearest_codeword_is_brute_force_nearest(m_rx in 2usize..4, idx in 0usize..16, flip in 0usize..4) {
        let cb = ZcCodebook::new(m_rx, 1).unwrap();
        let words = cb.codewords();
        let mut block = words[idx % words.len()].word.clone();
        let pos = flip % block.len();
        block[pos] = -block[pos];
        let dist = |w: &[i8]| w.iter().zip(&block).filter(|(a, b)| a != b).count();
        let best = (0..words.len()).min_by_key(|&i| (dist(&words[i].word), i)).unwrap();
        prop_assert_eq!(cb.nearest_codeword(&block), best);
    }
}

#[test]
fn gray_neighbours_differ_in_one_bit() {
    // position order: no crossing, then crossings in sub-interval 1, 2, …
    for m_rx in [1usize, 3, 7, 15] {
        let g = GrayCoder::new(m_rx).unwrap();
        let labels: Vec<usize> = std::iter::once(m_rx)
            .chain(0..m_rx)
            .map(|s| (0..=m_rx).find(|&l| g.symbols_for_label(l) == Some(&[s][..])).unwrap())
            .collect();
        for w in labels.windows(2) {
            assert_eq!((w[0] ^ w[1]).count_ones(), 1, "M_Rx = {m_rx}: {labels:?}");
        }
    }
}

#[test]
fn zf_over_a_hundred_channels() {
    let params = ChannelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let h = draw_channel(&params, &mut rng).unwrap().h;
        let zf = zf_precoder(&h).unwrap();
        assert!(zf_residual(&h, &zf) <= 1e-8 * zf.beta);
    }
}
