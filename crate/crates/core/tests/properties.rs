use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use quantlink::comms::{hard_decide, make_constellation, rayleigh_channel, ConstellationName};
use quantlink::equalizers::{elmmse, equalize, lmmse_aqnm, zf, EqualizerKind};
use quantlink::experiments::{read_records, write_records, MetricRecord};
use quantlink::hermite::{hermite_coefficient, lambda_closed_form};
use quantlink::linalg::{diag_part, eye, is_hermitian, max_abs_diff, nondiag_part, solve_hpd};
use quantlink::linear_models::{
    aqnm_covariances, aqnm_gram, aqnm_gram_printed, bussgang_covariances, c_rr, modified_gram,
};
use quantlink::quantization::{
    distortion_factor, make_theorem1_quantizer, make_uniform_quantizer, optimal_step, quantize_complex_vector,
    QuantizerSpec,
};
use quantlink::rng::substream;
use quantlink::{CMatrix, CVector};

fn channel(seed: u64, k: usize, n: usize) -> CMatrix {
    rayleigh_channel(k, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Sorted distinct thresholds plus levels, one level inside each bin.
fn arb_spec() -> impl Strategy<Value = QuantizerSpec> {
    (1u32..=4)
        .prop_flat_map(|b| {
            let m = 1usize << b;
            (Just(b), prop::collection::vec(-3.0f64..3.0, m - 1), prop::collection::vec(0.05f64..0.95, m))
        })
        .prop_filter_map("distinct thresholds", |(b, mut t, frac)| {
            t.sort_by(f64::total_cmp);
            if t.windows(2).any(|w| w[1] - w[0] < 1e-3) {
                return None;
            }
            let m = t.len() + 1;
            let levels: Vec<f64> = (0..m)
                .map(|i| {
                    let lo = if i == 0 { t[0] - 1.0 } else { t[i - 1] };
                    let hi = if i == m - 1 { t[m - 2] + 1.0 } else { t[i] };
                    lo + frac[i] * (hi - lo)
                })
                .collect();
            QuantizerSpec::new(b, &t, &levels).ok()
        })
}

fn arb_symmetric_spec() -> impl Strategy<Value = QuantizerSpec> {
    prop_oneof![
        ((1u32..=6), 0.05f64..2.0).prop_map(|(b, step)| make_uniform_quantizer(b, step).unwrap()),
        ((2u32..=5), prop::collection::vec(0.01f64..1.0, 16), 2.5f64..4.0).prop_map(|(b, gaps, top)| {
            let half = (1usize << b) / 2;
            let mut pos: Vec<f64> = gaps[..half - 1]
                .iter()
                .scan(0.0, |acc, g| {
                    *acc += g;
                    Some(*acc)
                })
                .collect();
            let last = *pos.last().unwrap();
            pos.iter_mut().for_each(|p| *p *= top / last);
            let mut t: Vec<f64> = pos.iter().rev().map(|p| -p).collect();
            t.push(0.0);
            t.extend(&pos);
            make_theorem1_quantizer(b, &t).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantizer_is_idempotent(spec in arb_spec(), xs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8)) {
        let r = CVector::from_iterator(xs.len(), xs.iter().map(|&(a, b)| Complex64::new(a, b)));
        let once = quantize_complex_vector(&spec, &r).unwrap();
        prop_assert_eq!(quantize_complex_vector(&spec, &once).unwrap(), once);
    }

    #[test]
    fn threshold_ties_go_to_lower_bin(spec in arb_spec()) {
        for (i, &t) in spec.finite_thresholds().iter().enumerate() {
            prop_assert_eq!(spec.apply(t), spec.levels()[i]);
        }
    }

    #[test]
    fn symmetric_quantizer_is_odd(spec in arb_symmetric_spec(), x in -6.0f64..6.0) {
        prop_assume!(spec.finite_thresholds().iter().all(|t| (t - x).abs() > 1e-9 && (t + x).abs() > 1e-9));
        prop_assert_eq!(spec.apply(-x), -spec.apply(x));
    }

    #[test]
    fn distortion_factor_in_unit_interval(b in 1u32..=6, frac in 0.01f64..=1.0) {
        let step = frac * optimal_step(b).unwrap();
        let rho = distortion_factor(&make_uniform_quantizer(b, step).unwrap());
        prop_assert!(rho > 0.0 && rho < 1.0, "b={} step={} rho={}", b, step, rho);
    }

    #[test]
    fn lambda_is_twice_first_coefficient(spec in arb_spec()) {
        let a = 2.0 * hermite_coefficient(&spec, 1).unwrap();
        let b = lambda_closed_form(&spec);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn symmetric_quantizers_have_no_second_coefficient(spec in arb_symmetric_spec()) {
        prop_assert_eq!(hermite_coefficient(&spec, 2).unwrap(), 0.0);
    }

    #[test]
    fn rounded_grid_lambda_at_least_one(b in 2u32..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = (1usize << b) / 2;
        let top: f64 = rand::Rng::random_range(&mut rng, 2.5..4.0);
        let mut pos: Vec<f64> = (0..half - 2).map(|_| rand::Rng::random_range(&mut rng, 0.0..top)).collect();
        pos.push(top);
        pos.sort_by(f64::total_cmp);
        prop_assume!(pos.windows(2).all(|w| w[1] > w[0]) && pos[0] > 0.0);
        let mut t: Vec<f64> = pos.iter().rev().map(|p| -p).collect();
        t.push(0.0);
        t.extend(&pos);
        let q = make_theorem1_quantizer(b, &t).unwrap();
        prop_assert!(lambda_closed_form(&q) >= 1.0 - 1e-12);
    }

    #[test]
    fn aqnm_gram_gap_is_sign_of_nondiag_term(seed in any::<u64>(), k in 2usize..10, rho in 0.01f64..0.9, n0 in 0.01f64..3.0) {
        let h = channel(seed, k, 2.min(k));
        let r = c_rr(&h, n0).unwrap();
        let printed = aqnm_gram_printed(&h, n0, rho);
        let modified = modified_gram(&r, rho) * re(1.0 - rho);
        let hh = &h * h.adjoint();
        let gap = &printed - &modified;
        prop_assert!(max_abs_diff(&gap, &(nondiag_part(&hh) * re(2.0 * rho))) < 1e-10);
        let diag = aqnm_gram(&h, n0, rho);
        prop_assert!(max_abs_diff(&(&diag - &r), &(diag_part(&hh) * re(rho))) < 1e-10);
    }

    #[test]
    fn model_covariances_are_hermitian(seed in any::<u64>(), k in 2usize..9, rho in 0.01f64..0.9, n0 in 0.05f64..3.0) {
        let h = channel(seed, k, 2);
        let r = c_rr(&h, n0).unwrap();
        prop_assert!(is_hermitian(&r, 1e-12));
        for m in [aqnm_covariances(&r, rho, n0).unwrap(), bussgang_covariances(&r, n0).unwrap()] {
            prop_assert!(is_hermitian(&m.c_rr, 1e-12));
            prop_assert!(is_hermitian(&m.c_ee, 1e-12));
        }
    }

    #[test]
    fn aqnm_equals_wiener_filter(seed in any::<u64>(), k in 2usize..24, n in 1usize..5, rho in 0.0f64..0.9, n0 in 0.01f64..3.0) {
        prop_assume!(k >= n);
        let h = channel(seed, k, n);
        let g = lmmse_aqnm(&h, n0, rho).unwrap();
        let direct = solve_hpd(&aqnm_gram(&h, n0, rho), &h).unwrap().adjoint();
        prop_assert!(max_abs_diff(&g.g, &direct) < 1e-9);
    }

    #[test]
    fn elmmse_diagonal_is_inverse_lambda(seed in any::<u64>(), k in 4usize..32, n in 1usize..4, lambda in 0.3f64..1.5) {
        let h = channel(seed, k, n);
        let ge = elmmse(&lmmse_aqnm(&h, 0.2, 0.1).unwrap(), &h, lambda).unwrap();
        let gh = &ge.g * &h;
        for i in 0..n {
            prop_assert!((gh[(i, i)] - re(1.0 / lambda)).norm() < 1e-10);
        }
    }

    #[test]
    fn normalized_output_has_block_energy(seed in any::<u64>(), k in 2usize..16, n in 1usize..4) {
        prop_assume!(k >= n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = rayleigh_channel(k, n, &mut rng);
        let y = rayleigh_channel(k, 1, &mut rng).column(0).into_owned();
        let g = lmmse_aqnm(&h, 0.3, 0.1).unwrap().normalized(true);
        let s = equalize(&g, &y).unwrap();
        prop_assert!((s.norm() - (n as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normalized_decisions_ignore_positive_scaling(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = rayleigh_channel(16, 4, &mut rng);
        let y = rayleigh_channel(16, 1, &mut rng).column(0).into_owned();
        let g = lmmse_aqnm(&h, 0.3, 0.1).unwrap().normalized(true);
        let mut scaled = g.clone();
        scaled.g *= re(c);
        let qam = make_constellation(ConstellationName::Qam16);
        let a = hard_decide(&equalize(&g, &y).unwrap(), &qam).0;
        let b = hard_decide(&equalize(&scaled, &y).unwrap(), &qam).0;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn psk_decisions_ignore_estimate_scaling(seed in any::<u64>(), c in 1e-2f64..1e2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = rayleigh_channel(12, 3, &mut rng);
        let y = rayleigh_channel(12, 1, &mut rng).column(0).into_owned();
        let psk = make_constellation(ConstellationName::Psk8);
        let a = hard_decide(&equalize(&zf(&h).unwrap(), &y).unwrap(), &psk).0;
        let b = hard_decide(&equalize(&zf(&(&h * re(c))).unwrap(), &y).unwrap(), &psk).0;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn zf_is_left_inverse(seed in any::<u64>(), k in 1usize..20, n in 1usize..6) {
        prop_assume!(k >= n);
        let h = channel(seed, k, n);
        let g = zf(&h).unwrap();
        prop_assert_eq!(g.kind, EqualizerKind::Zf);
        prop_assert!(max_abs_diff(&(&g.g * &h), &eye(n)) < 1e-8);
    }

    #[test]
    fn substreams_are_reproducible(seed in any::<u64>(), cell in any::<u64>(), trial in any::<u64>()) {
        let a = rayleigh_channel(3, 2, &mut substream(seed, cell, trial));
        let b = rayleigh_channel(3, 2, &mut substream(seed, cell, trial));
        prop_assert_eq!(&a, &b);
        let c = rayleigh_channel(3, 2, &mut substream(seed, cell, trial.wrapping_add(1)));
        prop_assert_ne!(a, c);
    }

    #[test]
    fn csv_roundtrip(rows in prop::collection::vec(
        ("[a-z-]{1,8}", 0u32..9, 1usize..64, 1usize..256, -30.0f64..30.0, any::<f64>(), 0.0f64..10.0, 1u64..100_000, any::<u64>()),
        0..12,
    )) {
        let records: Vec<MetricRecord> = rows
            .into_iter()
            .filter(|r| r.5.is_finite())
            .map(|(eq, bits, n, k, e, v, ci, trials, seed)| MetricRecord {
                experiment: "mse".into(),
                equalizer: eq,
                bits,
                n_tx: n,
                n_rx: k,
                ebn0_db: e,
                value: v,
                ci95: ci,
                trials,
                seed,
            })
            .collect();
        let mut buf = Vec::new();
        write_records(&records, &mut buf).unwrap();
        prop_assert_eq!(read_records(buf.as_slice()).unwrap(), records);
    }
}
