//! Property tests over random inputs.

use proptest::prelude::*;

use ris_secrecy::harness::quantize_phases;
use ris_secrecy::himodel::{effective_channel, Target};
use ris_secrecy::linalg::{herm_form, realify_matrix, realify_vector, CMat, CVec, C64};
use ris_secrecy::mm::{mm_phi_step, mm_weights, smoothed_min, squarem_accelerate, SurrogatePhi};
use ris_secrecy::rate::{secrecy_rate, user_sinr, wmsr, BeamState, RateReport};
use ris_secrecy::himodel::EffectiveLinks;
use ris_secrecy::scenario::{generate_channels, SystemConfig};

fn cvec(n: usize) -> impl Strategy<Value = CVec> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| CVec::from_iterator(v.len(), v.into_iter().map(|(a, b)| C64::new(a, b))))
}

fn phases(n: usize) -> impl Strategy<Value = CVec> {
    prop::collection::vec(-10.0f64..10.0, n)
        .prop_map(|v| CVec::from_iterator(v.len(), v.into_iter().map(|t| C64::from_polar(1.0, t))))
}

fn small_config() -> SystemConfig {
    SystemConfig {
        n_tx: 3,
        m_ris: 5,
        k_users: 2,
        weights: vec![1.0, 2.0],
        ..SystemConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realified_form_matches(a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16), w in cvec(4)) {
        let a = CMat::from_iterator(4, 4, a.into_iter().map(|(x, y)| C64::new(x, y)));
        let c = a.adjoint() * &a;
        let x = realify_vector(&w);
        let real = x.dot(&(realify_matrix(&c) * &x));
        prop_assert!((real - herm_form(&c, &w)).abs() <= 1e-12 * (1.0 + real.abs()));
    }

    #[test]
    fn smoothed_min_sandwich(v in prop::collection::vec(-50.0f64..50.0, 1..8), zeta in 0.01f64..500.0) {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let s = smoothed_min(&v, zeta);
        prop_assert!(s <= lo + 1e-12);
        prop_assert!(s >= lo - (v.len() as f64).ln() / zeta - 1e-12);
        let h = mm_weights(&v, zeta);
        prop_assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_step_on_torus(v in cvec(6), c in phases(6)) {
        let s = SurrogatePhi { v_bar: v, beta_bar: -1.0, c_bar: 0.0, center: c };
        let phi = mm_phi_step(&s);
        prop_assert!(phi.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn quantized_phases_on_grid(phi in phases(8), bits in 1u32..=4) {
        let q = quantize_phases(&phi, bits).unwrap();
        let step = std::f64::consts::TAU / (1u32 << bits) as f64;
        for (a, b) in phi.iter().zip(q.iter()) {
            prop_assert!((b.norm() - 1.0).abs() < 1e-14);
            prop_assert!((a / b).arg().abs() <= step / 2.0 + 1e-12);
            let k = b.arg().rem_euclid(std::f64::consts::TAU) / step;
            prop_assert!((k - k.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn squarem_beats_two_plain_steps(c in 0.05f64..2.0, target in cvec(3), x0 in cvec(3), rate in 0.1f64..0.9) {
        let obj = |x: &CVec| -c * (x - &target).norm_squared();
        let map = |x: &CVec| &target + (x - &target) * C64::new(rate, 0.0);
        let x2 = map(&map(&x0));
        let out = squarem_accelerate(&x0, map, |x| x.clone(), obj);
        prop_assert!(obj(&out) >= obj(&x2) - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rates_are_consistent(seed in 0u64..1000, w in cvec(6), phi in phases(5)) {
        let cfg = small_config();
        let ch = generate_channels(&cfg, seed).unwrap();
        let w = CMat::from_column_slice(3, 2, w.as_slice());
        let scale = (cfg.p_max / w.norm_squared().max(1e-12)).sqrt();
        let state = BeamState::new(w * C64::new(scale, 0.0), phi.clone());
        let links = EffectiveLinks::new(&phi, &ch, cfg.phase_noise).unwrap();
        let report = RateReport::from_links(&links, state.w_mat(), &cfg);
        let v = wmsr(&state, &ch, &cfg).unwrap();
        prop_assert!(v >= 0.0);
        for k in 0..2 {
            let s = secrecy_rate(&state, &ch, k, &cfg).unwrap();
            prop_assert!(s >= 0.0 && s <= report.user_rate[k] + 1e-12);
            prop_assert!(v <= cfg.weights[k] * s + 1e-12);
            prop_assert!((user_sinr(&state, &ch, k, &cfg).unwrap().ln_1p() - report.user_rate[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_gram_invariant_to_common_phase(seed in 0u64..1000, phi in phases(5), t in -3.0f64..3.0) {
        let cfg = small_config();
        let ch = generate_channels(&cfg, seed).unwrap();
        let rot = &phi * C64::from_polar(1.0, t);
        let a = effective_channel(&phi, &ch, Target::Eve).unwrap();
        let b = effective_channel(&rot, &ch, Target::Eve).unwrap();
        // The fluctuation block does not see a common rotation of all phases.
        let ga = &a.h_mat * a.h_mat.adjoint();
        let gb = &b.h_mat * b.h_mat.adjoint();
        prop_assert!((&ga - &gb).norm() <= 1e-10 * ga.norm().max(1e-300));
    }
}
