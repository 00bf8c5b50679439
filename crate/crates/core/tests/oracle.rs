//! Phase-space closed forms against the truncated Fock-space brute force.

use clickcraft_core::fock::{
    make_state, make_two_mode_state, normally_ordered_moment, photon_distribution, BeamSplitterConfig, DensityMatrix,
    SqueezerConfig, StateSpec,
};
use clickcraft_core::pfunc::PhaseSpaceMixture;
use clickcraft_core::povm::DetectorConfig;
use clickcraft_core::processes::*;
use num_complex::Complex64 as C;

/// Largest moment deviation of order ≤ 4, relative to the Cauchy–Schwarz
/// scale √(M_pp M_qq) of the oracle state.
fn moment_gap(mix: &PhaseSpaceMixture, rho: &DensityMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for p in 0..=4 {
        for q in 0..=4 - p {
            let a = mix.moment(p, q).unwrap();
            let b = normally_ordered_moment(rho, p, q).value;
            let scale = (normally_ordered_moment(rho, p, p).value.re * normally_ordered_moment(rho, q, q).value.re).sqrt();
            worst = worst.max((a - b).norm() / scale);
        }
    }
    worst
}

#[test]
fn thermal_subtraction_matches_oracle() {
    let bs = BeamSplitterConfig::new(0.7).unwrap();
    let det = DetectorConfig::new(16, 0.8).unwrap();
    let rho = make_state(&StateSpec::Thermal { nbar: 0.5 }, 48).unwrap();
    let outs = subtract_fock(&rho, &bs, &det, 32).unwrap();
    let p_in = PhaseSpaceMixture::thermal(0.5).unwrap();
    for k in 0..=3 {
        let mix = subtract(&p_in, &SubtractionSpec::new(bs, det, k).unwrap()).unwrap();
        assert!((mix.probability - outs[k].probability).abs() < 1e-12, "k={k}");
        assert!(moment_gap(&mix.state, &outs[k].state) < 1e-9, "k={k}");
    }
    let total: f64 = outs.iter().map(|o| o.probability).sum();
    assert!((total - 1.0).abs() < 1e-10);
}

#[test]
fn thermal_addition_matches_oracle() {
    let sq = SqueezerConfig::from_mu(1.4).unwrap();
    let det = DetectorConfig::new(16, 0.8).unwrap();
    let rho = make_state(&StateSpec::Thermal { nbar: 0.5 }, 64).unwrap();
    let outs = add_fock(&rho, &sq, &det, 64).unwrap();
    let p_in = PhaseSpaceMixture::thermal(0.5).unwrap();
    for k in 0..=3 {
        let mix = add(&p_in, &AdditionSpec::new(sq, det, k).unwrap()).unwrap();
        assert!((mix.probability - outs[k].probability).abs() < 1e-10, "k={k}");
        assert!(moment_gap(&mix.state, &outs[k].state) < 1e-9, "k={k}");
    }
}

#[test]
fn coherent_inputs_match_oracle() {
    let beta = C::new(0.6, -0.35);
    let rho = make_state(&StateSpec::Coherent { alpha: beta }, 40).unwrap();
    let p_in = PhaseSpaceMixture::coherent(beta);
    let det = DetectorConfig::new(5, 0.7).unwrap();

    let bs = BeamSplitterConfig::new(0.8).unwrap();
    for (k, o) in subtract_fock(&rho, &bs, &det, 24).unwrap().iter().enumerate() {
        let mix = subtract(&p_in, &SubtractionSpec::new(bs, det, k).unwrap()).unwrap();
        assert!((mix.probability - o.probability).abs() < 1e-12);
        assert!(moment_gap(&mix.state, &o.state) < 1e-9);
    }

    let sq = SqueezerConfig::from_mu(1.25).unwrap();
    let rho = make_state(&StateSpec::Coherent { alpha: beta }, 60).unwrap();
    for (k, o) in add_fock(&rho, &sq, &det, 48).unwrap().iter().enumerate() {
        let mix = add(&p_in, &AdditionSpec::new(sq, det, k).unwrap()).unwrap();
        assert!((mix.probability - o.probability).abs() < 1e-11, "k={k}");
        assert!(moment_gap(&mix.state, &o.state) < 1e-8, "k={k}");
    }
}

#[test]
fn amplifier_matches_oracle() {
    let beta = C::new(0.5f64.sqrt(), 0.0);
    let template = AmplifySpec::new(
        AdditionSpec::new(SqueezerConfig::from_mu(1.5).unwrap(), DetectorConfig::new(4, 0.5).unwrap(), 0).unwrap(),
        SubtractionSpec::new(BeamSplitterConfig::new(2.0 / 3.0).unwrap(), DetectorConfig::new(4, 0.5).unwrap(), 0).unwrap(),
    )
    .unwrap();
    let rho = make_state(&StateSpec::Coherent { alpha: beta }, 80).unwrap();
    for (k1, k2) in [(0, 0), (1, 0), (1, 1), (2, 3), (4, 4)] {
        let spec = template.with_clicks(k1, k2).unwrap();
        let fock = amplify_fock(&rho, &spec, (72, 48)).unwrap();
        let mix = amplify(&PhaseSpaceMixture::coherent(beta), &spec).unwrap();
        assert!((mix.probability - fock.probability).abs() < 1e-10, "({k1},{k2})");
        assert!(moment_gap(&mix.state, &fock.state) < 1e-7, "({k1},{k2})");
    }
}

#[test]
fn conditioned_moments_converge_in_cutoff() {
    let sq = SqueezerConfig::from_mu(1.4).unwrap();
    let det = DetectorConfig::new(16, 0.8).unwrap();
    let run = |d: usize| {
        let rho = make_state(&StateSpec::Thermal { nbar: 0.5 }, d).unwrap();
        add_fock(&rho, &sq, &det, d).unwrap()
    };
    let (small, large) = (run(64), run(128));
    for k in 0..=3 {
        for p in 0..=2 {
            for q in 0..=2 {
                let a = normally_ordered_moment(&small[k].state, p, q).value;
                let b = normally_ordered_moment(&large[k].state, p, q).value;
                assert!((a - b).norm() < 1e-8, "k={k} ({p},{q})");
            }
        }
    }
}

#[test]
fn tmsv_heralding_matches_oracle() {
    let det = DetectorConfig::new(64, 0.95).unwrap();
    let pair = make_two_mode_state(&StateSpec::PhaseDiffusedTmsv { omega: 0.25 }, (40, 40)).unwrap();
    for k in [0, 1, 2, 4] {
        let oracle = herald(&pair, &det, k).unwrap();
        let closed = herald_tmsv_distribution(0.25, &det, k).unwrap();
        assert!((oracle.probability - closed.probability).abs() < 1e-10);
        for (n, p) in photon_distribution(&oracle.state).iter().enumerate() {
            // The closed form stops once the geometric tail is below 1e-18.
            let expected = closed.unnormalized.get(n).copied().unwrap_or(0.0);
            assert!((p - expected).abs() < 1e-10, "k={k} n={n}");
        }
    }
}

#[test]
fn click_probabilities_match_oracle_traces() {
    let det = DetectorConfig::new(4, 0.8).unwrap();
    let bs = BeamSplitterConfig::new(0.7).unwrap();
    let sq = SqueezerConfig::from_mu(1.4).unwrap();
    for alpha0 in [C::new(0.0, 0.0), C::new(0.8, 0.3)] {
        let nbar = 0.5;
        let rho = make_state(&StateSpec::DisplacedThermal { alpha: alpha0, nbar }, 72).unwrap();
        let subs = subtract_fock(&rho, &bs, &det, 40).unwrap();
        let adds = add_fock(&rho, &sq, &det, 72).unwrap();
        for k in 0..=4 {
            let s = probability_subtraction_displaced_thermal(alpha0, nbar, &SubtractionSpec::new(bs, det, k).unwrap()).unwrap();
            assert!((s - subs[k].probability).abs() < 1e-9, "sub k={k}");
            let a = probability_addition_displaced_thermal(alpha0, nbar, &AdditionSpec::new(sq, det, k).unwrap()).unwrap();
            assert!((a - adds[k].probability).abs() < 1e-9, "add k={k}");
        }
    }
}
