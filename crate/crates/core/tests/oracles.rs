#![allow(clippy::needless_range_loop)]

use entmeas::classical::{self, Branch, Covariance, RoundOneProbs, RoundTwoProbs};
use entmeas::experiments::{random_triple, simulate_trials, Strategy};
use entmeas::quantum::{concurrence_sq, entanglement, PureState};
use entmeas::sampling::{domain, multinomial_counts, sample_state, sample_unitary4, SeededStream};
use entmeas::stats::{ks_statistic, mean_and_stderr, rms};
use entmeas::tomography::{
    self, analytic_uncertainty, det_gradient, haar_ensemble, LocalProbabilities,
};

const HAAR_SAMPLES: usize = 100_000;

fn haar(seed: u64) -> Vec<PureState<f64>> {
    haar_ensemble(seed, HAAR_SAMPLES)
}

#[test]
fn squared_amplitudes_have_simplex_moments() {
    let states = haar(11);
    for i in 0..4 {
        let x: Vec<f64> = states.iter().map(|s| s.probabilities()[i]).collect();
        let (mean, se) = mean_and_stderr(&x);
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        assert!(
            (mean - 0.25).abs() < 4.0 * se,
            "coordinate {i}: mean {mean}"
        );
        assert!(
            (var / (3.0 / 80.0) - 1.0).abs() < 0.03,
            "coordinate {i}: variance {var}"
        );
    }
}

#[test]
fn mean_concurrence_matches_purity_formula() {
    // E[Tr ρ_A²] = (d_A + d_B)/(d_A d_B + 1) = 4/5, and C² = 2(1 − Tr ρ_A²)
    let c2: Vec<f64> = haar(12).iter().map(concurrence_sq).collect();
    let (mean, se) = mean_and_stderr(&c2);
    assert!((mean - 0.4).abs() < 4.0 * se, "mean C² {mean} ± {se}");
}

#[test]
fn concurrence_distribution_is_unitarily_invariant() {
    let u = sample_unitary4::<f64>(SeededStream::new(99, 0));
    let a: Vec<f64> = haar(13).iter().map(concurrence_sq).collect();
    let b: Vec<f64> = haar(14)
        .iter()
        .map(|s| concurrence_sq(&s.apply(&u).unwrap()))
        .collect();
    let d = ks_statistic(&a, &b);
    let n = HAAR_SAMPLES as f64;
    let critical = 1.628 * (2.0 / n).sqrt();
    assert!(d < critical, "KS {d} >= {critical}");
}

#[test]
fn binomial_variance_of_frequencies() {
    let p = [0.25; 4];
    let shots = 10_000u64;
    let f: Vec<f64> = (0..1000)
        .map(|t| {
            multinomial_counts(&p, shots, SeededStream::new(5, t))
                .unwrap()
                .frequencies::<f64>()[0]
        })
        .collect();
    let (mean, _) = mean_and_stderr(&f);
    let var = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (f.len() - 1) as f64;
    let expected = 0.25 * 0.75 / shots as f64;
    assert!(
        (var / expected - 1.0).abs() < 0.10,
        "variance {var} vs {expected}"
    );
}

#[test]
fn multinomial_counts_are_exhaustive() {
    let c = multinomial_counts(&[0.1, 0.2, 0.3, 0.4], 12345, SeededStream::new(1, 2)).unwrap();
    assert_eq!(c.counts.iter().sum::<u64>(), 12345);
    assert_eq!(c.shots, 12345);
}

#[test]
fn local_gradient_matches_finite_differences() {
    let h = 1e-6;
    for i in 0..1000u64 {
        let s = sample_state::<f64>(SeededStream::in_domain(21, domain::STATES, i));
        let dirs = random_triple(21, i).unwrap();
        let p = tomography::outcome_probabilities(&s, &dirs);
        let g = det_gradient(&p, &dirs);
        let det =
            |q: LocalProbabilities<f64>| tomography::estimate_from_probabilities(&q, &dirs).raw_det;
        let scale = g.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-3);
        for k in 0..3 {
            let (mut up, mut dn) = (p, p);
            up.up[k] += h;
            dn.up[k] -= h;
            let fd = (det(up) - det(dn)) / (2.0 * h);
            assert!(
                (fd - g[k]).abs() <= 1e-6 * scale,
                "state {i}, k {k}: {fd} vs {}",
                g[k]
            );
        }
    }
}

#[test]
fn cc_gradient_matches_finite_differences() {
    let h = 1e-7;
    let mut checked = 0;
    for i in 0..1000u64 {
        let s = sample_state::<f64>(SeededStream::in_domain(22, domain::STATES, i));
        let r1 = classical::round1_probabilities(&s);
        let r2 = classical::round2_probabilities(&s);
        let cos = classical::phase_cosines(&r1, &r2);
        if r1.p.iter().any(|&p| p < 0.02)
            || cos.c01.value.abs() > 0.98
            || cos.c23.value.abs() > 0.98
        {
            continue;
        }
        checked += 1;
        let branch = Branch::of_state(&s);
        let g = classical::det_equivalent_gradient(&r1, &r2, branch);
        let d = |a: RoundOneProbs<f64>, b: RoundTwoProbs<f64>| {
            let c = classical::phase_cosines(&a, &b);
            classical::concurrence_sq_cc(&a, &c, branch).0 / 4.0
        };
        let scale = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for k in 0..8 {
            let (mut a_up, mut b_up, mut a_dn, mut b_dn) = (r1, r2, r1, r2);
            if k < 4 {
                a_up.p[k] += h;
                a_dn.p[k] -= h;
            } else {
                b_up.p[k - 4] += h;
                b_dn.p[k - 4] -= h;
            }
            let fd = (d(a_up, b_up) - d(a_dn, b_dn)) / (2.0 * h);
            assert!(
                (fd - g[k]).abs() <= 1e-5 * scale,
                "state {i}, k {k}: {fd} vs {}",
                g[k]
            );
        }
    }
    assert!(checked > 500);
}

#[test]
fn cc_uncertainty_scales_as_inverse_root_budget() {
    let s = sample_state::<f64>(SeededStream::new(3, 3));
    let m = classical::analytic_uncertainty_cc(&s, 1000, Covariance::Multinomial).unwrap();
    let i = classical::analytic_uncertainty_cc(&s, 1000, Covariance::Independent).unwrap();
    assert!(m > 0.0 && i > 0.0 && m.is_finite() && i.is_finite());
    let m4 = classical::analytic_uncertainty_cc(&s, 4000, Covariance::Multinomial).unwrap();
    assert!((m / m4 - 2.0).abs() < 1e-12);
}

fn window_states(seed: u64, count: usize) -> Vec<(u64, PureState<f64>)> {
    (0..)
        .map(|i| {
            (
                i,
                sample_state::<f64>(SeededStream::in_domain(seed, domain::STATES, i)),
            )
        })
        .filter(|(_, s)| {
            let c2 = concurrence_sq(s);
            c2 > 0.1 && c2 < 0.9
        })
        .take(count)
        .collect()
}

#[test]
fn local_rms_matches_propagation_at_9000_pairs() {
    for (i, s) in window_states(31, 10) {
        let t = simulate_trials(
            &s,
            Strategy::Local,
            9000,
            1000,
            SeededStream::in_domain(31, domain::COUNTS, i),
        )
        .unwrap();
        let analytic =
            analytic_uncertainty(&s, &tomography::DirectionTriple::orthogonal(), 9000).unwrap();
        let ratio = rms(&t.errors) / analytic;
        assert!((ratio - 1.0).abs() < 0.10, "state {i}: rms/δ = {ratio}");
    }
}

#[test]
fn bias_vanishes_relative_to_spread_at_large_budget() {
    let (mut bias, mut spread) = (0.0, 0.0);
    for (i, s) in window_states(32, 10) {
        let t = simulate_trials(
            &s,
            Strategy::Local,
            100_000,
            400,
            SeededStream::in_domain(32, domain::COUNTS, i),
        )
        .unwrap();
        bias += mean_and_stderr(&t.errors).0.abs();
        spread += rms(&t.errors);
    }
    assert!(bias < 0.1 * spread, "bias {bias} vs rms {spread}");
}

#[test]
fn estimates_concentrate_for_reference_states() {
    let bell = PureState::<f64>::bell();
    let r = entmeas::experiments::run_estimate(&bell, Strategy::Local, 30_000, 0).unwrap();
    assert!((r.estimate.entropy - 1.0).abs() < 0.05);
    let product = PureState::<f64>::basis(0);
    let r = entmeas::experiments::run_estimate(&product, Strategy::Cc, 30_000, 0).unwrap();
    assert!(r.estimate.concurrence_sq.abs() < 0.05);
    assert_eq!(entanglement(&product).concurrence_sq, 0.0);
}
