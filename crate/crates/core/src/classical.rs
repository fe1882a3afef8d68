//! Two-round local strategy with classical communication.
//!
//! Round one measures `σ_z` on both qubits and yields `P_i = |a_i|²`. Round two
//! keeps `σ_z` on qubit A and measures `σ_x` on qubit B, which gives access to
//! `cos(φ₀ − φ₁)` and `cos(φ₂ − φ₃)`. Together with the sign of the product of
//! the corresponding sines (the branch) this fixes `C²` without reconstructing
//! the state.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::{EntanglementValues, PureState};
use crate::sampling::CountVector;
use crate::scalar::{clamp_flagged, lit, Real};

/// Probabilities of `++, +−, −+, −−` for `σ_z ⊗ 𝟙` and `𝟙 ⊗ σ_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundOneProbs<T: Real> {
    pub p: [T; 4],
}

/// Probabilities of `++, +−, −+, −−` for `σ_z ⊗ 𝟙` and `𝟙 ⊗ σ_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundTwoProbs<T: Real> {
    pub p: [T; 4],
}

/// One recovered phase cosine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseCosine<T: Real> {
    pub value: T,
    /// False when the amplitude product in the denominator vanishes.
    pub defined: bool,
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseCosines<T: Real> {
    /// `cos(φ₀ − φ₁)`
    pub c01: PhaseCosine<T>,
    /// `cos(φ₂ − φ₃)`
    pub c23: PhaseCosine<T>,
}

/// Sign of `sin(φ₀ − φ₁)·sin(φ₂ − φ₃)`, the information the cosines miss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Branch::Plus => T::one(),
            Branch::Minus => -T::one(),
        }
    }

    /// The branch realized by a known state.
    pub fn of_state<T: Real>(state: &PureState<T>) -> Self {
        let a = state.amplitudes();
        // sin(φ_i − φ_j) has the sign of Im(a_i a_j*)
        let s01 = (a[0] * a[1].conj()).im;
        let s23 = (a[2] * a[3].conj()).im;
        if s01 * s23 < T::zero() {
            Branch::Minus
        } else {
            Branch::Plus
        }
    }
}

pub fn round1_probabilities<T: Real>(state: &PureState<T>) -> RoundOneProbs<T> {
    RoundOneProbs {
        p: state.probabilities(),
    }
}

/// Qubit B measured along x: pairs amplitudes `{0, 1}` and `{2, 3}`.
pub fn round2_probabilities<T: Real>(state: &PureState<T>) -> RoundTwoProbs<T> {
    let a = state.amplitudes();
    let half = lit::<T>(0.5);
    RoundTwoProbs {
        p: [
            half * (a[0] + a[1]).norm_sqr(),
            half * (a[0] - a[1]).norm_sqr(),
            half * (a[2] + a[3]).norm_sqr(),
            half * (a[2] - a[3]).norm_sqr(),
        ],
    }
}

fn cosine<T: Real>(numerator: T, product: T) -> PhaseCosine<T> {
    let denom = product.max(T::zero()).sqrt();
    if denom == T::zero() {
        return PhaseCosine {
            value: T::zero(),
            defined: false,
            clamped: false,
        };
    }
    let (value, clamped) = clamp_flagged(numerator / denom, -T::one(), T::one());
    PhaseCosine {
        value,
        defined: true,
        clamped,
    }
}

/// `c₀₁ = (2P₊₊ − P₀ − P₁)/(2√(P₀P₁))` and
/// `c₂₃ = (2P₋₊ − (1 − P₀ − P₁))/(2√(P₂P₃))`, clamped into `[−1, 1]`.
pub fn phase_cosines<T: Real>(r1: &RoundOneProbs<T>, r2: &RoundTwoProbs<T>) -> PhaseCosines<T> {
    let [p0, p1, p2, p3] = r1.p;
    let half = lit::<T>(0.5);
    let x = half * (lit::<T>(2.0) * r2.p[0] - p0 - p1);
    let y = half * (lit::<T>(2.0) * r2.p[2] - (T::one() - p0 - p1));
    PhaseCosines {
        c01: cosine(x, p0 * p1),
        c23: cosine(y, p2 * p3),
    }
}

/// `C² = 4(P₁P₂ + P₀P₃ − 2√(P₀P₁P₂P₃) cos(φ₀ − φ₁ + φ₃ − φ₂))`, with the
/// cosine of the phase combination assembled from `c₀₁`, `c₂₃` and the branch.
/// The result is clamped into `[0, 1]`.
pub fn concurrence_sq_cc<T: Real>(
    r1: &RoundOneProbs<T>,
    cos: &PhaseCosines<T>,
    branch: Branch,
) -> (T, bool) {
    let [p0, p1, p2, p3] = r1.p.map(|p| p.max(T::zero()));
    let (c01, c23) = (cos.c01.value, cos.c23.value);
    let sines =
        (T::one() - c01 * c01).max(T::zero()).sqrt() * (T::one() - c23 * c23).max(T::zero()).sqrt();
    let combined = c01 * c23 + branch.sign::<T>() * sines;
    let cross = if cos.c01.defined && cos.c23.defined {
        lit::<T>(2.0) * (p0 * p1 * p2 * p3).sqrt() * combined
    } else {
        T::zero()
    };
    let c2 = lit::<T>(4.0) * (p1 * p2 + p0 * p3 - cross);
    clamp_flagged(c2, T::zero(), T::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CcEstimate<T: Real> {
    pub values: EntanglementValues<T>,
    pub branch: Branch,
    pub c2_plus: T,
    pub c2_minus: T,
    pub cosines: PhaseCosines<T>,
    /// Any of the cosines or `C²` had to be clamped.
    pub clamped: bool,
    /// The two branches differ by more than `1e-9`.
    pub branches_disagree: bool,
}

pub fn estimate_from_probabilities<T: Real>(
    r1: &RoundOneProbs<T>,
    r2: &RoundTwoProbs<T>,
    branch: Branch,
) -> CcEstimate<T> {
    let cosines = phase_cosines(r1, r2);
    let (c2_plus, cl_plus) = concurrence_sq_cc(r1, &cosines, Branch::Plus);
    let (c2_minus, cl_minus) = concurrence_sq_cc(r1, &cosines, Branch::Minus);
    let (c2, c2_clamped) = match branch {
        Branch::Plus => (c2_plus, cl_plus),
        Branch::Minus => (c2_minus, cl_minus),
    };
    let (values, _) = EntanglementValues::from_concurrence_sq(c2);
    CcEstimate {
        values,
        branch,
        c2_plus,
        c2_minus,
        cosines,
        clamped: c2_clamped || cosines.c01.clamped || cosines.c23.clamped,
        branches_disagree: (c2_plus - c2_minus).abs() > lit(1e-9),
    }
}

/// Estimator from the two rounds of four-outcome counts.
pub fn estimate_entanglement_cc<T: Real>(
    round1: &CountVector,
    round2: &CountVector,
    branch: Branch,
) -> Result<CcEstimate<T>> {
    for (k, c) in [round1, round2].into_iter().enumerate() {
        if c.counts.len() != 4 {
            return Err(Error::InvalidProbabilities(format!(
                "round {} needs four outcome counts, got {}",
                k + 1,
                c.counts.len()
            )));
        }
    }
    let f1 = round1.frequencies::<T>();
    let f2 = round2.frequencies::<T>();
    let r1 = RoundOneProbs {
        p: [f1[0], f1[1], f1[2], f1[3]],
    };
    let r2 = RoundTwoProbs {
        p: [f2[0], f2[1], f2[2], f2[3]],
    };
    Ok(estimate_from_probabilities(&r1, &r2, branch))
}

/// How outcome fluctuations within one round are modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Covariance {
    /// `Cov(P̂_i, P̂_j) = (δ_ij P_i − P_i P_j)/n`.
    Multinomial,
    /// Each `P̂_i` treated as an independent binomial: `Var = P_i(1 − P_i)/n`.
    Independent,
}

/// Gradient of `C²/4` with respect to `(P₀..P₃, P₊₊, P₊₋, P₋₊, P₋₋)`, using the
/// parametrization of [`phase_cosines`] and [`concurrence_sq_cc`].
///
/// Where an amplitude product vanishes the cross term is dropped and the
/// reduced expression `P₁P₂ + P₀P₃` is differentiated. A cosine of exactly ±1
/// with a nonzero product makes the gradient infinite.
pub fn det_equivalent_gradient<T: Real>(
    r1: &RoundOneProbs<T>,
    r2: &RoundTwoProbs<T>,
    branch: Branch,
) -> [T; 8] {
    let [p0, p1, p2, p3] = r1.p;
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let zero = T::zero();

    // base term P1 P2 + P0 P3
    let mut g = [p3, p2, p1, p0, zero, zero, zero, zero];

    let a = p0 * p1;
    let b = p2 * p3;
    if a <= zero || b <= zero {
        return g;
    }
    let x = half * (two * r2.p[0] - p0 - p1);
    let y = half * (two * r2.p[2] - (T::one() - p0 - p1));
    let dx = [-half, -half, zero, zero, T::one(), zero, zero, zero];
    let dy = [half, half, zero, zero, zero, zero, T::one(), zero];
    let da = [p1, p0, zero, zero, zero, zero, zero, zero];
    let db = [zero, zero, p3, p2, zero, zero, zero, zero];
    let u = (a - x * x).max(zero).sqrt();
    let v = (b - y * y).max(zero).sqrt();
    let s = branch.sign::<T>();
    for k in 0..8 {
        let du = (da[k] - two * x * dx[k]) / (two * u);
        let dv = (db[k] - two * y * dy[k]) / (two * v);
        let d_cross = dx[k] * y + x * dy[k] + s * (du * v + u * dv);
        g[k] = g[k] - two * d_cross;
    }
    g
}

fn round_variance<T: Real>(g: &[T], p: &[T; 4], n: T, cov: Covariance) -> T {
    let p = p.map(|x| x.max(T::zero()));
    let second: T = (0..4).map(|i| g[i] * g[i] * p[i]).sum();
    let var = match cov {
        Covariance::Multinomial => {
            let first: T = (0..4).map(|i| g[i] * p[i]).sum();
            second - first * first
        }
        Covariance::Independent => (0..4).map(|i| g[i] * g[i] * p[i] * (T::one() - p[i])).sum(),
    };
    var.max(T::zero()) / n
}

/// Standard deviation of the `C²/4` estimate by first-order propagation, with
/// `N/2` pairs per round, independent rounds and the state's own branch.
pub fn analytic_uncertainty_cc<T: Real>(
    state: &PureState<T>,
    pairs: u64,
    cov: Covariance,
) -> Result<T> {
    if pairs < 2 {
        return Err(Error::InsufficientBudget {
            budget: pairs,
            min: 2,
        });
    }
    let r1 = round1_probabilities(state);
    let r2 = round2_probabilities(state);
    let per_round = lit::<T>(pairs as f64) / lit(2.0);
    Ok(uncertainty_from_probabilities(
        &r1,
        &r2,
        Branch::of_state(state),
        per_round,
        cov,
    ))
}

pub fn uncertainty_from_probabilities<T: Real>(
    r1: &RoundOneProbs<T>,
    r2: &RoundTwoProbs<T>,
    branch: Branch,
    per_round: T,
    cov: Covariance,
) -> T {
    let g = det_equivalent_gradient(r1, r2, branch);
    (round_variance(&g[..4], &r1.p, per_round, cov)
        + round_variance(&g[4..], &r2.p, per_round, cov))
    .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::concurrence_sq;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn equal_moduli(phases: [f64; 4]) -> PureState<f64> {
        PureState::from_polar([0.5; 4], phases).unwrap()
    }

    #[test]
    fn round1_examples() {
        assert_eq!(
            round1_probabilities(&PureState::<f64>::basis(0)).p,
            [1.0, 0.0, 0.0, 0.0]
        );
        let p = round1_probabilities(&PureState::<f64>::bell()).p;
        for (got, want) in p.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let p = round1_probabilities(&equal_moduli([0.1, 0.2, 0.3, 0.4])).p;
        for got in p {
            assert_abs_diff_eq!(got, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn round2_examples() {
        let p = round2_probabilities(&equal_moduli([0.0, 0.0, 0.0, PI])).p;
        for (got, want) in p.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let s = PureState::from_real([FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(round2_probabilities(&s).p[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cosines_examples() {
        let s = equal_moduli([0.0, 0.0, 0.0, PI]);
        let c = phase_cosines(&round1_probabilities(&s), &round2_probabilities(&s));
        assert_abs_diff_eq!(c.c01.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c23.value, -1.0, epsilon = 1e-12);

        let r1 = RoundOneProbs {
            p: [0.5, 0.0, 0.25, 0.25],
        };
        let r2 = RoundTwoProbs {
            p: [0.25, 0.25, 0.25, 0.25],
        };
        let c = phase_cosines(&r1, &r2);
        assert!(!c.c01.defined);
        assert!(c.c23.defined);

        // raw c01 = (2·0.5125 − 0.5)/(2·0.25) = 1.05
        let r1 = RoundOneProbs {
            p: [0.25, 0.25, 0.25, 0.25],
        };
        let r2 = RoundTwoProbs {
            p: [0.5125, 0.0, 0.25, 0.2375],
        };
        let c = phase_cosines(&r1, &r2);
        assert!(c.c01.clamped);
        assert_eq!(c.c01.value, 1.0);
    }

    #[test]
    fn concurrence_examples() {
        let s = equal_moduli([0.0, 0.0, 0.0, PI]);
        let r1 = round1_probabilities(&s);
        let cos = phase_cosines(&r1, &round2_probabilities(&s));
        for b in [Branch::Plus, Branch::Minus] {
            assert_abs_diff_eq!(concurrence_sq_cc(&r1, &cos, b).0, 1.0, epsilon = 1e-12);
        }

        let s = PureState::from_real([FRAC_1_SQRT_2, 0.5, 0.5, 0.0]).unwrap();
        let r1 = round1_probabilities(&s);
        let cos = phase_cosines(&r1, &round2_probabilities(&s));
        assert_abs_diff_eq!(
            concurrence_sq_cc(&r1, &cos, Branch::Plus).0,
            0.25,
            epsilon = 1e-12
        );

        let s = PureState::from_real([FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0]).unwrap();
        let r1 = round1_probabilities(&s);
        let cos = phase_cosines(&r1, &round2_probabilities(&s));
        assert_abs_diff_eq!(
            concurrence_sq_cc(&r1, &cos, Branch::Plus).0,
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn branch_of_state_reproduces_concurrence() {
        let s = PureState::from_polar([0.4, 0.5, 0.6, 0.48], [0.3, 1.9, 4.0, 2.2]).unwrap();
        let r1 = round1_probabilities(&s);
        let r2 = round2_probabilities(&s);
        let est = estimate_from_probabilities(&r1, &r2, Branch::of_state(&s));
        assert_abs_diff_eq!(
            est.values.concurrence_sq,
            concurrence_sq(&s),
            epsilon = 1e-12
        );
        assert!(est.branches_disagree);
    }

    #[test]
    fn marginal_identities() {
        let s = PureState::from_polar([0.4, 0.5, 0.6, 0.48], [0.3, 1.9, 4.0, 2.2]).unwrap();
        let r1 = round1_probabilities(&s).p;
        let r2 = round2_probabilities(&s).p;
        assert_abs_diff_eq!(r2[0] + r2[1], r1[0] + r1[1], epsilon = 1e-12);
        assert_abs_diff_eq!(r2[2] + r2[3], 1.0 - r1[0] - r1[1], epsilon = 1e-12);
    }

    #[test]
    fn budget_precondition() {
        assert!(
            analytic_uncertainty_cc(&PureState::<f64>::bell(), 1, Covariance::Multinomial).is_err()
        );
    }

    #[test]
    fn count_arity_checked() {
        let two = CountVector::new(vec![1, 1]).unwrap();
        let four = CountVector::new(vec![1, 1, 1, 1]).unwrap();
        assert!(estimate_entanglement_cc::<f64>(&two, &four, Branch::Plus).is_err());
        assert!(estimate_entanglement_cc::<f64>(&four, &four, Branch::Plus).is_ok());
    }
}
