//! Single-observable no-go checks.
//!
//! For an orthonormal basis `{|O_i⟩}` this builds
//! `K_ij = ⟨O_i|σ_y⊗σ_y|O_j*⟩`, `S_ij = ⟨O_j*|O_i⟩` and
//! `σ_ij = ⟨O_i|σ_y⊗σ_y|O_j⟩`, checks `K = σS†` with `|det K| = 1`, and searches
//! the relative phases of `⟨O_i|ψ⟩` for two states with identical outcome
//! probabilities but different `C²`. Complex conjugation is always taken
//! componentwise in the computational basis.

use num_complex::Complex;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    cmat4_adjoint, cmat4_det, cmat4_distance, cmat4_identity, cmat4_mul, cmat4_transpose,
    cmat4_zero, czero, inner4, CMat4,
};
use crate::quantum::PureState;
use crate::sampling::{sample_unitary4, SeededStream};
use crate::scalar::{lit, to_f64, Real};

/// Concurrence gap a counterexample must reach.
pub const REQUIRED_GAP: f64 = 0.1;
/// Quasi-random phase points probed per moduli choice.
pub const PHASE_SAMPLES: usize = 10_000;
const MODULI_ATTEMPTS: usize = 16;

/// `σ_y ⊗ σ_y`, real in the computational basis.
pub fn sigma_yy<T: Real>() -> CMat4<T> {
    let mut m = cmat4_zero();
    let one = Complex::new(T::one(), T::zero());
    m[0][3] = -one;
    m[1][2] = one;
    m[2][1] = one;
    m[3][0] = -one;
    m
}

/// Eigenbasis of a candidate observable; row `i` holds `|O_i⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableBasis<T: Real> {
    vectors: CMat4<T>,
}

/// `‖V V† − 𝟙‖_F` for the rows of `V`.
pub fn orthonormality_residual<T: Real>(rows: &CMat4<T>) -> T {
    let mut gram = cmat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            gram[i][j] = inner4(&rows[i], &rows[j]);
        }
    }
    cmat4_distance(&gram, &cmat4_identity())
}

impl<T: Real> ObservableBasis<T> {
    pub fn new(vectors: CMat4<T>) -> Result<Self> {
        let residual = orthonormality_residual(&vectors);
        if residual.is_nan() || residual >= T::validation_tolerance() {
            return Err(Error::NotOrthonormal {
                residual: to_f64(residual),
            });
        }
        Ok(Self { vectors })
    }

    pub fn standard() -> Self {
        Self {
            vectors: cmat4_identity(),
        }
    }

    /// Haar-random basis.
    pub fn random(stream: SeededStream) -> Self {
        Self::new(sample_unitary4(stream)).expect("Gram-Schmidt output is orthonormal")
    }

    pub fn vectors(&self) -> &CMat4<T> {
        &self.vectors
    }

    /// `⟨O_i|ψ⟩`.
    pub fn coefficients(&self, state: &PureState<T>) -> [Complex<T>; 4] {
        let mut c = [czero(); 4];
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = inner4(&self.vectors[i], state.amplitudes());
        }
        c
    }

    /// Outcome probabilities `p_i = |⟨O_i|ψ⟩|²`.
    pub fn probabilities(&self, state: &PureState<T>) -> [T; 4] {
        self.coefficients(state).map(|c| c.norm_sqr())
    }

    /// `Σ_i m_i e^{iφ_i} |O_i⟩`.
    pub fn compose(&self, moduli: &[T; 4], phases: &[T; 4]) -> Result<PureState<T>> {
        let mut raw = [czero(); 4];
        for i in 0..4 {
            let c = Complex::from_polar(moduli[i], phases[i]);
            for (a, r) in raw.iter_mut().enumerate() {
                *r = *r + c * self.vectors[i][a];
            }
        }
        PureState::normalize(raw)
    }
}

fn conj_vec<T: Real>(v: &[Complex<T>; 4]) -> [Complex<T>; 4] {
    v.map(|c| c.conj())
}

/// `⟨u|M|v⟩`.
fn sandwich<T: Real>(u: &[Complex<T>; 4], m: &CMat4<T>, v: &[Complex<T>; 4]) -> Complex<T> {
    let mv = crate::linalg::cmat4_vec(m, v);
    inner4(u, &mv)
}

pub fn k_matrix<T: Real>(basis: &ObservableBasis<T>) -> CMat4<T> {
    let y = sigma_yy();
    let o = basis.vectors();
    let mut k = cmat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            k[i][j] = sandwich(&o[i], &y, &conj_vec(&o[j]));
        }
    }
    k
}

pub fn s_matrix<T: Real>(basis: &ObservableBasis<T>) -> CMat4<T> {
    let o = basis.vectors();
    let mut s = cmat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            s[i][j] = inner4(&conj_vec(&o[j]), &o[i]);
        }
    }
    s
}

pub fn sigma_matrix<T: Real>(basis: &ObservableBasis<T>) -> CMat4<T> {
    let y = sigma_yy();
    let o = basis.vectors();
    let mut m = cmat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = sandwich(&o[i], &y, &o[j]);
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KMatrixReport<T: Real> {
    pub k: CMat4<T>,
    pub s: CMat4<T>,
    pub sigma: CMat4<T>,
    pub det_k_abs: T,
    pub det_s_abs: T,
    pub det_sigma: Complex<T>,
    /// `‖K − Kᵀ‖_F`
    pub symmetry_residual: T,
    /// `‖K − σS†‖_F`
    pub factorization_residual: T,
    /// `‖S†S − 𝟙‖_F`
    pub unitarity_residual: T,
    pub lemma_holds: bool,
}

/// Builds all three matrices and checks `K = σS†`, `K = Kᵀ`, `S†S = 𝟙`,
/// `det σ = 1` and `|det K| = 1`.
pub fn verify_lemma<T: Real>(basis: &ObservableBasis<T>) -> KMatrixReport<T> {
    let k = k_matrix(basis);
    let s = s_matrix(basis);
    let sigma = sigma_matrix(basis);
    let s_dag = cmat4_adjoint(&s);
    let factorization_residual = cmat4_distance(&k, &cmat4_mul(&sigma, &s_dag));
    let symmetry_residual = cmat4_distance(&k, &cmat4_transpose(&k));
    let unitarity_residual = cmat4_distance(&cmat4_mul(&s_dag, &s), &cmat4_identity());
    let det_k_abs = cmat4_det(&k).norm();
    let det_s_abs = cmat4_det(&s).norm();
    let det_sigma = cmat4_det(&sigma);

    let tol = T::validation_tolerance();
    let det_tol = tol * lit(10.0);
    let lemma_holds = factorization_residual < tol
        && symmetry_residual < tol
        && unitarity_residual < tol
        && (det_sigma - Complex::new(T::one(), T::zero())).norm() < det_tol
        && (det_k_abs - T::one()).abs() < det_tol;
    KMatrixReport {
        k,
        s,
        sigma,
        det_k_abs,
        det_s_abs,
        det_sigma,
        symmetry_residual,
        factorization_residual,
        unitarity_residual,
        lemma_holds,
    }
}

/// `C²` as the quadruple sum `Σ m_i m_j m_k m_l e^{i(φ_k+φ_l−φ_i−φ_j)} K_ij K_kl*`
/// over the expansion of `ψ` in the basis.
pub fn concurrence_sq_expansion<T: Real>(basis: &ObservableBasis<T>, state: &PureState<T>) -> T {
    let k = k_matrix(basis);
    let c = basis.coefficients(state);
    let m = c.map(|x| x.norm());
    let phi = c.map(|x| x.arg());
    let mut acc = czero::<T>();
    for i in 0..4 {
        for j in 0..4 {
            for kk in 0..4 {
                for l in 0..4 {
                    let w = m[i] * m[j] * m[kk] * m[l];
                    let phase = Complex::from_polar(T::one(), phi[kk] + phi[l] - phi[i] - phi[j]);
                    acc = acc + phase * k[i][j] * k[kk][l].conj() * w;
                }
            }
        }
    }
    acc.re
}

/// Phase-search objective: `|Σ_ij c_i* c_j* K_ij|²` with `c_i = m_i e^{iφ_i}`.
fn concurrence_sq_from_k<T: Real>(k: &CMat4<T>, moduli: &[T; 4], phases: &[T; 4]) -> T {
    let c: [Complex<T>; 4] = std::array::from_fn(|i| Complex::from_polar(moduli[i], -phases[i]));
    let mut acc = czero::<T>();
    for i in 0..4 {
        for j in 0..4 {
            acc = acc + c[i] * c[j] * k[i][j];
        }
    }
    acc.norm_sqr()
}

/// Two states with the same outcome distribution in `basis` and different `C²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Counterexample<T: Real> {
    pub moduli: [T; 4],
    pub phases_low: [T; 4],
    pub phases_high: [T; 4],
    pub state_low: [Complex<T>; 4],
    pub state_high: [Complex<T>; 4],
    pub probabilities_low: [T; 4],
    pub probabilities_high: [T; 4],
    pub c2_low: T,
    pub c2_high: T,
    pub gap: T,
}

impl<T: Real> Counterexample<T> {
    /// Largest difference between the two outcome distributions.
    pub fn probability_mismatch(&self) -> T {
        (0..4)
            .map(|i| (self.probabilities_low[i] - self.probabilities_high[i]).abs())
            .fold(T::zero(), T::max)
    }
}

// Kronecker sequence on the 3-torus from the plastic-ratio generalization of
// the golden ratio.
fn r3_point(n: usize, shift: &[f64; 3]) -> [f64; 3] {
    const G: f64 = 1.220_744_084_605_759_5;
    let alpha = [1.0 / G, 1.0 / (G * G), 1.0 / (G * G * G)];
    std::array::from_fn(|d| (shift[d] + alpha[d] * (n as f64 + 1.0)).fract())
}

fn compass_search<F: Fn(&[f64; 4]) -> f64>(
    f: &F,
    start: [f64; 4],
    maximize: bool,
) -> ([f64; 4], f64) {
    let sign = if maximize { -1.0 } else { 1.0 };
    let obj = |p: &[f64; 4]| sign * f(p);
    let mut best = start;
    let mut best_val = obj(&best);
    let mut step = std::f64::consts::TAU / 64.0;
    while step > 1e-9 {
        let mut improved = false;
        // phase 0 stays pinned; the global phase is irrelevant
        for d in 1..4 {
            for dir in [1.0, -1.0] {
                let mut p = best;
                p[d] += dir * step;
                let v = obj(&p);
                if v < best_val {
                    best = p;
                    best_val = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (
        best.map(|x| x.rem_euclid(std::f64::consts::TAU)),
        sign * best_val,
    )
}

/// Searches relative phases at fixed moduli for the smallest and largest `C²`.
pub fn counterexample_with_moduli<T: Real>(
    basis: &ObservableBasis<T>,
    moduli: [T; 4],
    stream: SeededStream,
) -> Result<Counterexample<T>> {
    let k = k_matrix(basis);
    let norm = moduli.iter().map(|&m| m * m).sum::<T>().sqrt();
    let moduli = moduli.map(|m| m / norm);
    let f = |p: &[f64; 4]| to_f64(concurrence_sq_from_k(&k, &moduli, &p.map(lit::<T>)));

    let mut rng = stream.rng();
    let shift: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>());
    let tau = std::f64::consts::TAU;
    let (mut lo_p, mut lo_v) = ([0.0; 4], f64::INFINITY);
    let (mut hi_p, mut hi_v) = ([0.0; 4], f64::NEG_INFINITY);
    // the grid origin (all phases zero) is always probed first
    for n in 0..=PHASE_SAMPLES {
        let p = if n == 0 {
            [0.0; 4]
        } else {
            let u = r3_point(n - 1, &shift);
            [0.0, tau * u[0], tau * u[1], tau * u[2]]
        };
        let v = f(&p);
        if v < lo_v {
            lo_v = v;
            lo_p = p;
        }
        if v > hi_v {
            hi_v = v;
            hi_p = p;
        }
    }
    let (lo_p, _) = compass_search(&f, lo_p, false);
    let (hi_p, _) = compass_search(&f, hi_p, true);

    let phases_low = lo_p.map(lit::<T>);
    let phases_high = hi_p.map(lit::<T>);
    let state_low = basis.compose(&moduli, &phases_low)?;
    let state_high = basis.compose(&moduli, &phases_high)?;
    let c2_low = crate::quantum::concurrence_sq(&state_low);
    let c2_high = crate::quantum::concurrence_sq(&state_high);
    let gap = c2_high - c2_low;
    if to_f64(gap) < REQUIRED_GAP {
        return Err(Error::SearchFailed {
            gap: to_f64(gap),
            required: REQUIRED_GAP,
        });
    }
    Ok(Counterexample {
        moduli,
        phases_low,
        phases_high,
        state_low: *state_low.amplitudes(),
        state_high: *state_high.amplitudes(),
        probabilities_low: basis.probabilities(&state_low),
        probabilities_high: basis.probabilities(&state_high),
        c2_low,
        c2_high,
        gap,
    })
}

/// Tries equal moduli `m_i = ½` first, then random moduli drawn from `stream`.
pub fn counterexample<T: Real>(
    basis: &ObservableBasis<T>,
    stream: SeededStream,
) -> Result<Counterexample<T>> {
    let mut last_err = None;
    let mut rng = stream.derive(1).rng();
    for attempt in 0..MODULI_ATTEMPTS {
        let moduli = if attempt == 0 {
            [lit::<T>(0.5); 4]
        } else {
            std::array::from_fn(|_| lit::<T>(rng.random::<f64>() + 0.05))
        };
        match counterexample_with_moduli(basis, moduli, stream.derive(100 + attempt as u64)) {
            Ok(c) => return Ok(c),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::concurrence_sq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn standard_basis_k_is_antidiagonal() {
        let k = k_matrix(&ObservableBasis::<f64>::standard());
        let want = [(0, 3, -1.0), (1, 2, 1.0), (2, 1, 1.0), (3, 0, -1.0)];
        for i in 0..4 {
            for j in 0..4 {
                let w = want
                    .iter()
                    .find(|t| t.0 == i && t.1 == j)
                    .map_or(0.0, |t| t.2);
                assert!((k[i][j] - Complex::new(w, 0.0)).norm() < 1e-15);
            }
        }
        let s = s_matrix(&ObservableBasis::<f64>::standard());
        assert!(cmat4_distance(&s, &cmat4_identity()) < 1e-15);
    }

    #[test]
    fn standard_basis_lemma() {
        let r = verify_lemma(&ObservableBasis::<f64>::standard());
        assert!(r.lemma_holds);
        assert!(r.factorization_residual < 1e-12);
        assert!(r.symmetry_residual < 1e-12);
        assert!((r.det_k_abs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corrupted_basis_rejected() {
        let mut v = cmat4_identity::<f64>();
        v[1][0] = Complex::new(0.2, 0.0);
        assert!(matches!(
            ObservableBasis::new(v),
            Err(Error::NotOrthonormal { .. })
        ));
    }

    #[test]
    fn equal_moduli_phase_pair() {
        let b = ObservableBasis::<f64>::standard();
        let lo = b.compose(&[0.5; 4], &[0.0; 4]).unwrap();
        let hi = b.compose(&[0.5; 4], &[0.0, 0.0, 0.0, PI]).unwrap();
        assert!(concurrence_sq(&lo).abs() < 1e-15);
        assert!((concurrence_sq(&hi) - 1.0).abs() < 1e-15);
        for (p, q) in b.probabilities(&lo).iter().zip(b.probabilities(&hi)) {
            assert!((p - 0.25).abs() < 1e-15 && (q - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn search_finds_full_gap_in_standard_basis() {
        let b = ObservableBasis::<f64>::standard();
        let c = counterexample(&b, SeededStream::new(0, 0)).unwrap();
        assert!(c.c2_low < 1e-9);
        assert!(c.c2_high > 1.0 - 1e-9);
        assert!(c.probability_mismatch() < 1e-12);
    }

    #[test]
    fn moduli_can_pin_concurrence() {
        let b = ObservableBasis::<f64>::standard();
        let r = counterexample_with_moduli(
            &b,
            [FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0],
            SeededStream::new(0, 0),
        );
        match r {
            Err(Error::SearchFailed { gap, .. }) => assert!(gap.abs() < 1e-12),
            other => panic!("expected search failure, got {other:?}"),
        }
    }

    #[test]
    fn expansion_matches_direct_in_standard_basis() {
        let s = PureState::from_polar([0.3, 0.5, 0.6, 0.55], [0.1, 2.0, 4.0, 5.5]).unwrap();
        let b = ObservableBasis::<f64>::standard();
        assert!((concurrence_sq_expansion(&b, &s) - concurrence_sq(&s)).abs() < 1e-12);
    }
}
