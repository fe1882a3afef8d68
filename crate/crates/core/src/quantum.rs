//! Two-qubit pure states, reduced density operators and entanglement measures.
//!
//! Amplitudes are indexed in the computational basis `|00⟩, |01⟩, |10⟩, |11⟩`,
//! with the first label belonging to subsystem A.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{czero, Vec3};
use crate::scalar::{clamp_flagged, lit, Real};

/// Normalized two-qubit pure state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState<T: Real> {
    amps: [Complex<T>; 4],
}

impl<T: Real> PureState<T> {
    /// Normalizes `raw`; the zero vector is rejected.
    pub fn normalize(raw: [Complex<T>; 4]) -> Result<Self> {
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt();
        if norm == T::zero() || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            amps: raw.map(|a| a / norm),
        })
    }

    /// Convenience constructor from real amplitudes.
    pub fn from_real(raw: [T; 4]) -> Result<Self> {
        Self::normalize(raw.map(|x| Complex::new(x, T::zero())))
    }

    /// Builds `Σ m_i e^{iφ_i} |i⟩` and normalizes it.
    pub fn from_polar(moduli: [T; 4], phases: [T; 4]) -> Result<Self> {
        let mut raw = [czero(); 4];
        for i in 0..4 {
            raw[i] = Complex::from_polar(moduli[i], phases[i]);
        }
        Self::normalize(raw)
    }

    pub fn basis(index: usize) -> Self {
        let mut amps = [czero(); 4];
        amps[index] = Complex::new(T::one(), T::zero());
        Self { amps }
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn bell() -> Self {
        let h = T::FRAC_1_SQRT_2();
        Self {
            amps: [
                Complex::new(h, T::zero()),
                czero(),
                czero(),
                Complex::new(h, T::zero()),
            ],
        }
    }

    pub fn amplitudes(&self) -> &[Complex<T>; 4] {
        &self.amps
    }

    /// Moduli `m_i` and phases `φ_i ∈ [0, 2π)`.
    pub fn polar(&self) -> ([T; 4], [T; 4]) {
        let two_pi = T::TAU();
        let mut m = [T::zero(); 4];
        let mut phi = [T::zero(); 4];
        for i in 0..4 {
            let (r, mut t) = self.amps[i].to_polar();
            if t < T::zero() {
                t = t + two_pi;
            }
            if t >= two_pi {
                t = t - two_pi;
            }
            m[i] = r;
            phi[i] = t;
        }
        (m, phi)
    }

    /// Computational-basis probabilities `|a_i|²`.
    pub fn probabilities(&self) -> [T; 4] {
        self.amps.map(|a| a.norm_sqr())
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies `U_A ⊗ U_B`.
    pub fn apply_local(&self, ua: &[[Complex<T>; 2]; 2], ub: &[[Complex<T>; 2]; 2]) -> Self {
        let mut out = [czero(); 4];
        for (i, o) in out.iter_mut().enumerate() {
            let (ia, ib) = (i >> 1, i & 1);
            for (j, a) in self.amps.iter().enumerate() {
                let (ja, jb) = (j >> 1, j & 1);
                *o = *o + ua[ia][ja] * ub[ib][jb] * a;
            }
        }
        Self { amps: out }
    }

    /// Applies an arbitrary 4×4 matrix and renormalizes.
    pub fn apply(&self, u: &crate::linalg::CMat4<T>) -> Result<Self> {
        Self::normalize(crate::linalg::cmat4_vec(u, &self.amps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Subsystem {
    A,
    B,
}

/// Single-qubit density operator with its Bloch vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState<T: Real> {
    pub rho: [[Complex<T>; 2]; 2],
    pub bloch: Vec3<T>,
}

impl<T: Real> ReducedState<T> {
    /// `½(𝟙 + σ·S)`.
    pub fn from_bloch(s: Vec3<T>) -> Self {
        let half = lit::<T>(0.5);
        let rho = [
            [
                Complex::new(half * (T::one() + s[2]), T::zero()),
                Complex::new(half * s[0], -half * s[1]),
            ],
            [
                Complex::new(half * s[0], half * s[1]),
                Complex::new(half * (T::one() - s[2]), T::zero()),
            ],
        ];
        Self { rho, bloch: s }
    }

    pub fn det(&self) -> T {
        (self.rho[0][0] * self.rho[1][1] - self.rho[0][1] * self.rho[1][0]).re
    }

    pub fn trace(&self) -> T {
        (self.rho[0][0] + self.rho[1][1]).re
    }

    /// Eigenvalues of the 2×2 Hermitian operator, larger first.
    pub fn eigenvalues(&self) -> (T, T) {
        let half = lit::<T>(0.5);
        let a = self.rho[0][0].re;
        let d = self.rho[1][1].re;
        let b = self.rho[0][1].norm();
        let mean = half * (a + d);
        let r = (half * half * (a - d) * (a - d) + b * b).sqrt();
        (mean + r, mean - r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntanglementValues<T: Real> {
    pub concurrence_sq: T,
    pub det_reduced: T,
    /// von Neumann entropy in bits.
    pub entropy: T,
}

impl<T: Real> EntanglementValues<T> {
    /// Completes the triple from a reduced determinant, clamping it into `[0, ¼]`.
    /// The flag reports whether clamping happened.
    pub fn from_det(det: T) -> (Self, bool) {
        let (det, clamped) = clamp_flagged(det, T::zero(), lit(0.25));
        let c2 = lit::<T>(4.0) * det;
        let (c2, c2_clamped) = clamp_flagged(c2, T::zero(), T::one());
        let entropy = entropy_from_concurrence_sq(c2).value;
        (
            Self {
                concurrence_sq: c2,
                det_reduced: det,
                entropy,
            },
            clamped || c2_clamped,
        )
    }

    pub fn from_concurrence_sq(c2: T) -> (Self, bool) {
        Self::from_det(c2 / lit(4.0))
    }
}

/// A value that may have been clamped into its physical range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Clamped<T> {
    pub value: T,
    pub clamped: bool,
}

/// `C² = 4|a₀a₃ − a₁a₂|²`.
pub fn concurrence_sq<T: Real>(state: &PureState<T>) -> T {
    let a = state.amplitudes();
    lit::<T>(4.0) * (a[0] * a[3] - a[1] * a[2]).norm_sqr()
}

/// Partial trace of `|ψ⟩⟨ψ|` over the complementary subsystem.
pub fn reduced_density<T: Real>(state: &PureState<T>, subsystem: Subsystem) -> ReducedState<T> {
    let a = state.amplitudes();
    // psi(x, y): x indexes the kept qubit, y the traced one
    let psi = |x: usize, y: usize| match subsystem {
        Subsystem::A => a[2 * x + y],
        Subsystem::B => a[2 * y + x],
    };
    let mut rho = [[czero(); 2]; 2];
    for (x, row) in rho.iter_mut().enumerate() {
        for (xp, entry) in row.iter_mut().enumerate() {
            *entry = psi(x, 0) * psi(xp, 0).conj() + psi(x, 1) * psi(xp, 1).conj();
        }
    }
    let two = lit::<T>(2.0);
    let bloch = [
        two * rho[0][1].re,
        -two * rho[0][1].im,
        two * rho[0][0].re - T::one(),
    ];
    ReducedState { rho, bloch }
}

/// `(1 − |S|²)/4`; negative for unphysical Bloch vectors.
pub fn det_from_bloch<T: Real>(s: &Vec3<T>) -> T {
    (T::one() - crate::linalg::dot3(s, s)) / lit(4.0)
}

/// Entropy of entanglement (bits) as a function of `C²`. Inputs outside
/// `[0, 1]` are clamped first.
pub fn entropy_from_concurrence_sq<T: Real>(c2: T) -> Clamped<T> {
    let (c2, clamped) = clamp_flagged(c2, T::zero(), T::one());
    let half = lit::<T>(0.5);
    let root = (T::one() - c2).sqrt();
    let hi = half * (T::one() + root);
    let lo = half * (T::one() - root);
    let xlog = |x: T| {
        if x <= T::zero() {
            T::zero()
        } else {
            x * x.log2()
        }
    };
    let value = -(xlog(hi) + xlog(lo));
    Clamped {
        value: value.max(T::zero()).min(T::one()),
        clamped,
    }
}

/// All three measures of a state. The reduced determinant is taken from `ρ_A`.
pub fn entanglement<T: Real>(state: &PureState<T>) -> EntanglementValues<T> {
    let c2 = concurrence_sq(state);
    let det = reduced_density(state, Subsystem::A).det();
    debug_assert!((lit::<T>(4.0) * det - c2).abs() < lit(1e-4));
    EntanglementValues {
        concurrence_sq: c2,
        det_reduced: det,
        entropy: entropy_from_concurrence_sq(c2).value,
    }
}

/// Random single-qubit unitary built from Euler angles and a global phase.
pub fn unitary2<T: Real>(alpha: T, beta: T, gamma: T, delta: T) -> [[Complex<T>; 2]; 2] {
    let half = lit::<T>(0.5);
    let (c, s) = ((half * gamma).cos(), (half * gamma).sin());
    let e = |t: T| Complex::from_polar(T::one(), t);
    [
        [
            e(alpha - half * beta - half * delta) * c,
            -e(alpha - half * beta + half * delta) * s,
        ],
        [
            e(alpha + half * beta - half * delta) * s,
            e(alpha + half * beta + half * delta) * c,
        ],
    ]
}
