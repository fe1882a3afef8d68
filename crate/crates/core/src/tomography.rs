//! Local reconstruction of `ρ_A` from three projective directions, and the
//! first-order uncertainty of the resulting determinant.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{condition3, dot3, inverse3, mat3_transpose_vec, mat3_vec, norm3, Mat3, Vec3};
use crate::quantum::{det_from_bloch, reduced_density, EntanglementValues, PureState, Subsystem};
use crate::sampling::{domain, sample_state, CountVector, SeededStream};
use crate::scalar::{lit, Real};
use crate::stats::mean_and_stderr;

/// Triples whose Frobenius condition number exceeds this are rejected.
pub const DEGENERACY_LIMIT: f64 = 1e8;

/// Three measurement directions, stored as the rows of `D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionTriple<T: Real> {
    dirs: Mat3<T>,
    inverse: Mat3<T>,
    condition: T,
}

impl<T: Real> DirectionTriple<T> {
    /// Normalizes the three vectors and checks they are linearly independent.
    pub fn from_vectors(vectors: [Vec3<T>; 3]) -> Result<Self> {
        let mut dirs = vectors;
        for (index, d) in dirs.iter_mut().enumerate() {
            let n = norm3(d);
            if n == T::zero() || !n.is_finite() {
                return Err(Error::ZeroDirection { index });
            }
            *d = d.map(|x| x / n);
        }
        let condition = condition3(&dirs);
        let limit = lit::<T>(DEGENERACY_LIMIT);
        match inverse3(&dirs) {
            Some(inverse) if condition <= limit => Ok(Self {
                dirs,
                inverse,
                condition,
            }),
            _ => Err(Error::DegenerateGeometry {
                condition: crate::scalar::to_f64(condition),
                limit: DEGENERACY_LIMIT,
            }),
        }
    }

    /// `ẑ` plus two directions at polar angles `θ_m`, `θ_n` whose azimuths
    /// differ by `φ_nm = φ_m − φ_n` (with `φ_n = 0`).
    pub fn from_angles(theta_m: T, theta_n: T, phi_nm: T) -> Result<Self> {
        let z = [T::zero(), T::zero(), T::one()];
        let m = [
            theta_m.sin() * phi_nm.cos(),
            theta_m.sin() * phi_nm.sin(),
            theta_m.cos(),
        ];
        let n = [theta_n.sin(), T::zero(), theta_n.cos()];
        Self::from_vectors([z, m, n])
    }

    /// `(ẑ, x̂, ŷ)`.
    pub fn orthogonal() -> Self {
        let (o, l) = (T::zero(), T::one());
        Self::from_vectors([[o, o, l], [l, o, o], [o, l, o]]).expect("orthonormal axes")
    }

    pub fn directions(&self) -> &Mat3<T> {
        &self.dirs
    }

    pub fn inverse(&self) -> &Mat3<T> {
        &self.inverse
    }

    pub fn condition(&self) -> T {
        self.condition
    }

    /// Largest `|d_i · d_j|` over distinct pairs; zero for an orthogonal triple.
    pub fn max_overlap(&self) -> T {
        let d = &self.dirs;
        dot3(&d[0], &d[1])
            .abs()
            .max(dot3(&d[0], &d[2]).abs())
            .max(dot3(&d[1], &d[2]).abs())
    }
}

/// Spin-up probabilities along the three directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalProbabilities<T: Real> {
    pub up: [T; 3],
}

/// Pairs spent per direction: `N/3` each, remainder handed out round-robin.
pub fn split_budget(total: u64, parts: usize) -> Vec<u64> {
    let p = parts as u64;
    (0..p)
        .map(|k| total / p + u64::from(k < total % p))
        .collect()
}

pub fn probabilities_from_bloch<T: Real>(
    s: &Vec3<T>,
    dirs: &DirectionTriple<T>,
) -> LocalProbabilities<T> {
    let proj = mat3_vec(&dirs.dirs, s);
    let half = lit::<T>(0.5);
    LocalProbabilities {
        up: proj.map(|x| half * (T::one() + x)),
    }
}

/// `P_k = (1 + S·d_k)/2` for the Bloch vector of `ρ_A`.
pub fn outcome_probabilities<T: Real>(
    state: &PureState<T>,
    dirs: &DirectionTriple<T>,
) -> LocalProbabilities<T> {
    let s = reduced_density(state, Subsystem::A).bloch;
    probabilities_from_bloch(&s, dirs)
}

/// Solves `D S = 2P − 1`.
pub fn reconstruct_bloch<T: Real>(
    probs: &LocalProbabilities<T>,
    dirs: &DirectionTriple<T>,
) -> Vec3<T> {
    let two = lit::<T>(2.0);
    let rhs = probs.up.map(|p| two * p - T::one());
    mat3_vec(&dirs.inverse, &rhs)
}

/// `∂ det ρ_A / ∂P_k = −(D⁻ᵀ S)_k`.
pub fn det_gradient<T: Real>(probs: &LocalProbabilities<T>, dirs: &DirectionTriple<T>) -> Vec3<T> {
    let s = reconstruct_bloch(probs, dirs);
    mat3_transpose_vec(&dirs.inverse, &s).map(|g| -g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalEstimate<T: Real> {
    pub values: EntanglementValues<T>,
    /// Determinant before clamping.
    pub raw_det: T,
    pub bloch: Vec3<T>,
    pub clamped: bool,
}

/// Estimator from exact or empirical probabilities.
pub fn estimate_from_probabilities<T: Real>(
    probs: &LocalProbabilities<T>,
    dirs: &DirectionTriple<T>,
) -> LocalEstimate<T> {
    let bloch = reconstruct_bloch(probs, dirs);
    let raw_det = det_from_bloch(&bloch);
    let (values, clamped) = EntanglementValues::from_det(raw_det);
    LocalEstimate {
        values,
        raw_det,
        bloch,
        clamped,
    }
}

/// Empirical frequencies → Bloch vector → clamped determinant → `C²`, `E`.
/// Each count vector holds `(up, down)` for one direction.
pub fn estimate_entanglement_local<T: Real>(
    counts: &[CountVector; 3],
    dirs: &DirectionTriple<T>,
) -> Result<LocalEstimate<T>> {
    let mut up = [T::zero(); 3];
    for (k, c) in counts.iter().enumerate() {
        if c.counts.len() != 2 {
            return Err(Error::InvalidProbabilities(format!(
                "direction {k} needs two outcome counts, got {}",
                c.counts.len()
            )));
        }
        up[k] = c.frequencies::<T>()[0];
    }
    Ok(estimate_from_probabilities(
        &LocalProbabilities { up },
        dirs,
    ))
}

/// Standard deviation of the determinant estimate by first-order propagation,
/// with `N/3` pairs per direction.
pub fn analytic_uncertainty<T: Real>(
    state: &PureState<T>,
    dirs: &DirectionTriple<T>,
    pairs: u64,
) -> Result<T> {
    if pairs < 3 {
        return Err(Error::InsufficientBudget {
            budget: pairs,
            min: 3,
        });
    }
    let probs = outcome_probabilities(state, dirs);
    Ok(uncertainty_from_probabilities(
        &probs,
        dirs,
        lit::<T>(pairs as f64) / lit(3.0),
    ))
}

/// `√(Σ_k g_k² P_k(1−P_k)/n)` with `n` pairs per direction.
pub fn uncertainty_from_probabilities<T: Real>(
    probs: &LocalProbabilities<T>,
    dirs: &DirectionTriple<T>,
    per_direction: T,
) -> T {
    let g = det_gradient(probs, dirs);
    let var: T = (0..3)
        .map(|k| {
            let p = probs.up[k];
            g[k] * g[k] * (p * (T::one() - p)).max(T::zero()) / per_direction
        })
        .sum();
    var.sqrt()
}

/// Ensemble-averaged uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintyReport<T: Real> {
    pub per_state: Vec<T>,
    pub delta_av: T,
    pub stderr: T,
    pub pairs: u64,
    pub clamp_events: u64,
}

impl<T: Real> UncertaintyReport<T> {
    pub fn from_values(per_state: Vec<T>, pairs: u64, clamp_events: u64) -> Self {
        let (delta_av, stderr) = mean_and_stderr(&per_state);
        Self {
            per_state,
            delta_av,
            stderr,
            pairs,
            clamp_events,
        }
    }

    pub fn ensemble_size(&self) -> usize {
        self.per_state.len()
    }
}

/// The shared Haar ensemble for `seed`: state `i` uses stream `i` of the
/// state domain.
pub fn haar_ensemble<T: Real>(seed: u64, size: usize) -> Vec<PureState<T>> {
    (0..size as u64)
        .into_par_iter()
        .map(|i| sample_state(SeededStream::in_domain(seed, domain::STATES, i)))
        .collect()
}

pub fn average_uncertainty_over<T: Real>(
    states: &[PureState<T>],
    dirs: &DirectionTriple<T>,
    pairs: u64,
) -> Result<UncertaintyReport<T>> {
    if states.is_empty() {
        return Err(Error::Config("ensemble size must be at least 1".into()));
    }
    let per_state = states
        .par_iter()
        .map(|s| analytic_uncertainty(s, dirs, pairs))
        .collect::<Result<Vec<T>>>()?;
    Ok(UncertaintyReport::from_values(per_state, pairs, 0))
}

/// Mean analytic uncertainty over `size` Haar states drawn from `seed`.
pub fn average_uncertainty<T: Real>(
    dirs: &DirectionTriple<T>,
    size: usize,
    pairs: u64,
    seed: u64,
) -> Result<UncertaintyReport<T>> {
    if size == 0 {
        return Err(Error::Config("ensemble size must be at least 1".into()));
    }
    let states = haar_ensemble::<T>(seed, size);
    average_uncertainty_over(&states, dirs, pairs)
}
