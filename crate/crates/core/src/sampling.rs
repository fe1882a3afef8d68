//! Seeded random streams, Haar-distributed states and multinomial counts.
//!
//! Every random object is addressed by a `(seed, index)` pair so ensembles can
//! be generated in any order, on any number of threads, with identical output.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{cmat4_zero, inner4, CMat4};
use crate::quantum::PureState;
use crate::scalar::{lit, to_f64, Real};

/// Stream domains, so different experiment stages never share random numbers.
pub mod domain {
    pub const STATES: u64 = 0x5354_4154;
    pub const COUNTS: u64 = 0x434f_554e;
    pub const BASES: u64 = 0x4241_5345;
    pub const TRIPLES: u64 = 0x5452_4950;
    pub const PHASES: u64 = 0x5048_4153;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-addressed random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SeededStream {
    pub seed: u64,
    pub index: u64,
}

impl SeededStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    /// Stream `index` inside the given domain of master seed `seed`.
    pub fn in_domain(seed: u64, domain: u64, index: u64) -> Self {
        Self {
            seed: splitmix64(seed ^ splitmix64(domain)),
            index,
        }
    }

    /// Child stream keyed by `tag`; keeps the index.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x0123_4567))),
            index: self.index,
        }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

/// Outcome tallies of `shots` repetitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountVector {
    pub counts: Vec<u64>,
    pub shots: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let shots: u64 = counts.iter().sum();
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        Ok(Self { counts, shots })
    }

    pub fn frequencies<T: Real>(&self) -> Vec<T> {
        let n = self.shots as f64;
        self.counts.iter().map(|&c| lit(c as f64 / n)).collect()
    }
}

fn gaussian_unit_vector<R: Rng>(rng: &mut R) -> [Complex<f64>; 4] {
    loop {
        let mut v = [Complex::new(0.0, 0.0); 4];
        for a in v.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *a = Complex::new(re, im);
        }
        let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.map(|a| a / n);
        }
    }
}

/// Draws a state from the unitarily invariant measure.
pub fn sample_state<T: Real>(stream: SeededStream) -> PureState<T> {
    sample_state_with(&mut stream.rng())
}

pub fn sample_state_with<T: Real, R: Rng>(rng: &mut R) -> PureState<T> {
    let v = gaussian_unit_vector(rng);
    PureState::normalize(v.map(|a| Complex::new(lit(a.re), lit(a.im))))
        .expect("gaussian vector is nonzero")
}

/// Haar-random 4×4 unitary; its rows form an orthonormal basis.
/// Gram-Schmidt on a complex Ginibre matrix.
pub fn sample_unitary4<T: Real>(stream: SeededStream) -> CMat4<T> {
    let mut rng = stream.rng();
    let mut rows: [[Complex<f64>; 4]; 4] = [[Complex::new(0.0, 0.0); 4]; 4];
    let mut i = 0;
    while i < 4 {
        let mut v = gaussian_unit_vector(&mut rng);
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for prev in rows.iter().take(i) {
                let p = inner4(prev, &v);
                for k in 0..4 {
                    v[k] -= p * prev[k];
                }
            }
        }
        let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if n < 1e-8 {
            continue;
        }
        rows[i] = v.map(|a| a / n);
        i += 1;
    }
    let mut out = cmat4_zero();
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] = Complex::new(lit(rows[r][c].re), lit(rows[r][c].im));
        }
    }
    out
}

fn validate_probabilities<T: Real>(probs: &[T]) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::InvalidProbabilities("empty".into()));
    }
    let p: Vec<f64> = probs.iter().map(|&x| to_f64(x)).collect();
    if let Some(bad) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidProbabilities(format!(
            "entry {bad} is negative or not finite"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbabilities(format!("entries sum to {sum}")));
    }
    Ok(p)
}

/// Multinomial outcome counts by sequential binomial conditioning.
pub fn multinomial_counts<T: Real>(
    probs: &[T],
    shots: u64,
    stream: SeededStream,
) -> Result<CountVector> {
    multinomial_counts_with(probs, shots, &mut stream.rng())
}

pub fn multinomial_counts_with<T: Real, R: Rng>(
    probs: &[T],
    shots: u64,
    rng: &mut R,
) -> Result<CountVector> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let p = validate_probabilities(probs)?;
    let mut counts = vec![0u64; p.len()];
    let mut remaining = shots;
    let mut mass = 1.0f64;
    let last = p.len() - 1;
    for (i, &pi) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        let q = if mass > 0.0 {
            (pi / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = if q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q)
                .expect("valid binomial")
                .sample(rng)
        };
        counts[i] = c;
        remaining -= c;
        mass -= pi;
    }
    // a zero-probability tail never receives the leftover
    if remaining > 0 && p[last] == 0.0 {
        let target = p.iter().rposition(|&x| x > 0.0).unwrap_or(0);
        counts[target] += counts[last];
        counts[last] = 0;
    }
    Ok(CountVector { counts, shots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_same_state() {
        let a: PureState<f64> = sample_state(SeededStream::new(1, 0));
        let b: PureState<f64> = sample_state(SeededStream::new(1, 0));
        assert_eq!(a, b);
        let c: PureState<f64> = sample_state(SeededStream::new(1, 1));
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_state_is_normalized() {
        for i in 0..100 {
            let s: PureState<f64> = sample_state(SeededStream::new(7, i));
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_outcome() {
        let c = multinomial_counts(&[1.0, 0.0], 100, SeededStream::new(0, 0)).unwrap();
        assert_eq!(c.counts, vec![100, 0]);
        let c = multinomial_counts(&[0.0, 1.0], 100, SeededStream::new(0, 0)).unwrap();
        assert_eq!(c.counts, vec![0, 100]);
        let c = multinomial_counts(&[0.5, 0.5, 0.0], 1000, SeededStream::new(3, 0)).unwrap();
        assert_eq!(c.counts[2], 0);
        assert_eq!(c.counts.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn binomial_concentration() {
        let c = multinomial_counts(&[0.5, 0.5], 1_000_000, SeededStream::new(11, 0)).unwrap();
        let sigma = (1e6f64 * 0.25).sqrt();
        assert!((c.counts[0] as f64 - 5e5).abs() < 5.0 * sigma);
        assert_eq!(c.counts[0] + c.counts[1], 1_000_000);
    }

    #[test]
    fn invalid_probabilities_rejected() {
        let s = SeededStream::new(0, 0);
        assert!(matches!(
            multinomial_counts(&[0.5, 0.4], 10, s),
            Err(Error::InvalidProbabilities(_))
        ));
        assert!(matches!(
            multinomial_counts(&[1.2, -0.2], 10, s),
            Err(Error::InvalidProbabilities(_))
        ));
        assert!(matches!(
            multinomial_counts::<f64>(&[], 10, s),
            Err(Error::InvalidProbabilities(_))
        ));
        assert_eq!(multinomial_counts(&[1.0], 0, s), Err(Error::ZeroShots));
    }

    #[test]
    fn unitary_rows_orthonormal() {
        let u: CMat4<f64> = sample_unitary4(SeededStream::new(5, 2));
        for i in 0..4 {
            for j in 0..4 {
                let v = inner4(&u[i], &u[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - Complex::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn domains_are_distinct() {
        let a = SeededStream::in_domain(0, domain::STATES, 0);
        let b = SeededStream::in_domain(0, domain::COUNTS, 0);
        assert_ne!(a.seed, b.seed);
        assert_ne!(a.derive(1).seed, a.derive(2).seed);
    }
}
