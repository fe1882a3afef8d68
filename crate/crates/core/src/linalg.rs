//! Fixed-size kernels for the 3×3 real and 4×4 complex matrices used here.

use num_complex::Complex;

use crate::scalar::Real;

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];
pub type CMat4<T> = [[Complex<T>; 4]; 4];

pub fn dot3<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3<T: Real>(a: &Vec3<T>) -> T {
    dot3(a, a).sqrt()
}

pub fn mat3_vec<T: Real>(m: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    [dot3(&m[0], v), dot3(&m[1], v), dot3(&m[2], v)]
}

pub fn mat3_transpose_vec<T: Real>(m: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    let mut out = [T::zero(); 3];
    for (j, o) in out.iter_mut().enumerate() {
        *o = m[0][j] * v[0] + m[1][j] * v[1] + m[2][j] * v[2];
    }
    out
}

pub fn det3<T: Real>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse by the adjugate formula; `None` when the determinant is exactly zero.
pub fn inverse3<T: Real>(m: &Mat3<T>) -> Option<Mat3<T>> {
    let det = det3(m);
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    let c =
        |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 1, 2, 2), -c(0, 1, 2, 2), c(0, 1, 1, 2)],
        [-c(1, 0, 2, 2), c(0, 0, 2, 2), -c(0, 0, 1, 2)],
        [c(1, 0, 2, 1), -c(0, 0, 2, 1), c(0, 0, 1, 1)],
    ];
    let mut inv = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = adj[i][j] / det;
        }
    }
    Some(inv)
}

pub fn frobenius3<T: Real>(m: &Mat3<T>) -> T {
    m.iter().flatten().map(|&x| x * x).sum::<T>().sqrt()
}

/// Frobenius-norm condition number `‖M‖_F ‖M⁻¹‖_F`; infinite for singular input.
pub fn condition3<T: Real>(m: &Mat3<T>) -> T {
    match inverse3(m) {
        Some(inv) => frobenius3(m) * frobenius3(&inv),
        None => T::infinity(),
    }
}

pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

pub fn cmat4_zero<T: Real>() -> CMat4<T> {
    [[czero(); 4]; 4]
}

pub fn cmat4_identity<T: Real>() -> CMat4<T> {
    let mut m = cmat4_zero();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex::new(T::one(), T::zero());
    }
    m
}

pub fn cmat4_mul<T: Real>(a: &CMat4<T>, b: &CMat4<T>) -> CMat4<T> {
    let mut out = cmat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = czero();
            for k in 0..4 {
                acc = acc + a[i][k] * b[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn cmat4_adjoint<T: Real>(a: &CMat4<T>) -> CMat4<T> {
    let mut out = cmat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

pub fn cmat4_transpose<T: Real>(a: &CMat4<T>) -> CMat4<T> {
    let mut out = cmat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// Frobenius norm of `a - b`.
pub fn cmat4_distance<T: Real>(a: &CMat4<T>, b: &CMat4<T>) -> T {
    let mut acc = T::zero();
    for i in 0..4 {
        for j in 0..4 {
            acc = acc + (a[i][j] - b[i][j]).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Determinant via LU factorization with partial pivoting.
pub fn cmat4_det<T: Real>(a: &CMat4<T>) -> Complex<T> {
    let mut m = *a;
    let mut det = Complex::new(T::one(), T::zero());
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&r, &s| {
                m[r][col]
                    .norm_sqr()
                    .partial_cmp(&m[s][col].norm_sqr())
                    .unwrap()
            })
            .unwrap();
        if m[pivot][col].norm_sqr() == T::zero() {
            return czero();
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col];
        det = det * p;
        for r in col + 1..4 {
            let f = m[r][col] / p;
            for c in col..4 {
                let sub = f * m[col][c];
                m[r][c] = m[r][c] - sub;
            }
        }
    }
    det
}

/// `⟨u|v⟩` with conjugation on the left argument.
pub fn inner4<T: Real>(u: &[Complex<T>; 4], v: &[Complex<T>; 4]) -> Complex<T> {
    u.iter()
        .zip(v)
        .fold(czero(), |acc, (a, b)| acc + a.conj() * b)
}

pub fn cmat4_vec<T: Real>(m: &CMat4<T>, v: &[Complex<T>; 4]) -> [Complex<T>; 4] {
    let mut out = [czero(); 4];
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[i].iter().zip(v).fold(czero(), |acc, (a, b)| acc + *a * b);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse3_round_trip() {
        let m = [[2.0, 1.0, 0.0], [0.5, 3.0, 1.0], [0.0, -1.0, 4.0]];
        let inv = inverse3(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular3_has_infinite_condition() {
        let m: Mat3<f64> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(inverse3(&m).is_none());
        assert!(condition3(&m).is_infinite());
        let eye: Mat3<f64> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!((condition3(&eye) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn det4_of_permutation_and_triangular() {
        let one = Complex::new(1.0, 0.0);
        let mut p = cmat4_zero::<f64>();
        p[0][3] = -one;
        p[1][2] = one;
        p[2][1] = one;
        p[3][0] = -one;
        let d = cmat4_det(&p);
        assert!((d - one).norm() < 1e-15);

        let mut t = cmat4_identity::<f64>();
        t[0][0] = Complex::new(2.0, 1.0);
        t[0][3] = Complex::new(5.0, -2.0);
        t[2][2] = Complex::new(0.0, 3.0);
        let d = cmat4_det(&t);
        assert!((d - Complex::new(2.0, 1.0) * Complex::new(0.0, 3.0)).norm() < 1e-14);
    }
}
