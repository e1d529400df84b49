//! Dense complex matrices of dimension 1 or 2 with closed-form inversion.

use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::MAX_DIM;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// An `n x n` complex matrix with `n <= MAX_DIM`, stored inline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallMat {
    n: usize,
    a: [[Complex64; MAX_DIM]; MAX_DIM],
}

impl SmallMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension {n} unsupported");
        Self { n, a: [[ZERO; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, ONE)
    }

    pub fn scalar(n: usize, z: Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][i] = z;
        }
        m
    }

    /// Matrix with a single nonzero entry `z` at `(i, i)`.
    pub fn diagonal_entry(n: usize, i: usize, z: Complex64) -> Self {
        let mut m = Self::zeros(n);
        m.a[i][i] = z;
        m
    }

    pub fn from_real(n: usize, rows: &[[f64; MAX_DIM]]) -> Self {
        let mut m = Self::zeros(n);
        for (row, src) in m.a.iter_mut().zip(rows).take(n) {
            for (x, &y) in row.iter_mut().zip(src).take(n) {
                *x = Complex64::new(y, 0.0);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.a[i][j] = z;
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.a[i][i]).sum()
    }

    pub fn det(&self) -> Complex64 {
        match self.n {
            1 => self.a[0][0],
            _ => self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0],
        }
    }

    /// Adjugate, so that `self * adj = det * 1`.
    pub fn adjugate(&self) -> Self {
        let mut m = Self::zeros(self.n);
        match self.n {
            1 => m.a[0][0] = ONE,
            _ => {
                m.a[0][0] = self.a[1][1];
                m.a[1][1] = self.a[0][0];
                m.a[0][1] = -self.a[0][1];
                m.a[1][0] = -self.a[1][0];
            }
        }
        m
    }

    /// Inverse, or `None` when the determinant vanishes relative to the entries.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        if det.norm() <= 1e-300 * scale.powi(self.n as i32) || !det.is_finite() {
            return None;
        }
        Some(self.adjugate().scale(det.inv()))
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] = self.a[j][i].conj();
            }
        }
        m
    }

    pub fn scale(&self, z: Complex64) -> Self {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] *= z;
            }
        }
        m
    }

    pub fn scale_real(&self, x: f64) -> Self {
        self.scale(Complex64::new(x, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        let mut r = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                r = r.max(self.a[i][j].norm());
            }
        }
        r
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        let mut t = ZERO;
        for i in 0..self.n {
            for k in 0..self.n {
                t += self.a[i][k] * other.a[k][i];
            }
        }
        t
    }

    /// `(G - G^dagger) / (2 pi i)`: the Hermitian spectral block of an advanced function.
    pub fn spectral_part(&self) -> Self {
        let d = *self - self.adjoint();
        d.scale(Complex64::new(0.0, -0.5 / core::f64::consts::PI))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (*self - self.adjoint()).max_abs() <= tol * (1.0 + self.max_abs())
    }

    /// Eigenvalues of a Hermitian matrix in ascending order, with unit eigenvectors.
    pub fn hermitian_eigen(&self) -> ([f64; MAX_DIM], [[Complex64; MAX_DIM]; MAX_DIM]) {
        let mut vals = [0.0; MAX_DIM];
        let mut vecs = [[ZERO; MAX_DIM]; MAX_DIM];
        match self.n {
            1 => {
                vals[0] = self.a[0][0].re;
                vecs[0][0] = ONE;
            }
            _ => {
                let a = self.a[0][0].re;
                let d = self.a[1][1].re;
                let b = self.a[0][1];
                let mean = 0.5 * (a + d);
                let half = 0.5 * (a - d);
                let r = half.hypot(b.norm());
                vals[0] = mean - r;
                vals[1] = mean + r;
                if b.norm() <= 1e-300 {
                    // already diagonal; keep site order matched to sorted values
                    if a <= d {
                        vecs[0] = [ONE, ZERO];
                        vecs[1] = [ZERO, ONE];
                    } else {
                        vecs[0] = [ZERO, ONE];
                        vecs[1] = [ONE, ZERO];
                    }
                } else {
                    vecs[0] = eigvec_2x2(a, b, d, vals[0]);
                    vecs[1] = eigvec_2x2(a, b, d, vals[1]);
                }
            }
        }
        (vals, vecs)
    }
}

/// Null vector of `[[a, b], [conj b, d]] - lam`, normalized.
fn eigvec_2x2(a: f64, b: Complex64, d: f64, lam: f64) -> [Complex64; MAX_DIM] {
    // first row gives (b, lam - a), second row gives (lam - d, conj b)
    let r1 = [b, Complex64::new(lam - a, 0.0)];
    let r2 = [Complex64::new(lam - d, 0.0), b.conj()];
    let n1 = r1[0].norm_sqr() + r1[1].norm_sqr();
    let n2 = r2[0].norm_sqr() + r2[1].norm_sqr();
    let (v, n) = if n1 >= n2 { (r1, n1) } else { (r2, n2) };
    let n = n.sqrt();
    [v[0] / n, v[1] / n]
}

impl Add for SmallMat {
    type Output = SmallMat;
    fn add(mut self, rhs: SmallMat) -> SmallMat {
        for i in 0..self.n {
            for j in 0..self.n {
                self.a[i][j] += rhs.a[i][j];
            }
        }
        self
    }
}

impl AddAssign for SmallMat {
    fn add_assign(&mut self, rhs: SmallMat) {
        *self = *self + rhs;
    }
}

impl Sub for SmallMat {
    type Output = SmallMat;
    fn sub(mut self, rhs: SmallMat) -> SmallMat {
        for i in 0..self.n {
            for j in 0..self.n {
                self.a[i][j] -= rhs.a[i][j];
            }
        }
        self
    }
}

impl Neg for SmallMat {
    type Output = SmallMat;
    fn neg(self) -> SmallMat {
        self.scale_real(-1.0)
    }
}

impl Mul for SmallMat {
    type Output = SmallMat;
    fn mul(self, rhs: SmallMat) -> SmallMat {
        let mut m = SmallMat::zeros(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                let aik = self.a[i][k];
                for j in 0..self.n {
                    m.a[i][j] += aik * rhs.a[k][j];
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inverse_roundtrip() {
        let mut m = SmallMat::zeros(2);
        m.set(0, 0, c(1.0, 0.3));
        m.set(0, 1, c(-0.4, 0.2));
        m.set(1, 0, c(0.7, 0.0));
        m.set(1, 1, c(2.0, -1.0));
        let inv = m.inverse().unwrap();
        let r = m * inv - SmallMat::identity(2);
        assert!(r.max_abs() < 1e-14);
        let s = SmallMat::scalar(1, c(0.0, 0.288));
        assert!((s.inverse().unwrap().get(0, 0) - c(0.0, -1.0 / 0.288)).norm() < 1e-14);
        assert!(SmallMat::zeros(2).inverse().is_none());
    }

    #[test]
    fn hermitian_eigen_residual() {
        let cases = [
            (0.3, c(0.5, 0.0), -1.2),
            (1.0, c(0.0, 0.0), -1.0),
            (-1.0, c(0.0, 0.0), 1.0),
            (0.2, c(0.1, -0.7), 0.2),
            (1e-3, c(1e-9, 0.0), 0.0),
        ];
        for (a, b, d) in cases {
            let mut m = SmallMat::zeros(2);
            m.set(0, 0, c(a, 0.0));
            m.set(0, 1, b);
            m.set(1, 0, b.conj());
            m.set(1, 1, c(d, 0.0));
            let (vals, vecs) = m.hermitian_eigen();
            assert!(vals[0] <= vals[1]);
            for k in 0..2 {
                let v = vecs[k];
                for i in 0..2 {
                    let mv = m.get(i, 0) * v[0] + m.get(i, 1) * v[1];
                    assert!((mv - v[i] * vals[k]).norm() < 1e-13, "{a} {b} {d}");
                }
            }
        }
    }

    #[test]
    fn spectral_part_is_hermitian() {
        let mut g = SmallMat::zeros(2);
        g.set(0, 0, c(0.1, 2.0));
        g.set(0, 1, c(0.3, 0.5));
        g.set(1, 0, c(0.3, 0.5));
        g.set(1, 1, c(-0.2, 0.4));
        let a = g.spectral_part();
        assert!(a.is_hermitian(1e-15));
        assert!((a.trace().re - g.trace().im / core::f64::consts::PI).abs() < 1e-15);
    }
}
