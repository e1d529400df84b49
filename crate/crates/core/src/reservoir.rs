//! Semi-infinite tight-binding chains as reservoirs.
//!
//! A chain with hopping `t0` and on-site energy `e0` coupled to one system
//! orbital with amplitude `V` produces the advanced embedding self-energy
//! `Sigma(e) = V^2 sigma(e)`, with `sigma` independent of `V`. Inside the band
//! `|e - e0| < 2 t0` the imaginary part `Gamma/2` is positive.

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// A semi-infinite chain attached to system orbital `site`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainLead {
    hopping: f64,
    band_center: f64,
    site: usize,
}

/// A real energy with its distances to two reference band edges.
///
/// Next to an edge the offsets keep full relative accuracy, which the energy
/// itself cannot: `lo + 1e-20` rounds to `lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub energy: f64,
    pub lo: f64,
    /// `energy - lo`
    pub below: f64,
    pub hi: f64,
    /// `hi - energy`
    pub above: f64,
}

impl BandPoint {
    /// A point without reference edges.
    pub fn new(energy: f64) -> Self {
        Self { energy, lo: f64::NAN, below: f64::NAN, hi: f64::NAN, above: f64::NAN }
    }

    /// `energy - edge`
    pub fn offset(&self, edge: f64) -> f64 {
        if edge == self.lo {
            self.below
        } else if edge == self.hi {
            -self.above
        } else {
            self.energy - edge
        }
    }
}

/// Self-energy of one lead and its partial derivatives at a single `(u, e)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfEnergyEval {
    pub sigma: Complex64,
    /// `d Sigma / d e`
    pub d_energy: Complex64,
    /// `d Sigma / d u`
    pub d_param: Complex64,
    /// `d^2 Sigma / (d e d u)`
    pub d_energy_param: Complex64,
    /// `V^2 / (2 t0^2)`, the slope of the part of `Sigma` linear in energy.
    pub slope: f64,
    /// `Sigma - slope (e - e0)`, the square-root part.
    pub root: Complex64,
    /// Set when `e` sits on a band edge, where `d Sigma / d e` diverges.
    pub edge_singular: bool,
}

impl SelfEnergyEval {
    pub const ZERO: SelfEnergyEval = SelfEnergyEval {
        sigma: Complex64::new(0.0, 0.0),
        d_energy: Complex64::new(0.0, 0.0),
        d_param: Complex64::new(0.0, 0.0),
        d_energy_param: Complex64::new(0.0, 0.0),
        slope: 0.0,
        root: Complex64::new(0.0, 0.0),
        edge_singular: false,
    };

    /// `Lambda = Re Sigma`.
    pub fn shift(&self) -> f64 {
        self.sigma.re
    }

    /// `Gamma = 2 Im Sigma`.
    pub fn broadening(&self) -> f64 {
        2.0 * self.sigma.im
    }
}

impl ChainLead {
    pub fn new(hopping: f64, band_center: f64, site: usize) -> Result<Self> {
        if !(hopping > 0.0 && hopping.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "chain hopping must be positive and finite, got {hopping}"
            )));
        }
        if !band_center.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("band center must be finite, got {band_center}")));
        }
        Ok(Self { hopping, band_center, site })
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn band_center(&self) -> f64 {
        self.band_center
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn half_width(&self) -> f64 {
        2.0 * self.hopping
    }

    /// Band support `[e0 - 2 t0, e0 + 2 t0]`.
    pub fn band(&self) -> (f64, f64) {
        (self.band_center - self.half_width(), self.band_center + self.half_width())
    }

    /// Unit (`V = 1`) advanced self-energy and its energy derivative on the real axis.
    ///
    /// At an edge the derivative is returned as the finite part `1 / (2 t0^2)`
    /// and the flag is set.
    pub fn unit_sigma(&self, e: f64) -> (Complex64, Complex64, bool) {
        self.unit_sigma_at(&BandPoint::new(e))
    }

    /// [`ChainLead::unit_sigma`] using the edge offsets carried by `p`.
    pub fn unit_sigma_at(&self, p: &BandPoint) -> (Complex64, Complex64, bool) {
        let x = p.energy - self.band_center;
        let (r, ds, edge) = self.unit_root_at(p);
        (Complex64::new(x * self.slope(), 0.0) + r, ds, edge)
    }

    #[inline]
    fn slope(&self) -> f64 {
        0.5 / (self.hopping * self.hopping)
    }

    /// Square-root part `sigma - (e - e0) / (2 t0^2)` and `d sigma / d e`.
    fn unit_root_at(&self, p: &BandPoint) -> (Complex64, Complex64, bool) {
        let c = self.slope();
        let x = p.energy - self.band_center;
        let (lo, hi) = self.band();
        // product form keeps full relative accuracy next to either edge
        let d = -p.offset(hi) * p.offset(lo);
        if d > 0.0 {
            let r = d.sqrt();
            (Complex64::new(0.0, r * c), Complex64::new(c, -x / r * c), false)
        } else if d < 0.0 {
            let r = (-d).sqrt();
            let root = if x > 0.0 { r } else { -r };
            (Complex64::new(-root * c, 0.0), Complex64::new((1.0 - x / root) * c, 0.0), false)
        } else {
            (Complex64::new(0.0, 0.0), Complex64::new(c, 0.0), true)
        }
    }

    /// Analytic continuation of the unit self-energy off the cut.
    ///
    /// For `Im z < 0` this is the advanced branch; for real `z` outside the
    /// band it matches [`ChainLead::unit_sigma`].
    pub fn unit_sigma_complex(&self, z: Complex64) -> (Complex64, Complex64) {
        let (r, ds) = self.unit_root_complex(z.re, Complex64::new(0.0, z.im));
        (r + (z - self.band_center) * self.slope(), ds)
    }

    /// Square-root part and derivative at `z = anchor + delta`.
    ///
    /// The distances to the edges are formed as `(anchor - edge) + delta`,
    /// exact when `anchor` is an edge.
    fn unit_root_complex(&self, anchor: f64, delta: Complex64) -> (Complex64, Complex64) {
        let c = self.slope();
        let (lo, hi) = self.band();
        let x = delta + (anchor - self.band_center);
        let s = (delta + (anchor - hi)).sqrt() * (delta + (anchor - lo)).sqrt();
        (-s * c, (Complex64::new(1.0, 0.0) - x / s) * c)
    }

    /// Lead self-energy for amplitude `v` moving at `dv = dV/du`.
    pub fn surface_sigma(&self, v: f64, dv: f64, e: f64) -> SelfEnergyEval {
        self.surface_sigma_at(v, dv, &BandPoint::new(e))
    }

    /// [`ChainLead::surface_sigma`] using the edge offsets carried by `p`.
    pub fn surface_sigma_at(&self, v: f64, dv: f64, p: &BandPoint) -> SelfEnergyEval {
        let (r, ds, edge) = self.unit_root_at(p);
        let s = r + (p.energy - self.band_center) * self.slope();
        self.scaled(v, dv, s, r, ds, edge)
    }

    /// Same as [`ChainLead::surface_sigma`] at a complex energy.
    pub fn surface_sigma_complex(&self, v: f64, dv: f64, z: Complex64) -> SelfEnergyEval {
        self.surface_sigma_complex_at(v, dv, z.re, Complex64::new(0.0, z.im))
    }

    /// [`ChainLead::surface_sigma_complex`] at `z = anchor + delta`.
    pub fn surface_sigma_complex_at(&self, v: f64, dv: f64, anchor: f64, delta: Complex64) -> SelfEnergyEval {
        let (r, ds) = self.unit_root_complex(anchor, delta);
        let s = r + (delta + (anchor - self.band_center)) * self.slope();
        self.scaled(v, dv, s, r, ds, false)
    }

    fn scaled(&self, v: f64, dv: f64, s: Complex64, r: Complex64, ds: Complex64, edge: bool) -> SelfEnergyEval {
        let v2 = v * v;
        let dv2 = 2.0 * v * dv;
        SelfEnergyEval {
            sigma: s * v2,
            d_energy: ds * v2,
            d_param: s * dv2,
            d_energy_param: ds * dv2,
            slope: self.slope() * v2,
            root: r * v2,
            edge_singular: edge,
        }
    }

    /// `V^2 g_surf(e - i eta)` from renormalization-group decimation of the chain.
    ///
    /// Each pass doubles the effective chain length, so `n_iter` of order 60
    /// reaches any `eta` representable in double precision.
    pub fn surface_sigma_recursion(&self, v: f64, e: f64, eta: f64, n_iter: usize) -> Result<Complex64> {
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("broadening must be positive, got {eta}")));
        }
        if n_iter == 0 {
            return Err(Error::InvalidParameter("at least one iteration is required".into()));
        }
        if v == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let w = Complex64::new(e, -eta);
        let t = Complex64::new(self.hopping, 0.0);
        let mut e_surf = Complex64::new(self.band_center, 0.0);
        let mut e_bulk = e_surf;
        let (mut a, mut b) = (t, t);
        let tol = 1e-15 * self.hopping;
        for _ in 0..n_iter {
            let g = (w - e_bulk).inv();
            let agb = a * g * b;
            let bga = b * g * a;
            e_surf += agb;
            e_bulk += agb + bga;
            a = a * g * a;
            b = b * g * b;
            if a.norm() < tol && b.norm() < tol {
                return Ok((w - e_surf).inv() * (v * v));
            }
        }
        Err(Error::NoConvergence { iterations: n_iter, residual: a.norm().max(b.norm()) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    fn lead() -> ChainLead {
        ChainLead::new(1.25, 0.0, 0).unwrap()
    }

    #[test]
    fn center_value() {
        let s = lead().surface_sigma(0.6, 0.0, 0.0);
        assert_abs_diff_eq!(s.sigma.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sigma.im, 0.288, epsilon = 1e-15);
        assert_abs_diff_eq!(s.broadening(), 0.576, epsilon = 1e-15);
    }

    #[test]
    fn edges_have_no_broadening() {
        let l = lead();
        for v in [0.3, 1.0, 2.0] {
            for e in [-2.5, 2.5] {
                let s = l.surface_sigma(v, 0.0, e);
                assert_eq!(s.broadening(), 0.0);
                assert!(s.edge_singular);
                assert_abs_diff_eq!(s.shift(), v * v * e.signum() / 1.25, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn out_of_band_shift() {
        let s = lead().surface_sigma(1.0, 0.0, 3.0);
        let expect = 0.32 * (3.0 - (9.0f64 - 6.25).sqrt());
        assert_abs_diff_eq!(s.shift(), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(s.shift(), 0.429340, epsilon = 1e-6);
        assert_eq!(s.broadening(), 0.0);
        let m = lead().surface_sigma(1.0, 0.0, -3.0);
        assert_abs_diff_eq!(m.shift(), -expect, epsilon = 1e-15);
    }

    #[test]
    fn continuous_across_edges() {
        let l = ChainLead::new(0.8, 0.3, 0).unwrap();
        let (lo, hi) = l.band();
        for edge in [lo, hi] {
            let a = l.unit_sigma(edge - 1e-12).0;
            let b = l.unit_sigma(edge + 1e-12).0;
            assert!((a - b).norm() < 1e-5);
        }
    }

    #[test]
    fn derivative_matches_differences() {
        let l = ChainLead::new(1.1, -0.2, 0).unwrap();
        let h = 1e-6;
        for k in 0..60 {
            let e = -4.0 + 8.0 * (k as f64 + 0.37) / 60.0;
            if (l.band().0 - e).abs() < 0.05 || (l.band().1 - e).abs() < 0.05 {
                continue;
            }
            let fd = (l.unit_sigma(e + h).0 - l.unit_sigma(e - h).0) / (2.0 * h);
            let an = l.unit_sigma(e).1;
            assert!((fd - an).norm() < 1e-6 * (1.0 + an.norm()), "e={e}");
        }
    }

    #[test]
    fn parameter_derivatives_factorize() {
        let l = lead();
        let s = l.surface_sigma(0.6, -0.2, 0.7);
        let (u, du, _) = l.unit_sigma(0.7);
        assert_eq!(s.d_param, u * (2.0 * 0.6 * -0.2));
        assert_eq!(s.d_energy_param, du * (2.0 * 0.6 * -0.2));
    }

    #[test]
    fn complex_continuation_matches_real_axis() {
        let l = ChainLead::new(1.25, 0.1, 0).unwrap();
        for e in [-7.0, -2.6, 2.75, 3.0, 11.0] {
            let (s, ds, _) = l.unit_sigma(e);
            let (sc, dsc) = l.unit_sigma_complex(Complex64::new(e, 0.0));
            assert!((s - sc).norm() < 1e-14 && (ds - dsc).norm() < 1e-12, "e={e}");
        }
        for e in [-2.0, -0.4, 0.1, 1.9] {
            let (s, ds, _) = l.unit_sigma(e);
            let (sc, dsc) = l.unit_sigma_complex(Complex64::new(e, -1e-13));
            assert!((s - sc).norm() < 1e-9 && (ds - dsc).norm() < 1e-9, "e={e}");
        }
    }

    #[test]
    fn scaling_in_amplitude() {
        let l = lead();
        for e in [-3.0, -1.0, 0.4, 2.6] {
            let a = l.surface_sigma(0.3, 0.0, e).sigma;
            let b = l.surface_sigma(0.9, 0.0, e).sigma;
            assert!((b - a * 9.0).norm() < 1e-14);
        }
    }

    #[test]
    fn recursion_examples() {
        let l = lead();
        let a = l.surface_sigma_recursion(0.6, 0.0, 1e-6, 10_000).unwrap();
        assert!((a - Complex64::new(0.0, 0.288)).norm() < 1e-4);
        let b = l.surface_sigma_recursion(1.0, 3.0, 1e-6, 10_000).unwrap();
        assert!((b - Complex64::new(0.429340, 0.0)).norm() < 1e-4);
        assert_eq!(l.surface_sigma_recursion(0.0, 0.3, 1e-6, 10).unwrap(), Complex64::new(0.0, 0.0));
        assert!(l.surface_sigma_recursion(1.0, 0.3, 0.0, 10).is_err());
        assert!(matches!(l.surface_sigma_recursion(1.0, 0.3, 1e-6, 3), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn recursion_matches_closed_form_on_grid() {
        let l = lead();
        let mut worst = 0.0f64;
        for k in 0..401 {
            let e = -4.0 + 8.0 * k as f64 / 400.0;
            if (e.abs() - 2.5).abs() < 1e-3 {
                continue;
            }
            let r = l.surface_sigma_recursion(0.6, e, 1e-6, 200).unwrap();
            let c = l.surface_sigma(0.6, 0.0, e).sigma;
            worst = worst.max((r - c).norm());
        }
        assert!(worst < 1e-3, "worst {worst}");
    }

    // Lambda(e) = P int Gamma(e') / (2 pi (e - e')) de', evaluated on the
    // theta grid with the singular part subtracted analytically.
    fn hilbert_shift(l: &ChainLead, v: f64, e: f64) -> f64 {
        let (lo, hi) = l.band();
        let gamma = |x: f64| l.surface_sigma(v, 0.0, x).broadening();
        let g0 = gamma(e);
        let n = 4000;
        let mut acc = 0.0;
        for k in 0..n {
            let th = PI * (k as f64 + 0.5) / n as f64;
            let x = l.band_center() + l.half_width() * th.cos();
            let jac = l.half_width() * th.sin() * PI / n as f64;
            if (x - e).abs() > 1e-14 {
                acc += (gamma(x) - g0) / (e - x) * jac;
            }
        }
        (acc + g0 * ((e - lo) / (hi - e)).ln()) / (2.0 * PI)
    }

    #[test]
    fn kramers_kronig() {
        let l = lead();
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let pts: Vec<f64> = (0..200)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                -2.45 + 4.9 * (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        for e in pts {
            let closed = l.surface_sigma(0.8, 0.0, e).shift();
            let kk = hilbert_shift(&l, 0.8, e);
            assert!((closed - kk).abs() <= 1e-3 * closed.abs().max(1e-2), "e={e} {closed} {kk}");
        }
    }
}
