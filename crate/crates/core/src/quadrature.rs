//! Energy integration over the lead bands.
//!
//! Each maximal band interval `[c - r, c + r]` is mapped to `theta` in
//! `(0, pi)` by `e = c + r cos(theta)`. The Jacobian `r sin(theta)` cancels the
//! inverse square-root edge divergence of `dSigma/de`, so all integrands are
//! bounded in `theta`. Panels are graded toward the chemical potential, then
//! refined adaptively by comparing a Gauss-Legendre panel with its two halves.
//! Bound states outside the bands enter as discrete terms.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::greens::{BoundState, OperatingPoint, SystemModel};
use crate::kernels::Ensemble;
use crate::matrix::SmallMat;
use crate::reservoir::BandPoint;

/// Values that can be summed with real weights.
pub trait Accumulate: Copy {
    fn zero() -> Self;
    fn add_scaled(&mut self, other: &Self, w: f64);
    /// Max-norm distance used by the refinement test.
    fn distance(&self, other: &Self) -> f64;
    /// Max-norm, used to stop refining below rounding noise.
    fn magnitude(&self) -> f64;
}

impl Accumulate for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += w * other;
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl<const N: usize> Accumulate for [f64; N] {
    fn zero() -> Self {
        [0.0; N]
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += w * b;
        }
    }
    fn distance(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
    fn magnitude(&self) -> f64 {
        self.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Numerical controls for every energy integral.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    /// Gauss-Legendre order of one panel.
    pub order: usize,
    /// Absolute tolerance for one full band integral.
    pub tolerance: f64,
    /// Maximum bisection depth of a panel.
    pub max_depth: usize,
    /// Largest initial panel width in `theta`.
    pub max_panel: f64,
    /// Trapezoid points on the circle around a bound state.
    pub contour_points: usize,
    rule: GaussLegendre,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self::new(16, 1e-10)
    }
}

impl QuadratureConfig {
    pub fn new(order: usize, tolerance: f64) -> Self {
        Self {
            order,
            tolerance,
            max_depth: 20,
            max_panel: PI / 16.0,
            contour_points: 64,
            rule: GaussLegendre::new(order.max(1)),
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order.max(1);
        self.rule = GaussLegendre::new(self.order);
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }
}

/// A quarter of a band segment in `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Piece {
    pub lower: bool,
    pub inner: bool,
}

impl Piece {
    pub const OUTER_HI: Piece = Piece { lower: false, inner: false };
    pub const INNER_HI: Piece = Piece { lower: false, inner: true };
    pub const INNER_LO: Piece = Piece { lower: true, inner: true };
    pub const OUTER_LO: Piece = Piece { lower: true, inner: false };
    pub const ALL: [Piece; 4] = [Self::OUTER_HI, Self::INNER_HI, Self::INNER_LO, Self::OUTER_LO];
}

/// One band interval `e = center + radius cos(theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSegment {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub radius: f64,
}

impl BandSegment {
    pub fn from_edges(lo: f64, hi: f64) -> Self {
        Self { lo, hi, center: 0.5 * (lo + hi), radius: 0.5 * (hi - lo) }
    }

    #[inline]
    pub fn energy(&self, theta: f64) -> f64 {
        self.center + self.radius * theta.cos()
    }

    /// The energy at `theta` with its offsets from both ends.
    pub fn point(&self, theta: f64) -> BandPoint {
        let q = 0.25 * PI;
        match theta {
            t if t <= q => self.point_in(Piece::OUTER_HI, t),
            t if t <= 2.0 * q => self.point_in(Piece::INNER_HI, 2.0 * q - t),
            t if t <= 3.0 * q => self.point_in(Piece::INNER_LO, t - 2.0 * q),
            t => self.point_in(Piece::OUTER_LO, PI - t),
        }
    }

    /// The point at local angle `x` in `[0, pi/4]` of quarter `piece`.
    ///
    /// Outer quarters measure `x` from their band edge and inner quarters
    /// from the band center, so the offset that matters keeps full relative
    /// precision; `theta` itself resolves neither `PI` nor wide bands near
    /// their middle.
    pub fn point_in(&self, piece: Piece, x: f64) -> BandPoint {
        let r = self.radius;
        let (below, above, energy) = if piece.inner {
            let d = r * x.sin();
            if piece.lower {
                (r - d, r + d, self.center - d)
            } else {
                (r + d, r - d, self.center + d)
            }
        } else {
            let near = 2.0 * r * (0.5 * x).sin().powi(2);
            let far = 2.0 * r * (0.5 * x).cos().powi(2);
            if piece.lower {
                (near, far, self.lo + near)
            } else {
                (far, near, self.hi - near)
            }
        };
        BandPoint { energy, lo: self.lo, below, hi: self.hi, above }
    }

    /// Quarter and local angle of an energy inside the segment.
    fn locate(&self, e: f64) -> (Piece, f64) {
        let x = (e - self.center) / self.radius;
        let lower = x < 0.0;
        if x.abs() < FRAC_1_SQRT_2 {
            (Piece { lower, inner: true }, x.abs().asin())
        } else {
            let near = if lower { e - self.lo } else { self.hi - e };
            let t = 2.0 * (0.5 * near / self.radius).max(0.0).sqrt().min(1.0).asin();
            (Piece { lower, inner: false }, t)
        }
    }

    /// `de/dtheta = sqrt((hi - e)(e - lo))` at `p`.
    #[inline]
    pub fn jacobian(&self, p: &BandPoint) -> f64 {
        (p.below * p.above).max(0.0).sqrt()
    }

    /// `theta` of an energy inside the segment.
    pub fn theta(&self, e: f64) -> f64 {
        ((e - self.center) / self.radius).clamp(-1.0, 1.0).acos()
    }

    pub fn contains(&self, e: f64) -> bool {
        e > self.lo && e < self.hi
    }
}

/// Quadrature nodes over the continuum plus the bound states at one `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid {
    /// `(point, weight)` with weights including the Jacobian.
    pub nodes: Vec<(BandPoint, f64)>,
    pub poles: Vec<BoundState>,
    /// Sum of panel-refinement differences of the integral that built the grid.
    pub error_estimate: f64,
}

/// Band segments with every active band edge as a segment end.
pub fn band_segments(model: &SystemModel, op: &OperatingPoint) -> Vec<BandSegment> {
    let edges = model.band_edges(op);
    let bands = model.active_bands(op);
    let mut out = Vec::new();
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if bands.iter().any(|&(a, b)| mid > a && mid < b) {
            out.push(BandSegment::from_edges(w[0], w[1]));
        }
    }
    out
}

/// Energies around which the initial panels are refined: the chemical
/// potential on a geometric ladder of thermal widths, and the system levels.
pub fn default_hints(op: &OperatingPoint, ens: &Ensemble) -> Vec<f64> {
    let mu = ens.chemical_potential();
    let t = ens.temperature();
    let mut h = alloc::vec![mu];
    let mut k = 0.25;
    while k * t < 64.0 {
        h.push(mu - PI * t * k);
        h.push(mu + PI * t * k);
        k *= 2.0;
    }
    let (vals, _) = op.h.hermitian_eigen();
    for &v in vals.iter().take(op.h.dim()) {
        h.push(v);
    }
    h
}

/// Panel ends of each quarter, on `[0, PI/4]` in its local angle.
fn initial_panels(seg: &BandSegment, hints: &[f64], max_panel: f64) -> [(Piece, Vec<f64>); 4] {
    let q = 0.25 * PI;
    let mut pieces = Piece::ALL.map(|p| (p, alloc::vec![0.0, q]));
    // geometric grading toward both edges: a state bound or resonant just
    // beside an edge puts structure at theta ~ its detuning, which a panel
    // of fixed width would not see
    for (p, th) in pieces.iter_mut() {
        if !p.inner {
            let mut t = max_panel;
            for _ in 0..12 {
                t /= 8.0;
                th.push(t);
            }
        }
    }
    for &e in hints {
        if seg.contains(e) {
            let (piece, x) = seg.locate(e);
            if let Some((_, th)) = pieces.iter_mut().find(|(p, _)| *p == piece) {
                th.push(x.min(q));
            }
        }
    }
    pieces.map(|(p, mut th)| {
        th.sort_by(f64::total_cmp);
        th.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
        let mut out = Vec::with_capacity(th.len() * 2);
        for w in th.windows(2) {
            let m = ((w[1] - w[0]) / max_panel).ceil().max(1.0) as usize;
            for j in 0..m {
                out.push(w[0] + (w[1] - w[0]) * j as f64 / m as f64);
            }
        }
        out.push(q);
        (p, out)
    })
}

/// Result of an adaptive integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<V> {
    pub value: V,
    pub error_estimate: f64,
    pub evaluations: usize,
}

struct Adaptive<'a, V, F> {
    seg: BandSegment,
    piece: Piece,
    cfg: &'a QuadratureConfig,
    f: F,
    tol_density: f64,
    error: f64,
    evals: usize,
    record: Option<&'a mut Vec<(BandPoint, f64)>>,
    _v: core::marker::PhantomData<V>,
}

impl<V: Accumulate, F: FnMut(&BandPoint) -> Result<V>> Adaptive<'_, V, F> {
    fn nodes(&self, a: f64, b: f64) -> impl Iterator<Item = (BandPoint, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let seg = self.seg;
        let piece = self.piece;
        self.cfg.rule.nodes.iter().zip(&self.cfg.rule.weights).map(move |(x, w)| {
            let p = seg.point_in(piece, mid + half * x);
            (p, w * half * seg.jacobian(&p))
        })
    }

    /// Panel sum and `sum w |f|`, the scale of its rounding error.
    fn panel(&mut self, a: f64, b: f64) -> Result<(V, f64)> {
        let mut acc = V::zero();
        let mut scale = 0.0;
        let nodes: Vec<(BandPoint, f64)> = self.nodes(a, b).collect();
        for (p, w) in nodes {
            let v = (self.f)(&p)?;
            acc.add_scaled(&v, w);
            scale += w * v.magnitude();
        }
        self.evals += self.cfg.rule.len();
        Ok((acc, scale))
    }

    fn record_panel(&mut self, a: f64, b: f64) {
        if self.record.is_some() {
            let nodes: Vec<(BandPoint, f64)> = self.nodes(a, b).collect();
            if let Some(rec) = self.record.as_deref_mut() {
                rec.extend(nodes);
            }
        }
    }

    fn refine(&mut self, a: f64, b: f64, whole: V, depth: usize, out: &mut V) -> Result<()> {
        let m = 0.5 * (a + b);
        let (left, sl) = self.panel(a, m)?;
        let (right, sr) = self.panel(m, b)?;
        let mut both = left;
        both.add_scaled(&right, 1.0);
        let diff = both.distance(&whole);
        let floor = 1e-12 * (sl + sr);
        if diff <= (self.tol_density * (b - a)).max(floor) || depth >= self.cfg.max_depth {
            self.error += diff;
            out.add_scaled(&both, 1.0);
            self.record_panel(a, m);
            self.record_panel(m, b);
            return Ok(());
        }
        self.refine(a, m, left, depth + 1, out)?;
        self.refine(m, b, right, depth + 1, out)
    }
}

/// Adaptive integral of `f(e) de` over every band segment.
///
/// When `record` is given, the accepted nodes and weights are appended to it.
pub fn integrate_bands<V, F>(
    segments: &[BandSegment],
    hints: &[f64],
    cfg: &QuadratureConfig,
    mut f: F,
    mut record: Option<&mut Vec<(BandPoint, f64)>>,
) -> Result<Integral<V>>
where
    V: Accumulate,
    F: FnMut(&BandPoint) -> Result<V>,
{
    let mut total = V::zero();
    let mut error = 0.0;
    let mut evals = 0;
    for seg in segments {
        for (piece, th) in initial_panels(seg, hints, cfg.max_panel).iter() {
            let mut ad = Adaptive {
                seg: *seg,
                piece: *piece,
                cfg,
                f: &mut f,
                tol_density: cfg.tolerance / (PI * segments.len() as f64),
                error: 0.0,
                evals: 0,
                record: record.as_deref_mut(),
                _v: core::marker::PhantomData,
            };
            for w in th.windows(2) {
                let (whole, _) = ad.panel(w[0], w[1])?;
                ad.refine(w[0], w[1], whole, 0, &mut total)?;
            }
            error += ad.error;
            evals += ad.evals;
        }
    }
    if error > 1e3 * cfg.tolerance {
        return Err(Error::Quadrature { tolerance: cfg.tolerance, estimate: error });
    }
    Ok(Integral { value: total, error_estimate: error, evaluations: evals })
}

/// Radius of the circle around bound state `k` that stays clear of band
/// edges, the other poles and the Matsubara poles of the kernels.
pub fn contour_radius(model: &SystemModel, op: &OperatingPoint, ens: &Ensemble, poles: &[BoundState], k: usize) -> f64 {
    let e = poles[k].energy;
    let mut d = PI * ens.temperature();
    for edge in model.band_edges(op) {
        d = d.min((edge - e).abs());
    }
    for (j, p) in poles.iter().enumerate() {
        if j != k {
            d = d.min((p.energy - e).abs());
        }
    }
    0.5 * d
}

/// `Re Res_{z = center} F(z)` by the trapezoid rule on a circle.
///
/// `f(z, c)` must return `Re(c F(z))` componentwise.
pub fn contour_residue<V, F>(center: f64, radius: f64, points: usize, mut f: F) -> Result<V>
where
    V: Accumulate,
    F: FnMut(Complex64, Complex64) -> Result<V>,
{
    let mut acc = V::zero();
    let n = points.max(4);
    for k in 0..n {
        // offset by half a step so no node sits on the real axis
        let phi = 2.0 * PI * (k as f64 + 0.5) / n as f64;
        let dz = Complex64::from_polar(radius, phi);
        let v = f(Complex64::new(center, 0.0) + dz, dz)?;
        acc.add_scaled(&v, 1.0 / n as f64);
    }
    Ok(acc)
}

impl EnergyGrid {
    /// `sum_i w_i f(e_i) + sum_b p(b)`.
    pub fn integrate_spectral<V, F, P>(&self, mut f: F, mut pole: P) -> Result<V>
    where
        V: Accumulate,
        F: FnMut(f64) -> Result<V>,
        P: FnMut(&BoundState) -> Result<V>,
    {
        let mut acc = V::zero();
        for (p, w) in &self.nodes {
            acc.add_scaled(&f(p.energy)?, *w);
        }
        for b in &self.poles {
            acc.add_scaled(&pole(b)?, 1.0);
        }
        Ok(acc)
    }

    /// Spectral items `(energy, weight, matrix)`: continuum nodes with
    /// `A(e)` and bound states with their residues.
    pub fn spectral_items(&self, model: &SystemModel, op: &OperatingPoint) -> Result<Vec<(f64, f64, SmallMat)>> {
        let mut items = Vec::with_capacity(self.nodes.len() + self.poles.len());
        for (p, w) in &self.nodes {
            items.push((p.energy, *w, model.eval_at(op, p)?.spectral()));
        }
        for b in &self.poles {
            items.push((b.energy, 1.0, b.residue));
        }
        Ok(items)
    }
}

/// `sum_ij w_i w_j Tr(A_i A_j) K(e_i, e_j)` over spectral items.
pub fn integrate_double<K>(items: &[(f64, f64, SmallMat)], mut kernel: K) -> f64
where
    K: FnMut(f64, f64) -> f64,
{
    let mut total = 0.0;
    for &(ei, wi, ref ai) in items {
        let mut row = 0.0;
        for &(ej, wj, ref aj) in items {
            row += wj * ai.trace_product(aj).re * kernel(ei, ej);
        }
        total += wi * row;
    }
    total
}
