//! Advanced Green's function of the system block and its bound-state poles.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::SmallMat;
use crate::reservoir::{BandPoint, ChainLead, SelfEnergyEval};
use crate::MAX_DIM;

/// Dimension of the system and the chains attached to it.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    dim: usize,
    leads: Vec<ChainLead>,
}

/// Hamiltonian parameters of the built-in models at one instant.
///
/// `onsite[i]` is the energy of orbital `i`, `hopping` the real symmetric
/// coupling between orbitals 0 and 1, `couplings[a]` the amplitude of lead `a`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveParams {
    pub onsite: [f64; MAX_DIM],
    pub hopping: f64,
    pub couplings: [f64; MAX_DIM],
}

/// Everything the Green's function needs at one protocol point `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub h: SmallMat,
    pub dh: SmallMat,
    pub amps: [f64; MAX_DIM],
    pub amp_rates: [f64; MAX_DIM],
}

/// `G^A` and its derivatives at one `(u, e)`.
#[derive(Debug, Clone, Copy)]
pub struct GreensEval {
    pub energy: Complex64,
    pub g: SmallMat,
    /// `dG/du = G (dh/du + dSigma/du) G`
    pub dg_param: SmallMat,
    /// `dG/de = -G (1 - dSigma/de) G`
    pub dg_energy: SmallMat,
    /// Total embedding self-energy.
    pub sigma: SmallMat,
    pub dsigma_energy: SmallMat,
    pub dsigma_param: SmallMat,
    pub leads: [SelfEnergyEval; MAX_DIM],
    pub sites: [usize; MAX_DIM],
    pub n_leads: usize,
}

/// A pole of `G^A` on the real axis outside every active band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState {
    pub energy: f64,
    /// Rank-one residue `Z = v v^dagger / (1 - v^dagger Sigma' v)`.
    pub residue: SmallMat,
    /// `w_a = -Tr(Sigma_a' Z)` for each lead.
    pub lead_weights: [f64; MAX_DIM],
    pub branch: usize,
}

impl BoundState {
    pub fn system_weight(&self) -> f64 {
        self.residue.trace().re
    }

    pub fn total_weight(&self) -> f64 {
        self.system_weight() + self.lead_weights.iter().sum::<f64>()
    }
}

impl DriveParams {
    pub fn resonant(level: f64, coupling: f64) -> Self {
        Self { onsite: [level, 0.0], hopping: 0.0, couplings: [coupling, 0.0] }
    }

    pub fn two_level(e1: f64, e2: f64, w: f64, v1: f64, v2: f64) -> Self {
        Self { onsite: [e1, e2], hopping: w, couplings: [v1, v2] }
    }

    /// Componentwise `self + t (other - self)`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        let mut p = *self;
        for i in 0..MAX_DIM {
            p.onsite[i] += t * (other.onsite[i] - self.onsite[i]);
            p.couplings[i] += t * (other.couplings[i] - self.couplings[i]);
        }
        p.hopping += t * (other.hopping - self.hopping);
        p
    }

    /// Componentwise `(other - self) * scale`.
    pub fn delta(&self, other: &Self, scale: f64) -> Self {
        let mut p = Self::default();
        for i in 0..MAX_DIM {
            p.onsite[i] = (other.onsite[i] - self.onsite[i]) * scale;
            p.couplings[i] = (other.couplings[i] - self.couplings[i]) * scale;
        }
        p.hopping = (other.hopping - self.hopping) * scale;
        p
    }

    pub fn is_finite(&self) -> bool {
        self.onsite.iter().chain(self.couplings.iter()).all(|x| x.is_finite()) && self.hopping.is_finite()
    }
}

impl OperatingPoint {
    /// Operating point for parameters `p` changing at rate `dp` per unit `u`.
    pub fn new(model: &SystemModel, p: &DriveParams, dp: &DriveParams) -> Self {
        let n = model.dim;
        let build = |q: &DriveParams| {
            let mut m = SmallMat::zeros(n);
            for i in 0..n {
                m.set(i, i, Complex64::new(q.onsite[i], 0.0));
            }
            if n == 2 {
                m.set(0, 1, Complex64::new(q.hopping, 0.0));
                m.set(1, 0, Complex64::new(q.hopping, 0.0));
            }
            m
        };
        let mut amps = [0.0; MAX_DIM];
        let mut amp_rates = [0.0; MAX_DIM];
        let nl = model.leads.len();
        amps[..nl].copy_from_slice(&p.couplings[..nl]);
        amp_rates[..nl].copy_from_slice(&dp.couplings[..nl]);
        Self { h: build(p), dh: build(dp), amps, amp_rates }
    }

    /// Hamiltonian held fixed at `p`.
    pub fn frozen(model: &SystemModel, p: &DriveParams) -> Self {
        Self::new(model, p, &DriveParams::default())
    }
}

impl SystemModel {
    pub fn new(dim: usize, leads: Vec<ChainLead>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidParameter(alloc::format!(
                "system dimension must be between 1 and {MAX_DIM}, got {dim}"
            )));
        }
        if leads.len() > MAX_DIM {
            return Err(Error::InvalidParameter("at most one lead per orbital".into()));
        }
        for (i, l) in leads.iter().enumerate() {
            if l.site() >= dim {
                return Err(Error::InvalidParameter(alloc::format!(
                    "lead {i} attaches to orbital {} of a {dim}-orbital system",
                    l.site()
                )));
            }
            if leads[..i].iter().any(|o| o.site() == l.site()) {
                return Err(Error::InvalidParameter(alloc::format!("orbital {} carries more than one lead", l.site())));
            }
        }
        Ok(Self { dim, leads })
    }

    /// Single level coupled to one chain.
    pub fn resonant_level(hopping: f64, band_center: f64) -> Result<Self> {
        Self::new(1, alloc::vec![ChainLead::new(hopping, band_center, 0)?])
    }

    /// Two orbitals, each coupled to its own chain.
    pub fn two_level(hopping: f64, band_center: f64) -> Result<Self> {
        Self::new(2, alloc::vec![ChainLead::new(hopping, band_center, 0)?, ChainLead::new(hopping, band_center, 1)?])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn leads(&self) -> &[ChainLead] {
        &self.leads
    }

    /// Checks that `h` and `dh` are Hermitian.
    pub fn validate(&self, op: &OperatingPoint) -> Result<()> {
        if op.h.dim() != self.dim || op.dh.dim() != self.dim {
            return Err(Error::InvalidParameter("operating point dimension mismatch".into()));
        }
        if !op.h.is_hermitian(1e-12) || !op.dh.is_hermitian(1e-12) {
            return Err(Error::InvalidParameter("system Hamiltonian is not Hermitian".into()));
        }
        Ok(())
    }

    pub fn is_active(&self, op: &OperatingPoint, lead: usize) -> bool {
        op.amps[lead] != 0.0
    }

    /// Bands of the leads with nonzero coupling, as given (not merged).
    pub fn active_bands(&self, op: &OperatingPoint) -> Vec<(f64, f64)> {
        (0..self.leads.len()).filter(|&a| self.is_active(op, a)).map(|a| self.leads[a].band()).collect()
    }

    /// Sorted, merged union of the active bands.
    pub fn band_union(&self, op: &OperatingPoint) -> Vec<(f64, f64)> {
        let mut b = self.active_bands(op);
        b.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in b {
            match out.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        out
    }

    /// All distinct active band edges, ascending.
    pub fn band_edges(&self, op: &OperatingPoint) -> Vec<f64> {
        let mut e: Vec<f64> = self.active_bands(op).iter().flat_map(|&(a, b)| [a, b]).collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }

    fn lead_sigmas_real(&self, op: &OperatingPoint, p: &BandPoint) -> [SelfEnergyEval; MAX_DIM] {
        let mut s = [SelfEnergyEval::ZERO; MAX_DIM];
        for (a, lead) in self.leads.iter().enumerate() {
            if self.is_active(op, a) {
                s[a] = lead.surface_sigma_at(op.amps[a], op.amp_rates[a], p);
            }
        }
        s
    }

    fn lead_sigmas_complex(&self, op: &OperatingPoint, anchor: f64, delta: Complex64) -> [SelfEnergyEval; MAX_DIM] {
        let mut s = [SelfEnergyEval::ZERO; MAX_DIM];
        for (a, lead) in self.leads.iter().enumerate() {
            if self.is_active(op, a) {
                s[a] = lead.surface_sigma_complex_at(op.amps[a], op.amp_rates[a], anchor, delta);
            }
        }
        s
    }

    /// Builds `G` at `z = anchor + delta`.
    ///
    /// `z - h - Sigma` is formed as `(anchor - h - linear part at anchor) +
    /// delta (1 - slopes) - roots`, so that next to an edge no two large
    /// terms cancel at every node.
    fn assemble(
        &self,
        op: &OperatingPoint,
        anchor: f64,
        delta: Complex64,
        leads: [SelfEnergyEval; MAX_DIM],
    ) -> Result<GreensEval> {
        let n = self.dim;
        let z = delta + anchor;
        let mut sigma = SmallMat::zeros(n);
        let mut ds_e = SmallMat::zeros(n);
        let mut ds_u = SmallMat::zeros(n);
        let mut m = SmallMat::scalar(n, Complex64::new(anchor, 0.0)) - op.h;
        let mut lin = SmallMat::identity(n);
        let mut sites = [0; MAX_DIM];
        for (a, lead) in self.leads.iter().enumerate() {
            let i = lead.site();
            sites[a] = i;
            let l = &leads[a];
            sigma.set(i, i, sigma.get(i, i) + l.sigma);
            ds_e.set(i, i, ds_e.get(i, i) + l.d_energy);
            ds_u.set(i, i, ds_u.get(i, i) + l.d_param);
            m.set(i, i, m.get(i, i) - l.slope * (anchor - lead.band_center()) - l.root);
            lin.set(i, i, lin.get(i, i) - l.slope);
        }
        let m = m + lin.scale(delta);
        let g = m.inverse().ok_or(Error::BoundStateHit { energy: z.re })?;
        let dg_param = g * (op.dh + ds_u) * g;
        let dg_energy = -(g * (SmallMat::identity(n) - ds_e) * g);
        Ok(GreensEval {
            energy: z,
            g,
            dg_param,
            dg_energy,
            sigma,
            dsigma_energy: ds_e,
            dsigma_param: ds_u,
            leads,
            sites,
            n_leads: self.leads.len(),
        })
    }

    /// `G^A(u, e)` on the real axis.
    pub fn eval(&self, op: &OperatingPoint, e: f64) -> Result<GreensEval> {
        self.eval_at(op, &BandPoint::new(e))
    }

    /// [`SystemModel::eval`] using the edge offsets carried by `p`.
    pub fn eval_at(&self, op: &OperatingPoint, p: &BandPoint) -> Result<GreensEval> {
        let leads = self.lead_sigmas_real(op, p);
        if leads.iter().any(|s| s.edge_singular) {
            return Err(Error::BandEdge { energy: p.energy });
        }
        let (edge, delta) = if p.below <= p.above { (p.lo, p.below) } else { (p.hi, -p.above) };
        // the edge anchor rounds to ulp(edge), the energy itself to ulp(e):
        // deep inside a wide band the latter is far smaller
        let (anchor, delta) = if p.below.is_nan() || p.above.is_nan() || p.energy.abs() < 0.5 * edge.abs() {
            (p.energy, 0.0)
        } else {
            (edge, delta)
        };
        self.assemble(op, anchor, Complex64::new(delta, 0.0), leads)
    }

    /// `G(z)` continued off the real axis (advanced for `Im z < 0`).
    pub fn eval_complex(&self, op: &OperatingPoint, z: Complex64) -> Result<GreensEval> {
        self.eval_complex_at(op, z.re, Complex64::new(0.0, z.im))
    }

    /// [`SystemModel::eval_complex`] at `z = anchor + delta`.
    pub fn eval_complex_at(&self, op: &OperatingPoint, anchor: f64, delta: Complex64) -> Result<GreensEval> {
        self.assemble(op, anchor, delta, self.lead_sigmas_complex(op, anchor, delta))
    }

    /// The band edge nearest to `e`, or `e` itself without active leads.
    pub fn nearest_edge(&self, op: &OperatingPoint, e: f64) -> f64 {
        self.band_edges(op).into_iter().min_by(|a, b| (a - e).abs().total_cmp(&(b - e).abs())).unwrap_or(e)
    }

    /// `F_k(e) = e - lambda_k(h + Sigma(e))` for real `e` outside all active bands.
    fn branches(
        &self,
        op: &OperatingPoint,
        e: f64,
    ) -> ([f64; MAX_DIM], [[Complex64; MAX_DIM]; MAX_DIM], [SelfEnergyEval; MAX_DIM]) {
        let leads = self.lead_sigmas_real(op, &BandPoint::new(e));
        let mut m = op.h;
        for (a, lead) in self.leads.iter().enumerate() {
            let i = lead.site();
            m.set(i, i, m.get(i, i) + Complex64::new(leads[a].sigma.re, 0.0));
        }
        let (vals, vecs) = m.hermitian_eigen();
        let mut f = [0.0; MAX_DIM];
        for k in 0..self.dim {
            f[k] = e - vals[k];
        }
        (f, vecs, leads)
    }

    /// Poles of `G^A` outside the active bands, ascending in energy.
    pub fn find_bound_states(&self, op: &OperatingPoint) -> Result<Vec<BoundState>> {
        self.validate(op)?;
        let union = self.band_union(op);
        let (hv, _) = op.h.hermitian_eigen();
        let t_max = self.leads.iter().map(|l| l.hopping()).fold(0.0, f64::max);
        let mut lo_anchor = hv[0];
        let mut hi_anchor = hv[self.dim - 1];
        if let (Some(first), Some(last)) = (union.first(), union.last()) {
            lo_anchor = lo_anchor.min(first.0);
            hi_anchor = hi_anchor.max(last.1);
        }
        let window = (10.0 * (2.0 * t_max + op.h.max_abs())).max(1.0);

        let mut outer_lo = lo_anchor - window;
        let mut outer_hi = hi_anchor + window;
        for attempt in 0..2 {
            let ok_lo = (0..self.dim).all(|k| self.branches(op, outer_lo).0[k] < 0.0);
            let ok_hi = (0..self.dim).all(|k| self.branches(op, outer_hi).0[k] > 0.0);
            if ok_lo && ok_hi {
                break;
            }
            if attempt == 1 {
                return Err(Error::RootSearch(alloc::format!("root outside scan window [{outer_lo}, {outer_hi}]")));
            }
            outer_lo = lo_anchor - 10.0 * window;
            outer_hi = hi_anchor + 10.0 * window;
        }

        let mut gaps = Vec::with_capacity(union.len() + 1);
        let mut left = outer_lo;
        for &(a, b) in &union {
            gaps.push((left, a));
            left = b;
        }
        gaps.push((left, outer_hi));

        let mut out = Vec::new();
        for &(a, b) in &gaps {
            if !(b > a) {
                continue;
            }
            let fa = self.branches(op, a).0;
            let fb = self.branches(op, b).0;
            for k in 0..self.dim {
                if !(fa[k] < 0.0 && fb[k] > 0.0) {
                    continue;
                }
                let root = self.bisect(op, k, a, b);
                if root <= a || root >= b {
                    continue;
                }
                if let Some(bs) = self.residue_at(op, k, root) {
                    out.push(bs);
                }
            }
        }
        out.sort_by(|x, y| x.energy.total_cmp(&y.energy));
        Ok(out)
    }

    fn bisect(&self, op: &OperatingPoint, k: usize, mut a: f64, mut b: f64) -> f64 {
        for _ in 0..300 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let f = self.branches(op, mid).0[k];
            if f == 0.0 {
                return mid;
            }
            if f < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        // the endpoint with the smaller residual
        let fa = self.branches(op, a).0[k].abs();
        let fb = self.branches(op, b).0[k].abs();
        if fa <= fb {
            a
        } else {
            b
        }
    }

    fn residue_at(&self, op: &OperatingPoint, k: usize, e: f64) -> Option<BoundState> {
        let (_, vecs, leads) = self.branches(op, e);
        if leads.iter().any(|s| s.edge_singular) {
            return None;
        }
        let v = vecs[k];
        let mut lead_proj = [0.0; MAX_DIM];
        let mut denom = 1.0;
        for (a, lead) in self.leads.iter().enumerate() {
            let p = -leads[a].d_energy.re * v[lead.site()].norm_sqr();
            lead_proj[a] = p;
            denom += p;
        }
        if !denom.is_finite() {
            return None;
        }
        let mut z = SmallMat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                z.set(i, j, v[i] * v[j].conj() / denom);
            }
        }
        let mut w = [0.0; MAX_DIM];
        for a in 0..self.leads.len() {
            w[a] = lead_proj[a] / denom;
        }
        Some(BoundState { energy: e, residue: z, lead_weights: w, branch: k })
    }
}

impl GreensEval {
    /// `A = (G - G^dagger) / (2 pi i)`.
    pub fn spectral(&self) -> SmallMat {
        self.g.spectral_part()
    }

    /// System LDOS `(1/pi) Im Tr G^A`.
    pub fn ldos(&self) -> f64 {
        self.g.trace().im / core::f64::consts::PI
    }

    /// `-(1/pi) Im Tr(Sigma_a' G^A)` for lead `a`.
    pub fn reservoir_correction(&self, lead: usize) -> f64 {
        let i = self.sites[lead];
        -(self.leads[lead].d_energy * self.g.get(i, i)).im / core::f64::consts::PI
    }

    /// `Tr(Sigma_a' X)` for a lead-local insertion.
    pub fn lead_trace(&self, lead: usize, d: Complex64, x: &SmallMat) -> Complex64 {
        let i = self.sites[lead];
        d * x.get(i, i)
    }

    /// `||(z - h - Sigma) G - 1||`.
    pub fn solve_residual(&self, op: &OperatingPoint) -> f64 {
        let n = self.g.dim();
        let m = SmallMat::scalar(n, self.energy) - op.h - self.sigma;
        (m * self.g - SmallMat::identity(n)).max_abs()
    }
}

/// `g_S(u, e)`.
pub fn ldos_system(model: &SystemModel, op: &OperatingPoint, e: f64) -> Result<f64> {
    Ok(model.eval(op, e)?.ldos())
}

/// `delta g_{R,a}(u, e)`.
pub fn ldos_reservoir_correction(model: &SystemModel, op: &OperatingPoint, e: f64, lead: usize) -> Result<f64> {
    if lead >= model.leads().len() {
        return Err(Error::InvalidParameter(alloc::format!("no lead {lead}")));
    }
    Ok(model.eval(op, e)?.reservoir_correction(lead))
}
