//! Finite-universe exact diagonalization.
//!
//! The system plus `L` sites of every lead chain form a dense real symmetric
//! single-particle Hamiltonian. Its eigenpairs give thermodynamics as plain
//! sums, which converge to the continuum engine as `L` grows. The finite
//! universe is the ground truth for the closed forms elsewhere in the crate.

use alloc::vec::Vec;

use faer::{Mat, Side};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::greens::{DriveParams, SystemModel};
use crate::kernels::Ensemble;

/// Largest universe the dense solver accepts.
pub const MAX_UNIVERSE: usize = 2000;

/// A system with finite lead chains, diagonalized.
#[derive(Debug, Clone)]
pub struct FiniteUniverse {
    /// System orbitals are the first `n_system` basis states.
    n_system: usize,
    h: Mat<f64>,
    values: Vec<f64>,
    vectors: Mat<f64>,
    spacing: f64,
}

impl FiniteUniverse {
    /// Diagonalize the row-major `d x d` matrix `h` whose first `n_system`
    /// orbitals form the system.
    pub fn new(d: usize, h: &[f64], n_system: usize) -> Result<Self> {
        if d == 0 || h.len() != d * d || n_system > d {
            return Err(Error::InvalidParameter("universe Hamiltonian must be square with n_system <= D".into()));
        }
        if d > MAX_UNIVERSE {
            return Err(Error::InvalidParameter(alloc::format!("universe dimension {d} exceeds {MAX_UNIVERSE}")));
        }
        let h = Mat::from_fn(d, d, |i, j| h[i * d + j]);
        for i in 0..d {
            for j in 0..d {
                if !h[(i, j)].is_finite() || h[(i, j)] != h[(j, i)] {
                    return Err(Error::InvalidParameter("universe Hamiltonian must be finite and symmetric".into()));
                }
            }
        }
        let eig = h.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen { residual: f64::INFINITY })?;
        let s = eig.S().column_vector();
        // ascending order keeps sums and tests reproducible
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
        let values = idx.iter().map(|&k| s[k]).collect();
        let u = eig.U();
        let vectors = Mat::from_fn(d, d, |i, j| u[(i, idx[j])]);
        let univ = Self { n_system, h, values, vectors, spacing: 0.0 };
        let r = univ.eigen_residual();
        let mut scale: f64 = 1.0;
        for j in 0..d {
            for i in 0..d {
                scale = scale.max(univ.h[(i, j)].abs());
            }
        }
        if !(r <= 1e-10 * scale) {
            return Err(Error::Eigen { residual: r });
        }
        Ok(univ)
    }

    /// `model` at parameters `p` with `length` sites per lead chain.
    ///
    /// Chain sites carry the band center on-site and hop with the lead
    /// hopping; the first chain site couples to its system orbital.
    pub fn from_model(model: &SystemModel, p: &DriveParams, length: usize) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::InvalidParameter("drive parameters must be finite".into()));
        }
        if length == 0 && !model.leads().is_empty() {
            return Err(Error::InvalidParameter("chain length must be positive".into()));
        }
        let n = model.dim();
        let d = n + length * model.leads().len();
        if d > MAX_UNIVERSE {
            return Err(Error::InvalidParameter(alloc::format!("universe dimension {d} exceeds {MAX_UNIVERSE}")));
        }
        let mut h = alloc::vec![0.0; d * d];
        let mut set = |i: usize, j: usize, x: f64| {
            h[i * d + j] = x;
            h[j * d + i] = x;
        };
        for i in 0..n {
            set(i, i, p.onsite[i]);
        }
        if n == 2 {
            set(0, 1, p.hopping);
        }
        let mut spacing: f64 = 0.0;
        for (a, lead) in model.leads().iter().enumerate() {
            let base = n + a * length;
            for k in 0..length {
                set(base + k, base + k, lead.band_center());
                if k + 1 < length {
                    set(base + k, base + k + 1, lead.hopping());
                }
            }
            set(lead.site(), base, p.couplings[a]);
            spacing = spacing.max(core::f64::consts::PI * 2.0 * lead.hopping() / length as f64);
        }
        let mut u = Self::new(d, &h, n)?;
        u.spacing = spacing;
        Ok(u)
    }

    /// Resonant level coupled to one chain centered at zero.
    pub fn resonant_level(level: f64, coupling: f64, hopping: f64, length: usize) -> Result<Self> {
        Self::from_model(&SystemModel::resonant_level(hopping, 0.0)?, &DriveParams::resonant(level, coupling), length)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn n_system(&self) -> usize {
        self.n_system
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Component `i` of eigenvector `nu`.
    pub fn eigenvector(&self, i: usize, nu: usize) -> f64 {
        self.vectors[(i, nu)]
    }

    /// Orbitals of the chain of lead `a` when every chain has `length` sites.
    pub fn chain_orbitals(&self, a: usize, length: usize) -> core::ops::Range<usize> {
        let base = self.n_system + a * length;
        base..base + length
    }

    /// Approximate level spacing near the band center of the widest lead.
    pub fn level_spacing(&self) -> f64 {
        self.spacing
    }

    /// `<nu|Pi_S|nu>`
    pub fn system_weight(&self, nu: usize) -> f64 {
        (0..self.n_system).map(|i| self.vectors[(i, nu)].powi(2)).sum()
    }

    /// `<mu|Pi_S|nu>`
    pub fn system_overlap(&self, mu: usize, nu: usize) -> f64 {
        (0..self.n_system).map(|i| self.vectors[(i, mu)] * self.vectors[(i, nu)]).sum()
    }

    /// `max_nu |h v_nu - e_nu v_nu|`
    pub fn eigen_residual(&self) -> f64 {
        let hv = &self.h * &self.vectors;
        let mut r: f64 = 0.0;
        for (j, &e) in self.values.iter().enumerate() {
            let mut c = 0.0;
            for i in 0..self.dim() {
                c += (hv[(i, j)] - self.vectors[(i, j)] * e).powi(2);
            }
            r = r.max(c.sqrt());
        }
        r
    }

    /// System block of the matrix function `g(h)`.
    fn system_block(&self, g: impl Fn(f64) -> f64) -> Mat<f64> {
        let n = self.n_system;
        let gv: Vec<f64> = self.values.iter().map(|&e| g(e)).collect();
        Mat::from_fn(n, n, |i, j| {
            (0..self.dim()).map(|nu| self.vectors[(i, nu)] * gv[nu] * self.vectors[(j, nu)]).sum()
        })
    }
}

/// Grand-canonical sums.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateSums {
    pub grand: f64,
    pub energy: f64,
    pub entropy: f64,
    pub number: f64,
}

/// Whole-universe and system-partitioned sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteThermo {
    pub total: StateSums,
    pub system: StateSums,
}

fn add(s: &mut StateSums, ens: &Ensemble, e: f64, w: f64) {
    s.grand += w * ens.grand_kernel(e);
    s.energy += w * e * ens.fermi(e);
    s.entropy += w * ens.entropy_kernel(e);
    s.number += w * ens.fermi(e);
}

/// Eigenbasis thermodynamics of the whole universe and of its system part.
pub fn finite_thermo(univ: &FiniteUniverse, ens: &Ensemble) -> FiniteThermo {
    let mut total = StateSums::default();
    let mut system = StateSums::default();
    for (nu, &e) in univ.values.iter().enumerate() {
        add(&mut total, ens, e, 1.0);
        add(&mut system, ens, e, univ.system_weight(nu));
    }
    FiniteThermo { total, system }
}

/// Occupation `sum_nu f_nu sum_{i in orbitals} |<i|nu>|^2` of a set of orbitals.
pub fn finite_occupation(univ: &FiniteUniverse, ens: &Ensemble, orbitals: core::ops::Range<usize>) -> f64 {
    let mut n = 0.0;
    for (nu, &e) in univ.values.iter().enumerate() {
        let w: f64 = orbitals.clone().map(|i| univ.vectors[(i, nu)].powi(2)).sum();
        n += w * ens.fermi(e);
    }
    n
}

/// `-f_mu ln f_nu - (1 - f_mu) ln(1 - f_nu)` without forming a logarithm of zero.
fn pair_kernel(ens: &Ensemble, e_mu: f64, e_nu: f64) -> f64 {
    ens.fermi(e_mu) * ens.neg_ln_fermi(e_nu) + ens.fermi_complement(e_mu) * ens.neg_ln_fermi_complement(e_nu)
}

/// Alpha entropies `(S_S, S_R)` of a finite universe.
///
/// The system takes the fraction `alpha` of the coupling and the reservoir
/// the complementary `1 - alpha`, so the two add to the total entropy for
/// every `alpha`.
pub fn finite_alpha_entropy(univ: &FiniteUniverse, ens: &Ensemble, alpha: f64) -> (f64, f64) {
    let d = univ.dim();
    let beta = 1.0 - alpha;
    let mut diag_s = 0.0;
    let mut diag_r = 0.0;
    let mut cross_s = 0.0;
    let mut cross_r = 0.0;
    for nu in 0..d {
        let p = univ.system_weight(nu);
        let s = ens.entropy_kernel(univ.values[nu]);
        diag_s += p * s;
        diag_r += (1.0 - p) * s;
    }
    for mu in 0..d {
        for nu in 0..d {
            let k = pair_kernel(ens, univ.values[mu], univ.values[nu]);
            let ps = univ.system_overlap(mu, nu);
            let pr = if mu == nu { 1.0 - ps } else { -ps };
            cross_s += ps * ps * k;
            cross_r += pr * pr * k;
        }
    }
    (2.0 * alpha * diag_s + (1.0 - 2.0 * alpha) * cross_s, 2.0 * beta * diag_r + (1.0 - 2.0 * beta) * cross_r)
}

/// Alpha system entropy assembled from single-particle operators in the
/// orbital basis: `2 alpha Tr(Pi s(h)) + (1 - 2 alpha) [Tr(Pi sp(h)) - Tr(Pi (1 - f(h)) Pi x(h))]`,
/// where `x = beta (h - mu)` and `sp = -ln f(h)`.
pub fn operator_alpha_entropy(univ: &FiniteUniverse, ens: &Ensemble, alpha: f64) -> f64 {
    let n = univ.n_system;
    let s = univ.system_block(|e| ens.entropy_kernel(e));
    let sp = univ.system_block(|e| ens.neg_ln_fermi(e));
    let empty = univ.system_block(|e| ens.fermi_complement(e));
    let x = univ.system_block(|e| ens.beta() * (e - ens.chemical_potential()));
    let ex = &empty * &x;
    let tr = |m: &Mat<f64>| (0..n).map(|i| m[(i, i)]).sum::<f64>();
    2.0 * alpha * tr(&s) + (1.0 - 2.0 * alpha) * (tr(&sp) - tr(&ex))
}

/// Lorentzian-broadened system LDOS `(1/pi) sum <nu|Pi_S|nu> eta / ((e - e_nu)^2 + eta^2)`.
///
/// Fails when `eta` is below the level spacing, where the sum is a comb
/// rather than a density.
pub fn finite_ldos(univ: &FiniteUniverse, e: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0) || eta < univ.spacing {
        return Err(Error::BroadeningTooSmall { eta, spacing: univ.spacing });
    }
    let mut g = 0.0;
    for (nu, &en) in univ.values.iter().enumerate() {
        g += univ.system_weight(nu) * eta / ((e - en).powi(2) + eta * eta);
    }
    Ok(g * core::f64::consts::FRAC_1_PI)
}

/// The eigenstate outside the band `[lo, hi]` with the largest system weight,
/// as `(energy, weight)`.
pub fn split_off_state(univ: &FiniteUniverse, lo: f64, hi: f64) -> Option<(f64, f64)> {
    (0..univ.dim())
        .filter(|&nu| univ.values[nu] < lo || univ.values[nu] > hi)
        .map(|nu| (univ.values[nu], univ.system_weight(nu)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}
