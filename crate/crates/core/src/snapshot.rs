//! Equilibrium state functions at one protocol point.
//!
//! System quantities weight the LDOS `g_S` with a kernel; reservoir
//! corrections weight `delta g_{R,a} = -(1/pi) Im Tr(Sigma_a' G)`. Bound
//! states contribute `Tr Z` to the system and `w_a` to lead `a`.

use num_complex::Complex64;

use crate::error::Result;
use crate::greens::{BoundState, GreensEval, OperatingPoint, SystemModel};
use crate::kernels::Ensemble;
use crate::quadrature::{band_segments, default_hints, integrate_bands, EnergyGrid, QuadratureConfig};
use crate::MAX_DIM;

/// Partitioned state functions at one `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// `Omega_S`
    pub grand: f64,
    /// `U_S`
    pub energy: f64,
    /// `S_S`
    pub entropy: f64,
    /// `N_S`
    pub number: f64,
    pub site_numbers: [f64; MAX_DIM],
    pub res_grand: [f64; MAX_DIM],
    pub res_energy: [f64; MAX_DIM],
    pub res_entropy: [f64; MAX_DIM],
    pub res_number: [f64; MAX_DIM],
    /// `<H_S>`
    pub system_hamiltonian: f64,
    /// `<H_SR>` from `(2/pi) int f Im Tr(Sigma G)`.
    pub coupling_hamiltonian: f64,
    /// Total displaced-state count, equal to the system dimension.
    pub count: f64,
    /// `int g_S + sum Tr Z`.
    pub system_count: f64,
    pub n_leads: usize,
    pub grid: EnergyGrid,
}

const N: usize = 18;

fn kernels(ens: &Ensemble, e: f64) -> [f64; 4] {
    let f = ens.fermi(e);
    [ens.grand_kernel(e), e * f, ens.entropy_kernel(e), f]
}

fn continuum(g: &GreensEval, op: &OperatingPoint, ens: &Ensemble, e: f64) -> [f64; N] {
    let k = kernels(ens, e);
    let inv_pi = core::f64::consts::FRAC_1_PI;
    let ldos = g.ldos();
    let mut v = [0.0; N];
    for j in 0..4 {
        v[j] = ldos * k[j];
    }
    for i in 0..g.g.dim() {
        v[4 + i] = g.g.get(i, i).im * inv_pi * k[3];
    }
    let mut res_total = 0.0;
    for a in 0..g.n_leads {
        let d = g.reservoir_correction(a);
        res_total += d;
        for j in 0..4 {
            v[6 + 4 * a + j] = d * k[j];
        }
    }
    v[14] = (op.h * g.g).trace().im * inv_pi * k[3];
    v[15] = (g.sigma * g.g).trace().im * inv_pi * k[3];
    v[16] = ldos;
    v[17] = res_total;
    v
}

fn pole(model: &SystemModel, op: &OperatingPoint, ens: &Ensemble, b: &BoundState) -> [f64; N] {
    let e = b.energy;
    let k = kernels(ens, e);
    let z = &b.residue;
    let tz = b.system_weight();
    let mut v = [0.0; N];
    for j in 0..4 {
        v[j] = tz * k[j];
    }
    for i in 0..z.dim() {
        v[4 + i] = z.get(i, i).re * k[3];
    }
    let mut res_total = 0.0;
    for a in 0..model.leads().len() {
        let w = b.lead_weights[a];
        res_total += w;
        for j in 0..4 {
            v[6 + 4 * a + j] = w * k[j];
        }
    }
    v[14] = op.h.trace_product(z).re * k[3];
    let sigma: Complex64 = {
        let mut s = Complex64::new(0.0, 0.0);
        for (a, lead) in model.leads().iter().enumerate() {
            if model.is_active(op, a) {
                let l = lead.surface_sigma(op.amps[a], 0.0, e);
                s += l.sigma * z.get(lead.site(), lead.site());
            }
        }
        s
    };
    v[15] = sigma.re * k[3];
    v[16] = tz;
    v[17] = res_total;
    v
}

/// State functions of the instantaneous equilibrium at `op`.
pub fn snapshot(model: &SystemModel, op: &OperatingPoint, ens: &Ensemble, cfg: &QuadratureConfig) -> Result<Snapshot> {
    model.validate(op)?;
    let poles = model.find_bound_states(op)?;
    let segs = band_segments(model, op);
    let hints = default_hints(op, ens);
    let mut nodes = alloc::vec::Vec::new();
    let integral = integrate_bands(
        &segs,
        &hints,
        cfg,
        |p| model.eval_at(op, p).map(|g| continuum(&g, op, ens, p.energy)),
        Some(&mut nodes),
    )?;
    let mut v = integral.value;
    for b in &poles {
        let p = pole(model, op, ens, b);
        for (x, y) in v.iter_mut().zip(p) {
            *x += y;
        }
    }
    let n_leads = model.leads().len();
    let mut s = Snapshot {
        grand: v[0],
        energy: v[1],
        entropy: v[2],
        number: v[3],
        site_numbers: [v[4], v[5]],
        res_grand: [0.0; MAX_DIM],
        res_energy: [0.0; MAX_DIM],
        res_entropy: [0.0; MAX_DIM],
        res_number: [0.0; MAX_DIM],
        system_hamiltonian: v[14],
        coupling_hamiltonian: 2.0 * v[15],
        count: v[16] + v[17],
        system_count: v[16],
        n_leads,
        grid: EnergyGrid { nodes, poles, error_estimate: integral.error_estimate },
    };
    for a in 0..n_leads {
        s.res_grand[a] = v[6 + 4 * a];
        s.res_energy[a] = v[7 + 4 * a];
        s.res_entropy[a] = v[8 + 4 * a];
        s.res_number[a] = v[9 + 4 * a];
    }
    Ok(s)
}

impl Snapshot {
    pub fn res_grand_total(&self) -> f64 {
        self.res_grand[..self.n_leads].iter().sum()
    }

    pub fn res_number_total(&self) -> f64 {
        self.res_number[..self.n_leads].iter().sum()
    }

    /// `<H_SR>` from the half-and-half split of `U_S`.
    pub fn coupling_hamiltonian_from_split(&self) -> f64 {
        2.0 * (self.energy - self.system_hamiltonian)
    }

    /// `Omega_S - (U_S - T S_S - mu N_S)`.
    pub fn identity_residual(&self, ens: &Ensemble) -> f64 {
        self.grand - (self.energy - ens.temperature() * self.entropy - ens.chemical_potential() * self.number)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::DriveParams;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::LN_2;

    fn rlm(level: f64, v: f64) -> (SystemModel, OperatingPoint) {
        let m = SystemModel::resonant_level(1.25, 0.0).unwrap();
        let op = OperatingPoint::frozen(&m, &DriveParams::resonant(level, v));
        (m, op)
    }

    fn ens() -> Ensemble {
        Ensemble::new(0.02, 0.0).unwrap()
    }

    #[test]
    fn half_filling_at_symmetric_point() {
        let (m, op) = rlm(0.0, 0.6);
        let s = snapshot(&m, &op, &ens(), &QuadratureConfig::default()).unwrap();
        assert_abs_diff_eq!(s.number, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(s.count, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.system_count, 1.0, epsilon = 1e-10);
        assert!(s.entropy > 0.0 && s.entropy < LN_2);
    }

    #[test]
    fn friedel_count_with_bound_state() {
        for (lvl, v) in [(2.0, 1.0), (-2.4, 0.9), (1.0, 1.2), (1.36, 1.2)] {
            let (m, op) = rlm(lvl, v);
            let s = snapshot(&m, &op, &ens(), &QuadratureConfig::default()).unwrap();
            assert_abs_diff_eq!(s.count, 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(s.system_count, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn decoupled_is_pure_pole() {
        let (m, op) = rlm(0.3, 0.0);
        let e = ens();
        let s = snapshot(&m, &op, &e, &QuadratureConfig::default()).unwrap();
        assert!(s.grid.nodes.is_empty());
        assert_eq!(s.system_count, 1.0);
        assert_abs_diff_eq!(s.energy, 0.3 * e.fermi(0.3), epsilon = 1e-15);
        assert_eq!(s.res_grand[0], 0.0);
    }

    #[test]
    fn split_and_direct_coupling_energy_agree() {
        let (m, op) = rlm(0.7, 0.9);
        let s = snapshot(&m, &op, &ens(), &QuadratureConfig::default()).unwrap();
        assert_abs_diff_eq!(s.coupling_hamiltonian, s.coupling_hamiltonian_from_split(), epsilon = 1e-9);
        assert!(s.identity_residual(&ens()).abs() < 1e-12);
    }

    #[test]
    fn two_level_count() {
        let m = SystemModel::two_level(1.25, 0.0).unwrap();
        let e = Ensemble::new(0.02, 1.0).unwrap();
        for e2 in [-2.0, -1.3, 0.0, 0.9] {
            let op = OperatingPoint::frozen(&m, &DriveParams::two_level(0.7, e2, 0.5, 0.4, 1.2));
            let s = snapshot(&m, &op, &e, &QuadratureConfig::default()).unwrap();
            assert_abs_diff_eq!(s.count, 2.0, epsilon = 1e-8);
            assert_abs_diff_eq!(s.site_numbers[0] + s.site_numbers[1], s.number, epsilon = 1e-10);
        }
    }
}
