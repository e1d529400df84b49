//! First-order rates per unit protocol parameter.
//!
//! Every rate is `int (de/pi) Im T(e) K(e)` for a trace `T` built from `G^A`
//! and its derivatives, plus a pole term `Re Res T K` at every bound state.
//! The pole terms are taken on a small circle, which also captures the double
//! poles of `dG/du`, i.e. the motion of the bound states.

use num_complex::Complex64;

use crate::error::Result;
use crate::greens::{GreensEval, OperatingPoint, SystemModel};
use crate::kernels::Ensemble;
use crate::quadrature::{
    band_segments, contour_radius, contour_residue, default_hints, integrate_bands, QuadratureConfig,
};
use crate::MAX_DIM;

/// Rates of change per unit `u` at one protocol point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateVector {
    pub wext: f64,
    pub grand: f64,
    pub energy: f64,
    pub entropy: f64,
    pub number: f64,
    pub site_numbers: [f64; MAX_DIM],
    pub res_grand: [f64; MAX_DIM],
    pub res_energy: [f64; MAX_DIM],
    pub res_entropy: [f64; MAX_DIM],
    pub res_number: [f64; MAX_DIM],
    /// `<dH_S/du>`
    pub hs_power: f64,
    /// `<dH_SR/du>`
    pub hsr_power: f64,
    /// `int (de/pi) Im Tr(dG/du Sigma' - dG/de dSigma/du) omega` plus poles.
    pub nonlocal_integral: f64,
    pub n_leads: usize,
}

const N: usize = 18;
const TRACES: usize = 9;

fn traces(g: &GreensEval, op: &OperatingPoint) -> [Complex64; TRACES] {
    let zero = Complex64::new(0.0, 0.0);
    let mut t = [zero; TRACES];
    t[0] = g.dg_param.trace();
    for i in 0..g.g.dim() {
        t[1 + i] = g.dg_param.get(i, i);
    }
    for a in 0..g.n_leads {
        let i = g.sites[a];
        let l = &g.leads[a];
        t[3 + a] = -(l.d_energy * g.dg_param.get(i, i) + l.d_energy_param * g.g.get(i, i));
    }
    let hs = op.dh.trace_product(&g.g);
    let hsr = g.dsigma_param.trace_product(&g.g);
    t[5] = hs + hsr;
    t[6] = hs;
    t[7] = hsr;
    t[8] = g.dg_param.trace_product(&g.dsigma_energy) - g.dg_energy.trace_product(&g.dsigma_param);
    t
}

/// Lays out `val(trace, kernel)` into the rate vector order.
fn assemble<F: Fn(Complex64, Complex64) -> f64>(t: &[Complex64; TRACES], k: &[Complex64; 4], val: F) -> [f64; N] {
    let mut v = [0.0; N];
    for j in 0..4 {
        v[j] = val(t[0], k[j]);
    }
    v[4] = val(t[1], k[3]);
    v[5] = val(t[2], k[3]);
    for a in 0..2 {
        for j in 0..4 {
            v[6 + 4 * a + j] = val(t[3 + a], k[j]);
        }
    }
    v[14] = val(t[5], k[3]);
    v[15] = val(t[6], k[3]);
    v[16] = val(t[7], k[3]);
    v[17] = val(t[8], k[0]);
    v
}

fn real_kernels(ens: &Ensemble, e: f64) -> [Complex64; 4] {
    let f = ens.fermi(e);
    [
        Complex64::new(ens.grand_kernel(e), 0.0),
        Complex64::new(e * f, 0.0),
        Complex64::new(ens.entropy_kernel(e), 0.0),
        Complex64::new(f, 0.0),
    ]
}

fn complex_kernels(ens: &Ensemble, z: Complex64) -> [Complex64; 4] {
    let f = ens.fermi_complex(z);
    [ens.grand_kernel_complex(z), z * f, ens.entropy_kernel_complex(z), f]
}

/// All rates at the operating point `op`.
pub fn partitioned_rates(
    model: &SystemModel,
    op: &OperatingPoint,
    ens: &Ensemble,
    cfg: &QuadratureConfig,
) -> Result<RateVector> {
    model.validate(op)?;
    let poles = model.find_bound_states(op)?;
    let segs = band_segments(model, op);
    let hints = default_hints(op, ens);
    let inv_pi = core::f64::consts::FRAC_1_PI;
    let integral = integrate_bands(
        &segs,
        &hints,
        cfg,
        |p| {
            let g = model.eval_at(op, p)?;
            let t = traces(&g, op);
            let k = real_kernels(ens, p.energy);
            Ok(assemble(&t, &k, |t, k| t.im * inv_pi * k.re))
        },
        None,
    )?;
    let mut v = integral.value;
    for (b, bs) in poles.iter().enumerate() {
        let r = contour_radius(model, op, ens, &poles, b);
        // measured from the nearest edge so the circle keeps its shape
        // however close the pole sits to the band
        let anchor = model.nearest_edge(op, bs.energy);
        let offset = bs.energy - anchor;
        let p: [f64; N] = contour_residue(bs.energy, r, cfg.contour_points, |z, c| {
            let g = model.eval_complex_at(op, anchor, c + offset)?;
            let t = traces(&g, op);
            let k = complex_kernels(ens, z);
            Ok(assemble(&t, &k, |t, k| (c * t * k).re))
        })?;
        for (x, y) in v.iter_mut().zip(p) {
            *x += y;
        }
    }
    let n_leads = model.leads().len();
    let mut r = RateVector {
        grand: v[0],
        energy: v[1],
        entropy: v[2],
        number: v[3],
        site_numbers: [v[4], v[5]],
        wext: v[14],
        hs_power: v[15],
        hsr_power: v[16],
        nonlocal_integral: v[17],
        n_leads,
        ..RateVector::default()
    };
    for a in 0..n_leads {
        r.res_grand[a] = v[6 + 4 * a];
        r.res_energy[a] = v[7 + 4 * a];
        r.res_entropy[a] = v[8 + 4 * a];
        r.res_number[a] = v[9 + 4 * a];
    }
    Ok(r)
}

/// `W_ext rate`, the external power.
pub fn external_power(model: &SystemModel, op: &OperatingPoint, ens: &Ensemble, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(partitioned_rates(model, op, ens, cfg)?.wext)
}

/// `(<dH_S/du>, <dH_SR/du>)`.
pub fn coupling_powers(
    model: &SystemModel,
    op: &OperatingPoint,
    ens: &Ensemble,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let r = partitioned_rates(model, op, ens, cfg)?;
    Ok((r.hs_power, r.hsr_power))
}

/// Nonlocal work rate in bookkeeping and explicit integral form.
pub fn nonlocal_work_rate(
    model: &SystemModel,
    op: &OperatingPoint,
    ens: &Ensemble,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let r = partitioned_rates(model, op, ens, cfg)?;
    Ok((r.nonlocal_bookkeeping(), r.nonlocal_explicit()))
}

impl RateVector {
    pub fn res_grand_total(&self) -> f64 {
        self.res_grand[..self.n_leads].iter().sum()
    }

    pub fn res_number_total(&self) -> f64 {
        self.res_number[..self.n_leads].iter().sum()
    }

    /// Thermodynamic work rate on the system, `W_ext rate - sum dOmega_R rate`.
    pub fn system_work(&self) -> f64 {
        self.wext - self.res_grand_total()
    }

    /// `W_S rate - <d(H_S + H_SR/2)/du>`.
    pub fn nonlocal_bookkeeping(&self) -> f64 {
        self.system_work() - self.hs_power - 0.5 * self.hsr_power
    }

    /// `-<dH_SR/du>/2` plus the energy integral.
    pub fn nonlocal_explicit(&self) -> f64 {
        -0.5 * self.hsr_power + self.nonlocal_integral
    }

    /// `W_ext rate - Omega_S rate - sum dOmega_R rate`.
    pub fn sum_rule_residual(&self) -> f64 {
        self.wext - self.grand - self.res_grand_total()
    }

    /// `U_S rate - T S_S rate - mu N_S rate - W_S rate`.
    pub fn first_law_residual(&self, ens: &Ensemble) -> f64 {
        self.energy - ens.temperature() * self.entropy - ens.chemical_potential() * self.number - self.system_work()
    }

    /// `W_ext rate - <dH_S/du> - <dH_SR/du>`.
    pub fn power_split_residual(&self) -> f64 {
        self.wext - self.hs_power - self.hsr_power
    }
}
