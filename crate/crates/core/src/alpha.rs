//! The alpha family of partitions.
//!
//! A fraction `alpha` of the coupling Hamiltonian is assigned to the system.
//! `alpha = 1/2` is the Hilbert-space partition used everywhere else in the
//! crate; every other `alpha` changes the internal energy, the work and the
//! entropy of the system, and only the Hilbert-space choice keeps the entropy
//! bounded as `T -> 0`.
//!
//! All quantities are affine in `alpha`.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::greens::{DriveParams, OperatingPoint, SystemModel};
use crate::kernels::Ensemble;
use crate::matrix::SmallMat;
use crate::protocol::ScenarioResult;
use crate::snapshot::Snapshot;

/// `<H_S> + alpha <H_SR>`.
pub fn alpha_internal_energy(s: &Snapshot, alpha: f64) -> f64 {
    s.system_hamiltonian + alpha * s.coupling_hamiltonian
}

/// `int du [<dH_S/du> + alpha <dH_SR/du>]` along a protocol run.
pub fn alpha_work(r: &ScenarioResult, alpha: f64) -> f64 {
    let t = r.totals();
    t.hs_power + alpha * t.hsr_power
}

/// Energy moments of the system spectral block used by the entropy partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMoments {
    /// `int f A_SS`, the system block of the density matrix.
    pub occupied: SmallMat,
    /// `int (1 - f) A_SS`
    pub empty: SmallMat,
    /// `int (-ln f) A_SS`
    pub neg_ln_occupied: SmallMat,
    /// `int (-ln(1 - f)) A_SS`
    pub neg_ln_empty: SmallMat,
}

impl SpectralMoments {
    /// Moments over the continuum grid and bound states of `snap`.
    pub fn new(model: &SystemModel, op: &OperatingPoint, ens: &Ensemble, snap: &Snapshot) -> Result<Self> {
        let n = model.dim();
        let mut m = Self {
            occupied: SmallMat::zeros(n),
            empty: SmallMat::zeros(n),
            neg_ln_occupied: SmallMat::zeros(n),
            neg_ln_empty: SmallMat::zeros(n),
        };
        for (e, w, a) in snap.grid.spectral_items(model, op)? {
            m.occupied += a.scale_real(w * ens.fermi(e));
            m.empty += a.scale_real(w * ens.fermi_complement(e));
            m.neg_ln_occupied += a.scale_real(w * ens.neg_ln_fermi(e));
            m.neg_ln_empty += a.scale_real(w * ens.neg_ln_fermi_complement(e));
        }
        Ok(m)
    }

    /// `int int Tr(A(e) A(e')) [f(e) (-ln f(e')) + (1 - f(e)) (-ln(1 - f(e')))]`.
    ///
    /// The kernel separates, so the double integral is a trace of products
    /// of single moments.
    pub fn coefficient(&self) -> f64 {
        let c: Complex64 =
            self.occupied.trace_product(&self.neg_ln_occupied) + self.empty.trace_product(&self.neg_ln_empty);
        c.re
    }
}

/// The double-integral term multiplying `1 - 2 alpha` in the alpha entropy.
pub fn coefficient(model: &SystemModel, op: &OperatingPoint, ens: &Ensemble, snap: &Snapshot) -> Result<f64> {
    Ok(SpectralMoments::new(model, op, ens, snap)?.coefficient())
}

/// `2 alpha S_S + (1 - 2 alpha) C` given the coefficient `C`.
#[inline]
pub fn alpha_entropy_from(entropy: f64, coefficient: f64, alpha: f64) -> f64 {
    2.0 * alpha * entropy + (1.0 - 2.0 * alpha) * coefficient
}

/// Alpha-partitioned system entropy at one protocol point.
pub fn alpha_entropy(
    model: &SystemModel,
    op: &OperatingPoint,
    ens: &Ensemble,
    snap: &Snapshot,
    alpha: f64,
) -> Result<f64> {
    Ok(alpha_entropy_from(snap.entropy, coefficient(model, op, ens, snap)?, alpha))
}

/// Entropy change inferred from the thermodynamic identity,
/// `T dS = d(alpha U_S) - mu dN_S - alpha W_S`.
///
/// `N_S` is the Hilbert-space particle number.
pub fn entropy_eog(r: &ScenarioResult, alpha: f64) -> f64 {
    let du = r.delta(|s| alpha_internal_energy(s, alpha));
    let dn = r.delta(|s| s.number);
    (du - r.ensemble.chemical_potential() * dn - alpha_work(r, alpha)) / r.ensemble.temperature()
}

/// Alpha-dependent quantities at one `alpha` for a set of paths between the same endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPoint {
    pub alpha: f64,
    /// `Delta(alpha U_S)`
    pub delta_energy: f64,
    /// `alpha W_S` per path.
    pub work: Vec<f64>,
    /// `Delta(alpha S_S)`
    pub delta_entropy: f64,
    /// `Delta S_EOG` per path.
    pub entropy_eog: Vec<f64>,
}

/// An alpha sweep over protocol runs sharing their endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSweep {
    pub points: Vec<AlphaPoint>,
    /// Coefficient `C` at the initial and final points.
    pub coefficient: [f64; 2],
    /// Hilbert-space `Delta S_S`.
    pub delta_entropy: f64,
    /// Hilbert-space `W_S` per path.
    pub system_work: Vec<f64>,
}

/// Sweep `alphas` over runs of the same model and ensemble.
///
/// Fails if the runs do not share their endpoints.
pub fn alpha_sweep(model: &SystemModel, runs: &[ScenarioResult], alphas: &[f64]) -> Result<AlphaSweep> {
    let first = runs.first().ok_or_else(|| Error::InvalidParameter("alpha sweep needs at least one run".into()))?;
    for r in runs {
        if max_diff(&r.initial().params, &first.initial().params) > 1e-12
            || max_diff(&r.last().params, &first.last().params) > 1e-12
        {
            return Err(Error::InvalidParameter("alpha sweep runs must share their endpoints".into()));
        }
        if r.ensemble != first.ensemble {
            return Err(Error::InvalidParameter("alpha sweep runs must share the ensemble".into()));
        }
    }
    let ens = &first.ensemble;
    let mut c = [0.0; 2];
    for (k, rec) in [first.initial(), first.last()].into_iter().enumerate() {
        let op = OperatingPoint::frozen(model, &rec.params);
        c[k] = coefficient(model, &op, ens, &rec.snapshot)?;
    }
    let ds = first.delta(|s| s.entropy);
    let points = alphas
        .iter()
        .map(|&alpha| AlphaPoint {
            alpha,
            delta_energy: first.delta(|s| alpha_internal_energy(s, alpha)),
            work: runs.iter().map(|r| alpha_work(r, alpha)).collect(),
            delta_entropy: alpha_entropy_from(ds, c[1] - c[0], alpha),
            entropy_eog: runs.iter().map(|r| entropy_eog(r, alpha)).collect(),
        })
        .collect();
    Ok(AlphaSweep {
        points,
        coefficient: c,
        delta_entropy: ds,
        system_work: runs.iter().map(|r| r.system_work()).collect(),
    })
}

fn max_diff(a: &DriveParams, b: &DriveParams) -> f64 {
    let mut m = (a.hopping - b.hopping).abs();
    for i in 0..a.onsite.len() {
        m = m.max((a.onsite[i] - b.onsite[i]).abs()).max((a.couplings[i] - b.couplings[i]).abs());
    }
    m
}

/// `alphas` from `start` to `end` inclusive in steps of `step`.
pub fn alpha_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && end.is_finite() && step.is_finite()) || step <= 0.0 || end < start {
        return Err(Error::InvalidParameter("alpha grid needs finite start <= end and a positive step".into()));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + step * k as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{run_protocol, Protocol};
    use crate::quadrature::{integrate_double, QuadratureConfig};
    use crate::snapshot::snapshot;
    use approx::assert_abs_diff_eq;

    fn rlm(level: f64, v: f64, t: f64) -> (SystemModel, OperatingPoint, Ensemble, Snapshot) {
        let m = SystemModel::resonant_level(1.25, 0.0).unwrap();
        let op = OperatingPoint::frozen(&m, &DriveParams::resonant(level, v));
        let ens = Ensemble::new(t, 0.0).unwrap();
        let s = snapshot(&m, &op, &ens, &QuadratureConfig::default()).unwrap();
        (m, op, ens, s)
    }

    #[test]
    fn half_recovers_hilbert_space_values() {
        let (m, op, ens, s) = rlm(-1.0, 1.0, 0.02);
        assert_abs_diff_eq!(alpha_internal_energy(&s, 0.5), s.energy, epsilon = 1e-10);
        assert_abs_diff_eq!(alpha_entropy(&m, &op, &ens, &s, 0.5).unwrap(), s.entropy, epsilon = 1e-14);
    }

    #[test]
    fn decoupled_level() {
        let (m, op, ens, s) = rlm(0.01, 0.0, 0.02);
        let e = 0.01;
        for a in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(alpha_internal_energy(&s, a), ens.fermi(e) * e, epsilon = 1e-14);
            // a single sharp level: the double integral collapses to s(e)
            assert_abs_diff_eq!(alpha_entropy(&m, &op, &ens, &s, a).unwrap(), ens.entropy_kernel(e), epsilon = 1e-12);
        }
    }

    #[test]
    fn factorised_coefficient_matches_double_sum() {
        for (level, v) in [(0.0, 1.0), (2.0, 1.0), (-1.0, 0.6)] {
            let (m, op, ens, s) = rlm(level, v, 0.05);
            let items = s.grid.spectral_items(&m, &op).unwrap();
            let double = integrate_double(&items, |e, e2| {
                ens.fermi(e) * ens.neg_ln_fermi(e2) + ens.fermi_complement(e) * ens.neg_ln_fermi_complement(e2)
            });
            let c = coefficient(&m, &op, &ens, &s).unwrap();
            assert_abs_diff_eq!(c, double, epsilon = 1e-10 * c.abs());
            assert!(c > 0.0);
        }
    }

    #[test]
    fn coefficient_grows_like_inverse_temperature() {
        for level in [0.0, 1.0, -1.0, 2.0, -2.0] {
            let (m, op, ens, s) = rlm(level, 1.0, 1.0 / 50.0);
            let hi = coefficient(&m, &op, &ens, &s).unwrap();
            let (m, op, ens, s) = rlm(level, 1.0, 1.0 / 25.0);
            let lo = coefficient(&m, &op, &ens, &s).unwrap();
            assert!((hi / lo - 2.0).abs() < 0.1, "level {level}: {}", hi / lo);
        }
    }

    #[test]
    fn alpha_one_entropy_turns_negative_when_cold() {
        let (m, op, ens, s) = rlm(-1.0, 1.0, 1.0 / 200.0);
        assert!(alpha_entropy(&m, &op, &ens, &s, 1.0).unwrap() < 0.0);
    }

    #[test]
    fn coupling_hamiltonian_matches_energy_identity() {
        let (_, _, _, s) = rlm(0.3, 0.8, 0.02);
        assert_abs_diff_eq!(s.coupling_hamiltonian, 2.0 * (s.energy - s.system_hamiltonian), epsilon = 1e-9);
    }

    #[test]
    fn sweep_on_two_paths() {
        let m = SystemModel::resonant_level(1.25, 0.0).unwrap();
        let ens = Ensemble::new(0.02, 0.0).unwrap();
        let cfg = QuadratureConfig::default();
        let p = |e, v| DriveParams::resonant(e, v);
        let a = Protocol::through(&[p(0.0, 0.6), p(1.0, 0.6), p(1.0, 0.4)], 16).unwrap();
        let b = Protocol::through(&[p(0.0, 0.6), p(0.0, 0.4), p(1.0, 0.4)], 16).unwrap();
        let runs = [run_protocol(&m, &a, &ens, &cfg).unwrap(), run_protocol(&m, &b, &ens, &cfg).unwrap()];
        let sw = alpha_sweep(&m, &runs, &[0.0, 0.5, 1.0]).unwrap();
        let [p0, ph, p1] = [&sw.points[0], &sw.points[1], &sw.points[2]];
        // alpha = 1 work is the external work
        assert_abs_diff_eq!(p1.work[0], runs[0].external_work(), epsilon = 1e-12);
        assert_abs_diff_eq!(p1.work[0], p1.work[1], epsilon = 1e-6);
        assert!((p0.work[0] - p0.work[1]).abs() > 1e-3);
        assert_abs_diff_eq!(ph.delta_entropy, sw.delta_entropy, epsilon = 1e-14);
        // affine in alpha
        assert_abs_diff_eq!(ph.delta_energy, 0.5 * (p0.delta_energy + p1.delta_energy), epsilon = 1e-12);
        assert_abs_diff_eq!(ph.entropy_eog[0], 0.5 * (p0.entropy_eog[0] + p1.entropy_eog[0]), epsilon = 1e-10);
        assert!((ph.entropy_eog[0] - ph.delta_entropy).abs() > 1e-3);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(alpha_grid(0.0, 1.0, 0.25).unwrap(), [0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(alpha_grid(0.0, 1.0, 0.1).unwrap().len(), 11);
        assert!(alpha_grid(1.0, 0.0, 0.1).is_err());
        assert!(alpha_grid(0.0, 1.0, 0.0).is_err());
    }
}
