//! Driving paths in the protocol parameter `u` and their integration.
//!
//! A protocol is a chain of segments, each ramping the drive parameters
//! between two endpoints. Segment `k` of `K` covers `u in [k/K, (k+1)/K]`.
//! Rates are integrated with three-point Gauss-Legendre panels; a step in
//! which the number of bound states changes is split at the threshold and
//! the two sides use `u = u_c +- h tau^2`, which removes the square-root
//! behaviour of the rates there.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::greens::{DriveParams, OperatingPoint, SystemModel};
use crate::kernels::Ensemble;
use crate::quadrature::{GaussLegendre, QuadratureConfig};
use crate::rates::{partitioned_rates, RateVector};
use crate::snapshot::{snapshot, Snapshot};
use crate::MAX_DIM;

/// Shape of a segment's trajectory in its local time `t in [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ramp {
    #[default]
    Linear,
    /// `3t^2 - 2t^3`, with zero velocity at both ends.
    Smoothstep,
}

impl Ramp {
    /// `(r(t), r'(t))`
    pub fn eval(self, t: f64) -> (f64, f64) {
        match self {
            Ramp::Linear => (t, 1.0),
            Ramp::Smoothstep => (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: DriveParams,
    pub end: DriveParams,
    pub ramp: Ramp,
    /// Number of integration steps.
    pub steps: usize,
}

impl Segment {
    pub fn linear(start: DriveParams, end: DriveParams, steps: usize) -> Self {
        Self { start, end, ramp: Ramp::Linear, steps }
    }

    pub fn with_ramp(mut self, ramp: Ramp) -> Self {
        self.ramp = ramp;
        self
    }

    /// Parameters and their derivative with respect to local time.
    pub fn at(&self, t: f64) -> (DriveParams, DriveParams) {
        let (r, dr) = self.ramp.eval(t);
        (self.start.lerp(&self.end, r), self.start.delta(&self.end, dr))
    }
}

/// A continuous piecewise path of drive parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    segments: Vec<Segment>,
}

const JOIN_TOL: f64 = 1e-12;

fn params_close(a: &DriveParams, b: &DriveParams) -> bool {
    let d = a.delta(b, 1.0);
    d.onsite.iter().chain(d.couplings.iter()).all(|x| x.abs() <= JOIN_TOL) && d.hopping.abs() <= JOIN_TOL
}

impl Protocol {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter("protocol has no segments".into()));
        }
        for (k, s) in segments.iter().enumerate() {
            if s.steps == 0 {
                return Err(Error::InvalidParameter(alloc::format!("segment {k} has zero steps")));
            }
            if !s.start.is_finite() || !s.end.is_finite() {
                return Err(Error::InvalidParameter(alloc::format!("segment {k} has non-finite parameters")));
            }
        }
        for (k, w) in segments.windows(2).enumerate() {
            if !params_close(&w[0].end, &w[1].start) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "segments {k} and {} do not join continuously",
                    k + 1
                )));
            }
        }
        Ok(Self { segments })
    }

    /// One linear segment.
    pub fn linear(start: DriveParams, end: DriveParams, steps: usize) -> Result<Self> {
        Self::new(alloc::vec![Segment::linear(start, end, steps)])
    }

    /// Linear segments through `points`.
    pub fn through(points: &[DriveParams], steps: usize) -> Result<Self> {
        Self::new(points.windows(2).map(|w| Segment::linear(w[0], w[1], steps)).collect())
    }

    /// Parameters held at `p`.
    pub fn constant(p: DriveParams, steps: usize) -> Result<Self> {
        Self::linear(p, p, steps)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn start(&self) -> DriveParams {
        self.segments[0].start
    }

    pub fn end(&self) -> DriveParams {
        self.segments[self.segments.len() - 1].end
    }

    /// The same path traversed backwards.
    pub fn reversed(&self) -> Self {
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| Segment { start: s.end, end: s.start, ramp: s.ramp, steps: s.steps })
            .collect();
        Self { segments }
    }

    /// Copy with `steps` integration steps in every segment.
    pub fn with_steps(&self, steps: usize) -> Self {
        let segments = self.segments.iter().map(|s| Segment { steps: steps.max(1), ..*s }).collect();
        Self { segments }
    }

    fn locate(&self, u: f64) -> (usize, f64) {
        let k = self.segments.len();
        let x = u.clamp(0.0, 1.0) * k as f64;
        let i = (x.floor() as usize).min(k - 1);
        (i, x - i as f64)
    }

    /// Parameters at `u` and their derivative with respect to `u`.
    pub fn params(&self, u: f64) -> (DriveParams, DriveParams) {
        let (i, t) = self.locate(u);
        self.segment_params(i, t)
    }

    fn segment_params(&self, i: usize, t: f64) -> (DriveParams, DriveParams) {
        let (p, dp) = self.segments[i].at(t);
        let k = self.segments.len() as f64;
        (p, DriveParams::default().delta(&dp, k))
    }

    pub fn operating_point(&self, model: &SystemModel, u: f64) -> OperatingPoint {
        let (p, dp) = self.params(u);
        OperatingPoint::new(model, &p, &dp)
    }
}

/// Cumulative integrals and the snapshot at one step boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub u: f64,
    pub params: DriveParams,
    /// `int_0^u` of every rate.
    pub cumulative: RateVector,
    pub snapshot: Snapshot,
}

/// Largest absolute values of the consistency residuals along a protocol.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `|W_ext rate - Omega_S rate - sum dOmega_R rate|` over all rate nodes.
    pub sum_rule_rate: f64,
    /// `|U_S rate - T S_S rate - mu N_S rate - W_S rate|` over all rate nodes.
    pub first_law_rate: f64,
    /// `|W_ext rate - <dH_S/du> - <dH_SR/du>|` over all rate nodes.
    pub power_split_rate: f64,
    /// Difference of the two nonlocal work rate forms over all rate nodes.
    pub nonlocal_forms_rate: f64,
    /// `|W_ext - Delta Omega_S - sum delta Delta Omega_R|` with the state
    /// differences taken from snapshots, over all steps.
    pub sum_rule: f64,
    /// `|Delta U_S - T Delta S_S - mu Delta N_S - W_S|`, snapshots against the
    /// integrated system work, over all steps.
    pub first_law: f64,
    /// Integrated rates against snapshot differences, over all steps and
    /// all partitioned state functions.
    pub rate_vs_snapshot: f64,
    /// Difference of the integrated nonlocal work forms, over all steps.
    pub nonlocal_forms: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        [
            self.sum_rule_rate,
            self.first_law_rate,
            self.power_split_rate,
            self.nonlocal_forms_rate,
            self.sum_rule,
            self.first_law,
            self.rate_vs_snapshot,
            self.nonlocal_forms,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Everything computed along one protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub ensemble: Ensemble,
    /// Step boundaries, starting at `u = 0`.
    pub steps: Vec<StepRecord>,
    /// Rates at every integration node, in increasing `u`.
    pub rates: Vec<(f64, RateVector)>,
    /// Values of `u` where the number of bound states changes.
    pub thresholds: Vec<f64>,
    pub residuals: Residuals,
}

const STATE_LEN: usize = 6 + 4 * MAX_DIM;

fn state_of_snapshot(s: &Snapshot) -> [f64; STATE_LEN] {
    let mut v = [0.0; STATE_LEN];
    v[..6].copy_from_slice(&[s.grand, s.energy, s.entropy, s.number, s.site_numbers[0], s.site_numbers[1]]);
    for a in 0..MAX_DIM {
        v[6 + 4 * a..10 + 4 * a].copy_from_slice(&[s.res_grand[a], s.res_energy[a], s.res_entropy[a], s.res_number[a]]);
    }
    v
}

fn state_of_rates(r: &RateVector) -> [f64; STATE_LEN] {
    let mut v = [0.0; STATE_LEN];
    v[..6].copy_from_slice(&[r.grand, r.energy, r.entropy, r.number, r.site_numbers[0], r.site_numbers[1]]);
    for a in 0..MAX_DIM {
        v[6 + 4 * a..10 + 4 * a].copy_from_slice(&[r.res_grand[a], r.res_energy[a], r.res_entropy[a], r.res_number[a]]);
    }
    v
}

fn accumulate(acc: &mut RateVector, r: &RateVector, w: f64) {
    acc.wext += w * r.wext;
    acc.grand += w * r.grand;
    acc.energy += w * r.energy;
    acc.entropy += w * r.entropy;
    acc.number += w * r.number;
    for i in 0..MAX_DIM {
        acc.site_numbers[i] += w * r.site_numbers[i];
        acc.res_grand[i] += w * r.res_grand[i];
        acc.res_energy[i] += w * r.res_energy[i];
        acc.res_entropy[i] += w * r.res_entropy[i];
        acc.res_number[i] += w * r.res_number[i];
    }
    acc.hs_power += w * r.hs_power;
    acc.hsr_power += w * r.hsr_power;
    acc.nonlocal_integral += w * r.nonlocal_integral;
    acc.n_leads = r.n_leads;
}

fn bound_state_count(model: &SystemModel, prot: &Protocol, seg: usize, t: f64) -> Result<usize> {
    let (p, dp) = prot.segment_params(seg, t);
    Ok(model.find_bound_states(&OperatingPoint::new(model, &p, &dp))?.len())
}

/// Local times in `(a, b)` where the bound-state count changes.
fn thresholds_in(
    model: &SystemModel,
    prot: &Protocol,
    seg: usize,
    a: f64,
    b: f64,
    na: usize,
    nb: usize,
) -> Result<Vec<f64>> {
    if na == nb {
        return Ok(Vec::new());
    }
    let (mut lo, mut hi) = (a, b);
    while hi - lo > 1e-14 {
        let m = 0.5 * (lo + hi);
        if bound_state_count(model, prot, seg, m)? == na {
            lo = m;
        } else {
            hi = m;
        }
    }
    let c = 0.5 * (lo + hi);
    Ok(alloc::vec![c])
}

/// Quadrature nodes on `[a, b]` with an optional square-root point at either end.
fn panel_nodes(rule: &GaussLegendre, a: f64, b: f64, sing_a: bool, sing_b: bool, out: &mut Vec<(f64, f64)>) {
    if sing_a && sing_b {
        let m = 0.5 * (a + b);
        panel_nodes(rule, a, m, true, false, out);
        panel_nodes(rule, m, b, false, true, out);
        return;
    }
    let h = b - a;
    let mut nodes: Vec<(f64, f64)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| {
            let tau = 0.5 * (x + 1.0);
            let w = 0.5 * w;
            if sing_a {
                (a + h * tau * tau, w * 2.0 * h * tau)
            } else if sing_b {
                (b - h * tau * tau, w * 2.0 * h * tau)
            } else {
                (a + h * tau, w * h)
            }
        })
        .collect();
    nodes.sort_by(|x, y| x.0.total_cmp(&y.0));
    out.extend(nodes);
}

fn check(x: f64, worst: &mut f64) {
    *worst = worst.max(x.abs());
}

/// Integrates all rates along `prot` and checks them against snapshots.
pub fn run_protocol(
    model: &SystemModel,
    prot: &Protocol,
    ens: &Ensemble,
    cfg: &QuadratureConfig,
) -> Result<ScenarioResult> {
    let rule = GaussLegendre::new(3);
    let k_seg = prot.segments.len();
    let snap_at = |seg: usize, t: f64, u: f64| -> Result<(DriveParams, Snapshot)> {
        let (p, dp) = prot.segment_params(seg, t);
        let op = OperatingPoint::new(model, &p, &dp);
        snapshot(model, &op, ens, cfg).map(|s| (p, s)).map_err(|e| e.at(u, "snapshot"))
    };

    let (p0, s0) = snap_at(0, 0.0, 0.0)?;
    let base = state_of_snapshot(&s0);
    let mut steps = alloc::vec![StepRecord { u: 0.0, params: p0, cumulative: RateVector::default(), snapshot: s0 }];
    let mut rates = Vec::new();
    let mut thresholds = Vec::new();
    let mut res = Residuals::default();
    let mut acc = RateVector { n_leads: model.leads().len(), ..RateVector::default() };

    for seg in 0..k_seg {
        let n = prot.segments[seg].steps;
        let mut count_a =
            bound_state_count(model, prot, seg, 0.0).map_err(|e| e.at(seg as f64 / k_seg as f64, "bound states"))?;
        for j in 0..n {
            let (ta, tb) = (j as f64 / n as f64, (j + 1) as f64 / n as f64);
            let u_of = |t: f64| (seg as f64 + t) / k_seg as f64;
            let count_b = bound_state_count(model, prot, seg, tb).map_err(|e| e.at(u_of(tb), "bound states"))?;
            let cuts = thresholds_in(model, prot, seg, ta, tb, count_a, count_b)
                .map_err(|e| e.at(u_of(ta), "bound states"))?;
            let mut pts = alloc::vec![ta];
            pts.extend(&cuts);
            pts.push(tb);
            let mut nodes = Vec::new();
            for (i, w) in pts.windows(2).enumerate() {
                let sing_a = i > 0;
                let sing_b = i + 1 < pts.len() - 1;
                panel_nodes(&rule, w[0], w[1], sing_a, sing_b, &mut nodes);
            }
            for &t in &cuts {
                thresholds.push(u_of(t));
            }
            for (t, w) in nodes {
                let u = u_of(t);
                let (p, dp) = prot.segment_params(seg, t);
                let op = OperatingPoint::new(model, &p, &dp);
                let r = partitioned_rates(model, &op, ens, cfg).map_err(|e| e.at(u, "rates"))?;
                check(r.sum_rule_residual(), &mut res.sum_rule_rate);
                check(r.first_law_residual(ens), &mut res.first_law_rate);
                check(r.power_split_residual(), &mut res.power_split_rate);
                check(r.nonlocal_bookkeeping() - r.nonlocal_explicit(), &mut res.nonlocal_forms_rate);
                // local time to u
                accumulate(&mut acc, &r, w / k_seg as f64);
                rates.push((u, r));
            }
            let u = u_of(tb);
            let (p, s) = snap_at(seg, tb, u)?;
            let now = state_of_snapshot(&s);
            let cum = state_of_rates(&acc);
            for i in 0..STATE_LEN {
                check(cum[i] - (now[i] - base[i]), &mut res.rate_vs_snapshot);
            }
            let d = |i: usize| now[i] - base[i];
            let res_grand: f64 = (0..MAX_DIM).map(|a| d(6 + 4 * a)).sum();
            check(acc.wext - d(0) - res_grand, &mut res.sum_rule);
            check(
                d(1) - ens.temperature() * d(2) - ens.chemical_potential() * d(3) - acc.system_work(),
                &mut res.first_law,
            );
            check(acc.nonlocal_bookkeeping() - acc.nonlocal_explicit(), &mut res.nonlocal_forms);
            steps.push(StepRecord { u, params: p, cumulative: acc, snapshot: s });
            count_a = count_b;
        }
    }
    Ok(ScenarioResult { ensemble: *ens, steps, rates, thresholds, residuals: res })
}

impl ScenarioResult {
    pub fn initial(&self) -> &StepRecord {
        &self.steps[0]
    }

    pub fn last(&self) -> &StepRecord {
        &self.steps[self.steps.len() - 1]
    }

    /// Integrals of every rate over the whole protocol.
    pub fn totals(&self) -> &RateVector {
        &self.last().cumulative
    }

    /// Endpoint difference of a snapshot quantity.
    pub fn delta<F: Fn(&Snapshot) -> f64>(&self, f: F) -> f64 {
        f(&self.last().snapshot) - f(&self.initial().snapshot)
    }

    pub fn external_work(&self) -> f64 {
        self.totals().wext
    }

    /// `W_S = W_ext - sum delta Delta Omega_R`.
    pub fn system_work(&self) -> f64 {
        self.totals().system_work()
    }

    /// `int I^W_S du` in bookkeeping form.
    pub fn nonlocal_work(&self) -> f64 {
        self.totals().nonlocal_bookkeeping()
    }

    /// Largest instantaneous residual of the nonlocal work forms, sum rule
    /// and power split.
    pub fn max_rate_residual(&self) -> f64 {
        let r = &self.residuals;
        r.sum_rule_rate.max(r.first_law_rate).max(r.power_split_rate).max(r.nonlocal_forms_rate)
    }
}
