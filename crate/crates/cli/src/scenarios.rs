//! Built-in scenario runners. Each turns a resolved [`Scenario`] into tables
//! and residual checks.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use anyhow::{bail, Context, Result};
use qsthermo_core::alpha::{alpha_entropy_from, alpha_sweep, alpha_work, coefficient, entropy_eog};
use qsthermo_core::oracle::{finite_alpha_entropy, finite_thermo, split_off_state, FiniteUniverse, MAX_UNIVERSE};
use qsthermo_core::snapshot::snapshot;
use qsthermo_core::{rates, run_protocol, Ensemble, OperatingPoint, ScenarioResult, SystemModel};
use rayon::prelude::*;

use crate::config::{Scenario, ScenarioKind};
use crate::output::{Cell, Check, Output, Table};

/// Tables, checks and named scalar results of one scenario.
pub struct Run {
    pub output: Output,
    pub quantities: BTreeMap<String, f64>,
}

pub fn run(s: &Scenario) -> Result<Run> {
    use ScenarioKind::*;
    let mut q = BTreeMap::new();
    let mut out = match s.kind {
        Fig1a | Fig1b => fig1(s)?,
        Fig2a => fig2a(s)?,
        Fig2b => fig2b(s)?,
        Fig3 => fig3(s, &mut q)?,
        Fig4 => fig4(s)?,
        Selfenergy => selfenergy(s)?,
        TlsSumrule | TlsPopulations | TlsFirstlaw => two_level(s)?,
        Broadband => broadband(s)?,
        OracleConvergence => oracle(s, &mut q)?,
    };
    for (k, e) in &s.expect {
        let x = q[k];
        out.checks.push(Check::at_most(format!("expect.{k}"), (x - e.value).abs(), e.tolerance));
    }
    Ok(Run { output: out, quantities: q })
}

fn num(x: f64) -> Cell {
    Cell::Num(x)
}

fn ensemble_at(s: &Scenario, temperature: f64) -> Result<Ensemble> {
    Ensemble::new(temperature, s.ensemble.chemical_potential()).with_context(|| format!("temperature {temperature}"))
}

fn fig1(s: &Scenario) -> Result<Output> {
    let runs: Vec<(f64, ScenarioResult)> = s
        .grid("v")
        .par_iter()
        .map(|&v| {
            let p = s.protocol(0, |mut p| {
                p.couplings[0] = v;
                p
            })?;
            let r = run_protocol(&s.model, &p, &s.ensemble, &s.quad).with_context(|| format!("V = {v}"))?;
            Ok((v, r))
        })
        .collect::<Result<_>>()?;

    let mut t = Table::new("", &["u", "eps_s", "V", "Wext_cum", "OmegaS_cum", "dOmegaR_cum", "sum_rule_residual"]);
    let mut summary = Table::new("_summary", &["V", "Wext", "dOmegaS", "dOmegaR", "WS", "nonlocal_work"]);
    let (mut sum_rule, mut split, mut forms) = (0.0f64, 0.0f64, 0.0f64);
    for (v, r) in &runs {
        for st in &r.steps {
            let c = &st.cumulative;
            let res = (c.wext - c.grand - c.res_grand_total()).abs();
            sum_rule = sum_rule.max(res);
            t.push(vec![
                num(st.u),
                num(st.params.onsite[0]),
                num(st.params.couplings[0]),
                num(c.wext),
                num(c.grand),
                num(c.res_grand_total()),
                num(res),
            ]);
        }
        let tot = r.totals();
        summary.push(vec![
            num(*v),
            num(tot.wext),
            num(tot.grand),
            num(tot.res_grand_total()),
            num(r.system_work()),
            num(r.nonlocal_work()),
        ]);
        sum_rule = sum_rule.max(r.residuals.sum_rule_rate).max(r.residuals.sum_rule);
        split = split.max(r.residuals.power_split_rate);
        forms = forms.max(r.residuals.nonlocal_forms_rate);
    }
    Ok(Output {
        tables: vec![t, summary],
        checks: vec![
            Check::at_most("sum_rule", sum_rule, s.tolerance("sum_rule")),
            Check::at_most("power_split", split, s.tolerance("power_split")),
            Check::at_most("nonlocal_forms", forms, s.tolerance("nonlocal_forms")),
        ],
    })
}

fn fig2a(s: &Scenario) -> Result<Output> {
    let p = s.state(0);
    let op = OperatingPoint::frozen(&s.model, &p);
    let points: Vec<(f64, f64, f64)> = s
        .grid("temperature")
        .par_iter()
        .map(|&temp| {
            let ens = ensemble_at(s, temp)?;
            let snap = snapshot(&s.model, &op, &ens, &s.quad).with_context(|| format!("T = {temp}"))?;
            let c = coefficient(&s.model, &op, &ens, &snap).with_context(|| format!("T = {temp}"))?;
            Ok((temp, snap.entropy, c))
        })
        .collect::<Result<_>>()?;

    let mut t = Table::new("", &["T", "beta", "alpha", "S_S", "coefficient", "alpha_S_S"]);
    let mut bound = 0.0f64;
    for &(temp, entropy, c) in &points {
        bound = bound.max(-entropy).max(entropy - LN_2);
        for &a in &s.alphas {
            t.push(vec![
                num(temp),
                num(1.0 / temp),
                num(a),
                num(entropy),
                num(c),
                num(alpha_entropy_from(entropy, c, a)),
            ]);
        }
    }
    Ok(Output {
        tables: vec![t],
        checks: vec![Check::at_most("entropy_bounds", bound.max(0.0), s.tolerance("entropy_bounds"))],
    })
}

fn coefficient_at(s: &Scenario, level: f64, beta: f64) -> Result<f64> {
    let mut p = s.state(0);
    p.onsite[0] = level;
    let op = OperatingPoint::frozen(&s.model, &p);
    let ens = ensemble_at(s, 1.0 / beta)?;
    let snap = snapshot(&s.model, &op, &ens, &s.quad)?;
    coefficient(&s.model, &op, &ens, &snap).with_context(|| format!("eps_s = {level}, beta = {beta}"))
}

fn fig2b(s: &Scenario) -> Result<Output> {
    let pairs: Vec<(f64, f64)> =
        s.grid("eps_s").iter().flat_map(|&e| s.grid("beta").iter().map(move |&b| (e, b))).collect();
    let values: Vec<f64> = pairs.par_iter().map(|&(e, b)| coefficient_at(s, e, b)).collect::<Result<_>>()?;
    let mut t = Table::new("", &["eps_s", "beta", "coefficient"]);
    for (&(e, b), c) in pairs.iter().zip(&values) {
        t.push(vec![num(e), num(b), num(*c)]);
    }
    // low-temperature growth: doubling beta should double C
    let ratios: Vec<f64> = s
        .grid("eps_s")
        .par_iter()
        .map(|&e| Ok((coefficient_at(s, e, 50.0)? / coefficient_at(s, e, 25.0)? - 2.0).abs()))
        .collect::<Result<_>>()?;
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    Ok(Output {
        tables: vec![t],
        checks: vec![Check::at_most("coefficient_ratio", worst, s.tolerance("coefficient_ratio"))],
    })
}

fn both_paths(s: &Scenario) -> Result<Vec<ScenarioResult>> {
    (0..s.paths.len())
        .into_par_iter()
        .map(|i| {
            let p = s.protocol(i, |p| p)?;
            run_protocol(&s.model, &p, &s.ensemble, &s.quad).with_context(|| format!("path `{}`", s.paths[i].0))
        })
        .collect()
}

fn fig3(s: &Scenario, q: &mut BTreeMap<String, f64>) -> Result<Output> {
    let runs = both_paths(s)?;
    let sweep = alpha_sweep(&s.model, &runs, &s.alphas)?;
    let mut t = Table::new(
        "",
        &["alpha", "WS_pathA", "WS_pathB", "alphaWS_pathA", "alphaWS_pathB", "dSEOG_pathA", "dSEOG_pathB", "dAlphaS"],
    );
    for pt in &sweep.points {
        t.push(vec![
            num(pt.alpha),
            num(sweep.system_work[0]),
            num(sweep.system_work[1]),
            num(pt.work[0]),
            num(pt.work[1]),
            num(pt.entropy_eog[0]),
            num(pt.entropy_eog[1]),
            num(pt.delta_entropy),
        ]);
    }
    let ws = (runs[0].system_work() - runs[1].system_work()).abs();
    let a1 = (alpha_work(&runs[0], 1.0) - alpha_work(&runs[1], 1.0)).abs();
    let a0 = (alpha_work(&runs[0], 0.0) - alpha_work(&runs[1], 0.0)).abs();
    let ds = sweep.delta_entropy;
    let eog = entropy_eog(&runs[0], 1.0);
    q.insert("delta_entropy".into(), ds);
    q.insert("entropy_eog_alpha1".into(), eog);
    q.insert("entropy_ratio".into(), (eog / ds).abs());
    q.insert("coefficient_initial".into(), sweep.coefficient[0]);
    q.insert("coefficient_final".into(), sweep.coefficient[1]);
    Ok(Output {
        tables: vec![t],
        checks: vec![
            Check::at_most("path_independence", ws.max(a1), s.tolerance("path_independence")),
            Check::above("alpha0_separation", a0, s.tolerance("alpha0_separation")),
        ],
    })
}

fn fig4(s: &Scenario) -> Result<Output> {
    let runs = both_paths(s)?;
    let (temp, mu) = (s.ensemble.temperature(), s.ensemble.chemical_potential());
    let mut t = Table::new("", &["path", "u", "dU_S", "TdS_S", "mudN_S", "W_S", "first_law_residual"]);
    let mut worst = 0.0f64;
    for ((name, _, _), r) in s.paths.iter().zip(&runs) {
        let s0 = &r.initial().snapshot;
        for st in &r.steps {
            let du = st.snapshot.energy - s0.energy;
            let tds = temp * (st.snapshot.entropy - s0.entropy);
            let mdn = mu * (st.snapshot.number - s0.number);
            let w = st.cumulative.system_work();
            let res = du - tds - mdn - w;
            worst = worst.max(res.abs());
            t.push(vec![Cell::Text(name.clone()), num(st.u), num(du), num(tds), num(mdn), num(w), num(res)]);
        }
        worst = worst.max(r.residuals.first_law_rate);
    }
    Ok(Output { tables: vec![t], checks: vec![Check::at_most("first_law", worst, s.tolerance("first_law"))] })
}

fn selfenergy(s: &Scenario) -> Result<Output> {
    let lead = &s.model.leads()[0];
    let v = s.state(0).couplings[0];
    let (lo, hi) = lead.band();
    let cases: Vec<(f64, f64)> =
        s.grid("eta").iter().flat_map(|&eta| s.grid("eps").iter().map(move |&e| (eta, e))).collect();
    let rows: Vec<[f64; 6]> = cases
        .par_iter()
        .map(|&(eta, e)| {
            let closed = lead.surface_sigma(v, 0.0, e);
            let rec =
                lead.surface_sigma_recursion(v, e, eta, 200).with_context(|| format!("eps = {e}, eta = {eta}"))?;
            Ok([eta, e, closed.shift(), closed.broadening(), rec.re, 2.0 * rec.im])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new("", &["eta", "eps", "Lambda", "Gamma", "Lambda_recursion", "Gamma_recursion"]);
    let mut worst = 0.0f64;
    for r in &rows {
        // the recursion smears the edge singularity over a width of order sqrt(eta)
        let margin = 1e3 * r[0].sqrt();
        if (r[1] - lo).abs() > margin && (r[1] - hi).abs() > margin {
            worst = worst.max((r[2] - r[4]).abs()).max((r[3] - r[5]).abs());
        }
        t.push(r.iter().map(|&x| num(x)).collect());
    }
    Ok(Output { tables: vec![t], checks: vec![Check::at_most("recursion", worst, s.tolerance("recursion"))] })
}

fn two_level(s: &Scenario) -> Result<Output> {
    let runs: Vec<(f64, ScenarioResult)> = s
        .grid("eps2")
        .par_iter()
        .map(|&e2| {
            let p = s.protocol(0, |mut p| {
                p.onsite[1] = e2;
                p
            })?;
            let r = run_protocol(&s.model, &p, &s.ensemble, &s.quad).with_context(|| format!("eps2 = {e2}"))?;
            Ok((e2, r))
        })
        .collect::<Result<_>>()?;

    let (temp, mu) = (s.ensemble.temperature(), s.ensemble.chemical_potential());
    let mut checks = Vec::new();
    let sum_rule = runs.iter().map(|(_, r)| r.residuals.sum_rule_rate.max(r.residuals.sum_rule)).fold(0.0, f64::max);
    let t = match s.kind {
        ScenarioKind::TlsSumrule => {
            let mut t =
                Table::new("", &["eps2", "Wext", "dOmegaS", "dOmegaR1", "dOmegaR2", "dNS1", "dNS2", "dNR1", "dNR2"]);
            for (e2, r) in &runs {
                let tot = r.totals();
                t.push(vec![
                    num(*e2),
                    num(tot.wext),
                    num(tot.grand),
                    num(tot.res_grand[0]),
                    num(tot.res_grand[1]),
                    num(r.delta(|s| s.site_numbers[0])),
                    num(r.delta(|s| s.site_numbers[1])),
                    num(r.delta(|s| s.res_number[0])),
                    num(r.delta(|s| s.res_number[1])),
                ]);
            }
            checks.push(Check::at_most("sum_rule", sum_rule, s.tolerance("sum_rule")));
            t
        }
        ScenarioKind::TlsPopulations => {
            let mut t = Table::new("", &["eps2", "dNS1", "dNS2", "dNR1", "dNR2", "dNS", "dNR"]);
            let w = s.grid("window");
            let [lo, hi] = w[..] else {
                bail!("`grid.window` needs exactly two entries, got {}", w.len());
            };
            let mut violations = 0usize;
            for (e2, r) in &runs {
                let (n1, n2) = (r.delta(|s| s.res_number[0]), r.delta(|s| s.res_number[1]));
                if (lo..=hi).contains(e2) && !(n2 > n1) {
                    violations += 1;
                }
                t.push(vec![
                    num(*e2),
                    num(r.delta(|s| s.site_numbers[0])),
                    num(r.delta(|s| s.site_numbers[1])),
                    num(n1),
                    num(n2),
                    num(r.delta(|s| s.number)),
                    num(r.delta(|s| s.res_number_total())),
                ]);
            }
            checks.push(Check::at_most("sum_rule", sum_rule, s.tolerance("sum_rule")));
            checks.push(Check::at_most("turnstile", violations as f64, s.tolerance("turnstile")));
            t
        }
        _ => {
            let mut t = Table::new("", &["eps2", "dUS", "TdSS", "mudNS", "WS", "first_law_residual"]);
            let mut worst = 0.0f64;
            for (e2, r) in &runs {
                let du = r.delta(|s| s.energy);
                let tds = temp * r.delta(|s| s.entropy);
                let mdn = mu * r.delta(|s| s.number);
                let w = r.system_work();
                let res = du - tds - mdn - w;
                worst = worst.max(res.abs()).max(r.residuals.first_law_rate);
                t.push(vec![num(*e2), num(du), num(tds), num(mdn), num(w), num(res)]);
            }
            checks.push(Check::at_most("first_law", worst, s.tolerance("first_law")));
            t
        }
    };
    Ok(Output { tables: vec![t], checks })
}

fn broadband(s: &Scenario) -> Result<Output> {
    let spec = s.model_spec.clone();
    let rows: Vec<[f64; 5]> = s
        .grid("t0")
        .par_iter()
        .map(|&t0| {
            let m = SystemModel::resonant_level(t0, spec.band_center).with_context(|| format!("t0 = {t0}"))?;
            let p = s.protocol(0, |p| p)?;
            let op = p.operating_point(&m, 0.0);
            let rate = rates::partitioned_rates(&m, &op, &s.ensemble, &s.quad)
                .with_context(|| format!("t0 = {t0}, u = 0"))?
                .hsr_power;
            let r = run_protocol(&m, &p, &s.ensemble, &s.quad).with_context(|| format!("t0 = {t0}"))?;
            let asym = wide_band_rate(&op, t0, s.ensemble.chemical_potential() - spec.band_center);
            Ok([t0, r.nonlocal_work(), rate, asym, (rate.abs() - asym).abs() / asym])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new("", &["t0", "nonlocal_work", "hsr_rate_u0", "asymptote", "relative_deviation"]);
    for r in &rows {
        t.push(r.iter().map(|&x| num(x)).collect());
    }
    let growing = rows.windows(2).filter(|w| w[1][1].abs() >= w[0][1].abs()).count();
    let last = rows.last().map_or(f64::NAN, |r| r[4]);
    Ok(Output {
        tables: vec![t],
        checks: vec![
            Check::at_most("monotone", growing as f64, s.tolerance("monotone")),
            Check::at_most("asymptote", last, s.tolerance("asymptote")),
        ],
    })
}

/// Leading wide-band `|<dH_SR/du>|` at a resonant-level operating point,
/// `(2 V V' / pi t0) ln(2 t0 / sqrt((Gamma/2)^2 + (mu - eps_s)^2))`.
fn wide_band_rate(op: &OperatingPoint, t0: f64, mu: f64) -> f64 {
    let (v, vdot) = (op.amps[0], op.amp_rates[0]);
    let level = op.h.get(0, 0).re;
    let gamma = 2.0 * v * v / t0;
    let width = ((gamma / 2.0).powi(2) + (mu - level).powi(2)).sqrt();
    (2.0 * v * vdot / (PI * t0) * (2.0 * t0 / width).ln()).abs()
}

fn chain_length(x: f64) -> Result<usize> {
    if x.fract() != 0.0 || x < 1.0 {
        bail!("`grid.length` entries must be positive integers, got {x}");
    }
    let l = x as usize;
    if l + 2 > MAX_UNIVERSE {
        bail!("`grid.length` entry {l} exceeds the largest diagonalizable universe ({MAX_UNIVERSE} orbitals)");
    }
    Ok(l)
}

fn oracle(s: &Scenario, q: &mut BTreeMap<String, f64>) -> Result<Output> {
    let lengths: Vec<usize> = s.grid("length").iter().map(|&x| chain_length(x)).collect::<Result<_>>()?;
    let p = s.state(0);
    let op = OperatingPoint::frozen(&s.model, &p);
    let snap = snapshot(&s.model, &op, &s.ensemble, &s.quad)?;
    let rows: Vec<(usize, [f64; 3])> = lengths
        .par_iter()
        .map(|&l| {
            let u = FiniteUniverse::from_model(&s.model, &p, l).with_context(|| format!("L = {l}"))?;
            let t = finite_thermo(&u, &s.ensemble).system;
            Ok((l, [t.number, t.entropy, t.energy]))
        })
        .collect::<Result<_>>()?;

    let mut t = Table::new("", &["L", "N_S_finite", "N_S", "S_S_finite", "S_S", "U_S_finite", "U_S", "max_abs_error"]);
    let mut last_err = f64::NAN;
    for (l, f) in &rows {
        let err = (f[0] - snap.number).abs().max((f[1] - snap.entropy).abs()).max((f[2] - snap.energy).abs());
        last_err = err;
        t.push(vec![
            (*l).into(),
            num(f[0]),
            num(snap.number),
            num(f[1]),
            num(snap.entropy),
            num(f[2]),
            num(snap.energy),
            num(err),
        ]);
    }

    // alpha partitions of a small universe must add up to its total entropy
    let small = FiniteUniverse::from_model(&s.model, &p, *lengths.iter().min().unwrap())?;
    let total = finite_thermo(&small, &s.ensemble).total.entropy;
    let mut part = Table::new("_partition", &["alpha", "S_S", "S_R", "S_total"]);
    let mut partition = 0.0f64;
    for &a in &s.alphas {
        let (ss, sr) = finite_alpha_entropy(&small, &s.ensemble, a);
        partition = partition.max((ss + sr - total).abs());
        part.push(vec![num(a), num(ss), num(sr), num(total)]);
    }

    let mut checks = vec![
        Check::at_most("continuum", last_err, s.tolerance("continuum")),
        Check::at_most("partition", partition, s.tolerance("partition")),
    ];

    let bp = s.state(1);
    let bop = OperatingPoint::frozen(&s.model, &bp);
    let bound = s.model.find_bound_states(&bop)?;
    if let Some(b) = bound.iter().max_by(|x, y| x.system_weight().total_cmp(&y.system_weight())) {
        q.insert("bound_state_energy".into(), b.energy);
        q.insert("bound_state_weight".into(), b.system_weight());
        let l = *lengths.iter().max().unwrap();
        let u = FiniteUniverse::from_model(&s.model, &bp, l)?;
        let (lo, hi) = s.model.leads()[0].band();
        if let Some((e, z)) = split_off_state(&u, lo, hi) {
            let spacing = u.level_spacing();
            checks.push(Check::at_most(
                "bound_state_finite",
                (e - b.energy).abs().max((z - b.system_weight()).abs()),
                spacing,
            ));
        }
    }
    for k in s.expect.keys() {
        if !q.contains_key(k) {
            bail!("`expect.{k}`: the bound-state path has no bound state");
        }
    }
    Ok(Output { tables: vec![t, part], checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ConfigFile, Overrides};

    fn quick(kind: ScenarioKind, json: &str) -> Run {
        let mut c = ConfigFile::parse(json).unwrap();
        c.scenario = kind;
        let s = Scenario::resolve(&c, &Overrides { u_steps: Some(4), ..Default::default() }).unwrap();
        run(&s).unwrap()
    }

    #[test]
    fn fig1_rows_start_at_zero() {
        let r = quick(ScenarioKind::Fig1a, r#"{"scenario": "fig1a", "grid": {"v": [0.6]}}"#);
        let t = &r.output.tables[0];
        assert_eq!(t.rows.len(), 5);
        assert_eq!(t.rows[0][3], Cell::Num(0.0));
        assert!(r.output.checks.iter().all(|c| c.pass), "{:?}", r.output.checks);
    }

    #[test]
    fn wide_band_formula_matches_large_bandwidth() {
        // cold enough that the resonance width, not kT, cuts off the logarithm
        let r = quick(
            ScenarioKind::Broadband,
            r#"{"scenario": "broadband", "ensemble": {"temperature": 1e-4, "chemical_potential": 0.0}, "grid": {"t0": [80.0]}}"#,
        );
        let row = &r.output.tables[0].rows[0];
        let Cell::Num(dev) = row[4] else { panic!() };
        assert!(dev < 0.05, "{dev}");
    }

    #[test]
    fn selfenergy_agrees_away_from_edges() {
        let r = quick(
            ScenarioKind::Selfenergy,
            r#"{"scenario": "selfenergy", "grid": {"eps": [-3.0, -1.0, 0.5, 2.0, 3.5]}}"#,
        );
        assert!(r.output.checks[0].pass, "{:?}", r.output.checks);
    }

    #[test]
    fn oracle_small_lengths() {
        let r = quick(
            ScenarioKind::OracleConvergence,
            r#"{"scenario": "oracle-convergence", "grid": {"length": [60, 120]}}"#,
        );
        let names: Vec<&str> = r.output.checks.iter().map(|c| c.name.as_str()).collect();
        assert!(names.contains(&"bound_state_finite"), "{names:?}");
        assert!(r.output.checks.iter().find(|c| c.name == "partition").unwrap().pass);
    }

    #[test]
    fn chain_length_rejects_fractions() {
        assert!(chain_length(10.5).is_err());
        assert!(chain_length(0.0).is_err());
        assert_eq!(chain_length(40.0).unwrap(), 40);
    }
}
