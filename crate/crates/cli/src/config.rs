//! Scenario configuration files.
//!
//! A config names a built-in scenario and overrides any of its defaults.
//! Missing sections fall back to the scenario's own values, so
//! `{"scenario": "fig1a"}` is a complete config.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use qsthermo_core::{DriveParams, Ensemble, Protocol, QuadratureConfig, Ramp, Segment, SystemModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Fig1a,
    Fig1b,
    Fig2a,
    Fig2b,
    Fig3,
    Fig4,
    Selfenergy,
    TlsSumrule,
    TlsPopulations,
    TlsFirstlaw,
    Broadband,
    OracleConvergence,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 12] = [
        Self::Fig1a,
        Self::Fig1b,
        Self::Fig2a,
        Self::Fig2b,
        Self::Fig3,
        Self::Fig4,
        Self::Selfenergy,
        Self::TlsSumrule,
        Self::TlsPopulations,
        Self::TlsFirstlaw,
        Self::Broadband,
        Self::OracleConvergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1a => "fig1a",
            Self::Fig1b => "fig1b",
            Self::Fig2a => "fig2a",
            Self::Fig2b => "fig2b",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::Selfenergy => "selfenergy",
            Self::TlsSumrule => "tls-sumrule",
            Self::TlsPopulations => "tls-populations",
            Self::TlsFirstlaw => "tls-firstlaw",
            Self::Broadband => "broadband",
            Self::OracleConvergence => "oracle-convergence",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Self::Fig1a => "resonant level raised above the Fermi level, work budget per coupling",
            Self::Fig1b => "resonant level raised below the Fermi level, work budget per coupling",
            Self::Fig2a => "alpha-partitioned system entropy against temperature",
            Self::Fig2b => "entropy coupling coefficient against inverse temperature",
            Self::Fig3 => "alpha sweep of work and entropy along two L-shaped paths",
            Self::Fig4 => "first-law terms accumulated along two L-shaped paths",
            Self::Selfenergy => "chain self-energy, closed form against decimation",
            Self::TlsSumrule => "two-level work sum rule against the second level",
            Self::TlsPopulations => "two-level particle changes per site and per reservoir",
            Self::TlsFirstlaw => "two-level first-law terms against the second level",
            Self::Broadband => "nonlocal work as the reservoir bandwidth grows",
            Self::OracleConvergence => "finite-chain diagonalization against the continuum",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
            format!("unknown scenario `{s}`, expected one of: {}", names.join(", "))
        })
    }
}

/// A list of numbers, either spelled out or as an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Range { start: f64, end: f64, step: f64 },
}

impl Values {
    pub fn resolve(&self, field: &str) -> Result<Vec<f64>> {
        match self {
            Values::List(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    bail!("`{field}` contains a non-finite value");
                }
                Ok(v.clone())
            }
            Values::Range { start, end, step } => {
                qsthermo_core::alpha::alpha_grid(*start, *end, *step).with_context(|| format!("`{field}` range"))
            }
        }
    }
}

/// Parse `start:end:step`.
pub fn parse_range(s: &str) -> Result<Values> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts[..] else {
        bail!("expected start:end:step, got `{s}`");
    };
    let num = |x: &str| x.trim().parse::<f64>().with_context(|| format!("`{x}` in `{s}` is not a number"));
    Ok(Values::Range { start: num(a)?, end: num(b)?, step: num(c)? })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub temperature: f64,
    pub chemical_potential: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ResonantLevel,
    TwoLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Chain hopping `t0`.
    pub hopping: f64,
    /// Chain on-site energy `eps0`.
    #[serde(default)]
    pub band_center: f64,
}

impl ModelSpec {
    pub fn build(&self) -> Result<SystemModel> {
        let m = match self.kind {
            ModelKind::ResonantLevel => SystemModel::resonant_level(self.hopping, self.band_center),
            ModelKind::TwoLevel => SystemModel::two_level(self.hopping, self.band_center),
        };
        m.context("model")
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::ResonantLevel => 1,
            ModelKind::TwoLevel => 2,
        }
    }
}

/// One protocol waypoint. `eps` and `v` hold one entry per orbital.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub eps: Vec<f64>,
    pub v: Vec<f64>,
    /// Inter-orbital hopping, two-level model only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
}

impl PointSpec {
    fn rlm(eps: f64, v: f64) -> Self {
        Self { eps: vec![eps], v: vec![v], w: None }
    }

    fn tls(e1: f64, e2: f64, w: f64, v1: f64, v2: f64) -> Self {
        Self { eps: vec![e1, e2], v: vec![v1, v2], w: Some(w) }
    }

    pub fn to_params(&self, dim: usize, field: &str) -> Result<DriveParams> {
        if self.eps.len() != dim || self.v.len() != dim {
            bail!("`{field}`: model has {dim} orbital(s), got {} eps and {} v entries", self.eps.len(), self.v.len());
        }
        if dim == 1 && self.w.is_some() {
            bail!("`{field}.w` only applies to the two-level model");
        }
        let p = match dim {
            1 => DriveParams::resonant(self.eps[0], self.v[0]),
            _ => DriveParams::two_level(self.eps[0], self.eps[1], self.w.unwrap_or(0.0), self.v[0], self.v[1]),
        };
        if !p.is_finite() {
            bail!("`{field}` contains a non-finite value");
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampSpec {
    #[default]
    Linear,
    Smoothstep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub name: String,
    #[serde(default)]
    pub ramp: RampSpec,
    pub points: Vec<PointSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSpec {
    /// Gauss-Legendre order per energy panel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_theta: Option<usize>,
    /// Integration steps per protocol segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_steps: Option<usize>,
    /// Absolute tolerance of one energy integral.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Expected value of a named quantity, checked as `|x - value| <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    pub value: f64,
    pub tolerance: f64,
}

/// The file format. Every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioKind,
    /// Output file stem, defaults to the scenario name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<PathSpec>>,
    /// Scenario-specific parameter lists, keyed by parameter name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<BTreeMap<String, Values>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Values>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerics: Option<NumericsSpec>,
    /// Residual tolerances, keyed by check name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<BTreeMap<String, f64>>,
    /// Reference values, keyed by quantity name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<BTreeMap<String, Expect>>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow::anyhow!("line {} column {}: {e}", e.line(), e.column()))
    }

    /// The built-in config of `kind` with every section filled in.
    pub fn builtin(kind: ScenarioKind) -> Self {
        defaults(kind)
    }
}

/// A config merged with its scenario defaults and validated.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub name: String,
    pub ensemble: Ensemble,
    pub model_spec: ModelSpec,
    pub model: SystemModel,
    pub paths: Vec<(String, Vec<DriveParams>, Ramp)>,
    pub grid: BTreeMap<String, Vec<f64>>,
    pub alphas: Vec<f64>,
    pub quad: QuadratureConfig,
    pub u_steps: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub expect: BTreeMap<String, Expect>,
}

/// Command-line overrides applied after the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n_theta: Option<usize>,
    pub u_steps: Option<usize>,
    pub alphas: Option<Values>,
}

impl Scenario {
    pub fn resolve(file: &ConfigFile, ov: &Overrides) -> Result<Self> {
        let d = defaults(file.scenario);
        let kind = file.scenario;
        let name = file.name.clone().unwrap_or_else(|| kind.name().to_string());
        if name.is_empty() || name.contains(['/', '\\']) {
            bail!("`name` must be a plain file stem, got `{name}`");
        }

        let ens_spec = file.ensemble.clone().or(d.ensemble).expect("defaults carry an ensemble");
        let ensemble = Ensemble::new(ens_spec.temperature, ens_spec.chemical_potential).context("`ensemble`")?;
        let default_model = d.model.expect("defaults carry a model");
        let model_spec = file.model.clone().unwrap_or_else(|| default_model.clone());
        if model_spec.kind != default_model.kind {
            bail!("`model.kind`: scenario {kind} needs the {:?} model", default_model.kind);
        }
        let model = model_spec.build()?;

        let path_specs = file.paths.clone().or(d.paths).expect("defaults carry paths");
        let want = defaults(kind).paths.unwrap().len();
        if path_specs.len() != want {
            bail!("`paths`: scenario {kind} takes {want} path(s), got {}", path_specs.len());
        }
        let mut paths = Vec::new();
        for (i, p) in path_specs.iter().enumerate() {
            if p.points.is_empty() {
                bail!("`paths[{i}].points` is empty");
            }
            let pts = p
                .points
                .iter()
                .enumerate()
                .map(|(j, pt)| pt.to_params(model_spec.dim(), &format!("paths[{i}].points[{j}]")))
                .collect::<Result<Vec<_>>>()?;
            let ramp = match p.ramp {
                RampSpec::Linear => Ramp::Linear,
                RampSpec::Smoothstep => Ramp::Smoothstep,
            };
            paths.push((p.name.clone(), pts, ramp));
        }

        let mut grid_specs = d.grid.unwrap_or_default();
        for (k, v) in file.grid.iter().flatten() {
            if !grid_specs.contains_key(k) {
                let known: Vec<&String> = grid_specs.keys().collect();
                bail!("`grid.{k}` is not a parameter of {kind} (known: {known:?})");
            }
            grid_specs.insert(k.clone(), v.clone());
        }
        let mut grid = BTreeMap::new();
        for (k, v) in &grid_specs {
            let vals = v.resolve(&format!("grid.{k}"))?;
            if vals.is_empty() {
                bail!("`grid.{k}` is empty");
            }
            grid.insert(k.clone(), vals);
        }

        let alpha_spec = ov.alphas.clone().or(file.alphas.clone()).or(d.alphas);
        let alphas = match alpha_spec {
            Some(a) => a.resolve("alphas")?,
            None => Vec::new(),
        };

        let num = NumericsSpec {
            n_theta: ov.n_theta.or(file.numerics.as_ref().and_then(|n| n.n_theta)),
            u_steps: ov.u_steps.or(file.numerics.as_ref().and_then(|n| n.u_steps)),
            tolerance: file.numerics.as_ref().and_then(|n| n.tolerance),
        };
        let dn = d.numerics.unwrap_or_default();
        let n_theta = num.n_theta.or(dn.n_theta).unwrap_or(16);
        let u_steps = num.u_steps.or(dn.u_steps).unwrap_or(32);
        let tolerance = num.tolerance.or(dn.tolerance).unwrap_or(1e-10);
        if !(1..=64).contains(&n_theta) {
            bail!("`n_theta` must lie in 1..=64, got {n_theta}");
        }
        if u_steps == 0 {
            bail!("`u_steps` must be positive");
        }
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            bail!("`numerics.tolerance` must be positive, got {tolerance}");
        }
        let quad = QuadratureConfig::new(n_theta, tolerance);

        let mut tolerances = d.tolerances.unwrap_or_default();
        for (k, v) in file.tolerances.iter().flatten() {
            if !tolerances.contains_key(k) {
                let known: Vec<&String> = tolerances.keys().collect();
                bail!("`tolerances.{k}` is not a check of {kind} (known: {known:?})");
            }
            tolerances.insert(k.clone(), *v);
        }
        let expect = file.expect.clone().or(d.expect).unwrap_or_default();
        for k in expect.keys() {
            if !expectable(kind).contains(&k.as_str()) {
                bail!("`expect.{k}` is not a quantity of {kind} (known: {:?})", expectable(kind));
            }
        }

        Ok(Self { kind, name, ensemble, model_spec, model, paths, grid, alphas, quad, u_steps, tolerances, expect })
    }

    pub fn grid(&self, key: &str) -> &[f64] {
        &self.grid[key]
    }

    pub fn tolerance(&self, key: &str) -> f64 {
        self.tolerances[key]
    }

    /// Path `i` with its waypoints mapped through `f`.
    pub fn protocol(&self, i: usize, f: impl Fn(DriveParams) -> DriveParams) -> Result<Protocol> {
        let (name, pts, ramp) = &self.paths[i];
        let pts: Vec<DriveParams> = pts.iter().map(|p| f(*p)).collect();
        let segs: Vec<Segment> = if pts.len() == 1 {
            vec![Segment::linear(pts[0], pts[0], self.u_steps)]
        } else {
            pts.windows(2).map(|w| Segment::linear(w[0], w[1], self.u_steps).with_ramp(*ramp)).collect()
        };
        Protocol::new(segs).with_context(|| format!("path `{name}`"))
    }

    /// First waypoint of path `i`, for scenarios that evaluate a single state.
    pub fn state(&self, i: usize) -> DriveParams {
        self.paths[i].1[0]
    }
}

/// Quantities a scenario reports that `expect` may reference.
pub fn expectable(kind: ScenarioKind) -> &'static [&'static str] {
    match kind {
        ScenarioKind::Fig3 => &["delta_entropy", "entropy_eog_alpha1", "entropy_ratio"],
        ScenarioKind::OracleConvergence => &["bound_state_energy", "bound_state_weight"],
        _ => &[],
    }
}

fn tol(pairs: &[(&str, f64)]) -> Option<BTreeMap<String, f64>> {
    Some(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
}

fn grid(pairs: Vec<(&str, Values)>) -> Option<BTreeMap<String, Values>> {
    Some(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn path(name: &str, points: Vec<PointSpec>) -> PathSpec {
    PathSpec { name: name.into(), ramp: RampSpec::Linear, points }
}

fn range(start: f64, end: f64, step: f64) -> Values {
    Values::Range { start, end, step }
}

fn defaults(kind: ScenarioKind) -> ConfigFile {
    use ScenarioKind::*;
    let rlm = ModelSpec { kind: ModelKind::ResonantLevel, hopping: 1.25, band_center: 0.0 };
    let tls = ModelSpec { kind: ModelKind::TwoLevel, hopping: 1.25, band_center: 0.0 };
    let cold = EnsembleSpec { temperature: 0.02, chemical_potential: 0.0 };
    let mut c = ConfigFile {
        scenario: kind,
        name: None,
        ensemble: Some(cold.clone()),
        model: Some(rlm),
        paths: None,
        grid: None,
        alphas: None,
        numerics: Some(NumericsSpec { n_theta: Some(16), u_steps: Some(32), tolerance: Some(1e-10) }),
        tolerances: None,
        expect: None,
    };
    let l_paths = || {
        let p = PointSpec::rlm;
        vec![
            path("A", vec![p(0.0, 0.6), p(1.0, 0.6), p(1.0, 0.4)]),
            path("B", vec![p(0.0, 0.6), p(0.0, 0.4), p(1.0, 0.4)]),
        ]
    };
    let tls_path = || {
        vec![path(
            "level-1 raise",
            vec![PointSpec::tls(0.0, 0.0, 0.5, 0.4, 1.2), PointSpec::tls(1.5, 0.0, 0.5, 0.4, 1.2)],
        )]
    };
    let tls_ens = EnsembleSpec { temperature: 0.02, chemical_potential: 1.0 };
    match kind {
        Fig1a | Fig1b => {
            let (a, b) = if kind == Fig1a { (1.0, 1.5) } else { (-1.5, -1.0) };
            c.paths = Some(vec![path("level raise", vec![PointSpec::rlm(a, 0.6), PointSpec::rlm(b, 0.6)])]);
            c.grid = grid(vec![("v", Values::List(vec![0.3, 0.6, 0.9, 1.2]))]);
            c.tolerances = tol(&[("sum_rule", 1e-6), ("power_split", 1e-6), ("nonlocal_forms", 1e-5)]);
        }
        Fig2a => {
            c.paths = Some(vec![path("state", vec![PointSpec::rlm(-1.0, 1.0)])]);
            c.grid = grid(vec![(
                "temperature",
                Values::List(vec![
                    0.005, 0.0075, 0.01, 0.015, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0,
                ]),
            )]);
            c.alphas = Some(Values::List(vec![0.0, 0.25, 0.5, 0.75, 1.0]));
            c.tolerances = tol(&[("entropy_bounds", 1e-9)]);
        }
        Fig2b => {
            c.paths = Some(vec![path("state", vec![PointSpec::rlm(0.0, 1.0)])]);
            c.grid = grid(vec![
                ("eps_s", Values::List(vec![-2.0, -1.0, 0.0, 1.0, 2.0])),
                ("beta", Values::List(vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 60.0, 80.0, 100.0])),
            ]);
            c.tolerances = tol(&[("coefficient_ratio", 0.1)]);
        }
        Fig3 => {
            c.paths = Some(l_paths());
            c.alphas = Some(range(0.0, 1.0, 0.1));
            c.tolerances = tol(&[("path_independence", 1e-6), ("alpha0_separation", 1e-3)]);
            c.expect = Some(
                [
                    ("delta_entropy", Expect { value: -0.068, tolerance: 0.005 }),
                    ("entropy_eog_alpha1", Expect { value: 5.57, tolerance: 0.05 }),
                    ("entropy_ratio", Expect { value: 80.9, tolerance: 3.0 }),
                ]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            );
        }
        Fig4 => {
            c.paths = Some(l_paths());
            c.tolerances = tol(&[("first_law", 1e-6)]);
        }
        Selfenergy => {
            c.paths = Some(vec![path("coupling", vec![PointSpec::rlm(0.0, 1.0)])]);
            c.grid = grid(vec![("eps", range(-4.0, 4.0, 0.02)), ("eta", Values::List(vec![1e-6]))]);
            c.tolerances = tol(&[("recursion", 1e-3)]);
        }
        TlsSumrule | TlsPopulations | TlsFirstlaw => {
            c.model = Some(tls);
            c.ensemble = Some(tls_ens);
            c.paths = Some(tls_path());
            c.grid = grid(vec![("eps2", range(-2.0, 1.0, 0.05))]);
            c.tolerances = match kind {
                TlsSumrule => tol(&[("sum_rule", 1e-6)]),
                TlsFirstlaw => tol(&[("first_law", 1e-6)]),
                _ => tol(&[("sum_rule", 1e-6), ("turnstile", 0.0)]),
            };
            if kind == TlsPopulations {
                c.grid.as_mut().unwrap().insert("window".into(), Values::List(vec![-0.72, 0.28]));
            }
        }
        Broadband => {
            c.paths = Some(vec![path("coupling ramp", vec![PointSpec::rlm(0.0, 0.6), PointSpec::rlm(0.0, 0.9)])]);
            c.grid = grid(vec![("t0", Values::List(vec![2.5, 5.0, 10.0, 20.0]))]);
            c.tolerances = tol(&[("monotone", 0.0), ("asymptote", 0.2)]);
        }
        OracleConvergence => {
            c.paths = Some(vec![
                path("state", vec![PointSpec::rlm(1.0, 0.6)]),
                path("bound state", vec![PointSpec::rlm(2.0, 1.0)]),
            ]);
            c.grid = grid(vec![("length", Values::List(vec![50.0, 100.0, 200.0, 400.0, 800.0]))]);
            c.alphas = Some(Values::List(vec![0.0, 0.25, 0.5, 0.75, 1.0]));
            c.tolerances = tol(&[("continuum", 1e-3), ("partition", 1e-12)]);
            c.expect = Some(
                [
                    ("bound_state_energy", Expect { value: 2.602, tolerance: 1e-3 }),
                    ("bound_state_weight", Expect { value: 0.545, tolerance: 1e-3 }),
                ]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            );
        }
    }
    c
}

/// Resolve the scenario list for one invocation.
pub fn load(config: Option<&PathBuf>, names: &[String], ov: &Overrides) -> Result<Vec<Scenario>> {
    let mut files = Vec::new();
    if let Some(p) = config {
        files.push(ConfigFile::read(p)?);
    }
    for n in names {
        if n == "all" {
            files.extend(ScenarioKind::ALL.iter().map(|k| ConfigFile { scenario: *k, ..empty(*k) }));
            continue;
        }
        let kind: ScenarioKind = n.parse().map_err(anyhow::Error::msg)?;
        files.push(empty(kind));
    }
    if files.is_empty() {
        bail!("nothing to run: give a config file or --scenario <name>");
    }
    files.iter().map(|f| Scenario::resolve(f, ov).with_context(|| format!("scenario {}", f.scenario))).collect()
}

fn empty(kind: ScenarioKind) -> ConfigFile {
    ConfigFile {
        scenario: kind,
        name: None,
        ensemble: None,
        model: None,
        paths: None,
        grid: None,
        alphas: None,
        numerics: None,
        tolerances: None,
        expect: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_resolves() {
        for k in ScenarioKind::ALL {
            let s = Scenario::resolve(&empty(k), &Overrides::default()).unwrap();
            assert_eq!(s.name, k.name());
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
    }

    #[test]
    fn builtin_round_trips_through_json() {
        for k in ScenarioKind::ALL {
            let c = ConfigFile::builtin(k);
            let text = serde_json::to_string_pretty(&c).unwrap();
            assert_eq!(ConfigFile::parse(&text).unwrap(), c);
        }
    }

    #[test]
    fn unknown_field_reports_position() {
        let err = ConfigFile::parse("{\n  \"scenario\": \"fig1a\",\n  \"temprature\": 1\n}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("temprature"), "{err}");
    }

    #[test]
    fn grid_keys_are_checked() {
        let c = ConfigFile::parse(r#"{"scenario": "fig1a", "grid": {"eps2": [0.0]}}"#).unwrap();
        let err = Scenario::resolve(&c, &Overrides::default()).unwrap_err().to_string();
        assert!(err.contains("grid.eps2"), "{err}");
    }

    #[test]
    fn orbital_count_must_match_model() {
        let c = ConfigFile::parse(
            r#"{"scenario": "fig1a", "paths": [{"name": "x", "points": [{"eps": [0, 1], "v": [1, 1]}]}]}"#,
        )
        .unwrap();
        let err = format!("{:#}", Scenario::resolve(&c, &Overrides::default()).unwrap_err());
        assert!(err.contains("paths[0].points[0]"), "{err}");
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides { n_theta: Some(8), u_steps: Some(4), alphas: Some(parse_range("0:1:0.5").unwrap()) };
        let s = Scenario::resolve(&empty(ScenarioKind::Fig3), &ov).unwrap();
        assert_eq!(s.quad.order, 8);
        assert_eq!(s.u_steps, 4);
        assert_eq!(s.alphas, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn bad_range() {
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("0:x:0.1").is_err());
    }
}
