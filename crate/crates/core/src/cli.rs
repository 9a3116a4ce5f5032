//! Command-line front end: flat `key = value` configuration, flag overrides,
//! one CSV schema per subcommand and a JSON summary.
//!
//! Every subcommand computes all of its outputs in memory first and writes
//! them only on success, so a rejected configuration leaves no files behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::agmon::{agmon_sweep, AgmonSettings, LemmaSurrogate};
use crate::dirac::RadialGrid;
use crate::error::{LabError, Result};
use crate::evolution::{
    decay_experiment, evolution_quasimode_config, log_bound_certificate, log_times, CayleyPropagator,
    CertificateInputs, CompactWindow,
};
use crate::fit::power_law_fit;
use crate::geometry::{Geometry, SpacetimeParams};
use crate::model::{bracket_check, model_levels};
use crate::potentials::Potentials;
use crate::quasimode::{
    build_quasimode, find_e_plus, residual_norm, residual_sweep_with, QuasimodeConfig, QuasimodeSetup, SweepResult,
};

/// Environment variable that replaces the configured output directory.
pub const OUT_DIR_ENV: &str = "SADS_OUT_DIR";

const KEYS: &[&str] = &[
    "M", "l", "m", "h", "h_list", "n", "n_per_h", "x_min", "x_cut", "graded", "S", "T", "delta", "chi_band", "sigma",
    "K", "t_max", "dt", "samples", "out_dir", "seed", "workers",
];

const USAGE: &str = "usage: sads-lab <geometry|potentials|spectrum|quasimode|sweep|agmon|evolve|certify|report> \
[--config FILE] [--KEY VALUE | --KEY=VALUE]...";

/// The subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Geometry,
    Potentials,
    Spectrum,
    Quasimode,
    Sweep,
    Agmon,
    Evolve,
    Certify,
    Report,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "geometry" => Self::Geometry,
            "potentials" => Self::Potentials,
            "spectrum" => Self::Spectrum,
            "quasimode" => Self::Quasimode,
            "sweep" => Self::Sweep,
            "agmon" => Self::Agmon,
            "evolve" => Self::Evolve,
            "certify" => Self::Certify,
            "report" => Self::Report,
            other => return Err(LabError::Config(format!("unknown subcommand '{other}'"))),
        })
    }
}

/// Validated run configuration. Optional fields fall back to
/// per-subcommand defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bh_mass: Option<f64>,
    pub ads_radius: Option<f64>,
    pub field_mass: Option<f64>,
    pub h: Option<f64>,
    pub h_list: Option<Vec<f64>>,
    pub n: Option<usize>,
    /// Per-`h` node counts for sweeps.
    pub n_per_h: Vec<(f64, usize)>,
    pub x_min: Option<f64>,
    pub x_cut: Option<f64>,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub delta: Option<f64>,
    pub chi_band: Option<(f64, f64)>,
    pub sigma: Option<(f64, f64)>,
    pub window: Option<(f64, f64)>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub samples: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bh_mass: None,
            ads_radius: None,
            field_mass: None,
            h: None,
            h_list: None,
            n: None,
            n_per_h: Vec::new(),
            x_min: None,
            x_cut: None,
            s: None,
            t: None,
            delta: None,
            chi_band: None,
            sigma: None,
            window: None,
            t_max: None,
            dt: None,
            samples: 24,
            out_dir: PathBuf::from("out"),
            seed: QuasimodeConfig::default().seed,
            workers: 1,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| LabError::Config(format!("{key}: '{v}' is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| LabError::Config(format!("{key}: '{v}' is not a non-negative integer")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_f64(key, s)).collect()
}

fn parse_pair(key: &str, v: &str) -> Result<(f64, f64)> {
    match parse_list(key, v)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(LabError::Config(format!("{key}: expected two comma-separated numbers, got '{v}'"))),
    }
}

impl RunConfig {
    /// Builds a configuration from `key → value` pairs; unknown keys and
    /// malformed values are configuration errors.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in map {
            match k.as_str() {
                "M" => c.bh_mass = Some(parse_f64(k, v)?),
                "l" => c.ads_radius = Some(parse_f64(k, v)?),
                "m" => c.field_mass = Some(parse_f64(k, v)?),
                "h" => c.h = Some(parse_f64(k, v)?),
                "h_list" => c.h_list = Some(parse_list(k, v)?),
                "n" => c.n = Some(parse_usize(k, v)?),
                "n_per_h" => {
                    c.n_per_h = v
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|item| {
                            let (h, n) = item
                                .split_once(':')
                                .ok_or_else(|| LabError::Config(format!("n_per_h: expected h:n, got '{item}'")))?;
                            Ok((parse_f64(k, h)?, parse_usize(k, n)?))
                        })
                        .collect::<Result<_>>()?
                }
                "x_min" => c.x_min = Some(parse_f64(k, v)?),
                "x_cut" => c.x_cut = Some(parse_f64(k, v)?),
                "graded" => match v.trim() {
                    "false" | "0" => {}
                    _ => return Err(LabError::Config("graded: only uniform grids are supported".into())),
                },
                "S" => c.s = Some(parse_f64(k, v)?),
                "T" => c.t = Some(parse_f64(k, v)?),
                "delta" => c.delta = Some(parse_f64(k, v)?),
                "chi_band" => c.chi_band = Some(parse_pair(k, v)?),
                "sigma" => c.sigma = Some(parse_pair(k, v)?),
                "K" => c.window = Some(parse_pair(k, v)?),
                "t_max" => c.t_max = Some(parse_f64(k, v)?),
                "dt" => c.dt = Some(parse_f64(k, v)?),
                "samples" => c.samples = parse_usize(k, v)?,
                "out_dir" => c.out_dir = PathBuf::from(v.trim()),
                "seed" => c.seed = v.trim().parse().map_err(|_| LabError::Config(format!("seed: '{v}'")))?,
                "workers" => c.workers = parse_usize(k, v)?.max(1),
                other => return Err(LabError::Config(format!("unknown key '{other}'"))),
            }
        }
        if let Some(list) = &c.h_list {
            if list.is_empty() || list.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(LabError::Config("h_list must be non-empty and strictly decreasing".into()));
            }
        }
        Ok(c)
    }

    fn require(&self, value: Option<f64>, key: &str) -> Result<f64> {
        value.ok_or_else(|| LabError::Config(format!("missing mandatory key '{key}'")))
    }

    /// `M, l, m` with the given `h`.
    pub fn params_with_h(&self, h: f64) -> Result<SpacetimeParams> {
        let m_bh = self.require(self.bh_mass, "M")?;
        let l = self.require(self.ads_radius, "l")?;
        let m = self.require(self.field_mass, "m")?;
        SpacetimeParams::new(m_bh, l, m, h)
    }

    /// `M, l, m, h`, all mandatory.
    pub fn params(&self) -> Result<SpacetimeParams> {
        let h = self.require(self.h, "h")?;
        self.params_with_h(h)
    }

    pub fn h_list(&self) -> Result<Vec<f64>> {
        self.h_list.clone().ok_or_else(|| LabError::Config("missing mandatory key 'h_list'".into()))
    }

    /// Quasimode configuration with the given grid defaults.
    pub fn quasimode_config(&self, n: usize, x_min: Option<f64>, x_cut: f64) -> QuasimodeConfig {
        let base = QuasimodeConfig::default();
        QuasimodeConfig {
            n: self.n.unwrap_or(n),
            x_min: self.x_min.or(x_min),
            x_cut: self.x_cut.unwrap_or(x_cut),
            s: self.s,
            chi_band: self.chi_band.unwrap_or(base.chi_band),
            seed: self.seed,
            ..base
        }
    }

    fn n_for(&self, h: f64, base: QuasimodeConfig) -> QuasimodeConfig {
        match self.n_per_h.iter().find(|(hh, _)| (hh - h).abs() <= 1e-12 * h) {
            Some(&(_, n)) => QuasimodeConfig { n, ..base },
            None => base,
        }
    }

    /// Evolution grid for the spacetime of `params`.
    pub fn evolution_config(&self, params: &SpacetimeParams) -> QuasimodeConfig {
        let base = evolution_quasimode_config(params);
        self.quasimode_config(base.n, base.x_min, base.x_cut)
    }
}

/// Reads a flat `key = value` file; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("line {}: expected key = value", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Splits arguments into the subcommand and the merged key map: config
/// file first, then flags, then the output-directory variable.
pub fn parse_args(args: &[String], out_dir_env: Option<String>) -> Result<(Command, RunConfig)> {
    let (cmd, rest) = args.split_first().ok_or_else(|| LabError::Config(USAGE.into()))?;
    let cmd = Command::parse(cmd)?;
    let mut file_map = BTreeMap::new();
    let mut flags = BTreeMap::new();
    let mut i = 0;
    while i < rest.len() {
        let arg = &rest[i];
        let body = arg
            .strip_prefix("--")
            .ok_or_else(|| LabError::Config(format!("unexpected argument '{arg}'")))?;
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                i += 1;
                let v = rest.get(i).ok_or_else(|| LabError::Config(format!("flag --{body} needs a value")))?;
                (body.to_string(), v.clone())
            }
        };
        if key == "config" {
            let text = fs::read_to_string(&value).map_err(|e| LabError::Io(format!("{value}: {e}")))?;
            file_map = parse_config_text(&text)?;
        } else if !KEYS.contains(&key.as_str()) {
            return Err(LabError::Config(format!("unknown key '{key}'")));
        } else {
            flags.insert(key, value);
        }
        i += 1;
    }
    file_map.extend(flags);
    if let Some(dir) = out_dir_env.filter(|d| !d.is_empty()) {
        file_map.insert("out_dir".into(), dir);
    }
    Ok((cmd, RunConfig::from_map(&file_map)?))
}

/// One output file, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Files to write plus the physics checks that failed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub failures: Vec<String>,
}

/// Formats a float with 17 significant digits.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV builder with a fixed header.
struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n", columns: header.len() }
    }

    fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.columns, "row width must match the header");
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    fn artifact(self, name: &str) -> Artifact {
        Artifact { name: name.into(), contents: self.text }
    }
}

fn f(v: f64) -> String {
    fmt_f(v)
}

/// Runs one subcommand; `out_dir` is only read (by `report`).
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Outcome> {
    match cmd {
        Command::Geometry => run_geometry(cfg),
        Command::Potentials => run_potentials(cfg),
        Command::Spectrum => run_spectrum(cfg),
        Command::Quasimode => run_quasimode(cfg),
        Command::Sweep => run_sweep(cfg),
        Command::Agmon => run_agmon(cfg),
        Command::Evolve => run_evolve(cfg),
        Command::Certify => run_certify(cfg),
        Command::Report => run_report(cfg),
    }
}

fn run_geometry(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params_with_h(cfg.h.unwrap_or(1.0))?;
    let geo = Geometry::new(params);
    let hz = geo.horizon();
    let f_h = crate::geometry::metric_f(geo.r_sads(), &params)?;
    let mut summary = Csv::new(&["M", "l", "r_sads", "p_plus", "p_minus", "surface_gravity", "f_at_horizon"]);
    summary.row(vec![
        f(params.bh_mass),
        f(params.ads_radius),
        f(hz.r_sads),
        f(hz.p_plus),
        f(hz.p_minus),
        f(geo.surface_gravity()),
        f(f_h),
    ]);
    let count = cfg.n.unwrap_or(200).max(2);
    let (lo, hi) = (1e-6 * geo.r_sads(), 1e4 * params.ads_radius);
    let mut table = Csv::new(&["r", "x", "f"]);
    for i in 0..count {
        let delta = lo * (hi / lo).powf(i as f64 / (count - 1) as f64);
        let r = geo.r_sads() + delta;
        table.row(vec![f(r), f(geo.tortoise_from_offset(delta)), f(geo.lapse_from_offset(delta))]);
    }
    Ok(Outcome { artifacts: vec![summary.artifact("geometry.csv"), table.artifact("tortoise.csv")], failures: vec![] })
}

fn run_potentials(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params_with_h(cfg.h.unwrap_or(1.0))?;
    let pots = Potentials::new(params);
    let cut = pots.inner_cutoff();
    let x_min = cfg.x_min.unwrap_or(cut.x_plus - params.ads_radius);
    let x_cut = cfg.x_cut.unwrap_or(-1e-3);
    let grid = RadialGrid::new(x_min, x_cut, cfg.n.unwrap_or(400))?;
    let mut table = Csv::new(&["x", "r", "a", "b", "da", "db", "a2_excess"]);
    for x in grid.nodes() {
        let v = pots.at(x)?;
        table.row(vec![f(v.x), f(v.r), f(v.a), f(v.b), f(v.da), f(v.db), f(v.a2_excess)]);
    }
    let mut meta = Csv::new(&["r_plus", "x_plus", "a2_at_cutoff", "adjusted"]);
    meta.row(vec![f(cut.r_plus), f(cut.x_plus), f(pots.a2_at_cutoff()), cut.adjusted.to_string()]);
    Ok(Outcome { artifacts: vec![table.artifact("potentials.csv"), meta.artifact("cutoff.csv")], failures: vec![] })
}

fn h_values(cfg: &RunConfig) -> Result<Vec<f64>> {
    match (&cfg.h_list, cfg.h) {
        (Some(list), _) => Ok(list.clone()),
        (None, Some(h)) => Ok(vec![h]),
        (None, None) => Err(LabError::Config("missing mandatory key 'h' (or 'h_list')".into())),
    }
}

fn run_spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let hs = h_values(cfg)?;
    let params: Vec<SpacetimeParams> = hs.iter().map(|&h| cfg.params_with_h(h)).collect::<Result<_>>()?;
    let grid = RadialGrid::new(cfg.x_min.unwrap_or(-3.0), cfg.x_cut.unwrap_or(-1e-4), cfg.n.unwrap_or(6000))?;
    let mut table =
        Csv::new(&["h", "e0", "e1", "e2", "e_tilde", "lower", "upper", "slack", "inside", "dx", "eigen_residual"]);
    let mut failures = Vec::new();
    for p in &params {
        let lv = model_levels(p);
        let b = bracket_check(&grid, p)?;
        if !b.inside {
            failures.push(format!("h = {}: Ẽ = {} outside [{}, {}]", p.h, b.e_tilde, b.lower, b.upper));
        }
        table.row(vec![
            f(p.h),
            f(lv.e0),
            f(lv.e1),
            f(lv.e2),
            f(b.e_tilde),
            f(b.lower),
            f(b.upper),
            f(b.slack),
            b.inside.to_string(),
            f(grid.dx()),
            f(b.eigen_residual),
        ]);
    }
    Ok(Outcome { artifacts: vec![table.artifact("spectrum.csv")], failures })
}

fn run_quasimode(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let setup = QuasimodeSetup::new(params, cfg.quasimode_config(QuasimodeConfig::default().n, None, -1e-3))?;
    let e_plus = find_e_plus(&setup)?;
    let qm = build_quasimode(&setup)?;
    let h_full = setup.full_h()?;
    let residual = residual_norm(&qm.phi, qm.sqrt_e_plus, &h_full)?;
    let (wa, wb) = qm.mass_window(0.99);
    let mut summary = Csv::new(&[
        "h",
        "e_plus",
        "e2",
        "distance",
        "sqrt_e_plus",
        "residual",
        "commutator",
        "chi_norm",
        "window_a",
        "window_b",
        "boundary_exponent",
        "model_overlap",
    ]);
    summary.row(vec![
        f(params.h),
        f(e_plus.pair.value),
        f(e_plus.e2),
        f(e_plus.distance),
        f(qm.sqrt_e_plus),
        f(residual),
        f(qm.commutator_norm()),
        f(qm.chi_norm),
        f(wa),
        f(wb),
        e_plus.boundary.exponent.map(f).unwrap_or_else(|| "nan".into()),
        f(e_plus.model_overlap),
    ]);
    let mut profile = Csv::new(&["x", "abs_phi", "chi"]);
    for j in 0..qm.full.n {
        let x = qm.full.node(j);
        let chi = if j >= qm.offset { qm.cutoff.eval(x).0 } else { 0.0 };
        profile.row(vec![f(x), f(qm.phi.node_norm(j)), f(chi)]);
    }
    let mut failures = Vec::new();
    if e_plus.far_from_model {
        failures.push(format!("E⁺ = {} is far from E₂ = {}", e_plus.pair.value, e_plus.e2));
    }
    Ok(Outcome {
        artifacts: vec![summary.artifact("quasimode_summary.csv"), profile.artifact("quasimode.csv")],
        failures,
    })
}

fn sweep_with(cfg: &RunConfig, base: QuasimodeConfig) -> Result<SweepResult> {
    let hs = cfg.h_list()?;
    let params = cfg.params_with_h(hs[0])?;
    residual_sweep_with(&hs, &params, cfg.workers, |h| cfg.n_for(h, base))
}

fn run_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let sweep = sweep_with(cfg, cfg.quasimode_config(QuasimodeConfig::default().n, None, -1e-3))?;
    let mut table = Csv::new(&[
        "h",
        "e_plus",
        "sqrt_e_plus",
        "residual",
        "commutator",
        "residual_fine",
        "floor",
        "floor_limited",
        "n",
        "dx",
        "distance_to_e2",
    ]);
    for r in &sweep.records {
        table.row(vec![
            f(r.h),
            f(r.e_plus),
            f(r.sqrt_e_plus),
            f(r.residual),
            f(r.commutator),
            f(r.residual_fine),
            f(r.floor),
            r.floor_limited.to_string(),
            r.n.to_string(),
            f(r.dx),
            f(r.distance_to_e2),
        ]);
    }
    let hs: Vec<f64> = sweep.records.iter().map(|r| r.h).collect();
    let ds: Vec<f64> = sweep.records.iter().map(|r| r.distance_to_e2).collect();
    let (q, _, q_r2) = power_law_fit(&hs, &ds).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
    let mut fit = Csv::new(&["d", "prefactor", "r2", "points", "proximity_exponent", "proximity_r2"]);
    fit.row(vec![f(sweep.d), f(sweep.prefactor), f(sweep.fit.r2), sweep.fit.points.to_string(), f(q), f(q_r2)]);
    let mut failures = Vec::new();
    if !(sweep.d > 0.0) {
        failures.push(format!("fitted D = {} is not positive", sweep.d));
    }
    Ok(Outcome { artifacts: vec![table.artifact("sweep.csv"), fit.artifact("sweep_fit.csv")], failures })
}

fn run_agmon(cfg: &RunConfig) -> Result<Outcome> {
    let hs = cfg.h_list()?;
    let params = cfg.params_with_h(hs[0])?;
    let settings = AgmonSettings {
        fractions: cfg.sigma.unwrap_or(AgmonSettings::default().fractions),
        delta: cfg.delta,
        t: cfg.t,
    };
    let qconfig = cfg.quasimode_config(QuasimodeConfig::default().n, None, -1e-3);
    let sweep = agmon_sweep(&hs, &params, &qconfig, &settings, cfg.workers)?;
    let lemma = LemmaSurrogate::from_settings(&params, &settings);
    let h0 = lemma.threshold(hs[0], 1e-5, 41)?;
    let mut table =
        Csv::new(&["h", "mass_sigma1", "c_implied", "lemma_margin", "energy", "mass_sigma2", "noise_flag"]);
    for r in &sweep.records {
        table.row(vec![
            f(r.h),
            f(r.mass_sigma1),
            f(r.weighted.c_implied),
            f(r.lemma_margin),
            f(r.energy),
            f(r.mass_sigma2),
            r.noise_flag.to_string(),
        ]);
    }
    let c = crate::agmon::admissible_weight_scale(lemma.k);
    let mut fit = Csv::new(&["epsilon_fit", "r2", "growth_rate", "c", "k", "delta", "T", "h0"]);
    fit.row(vec![
        f(sweep.epsilon_fit),
        f(sweep.mass_fit.r2),
        f(sweep.growth_rate),
        f(c),
        f(lemma.k),
        f(lemma.delta),
        f(lemma.t),
        h0.map(f).unwrap_or_else(|| "nan".into()),
    ]);
    let mut failures = Vec::new();
    if !(sweep.epsilon_fit > 0.0) {
        failures.push(format!("ε_fit = {} is not positive", sweep.epsilon_fit));
    }
    if h0.is_none() {
        failures.push("lemma margin fails for every h down to 1e-5".into());
    }
    Ok(Outcome { artifacts: vec![table.artifact("agmon.csv"), fit.artifact("agmon_fit.csv")], failures })
}

struct EvolutionSetup {
    setup: QuasimodeSetup,
    qm: crate::quasimode::Quasimode,
    h_full: crate::dirac::HermitianOperator,
    window: CompactWindow,
    prop: CayleyPropagator,
}

fn evolution_setup(cfg: &RunConfig) -> Result<EvolutionSetup> {
    let params = cfg.params()?;
    let setup = QuasimodeSetup::new(params, cfg.evolution_config(&params))?;
    if let Some((a, b)) = cfg.window {
        CompactWindow::new(a, b)?.check_inside(&setup.full)?;
    }
    let qm = build_quasimode(&setup)?;
    let h_full = setup.full_h()?;
    let window = match cfg.window {
        Some((a, b)) => CompactWindow::new(a, b)?,
        None => {
            let (a, b) = qm.mass_window(0.99);
            CompactWindow::new(a, b)?
        }
    };
    let prop = match cfg.dt {
        Some(dt) => CayleyPropagator::new(&h_full, dt)?,
        None => CayleyPropagator::with_default_step(&h_full)?,
    };
    Ok(EvolutionSetup { setup, qm, h_full, window, prop })
}

fn run_evolve(cfg: &RunConfig) -> Result<Outcome> {
    let ev = evolution_setup(cfg)?;
    let r_h = residual_norm(&ev.qm.phi, ev.qm.sqrt_e_plus, &ev.h_full)?;
    let t_max = cfg.t_max.unwrap_or((0.1 / r_h).min(1e4));
    if !(t_max > 0.0) {
        return Err(LabError::Config(format!("t_max must be positive, got {t_max}")));
    }
    let times = log_times((10.0 * ev.prop.dt).min(t_max), t_max, cfg.samples.max(2));
    let report = decay_experiment(&ev.qm, &ev.h_full, &ev.window, &ev.prop, &times)?;
    let mut table = Csv::new(&["t", "local_energy", "total_norm", "bound", "duhamel_distance", "slack"]);
    for s in &report.samples {
        table.row(vec![f(s.t), f(s.local_energy), f(s.total_norm), f(s.bound), f(s.duhamel_distance), f(s.slack)]);
    }
    let mut meta = Csv::new(&[
        "h",
        "lambda",
        "r_h",
        "sqrt_e_plus",
        "dt",
        "window_a",
        "window_b",
        "n",
        "max_step_drift",
        "unitarity_drift",
        "holds",
        "duhamel_holds",
        "worst_t",
    ]);
    meta.row(vec![
        f(report.h),
        f(report.lambda),
        f(report.r_h),
        f(report.sqrt_e_plus),
        f(report.dt),
        f(report.window.a),
        f(report.window.b),
        ev.setup.config.n.to_string(),
        f(report.max_step_drift),
        f(report.unitarity_drift),
        report.holds.to_string(),
        report.duhamel_holds.to_string(),
        f(report.worst_t),
    ]);
    let mut failures = Vec::new();
    if !report.holds {
        failures.push(format!("Duhamel lower bound violated at t = {}", report.worst_t));
    }
    if !report.duhamel_holds {
        failures.push("distance to the phase-rotated quasimode exceeds t·r_h".into());
    }
    Ok(Outcome { artifacts: vec![table.artifact("evolve.csv"), meta.artifact("evolve_summary.csv")], failures })
}

fn run_certify(cfg: &RunConfig) -> Result<Outcome> {
    let ev = evolution_setup(cfg)?;
    let sweep = sweep_with(cfg, cfg.evolution_config(&ev.setup.params))?;
    let inputs = CertificateInputs {
        d: sweep.d,
        fitted_prefactor: sweep.prefactor,
        samples: cfg.samples.max(2),
        ..CertificateInputs::default()
    };
    let cert = log_bound_certificate(&ev.qm, &ev.h_full, &ev.window, &ev.prop, &inputs)?;
    let mut table = Csv::new(&[
        "h",
        "d",
        "fitted_prefactor",
        "c_h",
        "lambda",
        "r_h",
        "t_h",
        "dt",
        "branch",
        "measured_local_energy",
        "local_energy_at_t_h",
        "lower_value",
        "half_d",
        "smallness",
        "smallness_ok",
        "verified_until",
        "bound_verified",
        "pass",
    ]);
    table.row(vec![
        f(cert.h),
        f(cert.d),
        f(cert.fitted_prefactor),
        f(cert.c_h),
        f(cert.lambda),
        f(cert.r_h),
        f(cert.t_h),
        f(cert.dt),
        cert.branch.as_str().into(),
        cert.measured_local_energy.map(f).unwrap_or_else(|| "nan".into()),
        f(cert.local_energy_at_t_h),
        f(cert.lower_value),
        f(0.5 * cert.d),
        f(cert.smallness),
        cert.smallness_ok.to_string(),
        f(cert.verified_until),
        cert.bound_verified.to_string(),
        cert.pass.to_string(),
    ]);
    let mut failures = Vec::new();
    if !cert.smallness_ok {
        failures.push(format!("smallness |h ln((λ−h)/C)| = {} exceeds D/2 = {}; certificate withheld", cert.smallness, 0.5 * cert.d));
    } else if !cert.pass {
        failures.push(format!("certificate failed: lower value {} < D/2 = {}", cert.lower_value, 0.5 * cert.d));
    }
    Ok(Outcome { artifacts: vec![table.artifact("certificate.csv")], failures })
}

/// Parses one of this module's CSV files into header-keyed rows.
pub fn read_csv(text: &str) -> Result<Vec<BTreeMap<String, String>>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| LabError::Io("empty CSV".into()))?.split(',').collect();
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != header.len() {
                return Err(LabError::Io(format!("CSV row has {} cells, header {}", cells.len(), header.len())));
            }
            Ok(header.iter().zip(cells).map(|(h, c)| (h.to_string(), c.to_string())).collect())
        })
        .collect()
}

fn cell_value(v: &str) -> Value {
    if let Ok(b) = v.parse::<bool>() {
        return Value::Bool(b);
    }
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => json!(x),
        Ok(_) => Value::Null,
        Err(_) => Value::String(v.into()),
    }
}

fn rows_json(rows: &[BTreeMap<String, String>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| Value::Object(r.iter().map(|(k, v)| (k.clone(), cell_value(v))).collect()))
            .collect(),
    )
}

fn run_report(cfg: &RunConfig) -> Result<Outcome> {
    let sources = [
        ("sweep_fit.csv", "sweep"),
        ("sweep.csv", "sweep_records"),
        ("agmon_fit.csv", "agmon"),
        ("spectrum.csv", "brackets"),
        ("evolve_summary.csv", "evolution"),
        ("certificate.csv", "certificate"),
    ];
    let mut summary = serde_json::Map::new();
    for (file, key) in sources {
        let path = cfg.out_dir.join(file);
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        summary.insert(key.into(), rows_json(&read_csv(&text)?));
    }
    if summary.is_empty() {
        return Err(LabError::Io(format!("no prior outputs found in {}", cfg.out_dir.display())));
    }
    let first = |key: &str, field: &str| summary.get(key).and_then(|v| v[0].get(field)).cloned();
    let mut headline = serde_json::Map::new();
    for (name, key, field) in [
        ("D", "sweep", "d"),
        ("residual_fit_r2", "sweep", "r2"),
        ("proximity_exponent", "sweep", "proximity_exponent"),
        ("epsilon_fit", "agmon", "epsilon_fit"),
        ("certificate_branch", "certificate", "branch"),
        ("certificate_pass", "certificate", "pass"),
    ] {
        if let Some(v) = first(key, field) {
            headline.insert(name.into(), v);
        }
    }
    if let Some(Value::Array(rows)) = summary.get("brackets") {
        let all = rows.iter().all(|r| r.get("inside") == Some(&Value::Bool(true)));
        headline.insert("brackets_inside".into(), Value::Bool(all));
    }
    summary.insert("summary".into(), Value::Object(headline));
    let text = serde_json::to_string_pretty(&Value::Object(summary))
        .map_err(|e| LabError::Numerical(format!("JSON encoding: {e}")))?;
    Ok(Outcome { artifacts: vec![Artifact { name: "report.json".into(), contents: text + "\n" }], failures: vec![] })
}

/// Writes the artifacts under `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.contents).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Process exit code for an error.
pub fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::Io(_) => 1,
        LabError::Config(_) | LabError::Domain(_) | LabError::Shape(_) => 2,
        LabError::Physics(_) => 3,
        LabError::Solver { .. } | LabError::Numerical(_) => 4,
    }
}

fn kind(err: &LabError) -> &'static str {
    match err {
        LabError::Io(_) => "io",
        LabError::Config(_) | LabError::Domain(_) | LabError::Shape(_) => "config",
        LabError::Physics(_) => "physics",
        LabError::Solver { .. } | LabError::Numerical(_) => "numerical",
    }
}

/// Single-line error record: `error code=<n> kind=<kind> message="<text>"`.
pub fn error_line(err: &LabError) -> String {
    let msg = err.to_string().replace('\n', " ").replace('"', "'");
    let mut s = String::new();
    let _ = write!(s, "error code={} kind={} message=\"{msg}\"", exit_code(err), kind(err));
    s
}

/// Full run: parse, compute, write; returns the exit code.
pub fn run(args: &[String], out_dir_env: Option<String>) -> i32 {
    if matches!(args.first().map(String::as_str), None | Some("-h" | "--help" | "help")) {
        println!("{USAGE}");
        return if args.is_empty() { 2 } else { 0 };
    }
    let result = parse_args(args, out_dir_env).and_then(|(cmd, cfg)| {
        let outcome = execute(cmd, &cfg)?;
        write_artifacts(&cfg.out_dir, &outcome.artifacts)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) if outcome.failures.is_empty() => 0,
        Ok(outcome) => {
            let err = LabError::Physics(outcome.failures.join("; "));
            eprintln!("{}", error_line(&err));
            3
        }
        Err(err) => {
            eprintln!("{}", error_line(&err));
            exit_code(&err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn config_text_and_flags_merge() {
        let map = parse_config_text("# comment\nM = 1\nl=1 # trailing\n\nm = 2\n").unwrap();
        assert_eq!(map.get("M").map(String::as_str), Some("1"));
        assert_eq!(map.len(), 3);
        assert!(parse_config_text("M 1").is_err());
        let (cmd, cfg) = parse_args(&args("geometry --M 1 --l=1 --m 2 --h_list 0.2,0.1"), None).unwrap();
        assert_eq!(cmd, Command::Geometry);
        assert_eq!(cfg.bh_mass, Some(1.0));
        assert_eq!(cfg.h_list, Some(vec![0.2, 0.1]));
        let (_, cfg) = parse_args(&args("geometry --out_dir a"), Some("b".into())).unwrap();
        assert_eq!(cfg.out_dir, PathBuf::from("b"));
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        for bad in [
            "nosuch",
            "geometry --bogus 1",
            "geometry --M",
            "geometry --M x",
            "sweep --h_list 0.1,0.2",
            "geometry --graded true",
            "geometry stray",
        ] {
            let err = parse_args(&args(bad), None).unwrap_err();
            assert_eq!(exit_code(&err), 2, "{bad}");
        }
        let (_, cfg) = parse_args(&args("geometry --M 1 --l 1"), None).unwrap();
        let err = execute(Command::Geometry, &cfg).unwrap_err();
        assert!(err.to_string().contains("'m'"));
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn error_line_is_single_line() {
        let line = error_line(&LabError::Config("a\nb \"c\"".into()));
        assert!(!line.contains('\n'));
        assert!(line.starts_with("error code=2 kind=config"));
    }

    #[test]
    fn geometry_unit_horizon() {
        let (_, cfg) = parse_args(&args("geometry --M 1 --l 1 --m 2 --n 5"), None).unwrap();
        let out = execute(Command::Geometry, &cfg).unwrap();
        let rows = read_csv(&out.artifacts[0].contents).unwrap();
        let r: f64 = rows[0]["r_sads"].parse().unwrap();
        assert!((r - 1.0).abs() < 1e-10);
        assert_eq!(read_csv(&out.artifacts[1].contents).unwrap().len(), 5);
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02e23, -1e-300] {
            assert_eq!(fmt_f(v).parse::<f64>().unwrap(), v);
        }
    }
}
