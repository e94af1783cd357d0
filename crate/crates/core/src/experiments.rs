//! Command-line driver, flat configuration files and the experiment runners.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    block_norms, paraproducts, sobolev_norm, Envelope, ENVELOPE_DELTA,
};
use crate::dynamics::{run, step, SimConfig};
use crate::error::{Result, WaveError};
use crate::normalform::{loglog_slope, nf_residual, nf_scan, rf_minus_r};
use crate::spectral::{Grid, HoloField, SpectralField};
use crate::state::{
    derive_all, from_graph_surface, random_state, taylor_sign, verify_identities, write_snapshot,
    DerivedFields, DiffState, GraphOptions, WaveState, IDENTITY_TOL,
};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "WAVECREST_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CHECK: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Verify,
    NfScan,
    Lifespan,
    Decay,
    Envelope,
}

/// Initial data, in the flat config selected by `data = "<name>"`.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    Flat,
    /// `W = ε e^{ikα}` with `k < 0`; `Q = 0`, or the rightward linear wave
    /// `Q̂_k = -Ŵ_k / √|κ|` when `traveling`.
    SingleMode { k: i64, eps: f64, traveling: bool },
    /// `W = Σ c_k e^{ikα}` from `(k, re, im)` triples.
    MultiMode { modes: Vec<(i64, f64, f64)>, traveling: bool },
    /// Holomorphic bump `W = ε s(1-s) e^{-iθ} / (1 - s e^{-iθ})`,
    /// `θ = 2π(α - center)/L`, `s = e^{-2π width/L}`, and `Q = 0`.
    Localized { width: f64, eps: f64, center: f64 },
    /// Graph surface from `(k, a, b)` triples meaning `a cos kx + b sin kx`.
    FromGraph { eta: Vec<(i64, f64, f64)>, psi: Vec<(i64, f64, f64)> },
    /// Seeded random band-limited state.
    Random { amp: f64, decay: f64 },
}

impl InitialData {
    pub fn build(&self, grid: &Grid, seed: u64) -> Result<WaveState> {
        let band = grid.band() as i64;
        let check_k = |k: i64| -> Result<()> {
            if k.abs() > band {
                return Err(WaveError::Config(format!(
                    "mode k = {k} lies outside the band |k| <= {band}"
                )));
            }
            Ok(())
        };
        let traveling_q = |w: &SpectralField| {
            let g = w.grid().clone();
            w.multiplier(|k| {
                if k == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(-1.0 / g.wavenumber(k).abs().sqrt(), 0.0)
                }
            })
        };
        match self {
            InitialData::Flat => Ok(WaveState::flat(grid)),
            InitialData::SingleMode { k, eps, traveling } => {
                InitialData::MultiMode {
                    modes: vec![(*k, *eps, 0.0)],
                    traveling: *traveling,
                }
                .build(grid, seed)
            }
            InitialData::MultiMode { modes, traveling } => {
                let mut list = Vec::with_capacity(modes.len());
                for &(k, re, im) in modes {
                    check_k(k)?;
                    if k >= 0 {
                        return Err(WaveError::Config(format!(
                            "mode k = {k} is not holomorphic; use k < 0"
                        )));
                    }
                    list.push((k, Complex64::new(re, im)));
                }
                let w = SpectralField::from_modes(grid, &list)?;
                let q = if *traveling {
                    traveling_q(&w)
                } else {
                    SpectralField::zeros(grid)
                };
                WaveState::from_fields(w, q, 0.0)
            }
            InitialData::Localized { width, eps, center } => {
                if !(*width > 0.0) {
                    return Err(WaveError::Config(format!("width must be positive, got {width}")));
                }
                let l = grid.period();
                let s = (-2.0 * std::f64::consts::PI * width / l).exp();
                let w = SpectralField::from_fn(grid, |a| {
                    let theta = 2.0 * std::f64::consts::PI * (a - center) / l;
                    let e = Complex64::from_polar(1.0, -theta);
                    e * (eps * s * (1.0 - s)) / (1.0 - e * s)
                });
                let tail = w.modes().filter(|(k, _)| k.abs() > band).map(|(_, c)| c.norm()).fold(0.0, f64::max);
                if tail > 1e-6 * w.max_coeff() {
                    return Err(WaveError::Config(format!(
                        "localized profile of width {width} is not resolved: tail coefficient {tail:.2e}"
                    )));
                }
                let w = HoloField::project(&w.dealias()).into_inner();
                WaveState::from_fields(w, SpectralField::zeros(grid), 0.0)
            }
            InitialData::FromGraph { eta, psi } => {
                let trig = |list: &[(i64, f64, f64)]| -> Result<SpectralField> {
                    let mut modes = vec![];
                    for &(k, a, b) in list {
                        check_k(k)?;
                        if k < 0 {
                            return Err(WaveError::Config(format!("graph mode k = {k} must be >= 0")));
                        }
                        if k == 0 {
                            modes.push((0, Complex64::new(a, 0.0)));
                        } else {
                            let c = Complex64::new(a, -b) * 0.5;
                            modes.push((k, c));
                            modes.push((-k, c.conj()));
                        }
                    }
                    SpectralField::from_modes(grid, &modes)
                };
                from_graph_surface(&trig(eta)?, &trig(psi)?, GraphOptions::default())
            }
            InitialData::Random { amp, decay } => Ok(random_state(grid, seed, *amp, *decay)),
        }
    }
}

/// Parameters of the experiment drivers.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentParams {
    /// Amplitudes for `nf-scan` and `lifespan`.
    pub eps_list: Vec<f64>,
    /// Horizon of each lifespan run.
    pub t_max: f64,
    /// Fit window of the decay probe.
    pub t0: f64,
    pub t1: f64,
    /// Number of seeds in `verify`.
    pub count: usize,
    /// Envelope parameter.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub sim: SimConfig,
    pub data: InitialData,
    pub params: ExperimentParams,
    pub output_dir: PathBuf,
    /// SHA-256 of the resolved flat configuration.
    pub config_hash: String,
}

/// On-disk configuration: flat keys, snake_case.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatConfig {
    pub kind: Option<ExperimentKind>,
    pub n_modes: Option<usize>,
    pub period: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub c_min: Option<f64>,
    pub integrator: Option<crate::dynamics::Integrator>,
    pub dealias: Option<bool>,
    pub zero_mode_policy: Option<crate::dynamics::ZeroModePolicy>,
    pub output_every: Option<usize>,
    pub seed: Option<u64>,
    pub filter_order: Option<u32>,
    pub filter_strength: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub data: Option<String>,
    pub k: Option<i64>,
    pub eps: Option<f64>,
    pub traveling: Option<bool>,
    pub modes: Option<Vec<(i64, f64, f64)>>,
    pub width: Option<f64>,
    pub center: Option<f64>,
    pub eta: Option<Vec<(i64, f64, f64)>>,
    pub psi: Option<Vec<(i64, f64, f64)>>,
    pub amp: Option<f64>,
    pub decay: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub t_max: Option<f64>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub count: Option<usize>,
    pub delta: Option<f64>,
}

/// Parses a flat TOML config and applies `key=value` overrides (values in
/// TOML syntax; bare words are read as strings).
pub fn load_config(text: &str, overrides: &[String]) -> Result<FlatConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| WaveError::Config(e.to_string()))?;
    for ov in overrides {
        let (key, value) = ov
            .split_once('=')
            .ok_or_else(|| WaveError::Config(format!("override `{ov}` is not key=value")))?;
        let key = key.trim();
        let value = value.trim();
        let parsed = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.to_string(), parsed);
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| WaveError::Config(e.to_string()))
}

impl FlatConfig {
    /// Resolves defaults for the given subcommand.
    pub fn resolve(&self, kind: ExperimentKind) -> Result<ExperimentSpec> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(WaveError::Config(format!(
                    "config kind {k:?} does not match subcommand {kind:?}"
                )));
            }
        }
        let d = SimConfig::default();
        let decay_defaults = kind == ExperimentKind::Decay;
        let sim = SimConfig {
            n_modes: self.n_modes.unwrap_or(if decay_defaults { 1 << 14 } else { d.n_modes }),
            period: self
                .period
                .unwrap_or(if decay_defaults { 400.0 * std::f64::consts::PI } else { d.period }),
            dt: self.dt.unwrap_or(if decay_defaults { 0.05 } else { d.dt }),
            t_end: self.t_end.unwrap_or(d.t_end),
            c_min: self.c_min.unwrap_or(d.c_min),
            integrator: self.integrator.unwrap_or(d.integrator),
            dealias: self.dealias.unwrap_or(d.dealias),
            zero_mode_policy: self.zero_mode_policy.unwrap_or(d.zero_mode_policy),
            output_every: self.output_every.unwrap_or(if decay_defaults { 20 } else { d.output_every }),
            seed: self.seed.unwrap_or(d.seed),
            filter_order: self.filter_order.unwrap_or(d.filter_order),
            filter_strength: self.filter_strength.unwrap_or(d.filter_strength),
        };
        sim.validate()?;
        let default_data = match kind {
            ExperimentKind::Decay => "localized",
            ExperimentKind::Verify | ExperimentKind::NfScan => "random",
            ExperimentKind::Lifespan => "single_mode",
            _ => "flat",
        };
        let eps = self.eps.unwrap_or(match kind {
            ExperimentKind::Decay => 0.01,
            _ => 0.05,
        });
        let data = match self.data.as_deref().unwrap_or(default_data) {
            "flat" => InitialData::Flat,
            "single_mode" => InitialData::SingleMode {
                k: self.k.unwrap_or(-1),
                eps,
                traveling: self.traveling.unwrap_or(false),
            },
            "multi_mode" => InitialData::MultiMode {
                modes: self
                    .modes
                    .clone()
                    .ok_or_else(|| WaveError::Config("multi_mode data needs `modes`".into()))?,
                traveling: self.traveling.unwrap_or(false),
            },
            "localized" => InitialData::Localized {
                width: self.width.unwrap_or(1.0),
                eps,
                center: self.center.unwrap_or(sim.period / 2.0),
            },
            "from_graph" => InitialData::FromGraph {
                eta: self.eta.clone().unwrap_or_default(),
                psi: self.psi.clone().unwrap_or_default(),
            },
            "random" => InitialData::Random {
                amp: self.amp.unwrap_or(if kind == ExperimentKind::NfScan { 1.0 } else { 0.1 }),
                decay: self.decay.unwrap_or(0.5),
            },
            other => return Err(WaveError::Config(format!("unknown data descriptor `{other}`"))),
        };
        let params = ExperimentParams {
            eps_list: self.eps_list.clone().unwrap_or_else(|| match kind {
                ExperimentKind::Lifespan => vec![0.2, 0.1, 0.05],
                _ => vec![0.1, 0.05, 0.025, 0.0125],
            }),
            t_max: self.t_max.unwrap_or(1000.0),
            t0: self.t0.unwrap_or(5.0),
            t1: self.t1.unwrap_or(50.0),
            count: self.count.unwrap_or(100),
            delta: self.delta.unwrap_or(ENVELOPE_DELTA),
        };
        if params.eps_list.iter().any(|e| !(*e > 0.0)) {
            return Err(WaveError::Config("eps_list entries must be positive".into()));
        }
        if kind == ExperimentKind::Lifespan && params.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(WaveError::Config("eps_list must be strictly decreasing".into()));
        }
        if !(params.t0 >= 0.0 && params.t1 > params.t0) {
            return Err(WaveError::Config("decay window needs 0 <= t0 < t1".into()));
        }
        let canonical = serde_json::to_string(self).map_err(|e| WaveError::Config(e.to_string()))?;
        let config_hash = hex::encode(Sha256::digest(format!("{kind:?}|{canonical}").as_bytes()));
        let spec = ExperimentSpec {
            kind,
            sim,
            data,
            params,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            config_hash,
        };
        // unrealizable data is a configuration error
        spec.data.build(&spec.sim.grid()?, spec.sim.seed)?;
        Ok(spec)
    }
}

impl ExperimentSpec {
    pub fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "config_hash": self.config_hash,
            "grid": {
                "n_modes": self.sim.n_modes,
                "period": self.sim.period,
                "dealias": self.sim.dealias,
            },
            "version": env!("CARGO_PKG_VERSION"),
            "kind": self.kind,
        })
    }

    pub fn initial_state(&self) -> Result<WaveState> {
        self.data.build(&self.sim.grid()?, self.sim.seed)
    }
}

/// Runs `f` on a pool capped by `WAVECREST_THREADS` when set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap.map(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build()) {
        Some(Ok(pool)) => pool.install(f),
        _ => f(),
    }
}

/// `(Σ_{j≤1} ‖∂^j 𝐖‖² + ‖|D|^½ ∂^j R‖²)^½`.
pub fn h1_analogue(d: &DiffState) -> f64 {
    let wa = d.wa.as_field();
    let r = d.r.as_field();
    (wa.l2_norm().powi(2)
        + wa.deriv(1).l2_norm().powi(2)
        + sobolev_norm(r, 0.5).powi(2)
        + sobolev_norm(&r.deriv(1), 0.5).powi(2))
    .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifespanRun {
    pub epsilon: f64,
    /// Doubling time, or the last time reached when censored.
    pub t_double: f64,
    pub censored: bool,
    /// Set when the run stopped on a blow-up before doubling.
    pub blowup: Option<String>,
    pub norm0: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifespanResult {
    pub runs: Vec<LifespanRun>,
    /// OLS slope of `log T_double` against `log ε` over runs that doubled
    /// (NaN with fewer than two).
    pub slope: f64,
    pub slope_stderr: f64,
    pub fit_points: usize,
}

/// Time until the norm of [`h1_analogue`] doubles, for one amplitude.
pub fn lifespan_run(data: &InitialData, sim: &SimConfig, t_max: f64) -> Result<LifespanRun> {
    let grid = sim.grid()?;
    let mut s = data.build(&grid, sim.seed)?;
    let eps = match data {
        InitialData::SingleMode { eps, .. } | InitialData::Localized { eps, .. } => *eps,
        InitialData::Random { amp, .. } => *amp,
        _ => f64::NAN,
    };
    let norm0 = h1_analogue(&s.diff_state(sim.c_min)?);
    let mut max_ratio = 1.0f64;
    let n_steps = (t_max / sim.dt).ceil() as usize;
    for k in 1..=n_steps {
        let next = match step(&s, sim) {
            Ok(n) if n.w.is_finite() && n.q.is_finite() => n,
            Ok(_) => return Ok(blown(eps, s.t, norm0, max_ratio, "non-finite state".into())),
            Err(e) => return Ok(blown(eps, s.t, norm0, max_ratio, e.to_string())),
        };
        s = next;
        if k % sim.output_every == 0 || k == n_steps {
            let d = match s.diff_state(sim.c_min) {
                Ok(d) => d,
                Err(e) => return Ok(blown(eps, s.t, norm0, max_ratio, e.to_string())),
            };
            let ratio = h1_analogue(&d) / norm0;
            max_ratio = max_ratio.max(ratio);
            if !ratio.is_finite() {
                return Ok(blown(eps, s.t, norm0, max_ratio, "non-finite norm".into()));
            }
            if ratio >= 2.0 {
                return Ok(LifespanRun {
                    epsilon: eps,
                    t_double: s.t,
                    censored: false,
                    blowup: None,
                    norm0,
                    max_ratio,
                });
            }
        }
    }
    Ok(LifespanRun {
        epsilon: eps,
        t_double: s.t,
        censored: true,
        blowup: None,
        norm0,
        max_ratio,
    })
}

fn blown(eps: f64, t: f64, norm0: f64, max_ratio: f64, reason: String) -> LifespanRun {
    LifespanRun {
        epsilon: eps,
        t_double: t,
        censored: false,
        blowup: Some(reason),
        norm0,
        max_ratio,
    }
}

/// OLS slope and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n < 2 {
        return (f64::NAN, f64::NAN);
    }
    let slope = loglog_slope(x, y);
    if n == 2 {
        return (slope, f64::NAN);
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let intercept = my - slope * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (slope, (ssr / (n as f64 - 2.0) / sxx).sqrt())
}

/// Doubling times over `eps_list`, rescaling the amplitude of the configured data.
pub fn lifespan_scan(spec: &ExperimentSpec) -> Result<LifespanResult> {
    let runs: Vec<Result<LifespanRun>> = with_thread_cap(|| {
        spec.params
            .eps_list
            .par_iter()
            .map(|&e| lifespan_run(&with_amplitude(&spec.data, e), &spec.sim, spec.params.t_max))
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = runs
        .iter()
        .filter(|r| !r.censored && r.blowup.is_none())
        .map(|r| (r.epsilon, r.t_double))
        .unzip();
    let (slope, slope_stderr) = ols_slope(&x, &y);
    Ok(LifespanResult {
        runs,
        slope,
        slope_stderr,
        fit_points: x.len(),
    })
}

fn with_amplitude(data: &InitialData, eps: f64) -> InitialData {
    match data.clone() {
        InitialData::SingleMode { k, traveling, .. } => InitialData::SingleMode { k, eps, traveling },
        InitialData::Localized { width, center, .. } => InitialData::Localized { width, eps, center },
        InitialData::Random { decay, .. } => InitialData::Random { amp: eps, decay },
        other => other,
    }
}

/// Sup norms tracked by the decay probe, with fitted power-law exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    /// Columns: `|W|`, `|W_α|`, `||D|^½ W_α|`, `|R|`, `|R_α|`.
    pub sups: Vec<[f64; 5]>,
    pub exponents: BTreeMap<String, f64>,
    pub horizon: f64,
    pub warning: Option<String>,
}

pub const DECAY_COLUMNS: [&str; 5] = ["sup_W", "sup_Wa", "sup_DhalfWa", "sup_R", "sup_Ra"];

fn decay_sups(s: &WaveState, c_min: f64) -> Result<[f64; 5]> {
    let d = s.diff_state(c_min)?;
    Ok([
        s.w.sup_norm(),
        d.wa.sup_norm(),
        d.wa.frac_deriv(0.5).sup_norm(),
        d.r.sup_norm(),
        d.r.deriv(1).sup_norm(),
    ])
}

/// Evolves the configured data to `t1` and fits `sup ∝ t^p` on `[t0, t1]`.
pub fn decay_probe(spec: &ExperimentSpec) -> Result<DecayReport> {
    let sim = &spec.sim;
    let mut s = spec.initial_state()?;
    let (t0, t1) = (spec.params.t0, spec.params.t1);
    // periodic images reach the crest with relative size (t/L)^{3/2}
    let horizon = sim.period / 4.0;
    let warning = (t1 > horizon).then(|| {
        let msg = format!("fit window end {t1} exceeds wrap-around horizon {horizon:.1}");
        warn!("{msg}");
        msg
    });
    let mut times = vec![s.t];
    let mut sups = vec![decay_sups(&s, sim.c_min)?];
    let n_steps = (t1 / sim.dt - 1e-9).ceil() as usize;
    for k in 1..=n_steps {
        s = step(&s, sim)?;
        if k % sim.output_every == 0 || k == n_steps {
            times.push(s.t);
            sups.push(decay_sups(&s, sim.c_min)?);
        }
    }
    let mut exponents = BTreeMap::new();
    for (c, name) in DECAY_COLUMNS.iter().enumerate() {
        let (x, y): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(&sups)
            .filter(|(t, v)| **t >= t0 - 1e-9 && **t <= t1 + 1e-9 && v[c] > 0.0)
            .map(|(t, v)| (*t, v[c]))
            .unzip();
        exponents.insert(name.to_string(), ols_slope(&x, &y).0);
    }
    Ok(DecayReport {
        times,
        sups,
        exponents,
        horizon,
        warning,
    })
}

/// One row of the identity table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Named residuals of a single seeded state.
fn check_state(
    s: &WaveState,
    c_min: f64,
    hook: Option<&(dyn Fn(&mut DerivedFields) + Sync)>,
) -> Result<Vec<(&'static str, f64, f64)>> {
    let mut d = derive_all(s, c_min)?;
    if let Some(h) = hook {
        h(&mut d);
    }
    let rep = verify_identities(&d);
    let mut out: Vec<(&'static str, f64, f64)> = rep
        .checked()
        .iter()
        .map(|&(n, v)| (n, v, IDENTITY_TOL))
        .collect();
    out.push(("r_minus_f", rf_minus_r(s, c_min)?.sup_norm(), IDENTITY_TOL));
    // min(1+a) enters as its shortfall below 1
    out.push(("taylor_sign", (1.0 - taylor_sign(&d)).max(0.0), IDENTITY_TOL));
    let pp = paraproducts(&d.wa, &d.r)?;
    let recon = (&pp.sum() - &d.wa.product(&d.r)?).sup_norm();
    out.push(("paraproduct", recon, IDENTITY_TOL));
    let f = s.q.as_field() + &s.w.conj();
    let i = Complex64::new(0.0, 1.0);
    let p_sum = (&(f.project_p() + f.project_pbar()) - &f).sup_norm();
    let rot = (&(f.mul_i().project_pr() * -i) - &f.project_pi()).sup_norm();
    let orth = f.project_pbar_r().project_pi().sup_norm();
    let split = (&(f.project_pi() + f.project_pbar_r()) - &f).sup_norm();
    out.push(("projector_sum", p_sum, IDENTITY_TOL));
    out.push(("projector_rotation", rot, IDENTITY_TOL));
    out.push(("projector_orthogonality", orth, IDENTITY_TOL));
    out.push(("projector_split", split, IDENTITY_TOL));
    out.push(("nf_crosscheck", nf_residual(s, c_min)?.crosscheck, 1e-9));
    Ok(out)
}

/// Identity table over `count` seeded random states on `n_modes` nodes.
pub fn verify_suite(seed: u64, count: usize, n_modes: usize) -> Result<Vec<CheckRow>> {
    verify_suite_with_hook(seed, count, n_modes, None)
}

/// As [`verify_suite`], with a hook applied to every derived bundle before
/// the identity checks.
pub fn verify_suite_with_hook(
    seed: u64,
    count: usize,
    n_modes: usize,
    hook: Option<&(dyn Fn(&mut DerivedFields) + Sync)>,
) -> Result<Vec<CheckRow>> {
    let grid = Grid::new(n_modes, 2.0 * std::f64::consts::PI)?;
    let c_min = crate::state::DEFAULT_C_MIN;
    let per_seed: Vec<Result<Vec<(&'static str, f64, f64)>>> = with_thread_cap(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|i| check_state(&random_state(&grid, seed.wrapping_add(i), 0.1, 0.5), c_min, hook))
            .collect()
    });
    let mut rows: Vec<CheckRow> = Vec::new();
    for res in per_seed {
        for (name, v, tol) in res? {
            match rows.iter_mut().find(|r| r.name == name) {
                Some(r) => {
                    r.max_residual = if v.is_nan() { v } else { r.max_residual.max(v) };
                }
                None => rows.push(CheckRow {
                    name: name.to_string(),
                    max_residual: v,
                    tolerance: tol,
                    pass: true,
                }),
            }
        }
    }
    for r in &mut rows {
        r.pass = r.max_residual <= r.tolerance;
    }
    Ok(rows)
}

#[derive(Parser, Debug)]
#[command(name = "wavecrest", version, about = "Pseudospectral deep-water wave simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key-value TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set eps=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Evolve the configured data and write diagnostics and snapshots.
    Simulate,
    /// Run the identity suite over seeded random states.
    Verify,
    /// Normal-form remainder norms over an amplitude list.
    NfScan,
    /// Doubling times over an amplitude list.
    Lifespan,
    /// Sup-norm decay of localized data.
    Decay,
    /// Frequency envelope of the initial data.
    Envelope,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Simulate => ExperimentKind::Simulate,
            Command::Verify => ExperimentKind::Verify,
            Command::NfScan => ExperimentKind::NfScan,
            Command::Lifespan => ExperimentKind::Lifespan,
            Command::Decay => ExperimentKind::Decay,
            Command::Envelope => ExperimentKind::Envelope,
        }
    }
}

/// Entry point; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let kind = cli.command.kind();
    let spec = match prepare(&cli, kind) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    match execute(&spec) {
        Ok(code) => code,
        Err(e @ WaveError::BlowUp { .. }) => {
            eprintln!("blow-up: {e}");
            EXIT_BLOWUP
        }
        Err(e @ (WaveError::Config(_) | WaveError::NotHolomorphic { .. } | WaveError::SteepSurface(_))) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILED_CHECK
        }
    }
}

fn prepare(cli: &Cli, kind: ExperimentKind) -> Result<ExperimentSpec> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| WaveError::Config("missing --config <path>".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| WaveError::Config(format!("cannot read config {}: {e}", path.display())))?;
    load_config(&text, &cli.overrides)?.resolve(kind)
}

/// Output files with a provenance first line.
struct Outputs {
    dir: PathBuf,
    provenance: serde_json::Value,
}

impl Outputs {
    fn new(spec: &ExperimentSpec) -> Result<Self> {
        fs::create_dir_all(&spec.output_dir)?;
        Ok(Outputs {
            dir: spec.output_dir.clone(),
            provenance: spec.provenance(),
        })
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut f = BufWriter::new(File::create(self.dir.join(name))?);
        writeln!(f, "# provenance: {}", self.provenance)?;
        writeln!(f, "{}", header.join(","))?;
        for r in rows {
            writeln!(f, "{}", r.join(","))?;
        }
        f.flush()?;
        Ok(())
    }

    fn json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        let doc = serde_json::json!({ "provenance": self.provenance, "result": value });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| WaveError::Format(e.to_string()))?;
        fs::write(self.dir.join(name), text + "\n")?;
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn execute(spec: &ExperimentSpec) -> Result<i32> {
    let out = Outputs::new(spec)?;
    info!("running {:?} into {}", spec.kind, spec.output_dir.display());
    match spec.kind {
        ExperimentKind::Simulate => simulate(spec, &out),
        ExperimentKind::Verify => {
            let rows = verify_suite(spec.sim.seed, spec.params.count, spec.sim.n_modes)?;
            let all = rows.iter().all(|r| r.pass);
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![r.name.clone(), num(r.max_residual), num(r.tolerance), r.pass.to_string()])
                .collect();
            out.csv("summary.csv", &["identity", "max_residual", "tolerance", "pass"], &table)?;
            for r in &rows {
                println!("{:<26} {:>12.3e}  {}", r.name, r.max_residual, if r.pass { "PASS" } else { "FAIL" });
            }
            Ok(if all { EXIT_OK } else { EXIT_FAILED_CHECK })
        }
        ExperimentKind::NfScan => {
            let base = spec.initial_state()?;
            let rows = nf_scan(&base, &spec.params.eps_list, spec.sim.c_min)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![num(r.epsilon), num(r.norm_g), num(r.norm_k), num(r.crosscheck_residual)])
                .collect();
            out.csv("summary.csv", &["epsilon", "normG", "normK", "crosscheck_residual"], &table)?;
            let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
            let tot: Vec<f64> = rows.iter().map(|r| r.norm_g.hypot(r.norm_k)).collect();
            println!("slope {:.4}", loglog_slope(&eps, &tot));
            Ok(EXIT_OK)
        }
        ExperimentKind::Lifespan => {
            let res = lifespan_scan(spec)?;
            let table: Vec<Vec<String>> = res
                .runs
                .iter()
                .map(|r| {
                    vec![
                        num(r.epsilon),
                        num(r.t_double),
                        r.censored.to_string(),
                        num(r.max_ratio),
                        r.blowup.clone().unwrap_or_default().replace(',', ";"),
                    ]
                })
                .collect();
            out.csv("summary.csv", &["epsilon", "t_double", "censored", "max_ratio", "blowup"], &table)?;
            out.json("lifespan.json", &res)?;
            println!("slope {:.4} +- {:.4} over {} points", res.slope, res.slope_stderr, res.fit_points);
            Ok(EXIT_OK)
        }
        ExperimentKind::Decay => {
            let rep = decay_probe(spec)?;
            let table: Vec<Vec<String>> = rep
                .times
                .iter()
                .zip(&rep.sups)
                .map(|(t, v)| std::iter::once(num(*t)).chain(v.iter().map(|x| num(*x))).collect())
                .collect();
            let mut header = vec!["t"];
            header.extend(DECAY_COLUMNS);
            out.csv("summary.csv", &header, &table)?;
            out.json("decay.json", &rep)?;
            for (k, v) in &rep.exponents {
                println!("{k:<12} exponent {v:.4}");
            }
            Ok(EXIT_OK)
        }
        ExperimentKind::Envelope => {
            let s = spec.initial_state()?;
            let d = s.diff_state(spec.sim.c_min)?;
            let norms = block_norms(&d.wa);
            let env = Envelope::from_block_norms(&norms, spec.params.delta)?;
            let table: Vec<Vec<String>> = norms
                .iter()
                .zip(&env.values)
                .enumerate()
                .map(|(k, (n, c))| vec![k.to_string(), num(*n), num(*c)])
                .collect();
            out.csv("summary.csv", &["block", "norm", "envelope"], &table)?;
            Ok(EXIT_OK)
        }
    }
}

fn simulate(spec: &ExperimentSpec, out: &Outputs) -> Result<i32> {
    let s0 = spec.initial_state()?;
    let snap_dir = out.dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    let mut diag = BufWriter::new(File::create(out.dir.join("diagnostics.jsonl"))?);
    writeln!(diag, "{}", serde_json::json!({ "provenance": out.provenance }))?;
    let mut first_e = None;
    let mut last_e = 0.0;
    let mut last_t = s0.t;
    let result = run(&s0, &spec.sim, |s, rec| {
        let line = serde_json::to_string(rec).map_err(|e| WaveError::Format(e.to_string()))?;
        writeln!(diag, "{line}")?;
        write_snapshot_file(&snap_dir, s, &out.provenance)?;
        first_e.get_or_insert(rec.e);
        last_e = rec.e;
        last_t = s.t;
        Ok(())
    });
    diag.flush()?;
    let e0 = first_e.unwrap_or(0.0);
    let drift = if e0 != 0.0 { (last_e - e0).abs() / e0.abs() } else { (last_e - e0).abs() };
    let header = ["t_final", "steps", "E_initial", "E_final", "E_rel_drift", "status", "flags"];
    match result {
        Ok(sum) => {
            let row = vec![
                num(sum.final_state.t),
                sum.steps.to_string(),
                num(e0),
                num(last_e),
                num(drift),
                "ok".into(),
                sum.flags.join("; ").replace(',', ";"),
            ];
            out.csv("summary.csv", &header, &[row])?;
            Ok(EXIT_OK)
        }
        Err(e @ WaveError::BlowUp { .. }) => {
            let row = vec![
                num(last_t),
                String::new(),
                num(e0),
                num(last_e),
                num(drift),
                "blowup".into(),
                e.to_string().replace(',', ";"),
            ];
            out.csv("summary.csv", &header, &[row])?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

fn write_snapshot_file(dir: &Path, s: &WaveState, provenance: &serde_json::Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(dir.join(format!("t_{:.6}.bin", s.t)))?);
    write_snapshot(&mut f, s, Some(provenance.clone()))?;
    f.flush()?;
    Ok(())
}
