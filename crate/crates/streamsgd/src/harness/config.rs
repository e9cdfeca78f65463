//! Run configuration: TOML schema, named presets and resolution into a [`RunConfig`].

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bandit::{arm_optimality_margin, example_arms, exploration_cutoff, never_optimal_arms};
use crate::datagen::{
    CovariateKind, InitKind, NoiseKind, ProblemSpec, StreamConfig, DEFAULT_HISTORY_WINDOW,
};
use crate::error::{Error, Result};
use crate::numerics::{Rng, Stream};
use crate::record::LogSchedule;
use crate::schedules::{ExplorationSchedule, TwoPhaseSchedule, WarmStart};
use crate::sgd_sparse::{GWindow, SparseOptions, SupportMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Regress,
    Sparse,
    Bandit,
    Infer,
    Verify,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Regress => "regress",
            Self::Sparse => "sparse",
            Self::Bandit => "bandit",
            Self::Infer => "infer",
            Self::Verify => "verify",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateName {
    Iid,
    SphereAr,
    WeightedHistory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitName {
    Gaussian,
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseName {
    Iid,
    DependentSign,
}

/// Shorthand for a whole stream configuration inside a variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamsName {
    Iid,
    Dependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Fixed,
    OracleLocal,
    OracleCumulative,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowName {
    Local,
    Cumulative,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProblem {
    pub dim: Option<usize>,
    pub sigma: Option<f64>,
    pub beta: Option<Vec<f64>>,
    pub sparsity: Option<usize>,
    /// 1-based coordinates.
    pub support: Option<Vec<usize>>,
    pub values: Option<Vec<f64>>,
    /// `||beta*|| / E|xi|` for generated sparse signals.
    pub snr: Option<f64>,
    pub arms: Option<Vec<Vec<f64>>>,
    pub num_arms: Option<usize>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProcess {
    pub covariates: Option<CovariateName>,
    pub correlation: Option<f64>,
    pub window: Option<usize>,
    pub init: Option<InitName>,
    pub noise: Option<NoiseName>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSchedule {
    pub c_a: Option<f64>,
    pub c_b: Option<f64>,
    pub lambda_min: Option<f64>,
    pub constant_eta: Option<f64>,
    pub warm_steps: Option<u64>,
    pub warm_threshold: Option<f64>,
    pub warm_max_steps: Option<u64>,
    pub explore: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSparse {
    pub mode: Option<ModeName>,
    pub window: Option<WindowName>,
    /// 1-based coordinates.
    pub initial_support: Option<Vec<usize>>,
    pub extra_initial: Option<usize>,
    pub rho: Option<f64>,
    pub min_gap: Option<u64>,
    pub s_max: Option<usize>,
    pub max_updates: Option<usize>,
    pub c_sched: Option<f64>,
    pub compare_dense: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInfer {
    pub level: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVerify {
    pub eigen_matrices: Option<usize>,
    pub eigen_max_dim: Option<usize>,
    pub region_specs: Option<usize>,
    pub region_samples: Option<usize>,
    pub region_dim: Option<usize>,
    pub cone_pairs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVariant {
    pub label: String,
    pub c_a: Option<f64>,
    pub c_b: Option<f64>,
    pub explore: Option<String>,
    pub streams: Option<StreamsName>,
    pub mode: Option<ModeName>,
}

/// Provenance block written into manifests; ignored when resolving.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub preset: Option<String>,
}

/// Config file contents before defaults are applied. Every field is optional
/// so presets, files and command-line flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub kind: Option<ExperimentKind>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    pub replications: Option<usize>,
    /// `0` selects a geometric grid.
    pub log_stride: Option<u64>,
    pub log_ratio: Option<f64>,
    pub out: Option<PathBuf>,
    pub plot: Option<bool>,
    pub jobs: Option<usize>,
    pub scale: Option<f64>,
    pub manifest: Option<ManifestInfo>,
    pub problem: Option<RawProblem>,
    pub process: Option<RawProcess>,
    pub schedule: Option<RawSchedule>,
    pub sparse: Option<RawSparse>,
    pub infer: Option<RawInfer>,
    pub verify: Option<RawVerify>,
    #[serde(rename = "variant")]
    pub variants: Option<Vec<RawVariant>>,
}

macro_rules! overlay {
    ($base:expr, $over:expr; $($f:ident),* $(,)?) => {
        $( if $over.$f.is_some() { $base.$f = $over.$f; } )*
    };
}

fn overlay_section<T: Default>(base: &mut Option<T>, over: Option<T>, f: impl FnOnce(&mut T, T)) {
    if let Some(o) = over {
        f(base.get_or_insert_with(T::default), o);
    }
}

impl RawConfig {
    /// Fields set in `over` replace those in `self`; variant lists are replaced whole.
    pub fn overlay(mut self, over: RawConfig) -> RawConfig {
        overlay!(self, over; kind, preset, seed, horizon, replications, log_stride, log_ratio, out, plot, jobs, scale, manifest, variants);
        overlay_section(&mut self.problem, over.problem, |b, o| {
            overlay!(b, o; dim, sigma, beta, sparsity, support, values, snr, arms, num_arms, lambda_min, lambda_max);
        });
        overlay_section(&mut self.process, over.process, |b, o| {
            overlay!(b, o; covariates, correlation, window, init, noise);
        });
        overlay_section(&mut self.schedule, over.schedule, |b, o| {
            overlay!(b, o; c_a, c_b, lambda_min, constant_eta, warm_steps, warm_threshold, warm_max_steps, explore);
        });
        overlay_section(&mut self.sparse, over.sparse, |b, o| {
            overlay!(b, o; mode, window, initial_support, extra_initial, rho, min_gap, s_max, max_updates, c_sched, compare_dense);
        });
        overlay_section(&mut self.infer, over.infer, |b, o| {
            overlay!(b, o; level);
        });
        overlay_section(&mut self.verify, over.verify, |b, o| {
            overlay!(b, o; eigen_matrices, eigen_max_dim, region_specs, region_samples, region_dim, cone_pairs);
        });
        self
    }

    /// Canonical TOML text, without the manifest block.
    pub fn to_toml(&self) -> Result<String> {
        let mut c = self.clone();
        c.manifest = None;
        toml::to_string(&c).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of [`RawConfig::to_toml`], hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}

/// Parses config text; unknown keys and type mismatches are errors.
pub fn parse_raw(text: &str) -> Result<RawConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// Parses and fully resolves config text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    RunConfig::resolve(parse_raw(text)?)
}

const PRESETS: &[(&str, &str)] = &[
    (
        "fig-lr",
        r#"
kind = "regress"
horizon = 999999
replications = 20
[problem]
dim = 99
[schedule]
c_a = 3.0
c_b = 100.0
[[variant]]
label = "iid"
streams = "iid"
[[variant]]
label = "dependent"
streams = "dependent"
"#,
    ),
    (
        "fig-lr-ca",
        r#"
kind = "regress"
horizon = 999999
replications = 20
[problem]
dim = 99
[schedule]
c_b = 100.0
[[variant]]
label = "C_a=3"
c_a = 3.0
[[variant]]
label = "C_a=10"
c_a = 10.0
[[variant]]
label = "C_a=50"
c_a = 50.0
"#,
    ),
    (
        "fig-lr-cb",
        r#"
kind = "regress"
horizon = 999999
replications = 20
[problem]
dim = 99
[schedule]
c_a = 3.0
[[variant]]
label = "C_b=5"
c_b = 5.0
[[variant]]
label = "C_b=100"
c_b = 100.0
[[variant]]
label = "C_b=1000"
c_b = 1000.0
"#,
    ),
    (
        "fig-lr-ca-dep",
        r#"
kind = "regress"
horizon = 999999
replications = 20
[problem]
dim = 99
[process]
covariates = "sphere-ar"
noise = "dependent-sign"
[schedule]
c_b = 100.0
[[variant]]
label = "C_a=3"
c_a = 3.0
[[variant]]
label = "C_a=10"
c_a = 10.0
[[variant]]
label = "C_a=50"
c_a = 50.0
"#,
    ),
    (
        "fig-lr-cb-dep",
        r#"
kind = "regress"
horizon = 999999
replications = 20
[problem]
dim = 99
[process]
covariates = "sphere-ar"
noise = "dependent-sign"
[schedule]
c_a = 3.0
[[variant]]
label = "C_b=5"
c_b = 5.0
[[variant]]
label = "C_b=100"
c_b = 100.0
[[variant]]
label = "C_b=1000"
c_b = 1000.0
"#,
    ),
    (
        "fig-lsr-low-snr",
        r#"
kind = "sparse"
horizon = 9999999
replications = 10
[problem]
dim = 99
sparsity = 4
snr = 5.0
[process]
covariates = "sphere-ar"
noise = "dependent-sign"
[schedule]
c_a = 3.0
c_b = 100.0
[sparse]
mode = "heuristic"
extra_initial = 2
max_updates = 7
compare_dense = true
"#,
    ),
    (
        "fig-lsr-high-snr",
        r#"
kind = "sparse"
horizon = 9999999
replications = 10
[problem]
dim = 99
sparsity = 4
snr = 500.0
[process]
covariates = "sphere-ar"
noise = "dependent-sign"
[schedule]
c_a = 3.0
c_b = 100.0
[sparse]
mode = "heuristic"
extra_initial = 2
compare_dense = true
"#,
    ),
    (
        "fig-lbd",
        r#"
kind = "bandit"
horizon = 999999
replications = 20
[problem]
dim = 20
num_arms = 5
[process]
covariates = "sphere-ar"
noise = "dependent-sign"
[schedule]
c_a = 20.0
c_b = 50.0
lambda_min = 1.0
[[variant]]
label = "pi=1/2"
explore = "constant:0.5"
[[variant]]
label = "pi=5/sqrt(t-t1+50)"
explore = "shifted:5,50,0.5"
[[variant]]
label = "pi=5/(t-t1+50)"
explore = "shifted:5,50,1"
"#,
    ),
    (
        "fig-lbd-aware",
        r#"
kind = "bandit"
horizon = 100000
replications = 20
[problem]
dim = 2
num_arms = 5
[process]
covariates = "sphere-ar"
noise = "dependent-sign"
[schedule]
c_a = 20.0
c_b = 50.0
lambda_min = 1.0
[[variant]]
label = "pi=1/2"
explore = "constant:0.5"
[[variant]]
label = "margin-aware cutoff"
explore = "two-phase-zero:auto,0.5"
"#,
    ),
    (
        "infer-basic",
        r#"
kind = "infer"
horizon = 100000
replications = 500
[problem]
dim = 2
num_arms = 1
[schedule]
c_a = 3.0
c_b = 100.0
warm_steps = 0
[infer]
level = 0.95
"#,
    ),
    (
        "verify-basic",
        r#"
kind = "verify"
"#,
    ),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> Result<RawConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        Error::Config(format!(
            "unknown preset `{name}`; known: {}",
            preset_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    let mut raw = parse_raw(text)?;
    raw.preset = Some(name.to_string());
    Ok(raw)
}

/// Layers `user` over the named preset (if any), then applies `scale` to the
/// dimension and horizon. The result names no preset or scale and resolves
/// to the same run on its own.
pub fn expand(user: RawConfig) -> Result<RawConfig> {
    let mut raw = match &user.preset {
        Some(name) if user.manifest.is_none() => preset(name)?.overlay(user),
        _ => user,
    };
    if let Some(scale) = raw.scale.take() {
        apply_scale(&mut raw, scale)?;
    }
    raw.preset = None;
    raw.manifest = None;
    Ok(raw)
}

fn apply_scale(raw: &mut RawConfig, scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Config(format!(
            "scale must be positive, got {scale}"
        )));
    }
    if scale == 1.0 {
        return Ok(());
    }
    if let Some(p) = raw.problem.as_mut() {
        if p.beta.is_some() || p.arms.is_some() || p.support.is_some() {
            return Err(Error::Config(
                "scale cannot resize explicit beta, arms or support".into(),
            ));
        }
        if let Some(d) = p.dim {
            let floor = p.sparsity.map_or(2, |s| (2 * s).max(2));
            p.dim = Some(((d as f64 * scale).round() as usize).max(floor));
        }
    }
    if let Some(t) = raw.horizon {
        raw.horizon = Some(((t as f64 * scale).round() as u64).max(1));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferOptions {
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub eigen_matrices: usize,
    pub eigen_max_dim: usize,
    pub region_specs: usize,
    pub region_samples: usize,
    pub region_dim: usize,
    pub cone_pairs: usize,
}

/// One series of an experiment: its own problem (eigenvalue bounds depend on
/// the stream), stream, schedule and exploration.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    pub spec: ProblemSpec,
    pub streams: StreamConfig,
    pub schedule: TwoPhaseSchedule,
    pub explore: ExplorationSchedule,
    pub sparse: SparseOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub preset: Option<String>,
    pub seed: u64,
    pub horizon: u64,
    pub replications: usize,
    pub log: LogSchedule,
    pub out: PathBuf,
    pub plot: bool,
    pub jobs: usize,
    pub variants: Vec<Variant>,
    pub infer: InferOptions,
    pub verify: VerifyOptions,
    /// Expanded input this config was resolved from; written to the manifest.
    pub source: RawConfig,
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing required key `{key}`"))
}

fn to_zero_based(v: &[usize], what: &str, dim: usize) -> Result<Vec<usize>> {
    v.iter()
        .map(|&i| {
            if i == 0 || i > dim {
                Err(Error::Config(format!("{what} index {i} outside 1..={dim}")))
            } else {
                Ok(i - 1)
            }
        })
        .collect()
}

/// Relative magnitudes for a generated `s`-sparse signal of unit norm: the
/// largest entry carries 0.8 of the norm, the smallest 0.0008, the rest share
/// the remainder. Signs alternate.
pub fn sparse_profile(s: usize) -> Vec<f64> {
    let mags = match s {
        0 => Vec::new(),
        1 => vec![1.0],
        2 => vec![0.8, 0.6],
        _ => {
            let small: f64 = 0.0008;
            let mid = ((0.36 - small * small) / (s - 2) as f64).sqrt();
            let mut v = vec![0.8];
            v.extend(std::iter::repeat(mid).take(s - 2));
            v.push(small);
            v
        }
    };
    mags.into_iter()
        .enumerate()
        .map(|(k, m)| if k % 2 == 0 { m } else { -m })
        .collect()
}

/// `s` coordinates spread evenly over `0..d`.
pub fn spread_support(d: usize, s: usize) -> Vec<usize> {
    (0..s).map(|j| (2 * j + 1) * d / (2 * s)).collect()
}

fn stream_config(p: &RawProcess) -> StreamConfig {
    let covariates = match p.covariates.unwrap_or(CovariateName::Iid) {
        CovariateName::Iid => CovariateKind::IidGaussian {
            correlation: p.correlation.unwrap_or(0.0),
        },
        CovariateName::SphereAr => CovariateKind::SphereAr,
        CovariateName::WeightedHistory => CovariateKind::WeightedHistory {
            window: p.window.unwrap_or(DEFAULT_HISTORY_WINDOW),
        },
    };
    StreamConfig {
        covariates,
        init: match p.init.unwrap_or(InitName::Gaussian) {
            InitName::Gaussian => InitKind::Gaussian,
            InitName::Sphere => InitKind::Sphere,
        },
        noise: match p.noise.unwrap_or(NoiseName::Iid) {
            NoiseName::Iid => NoiseKind::IidGaussian,
            NoiseName::DependentSign => NoiseKind::DependentSign,
        },
    }
}

fn support_mode(m: ModeName) -> SupportMode {
    match m {
        ModeName::Fixed => SupportMode::FixedSupport,
        ModeName::OracleLocal => SupportMode::OracleLocal,
        ModeName::OracleCumulative => SupportMode::OracleCumulative,
        ModeName::Heuristic => SupportMode::Heuristic,
    }
}

fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{v}` in exploration schedule")))
        })
        .collect()
}

/// Parses `constant:r`, `harmonic:c`, `power:c,p`, `two-phase-zero:t1,rate`
/// (`t1` may be `auto`) and `shifted:scale,offset,power[,start[,pre_rate]]`.
/// `start` defaults to `warm`, `pre_rate` to 0.5.
pub fn parse_explore(
    text: &str,
    warm: u64,
    auto_t1: impl FnOnce() -> Result<u64>,
) -> Result<ExplorationSchedule> {
    let (name, args) = text.split_once(':').unwrap_or((text, ""));
    let bad = || Error::Config(format!("cannot parse exploration schedule `{text}`"));
    let sched = match name.trim() {
        "constant" => match parse_numbers(args)?[..] {
            [rate] => ExplorationSchedule::ConstantPi { rate },
            _ => return Err(bad()),
        },
        "harmonic" => match parse_numbers(args)?[..] {
            [c_pi] => ExplorationSchedule::Harmonic { c_pi },
            _ => return Err(bad()),
        },
        "power" => match parse_numbers(args)?[..] {
            [c_pi, p] => ExplorationSchedule::Power { c_pi, p },
            _ => return Err(bad()),
        },
        "two-phase-zero" => {
            let (t1, rate) = args.split_once(',').ok_or_else(bad)?;
            let rate = parse_numbers(rate)?.first().copied().ok_or_else(bad)?;
            let t1 = match t1.trim() {
                "auto" => auto_t1()?,
                v => v.parse::<u64>().map_err(|_| bad())?,
            };
            ExplorationSchedule::TwoPhaseZero { t1, rate }
        }
        "shifted" => {
            let v = parse_numbers(args)?;
            if !(3..=5).contains(&v.len()) {
                return Err(bad());
            }
            let start = match v.get(3) {
                Some(&s) if s >= 0.0 && s.fract() == 0.0 => s as u64,
                Some(_) => return Err(bad()),
                None => warm,
            };
            ExplorationSchedule::Shifted {
                scale: v[0],
                offset: v[1],
                power: v[2],
                start,
                pre_rate: v.get(4).copied().unwrap_or(0.5),
            }
        }
        _ => return Err(bad()),
    };
    sched.validate()?;
    Ok(sched)
}

impl RunConfig {
    /// Applies presets, scale and defaults, and validates everything.
    pub fn resolve(user: RawConfig) -> Result<RunConfig> {
        let preset = user
            .preset
            .clone()
            .or_else(|| user.manifest.as_ref().and_then(|m| m.preset.clone()));
        let raw = expand(user)?;
        let kind = raw.kind.ok_or_else(|| missing("kind"))?;
        let seed = raw.seed.ok_or_else(|| missing("seed"))?;
        let problem = raw.problem.clone().unwrap_or_default();
        let process = raw.process.clone().unwrap_or_default();
        let sched_raw = raw.schedule.clone().unwrap_or_default();
        let sparse_raw = raw.sparse.clone().unwrap_or_default();

        let horizon = match kind {
            ExperimentKind::Verify => raw.horizon.unwrap_or(0),
            _ => raw.horizon.ok_or_else(|| missing("horizon"))?,
        };
        let log = match raw.log_stride.unwrap_or(0) {
            0 => LogSchedule::Geometric {
                ratio: raw.log_ratio.unwrap_or(1.2),
            },
            n => LogSchedule::Every(n),
        };
        if let Some(r) = raw.log_ratio {
            if !(r > 1.0) {
                return Err(Error::Config(format!("log_ratio must exceed 1, got {r}")));
            }
        }
        let replications = raw.replications.unwrap_or(1);
        if replications == 0 && kind != ExperimentKind::Verify {
            return Err(Error::Config("replications must be >= 1".into()));
        }

        let variants = if kind == ExperimentKind::Verify {
            Vec::new()
        } else {
            let base = stream_config(&process);
            let raw_variants = raw.variants.clone().unwrap_or_else(|| {
                vec![RawVariant {
                    label: "default".into(),
                    ..RawVariant::default()
                }]
            });
            if raw_variants.is_empty() {
                return Err(Error::Config("at least one [[variant]] is required".into()));
            }
            let mut labels = std::collections::BTreeSet::new();
            let mut out = Vec::with_capacity(raw_variants.len());
            for v in &raw_variants {
                if !labels.insert(v.label.clone()) {
                    return Err(Error::Config(format!(
                        "duplicate variant label `{}`",
                        v.label
                    )));
                }
                let streams = match v.streams {
                    Some(StreamsName::Iid) => StreamConfig::iid(),
                    Some(StreamsName::Dependent) => StreamConfig::dependent(),
                    None => base,
                };
                out.push(resolve_variant(
                    kind,
                    seed,
                    &problem,
                    &sched_raw,
                    &sparse_raw,
                    v,
                    streams,
                )?);
            }
            out
        };

        let level = raw.infer.as_ref().and_then(|i| i.level).unwrap_or(0.95);
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::Config(format!(
                "infer.level must lie in [0, 1], got {level}"
            )));
        }
        let v = raw.verify.clone().unwrap_or_default();
        Ok(RunConfig {
            kind,
            preset,
            seed,
            horizon,
            replications,
            log,
            out: raw.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            plot: raw.plot.unwrap_or(false),
            jobs: raw.jobs.unwrap_or(0),
            variants,
            infer: InferOptions { level },
            verify: VerifyOptions {
                eigen_matrices: v.eigen_matrices.unwrap_or(100),
                eigen_max_dim: v.eigen_max_dim.unwrap_or(30).max(1),
                region_specs: v.region_specs.unwrap_or(5),
                region_samples: v.region_samples.unwrap_or(100_000),
                region_dim: v.region_dim.unwrap_or(3).max(2),
                cone_pairs: v.cone_pairs.unwrap_or(10_000),
            },
            source: raw,
        })
    }

    pub fn manifest(&self) -> Result<String> {
        let mut m = self.source.clone();
        m.manifest = Some(ManifestInfo {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.source.hash()?,
            seed: self.seed,
            preset: self.preset.clone(),
        });
        toml::to_string(&m).map_err(|e| Error::Config(e.to_string()))
    }
}

fn resolve_problem(
    kind: ExperimentKind,
    p: &RawProblem,
    streams: &StreamConfig,
) -> Result<ProblemSpec> {
    let sigma = p.sigma.unwrap_or(1.0);
    let mut spec = match kind {
        ExperimentKind::Regress => {
            let beta = match (&p.beta, p.dim) {
                (Some(b), Some(d)) if b.len() != d => {
                    return Err(Error::Config(format!(
                        "beta has {} entries but dim = {d}",
                        b.len()
                    )))
                }
                (Some(b), _) => b.clone(),
                (None, Some(d)) => vec![1.0; d],
                (None, None) => return Err(missing("problem.dim")),
            };
            ProblemSpec::regression(beta, sigma)
        }
        ExperimentKind::Sparse => {
            let d = p.dim.ok_or_else(|| missing("problem.dim"))?;
            let (support, values) = match (&p.support, &p.values) {
                (Some(s), Some(v)) => (to_zero_based(s, "support", d)?, v.clone()),
                (Some(_), None) | (None, Some(_)) => {
                    return Err(Error::Config(
                        "support and values must be given together".into(),
                    ))
                }
                (None, None) => {
                    let s = p.sparsity.ok_or_else(|| missing("problem.sparsity"))?;
                    if s == 0 || s > d {
                        return Err(Error::Config(format!("sparsity {s} must lie in 1..={d}")));
                    }
                    let norm = p.snr.unwrap_or(5.0) * sigma * (2.0 / std::f64::consts::PI).sqrt();
                    let values = sparse_profile(s).into_iter().map(|v| v * norm).collect();
                    (spread_support(d, s), values)
                }
            };
            ProblemSpec::sparse(d, &support, &values, sigma)?
        }
        ExperimentKind::Bandit | ExperimentKind::Infer => {
            let arms = match (&p.arms, &p.beta) {
                (Some(a), _) => a.clone(),
                (None, Some(b)) => vec![b.clone()],
                (None, None) => {
                    let d = p.dim.ok_or_else(|| missing("problem.dim"))?;
                    let k = p
                        .num_arms
                        .unwrap_or(if kind == ExperimentKind::Infer { 1 } else { 5 });
                    if k == 1 {
                        vec![vec![1.0; d]]
                    } else {
                        example_arms(d, k)?
                    }
                }
            };
            if let Some(d) = p.dim {
                if arms.iter().any(|a| a.len() != d) {
                    return Err(Error::Config(format!("arm length differs from dim = {d}")));
                }
            }
            if kind == ExperimentKind::Bandit && arms.len() < 2 {
                return Err(Error::Config("bandit runs need at least two arms".into()));
            }
            ProblemSpec::bandit(arms, sigma)
        }
        ExperimentKind::Verify => unreachable!("verify has no problem"),
    };
    let (lmin, lmax) = streams.covariates.second_moment_bounds(spec.dim)?;
    spec = spec.with_lambdas(
        p.lambda_min.unwrap_or(lmin),
        Some(p.lambda_max.unwrap_or(lmax)),
    );
    spec.validate()?;
    Ok(spec)
}

#[allow(clippy::too_many_arguments)]
fn resolve_variant(
    kind: ExperimentKind,
    seed: u64,
    problem: &RawProblem,
    s: &RawSchedule,
    sp: &RawSparse,
    v: &RawVariant,
    streams: StreamConfig,
) -> Result<Variant> {
    let spec = resolve_problem(kind, problem, &streams)?;
    let d = spec.dim as f64;
    let lmin = spec.lambda_min;
    let lmax = spec.lambda_max.unwrap_or(lmin);
    let bandit_like = matches!(kind, ExperimentKind::Bandit | ExperimentKind::Infer);
    let constant_eta = s.constant_eta.unwrap_or(if bandit_like {
        lmin / (d * lmax * lmax)
    } else {
        lmin / (2.0 * d * lmax * lmax)
    });
    let warm_start = match (s.warm_steps, s.warm_threshold) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "set warm_steps or warm_threshold, not both".into(),
            ))
        }
        (Some(n), None) => WarmStart::Steps(n),
        (None, Some(threshold)) => WarmStart::Oracle {
            threshold,
            max_steps: s.warm_max_steps.unwrap_or(1000 * spec.dim as u64),
        },
        (None, None) if kind == ExperimentKind::Bandit => WarmStart::Steps(10 * spec.dim as u64),
        (None, None) if kind == ExperimentKind::Infer => WarmStart::Steps(0),
        (None, None) => WarmStart::Oracle {
            threshold: spec.sigma * spec.sigma / lmax,
            max_steps: s.warm_max_steps.unwrap_or(1000 * spec.dim as u64),
        },
    };
    let schedule = TwoPhaseSchedule {
        constant_eta,
        warm_start,
        c_a: v.c_a.or(s.c_a).unwrap_or(3.0),
        c_b: v.c_b.or(s.c_b).unwrap_or(100.0),
        lambda_min: s.lambda_min.unwrap_or(lmin),
    };
    // surfaces invalid constants before any run starts
    schedule.decaying(1.0, 0)?;
    if !(constant_eta > 0.0 && constant_eta.is_finite()) {
        return Err(Error::Config(format!(
            "constant_eta must be positive, got {constant_eta}"
        )));
    }

    let warm_steps = match warm_start {
        WarmStart::Steps(n) => n,
        WarmStart::Oracle { .. } => 0,
    };
    let default_explore = if kind == ExperimentKind::Infer && spec.num_arms() == 1 {
        "constant:1"
    } else {
        "constant:0.5"
    };
    let explore_text = v
        .explore
        .clone()
        .or_else(|| s.explore.clone())
        .unwrap_or_else(|| default_explore.into());
    let explore = parse_explore(&explore_text, warm_steps, || {
        let mut rng = Rng::substream(seed, u64::MAX, Stream::Aux);
        let sub = never_optimal_arms(&spec, 100_000, &mut rng);
        if sub.is_empty() {
            return Err(Error::Config(
                "`auto` cutoff needs an arm that is never optimal".into(),
            ));
        }
        let h = arm_optimality_margin(&spec, &sub, 100_000, &mut rng)?;
        exploration_cutoff(&spec, &schedule, h, 1.0, warm_steps)
    })?;

    let defaults = SparseOptions::default();
    let dim = spec.dim;
    let sparse = SparseOptions {
        mode: v.mode.or(sp.mode).map_or(defaults.mode, support_mode),
        window: match sp.window {
            Some(WindowName::Local) => GWindow::Local,
            Some(WindowName::Cumulative) => GWindow::Cumulative,
            None => defaults.window,
        },
        initial_support: sp
            .initial_support
            .as_ref()
            .map(|s| to_zero_based(s, "initial_support", dim))
            .transpose()?,
        extra_initial: sp.extra_initial.unwrap_or(defaults.extra_initial),
        rho: sp.rho.unwrap_or(defaults.rho),
        min_gap: sp.min_gap.unwrap_or(defaults.min_gap),
        s_max: sp.s_max.or(defaults.s_max),
        max_updates: sp.max_updates.or(defaults.max_updates),
        c_sched: sp.c_sched.unwrap_or(defaults.c_sched),
        compare_dense: sp.compare_dense.unwrap_or(defaults.compare_dense),
    };
    if sparse.mode == SupportMode::FixedSupport
        && sparse.initial_support.is_none()
        && kind == ExperimentKind::Sparse
    {
        return Err(Error::Config(
            "mode = \"fixed\" needs sparse.initial_support".into(),
        ));
    }
    Ok(Variant {
        label: v.label.clone(),
        spec,
        streams,
        schedule,
        explore,
        sparse,
    })
}
