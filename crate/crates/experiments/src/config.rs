//! Experiment configuration files (TOML).
//!
//! ```toml
//! name = "fig2-mf"
//! methods = ["gd", "nag"]
//! seeds = [0, 1, 2]
//!
//! [problem]
//! kind = "mf"
//! m = 100
//! n = 80
//! rank = 5
//! sigma1 = 1.0
//! sigma_r = 0.2
//!
//! [init]
//! scheme = "mf-sketch"
//! d = 10
//! c_sqrt_d = 50.0
//!
//! [sweep]
//! param = "d"
//! values = [5, 10, 20]
//! ```

use lowrank_core::init::{InitScheme, SpectrumProfile};
use lowrank_core::lnn::RightFactor;
use lowrank_core::optim::{AltOrder, Method};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}", located(*line, message))]
    Invalid { line: Option<usize>, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn located(line: Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("line {l}: {message}"),
        None => message.to_string(),
    }
}

impl ConfigError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Invalid { line, .. } => *line,
            ConfigError::Io { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    /// GD with the theory step `2/(L+μ)`.
    Gd,
    /// GD with step `1/L`.
    GdInvL,
    /// AltGD, order taken from `[hyperparams] altgd_order`.
    Altgd,
    Nag,
}

impl MethodName {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Gd => "gd",
            MethodName::GdInvL => "gd-inv-l",
            MethodName::Altgd => "altgd",
            MethodName::Nag => "nag",
        }
    }

    pub fn method(self, order: AltOrder) -> Method {
        match self {
            MethodName::Gd | MethodName::GdInvL => Method::Gd,
            MethodName::Altgd => Method::AltGd(order),
            MethodName::Nag => Method::Nag,
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Either an explicit list or `{ start = s, count = k }` for `s..s+k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl SeedSpec {
    pub fn list(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, count } => (*start..start.saturating_add(*count)).collect(),
        }
    }

    pub fn count(count: u64) -> Self {
        SeedSpec::Range { start: 0, count }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileName {
    #[default]
    Geometric,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Named(ProfileName),
    Custom(Vec<f64>),
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Named(ProfileName::Geometric)
    }
}

impl ProfileSpec {
    pub fn to_profile(&self) -> SpectrumProfile {
        match self {
            ProfileSpec::Named(ProfileName::Geometric) => SpectrumProfile::Geometric,
            ProfileSpec::Named(ProfileName::Linear) => SpectrumProfile::Linear,
            ProfileSpec::Custom(v) => SpectrumProfile::Custom(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RightFactorName {
    #[default]
    Gaussian,
    Orthonormal,
}

impl RightFactorName {
    pub fn to_core(self) -> RightFactor {
        match self {
            RightFactorName::Gaussian => RightFactor::Gaussian,
            RightFactorName::Orthonormal => RightFactor::Orthonormal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    Mf {
        m: usize,
        n: usize,
        rank: usize,
        sigma1: f64,
        sigma_r: f64,
        #[serde(default)]
        profile: ProfileSpec,
        #[serde(default)]
        seed: u64,
    },
    Lnn {
        outputs: usize,
        inputs: usize,
        samples: usize,
        data_rank: usize,
        sigma1: f64,
        sigma_r: f64,
        #[serde(default)]
        profile: ProfileSpec,
        #[serde(default)]
        right_factor: RightFactorName,
        #[serde(default)]
        seed: u64,
    },
}

impl ProblemConfig {
    pub fn is_mf(&self) -> bool {
        matches!(self, ProblemConfig::Mf { .. })
    }

    /// `(rows, cols)` of the residual driving the dynamics.
    pub fn residual_shape(&self) -> (usize, usize) {
        match self {
            ProblemConfig::Mf { m, n, .. } => (*m, *n),
            ProblemConfig::Lnn { outputs, inputs, .. } => (*outputs, *inputs),
        }
    }

    pub fn sigma_r_mut(&mut self) -> &mut f64 {
        match self {
            ProblemConfig::Mf { sigma_r, .. } | ProblemConfig::Lnn { sigma_r, .. } => sigma_r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    MfSketch,
    MfGeneral,
    #[serde(rename = "lnn-1")]
    Lnn1,
    #[serde(rename = "lnn-2")]
    Lnn2,
    #[serde(rename = "lnn-3")]
    Lnn3,
}

impl SchemeName {
    pub fn to_core(self) -> InitScheme {
        match self {
            SchemeName::MfSketch => InitScheme::MfSketch,
            SchemeName::MfGeneral => InitScheme::MfGeneral,
            SchemeName::Lnn1 => InitScheme::Lnn1,
            SchemeName::Lnn2 => InitScheme::Lnn2,
            SchemeName::Lnn3 => InitScheme::Lnn3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleSpec {
    Value(f64),
    Auto(AutoKeyword),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub scheme: SchemeName,
    pub d: usize,
    /// Absolute scale, or `"auto"` for the theory threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<ScaleSpec>,
    /// Scale relative to `√d`; used when `c` is absent (default 50).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_sqrt_d: Option<f64>,
    #[serde(default)]
    pub c2: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Multiplier on the minimal premise scale for automatic network scales.
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_tau() -> f64 {
    0.1
}

fn default_safety() -> f64 {
    2.0
}

pub const DEFAULT_C_SQRT_D: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedScale {
    Fixed(f64),
    Auto,
}

impl InitSection {
    pub fn resolved_scale(&self) -> ResolvedScale {
        match (self.c, self.c_sqrt_d) {
            (Some(ScaleSpec::Value(c)), _) => ResolvedScale::Fixed(c),
            (Some(ScaleSpec::Auto(_)), _) => ResolvedScale::Auto,
            (None, k) => {
                ResolvedScale::Fixed(k.unwrap_or(DEFAULT_C_SQRT_D) * (self.d as f64).sqrt())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HyperMode {
    #[default]
    Theory,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OrderName {
    #[default]
    XFirst,
    YFirst,
}

impl OrderName {
    pub fn to_core(self) -> AltOrder {
        match self {
            OrderName::XFirst => AltOrder::XFirst,
            OrderName::YFirst => AltOrder::YFirst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    #[serde(default)]
    pub mode: HyperMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub altgd_order: OrderName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSection {
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_divergence")]
    pub divergence_factor: f64,
}

fn default_eps() -> f64 {
    1e-8
}

fn default_max_iters() -> usize {
    100_000
}

fn default_divergence() -> f64 {
    1e6
}

impl Default for StopSection {
    fn default() -> Self {
        Self {
            eps: default_eps(),
            max_iters: default_max_iters(),
            divergence_factor: default_divergence(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    D,
    C,
    CSqrtD,
    C2,
    SigmaR,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::D => "d",
            SweepParam::C => "c",
            SweepParam::CSqrtD => "c_sqrt_d",
            SweepParam::C2 => "c2",
            SweepParam::SigmaR => "sigma_r",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticsMode {
    Off,
    /// Subspace leakage every iteration, decomposition checks every
    /// `cadence` iterations.
    #[default]
    Sampled,
    /// Everything every iteration.
    Full,
}

impl std::str::FromStr for DiagnosticsMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(DiagnosticsMode::Off),
            "sampled" => Ok(DiagnosticsMode::Sampled),
            "full" => Ok(DiagnosticsMode::Full),
            other => Err(format!("unknown diagnostics mode '{other}' (off, sampled, full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default)]
    pub mode: DiagnosticsMode,
    /// Defaults to 1 when `mn ≤ 400` and 10 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cadence: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    #[default]
    Arithmetic,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "default_stride")]
    pub trace_stride: usize,
    #[serde(default)]
    pub averaging: Averaging,
}

fn default_stride() -> usize {
    1
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            trace_stride: 1,
            averaging: Averaging::Arithmetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Run the optimizers and check trajectory invariants.
    #[serde(default = "yes")]
    pub trajectories: bool,
    /// Monte Carlo singular-value bounds over the seed list (sketch scheme).
    #[serde(default = "yes")]
    pub prop1: bool,
    #[serde(default = "default_violation")]
    pub prop1_max_violation: f64,
}

fn yes() -> bool {
    true
}

fn default_violation() -> f64 {
    0.01
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            trajectories: true,
            prop1: true,
            prop1_max_violation: default_violation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub methods: Vec<MethodName>,
    pub seeds: SeedSpec,
    pub problem: ProblemConfig,
    pub init: InitSection,
    #[serde(default)]
    pub hyperparams: HyperSection,
    #[serde(default)]
    pub stop: StopSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verify: VerifySection,
}

/// 1-based line of `key = ...` inside `[section]` (top level when `None`).
fn locate(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[') {
            current = Some(header.trim_end_matches(']').trim().to_string());
            continue;
        }
        if current.as_deref() != section {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    None
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Validator<'a> {
    text: Option<&'a str>,
}

impl Validator<'_> {
    fn fail(&self, section: Option<&str>, key: &str, message: impl Into<String>) -> ConfigError {
        let line = self.text.and_then(|t| {
            locate(t, section, key).or_else(|| section.and_then(|s| locate_header(t, s)))
        });
        ConfigError::Invalid {
            line,
            message: message.into(),
        }
    }
}

fn locate_header(text: &str, section: &str) -> Option<usize> {
    text.lines()
        .position(|l| l.trim().trim_start_matches('[').trim_end_matches(']').trim() == section
            && l.trim().starts_with('['))
        .map(|i| i + 1)
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate_with(Some(text))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with(None)
    }

    fn validate_with(&self, text: Option<&str>) -> Result<(), ConfigError> {
        let v = Validator { text };
        if self.name.trim().is_empty() {
            return Err(v.fail(None, "name", "name must not be empty"));
        }
        if self.methods.is_empty() {
            return Err(v.fail(None, "methods", "methods must list at least one of gd, gd-inv-l, altgd, nag"));
        }
        let list = self.seeds.list();
        if list.is_empty() {
            return Err(v.fail(None, "seeds", "seeds must not be empty"));
        }
        let mut seeds = list.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != list.len() {
            return Err(v.fail(None, "seeds", "seeds contain duplicates"));
        }
        let mut seen = self.methods.clone();
        seen.sort_by_key(|m| m.as_str());
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(v.fail(None, "methods", "methods contain duplicates"));
        }
        self.validate_problem(&v)?;
        self.validate_init(&v)?;
        let h = &self.hyperparams;
        if h.mode == HyperMode::Manual {
            match h.eta {
                Some(eta) if positive(eta) => {}
                _ => return Err(v.fail(Some("hyperparams"), "eta", "manual mode needs a positive eta")),
            }
        } else if h.eta.is_some() || h.beta.is_some() {
            return Err(v.fail(Some("hyperparams"), if h.eta.is_some() { "eta" } else { "beta" },
                "eta and beta are only accepted with mode = \"manual\""));
        }
        if let Some(beta) = h.beta {
            if !(0.0..1.0).contains(&beta) {
                return Err(v.fail(Some("hyperparams"), "beta", format!("beta must lie in [0, 1), got {beta}")));
            }
        }
        let s = &self.stop;
        if !(s.eps >= 0.0 && s.eps < 1.0) {
            return Err(v.fail(Some("stop"), "eps", format!("eps must lie in [0, 1), got {}", s.eps)));
        }
        if s.max_iters == 0 {
            return Err(v.fail(Some("stop"), "max_iters", "max_iters must be at least 1"));
        }
        if !(s.divergence_factor > 1.0) {
            return Err(v.fail(Some("stop"), "divergence_factor", "divergence_factor must exceed 1"));
        }
        if let Some(sweep) = &self.sweep {
            self.validate_sweep(&v, sweep)?;
        }
        if self.diagnostics.cadence == Some(0) {
            return Err(v.fail(Some("diagnostics"), "cadence", "cadence must be at least 1"));
        }
        if self.output.trace_stride == 0 {
            return Err(v.fail(Some("output"), "trace_stride", "trace_stride must be at least 1"));
        }
        let pv = self.verify.prop1_max_violation;
        if !(0.0..=1.0).contains(&pv) {
            return Err(v.fail(Some("verify"), "prop1_max_violation", "prop1_max_violation must lie in [0, 1]"));
        }
        Ok(())
    }

    fn validate_problem(&self, v: &Validator) -> Result<(), ConfigError> {
        let sec = Some("problem");
        let (sigma1, sigma_r) = match &self.problem {
            ProblemConfig::Mf { m, n, rank, sigma1, sigma_r, .. } => {
                if *m == 0 || *n == 0 {
                    return Err(v.fail(sec, if *m == 0 { "m" } else { "n" }, "dimensions must be positive"));
                }
                if *rank == 0 || rank > m.min(n) {
                    return Err(v.fail(sec, "rank", format!("rank must lie in 1..={}", m.min(n))));
                }
                (*sigma1, *sigma_r)
            }
            ProblemConfig::Lnn { outputs, inputs, samples, data_rank, sigma1, sigma_r, .. } => {
                for (key, val) in [("outputs", outputs), ("inputs", inputs), ("samples", samples)] {
                    if *val == 0 {
                        return Err(v.fail(sec, key, format!("{key} must be positive")));
                    }
                }
                if *data_rank == 0 || data_rank > inputs.min(samples) {
                    return Err(v.fail(sec, "data_rank", format!("data_rank must lie in 1..={}", inputs.min(samples))));
                }
                (*sigma1, *sigma_r)
            }
        };
        if !positive(sigma_r) {
            return Err(v.fail(sec, "sigma_r", "sigma_r must be positive"));
        }
        if !(sigma1 >= sigma_r) || !sigma1.is_finite() {
            return Err(v.fail(sec, "sigma1", "sigma1 must be finite and at least sigma_r"));
        }
        Ok(())
    }

    fn validate_init(&self, v: &Validator) -> Result<(), ConfigError> {
        let sec = Some("init");
        let init = &self.init;
        let mf_scheme = matches!(init.scheme, SchemeName::MfSketch | SchemeName::MfGeneral);
        if mf_scheme != self.problem.is_mf() {
            return Err(v.fail(sec, "scheme", format!(
                "scheme {:?} does not match problem kind {}",
                init.scheme,
                if self.problem.is_mf() { "mf" } else { "lnn" }
            )));
        }
        if init.c.is_some() && init.c_sqrt_d.is_some() {
            return Err(v.fail(sec, "c_sqrt_d", "give either c or c_sqrt_d, not both"));
        }
        if let Some(ScaleSpec::Value(c)) = init.c {
            if !positive(c) {
                return Err(v.fail(sec, "c", format!("c must be positive, got {c}")));
            }
        }
        if let Some(k) = init.c_sqrt_d {
            if !positive(k) {
                return Err(v.fail(sec, "c_sqrt_d", format!("c_sqrt_d must be positive, got {k}")));
            }
        }
        if !(init.c2 >= 0.0 && init.c2.is_finite()) {
            return Err(v.fail(sec, "c2", "c2 must be nonnegative"));
        }
        if init.c2 > 0.0 && init.scheme != SchemeName::MfGeneral {
            return Err(v.fail(sec, "c2", "c2 applies only to scheme mf-general"));
        }
        if !(init.tau > 0.0 && init.tau < 1.0) {
            return Err(v.fail(sec, "tau", "tau must lie in (0, 1)"));
        }
        if !positive(init.safety) {
            return Err(v.fail(sec, "safety", "safety must be positive"));
        }
        self.check_width(v, init.d, "d", sec)
    }

    fn check_width(&self, v: &Validator, d: usize, key: &str, sec: Option<&str>) -> Result<(), ConfigError> {
        let (lo, hi, what) = match (&self.problem, self.init.scheme) {
            (ProblemConfig::Mf { rank, .. }, _) => (*rank, usize::MAX, "rank"),
            (ProblemConfig::Lnn { data_rank, outputs, .. }, SchemeName::Lnn1) => {
                (*data_rank.min(outputs), usize::MAX, "label rank")
            }
            (ProblemConfig::Lnn { data_rank, outputs, .. }, SchemeName::Lnn2) => {
                (*data_rank.min(outputs), *outputs, "label rank")
            }
            (ProblemConfig::Lnn { outputs, .. }, _) => (*outputs, usize::MAX, "outputs"),
        };
        if d < lo || d > hi {
            let upper = if hi == usize::MAX { String::new() } else { format!(" and at most outputs = {hi}") };
            return Err(v.fail(sec, key, format!(
                "width d = {d} must be at least the {what} {lo}{upper} for scheme {:?}",
                self.init.scheme
            )));
        }
        Ok(())
    }

    fn validate_sweep(&self, v: &Validator, sweep: &SweepSection) -> Result<(), ConfigError> {
        let sec = Some("sweep");
        if sweep.values.is_empty() {
            return Err(v.fail(sec, "values", "sweep values must not be empty"));
        }
        for &x in &sweep.values {
            let ok = match sweep.param {
                SweepParam::D => x >= 1.0 && x.fract() == 0.0,
                SweepParam::C2 => x >= 0.0 && x.is_finite(),
                _ => positive(x),
            };
            if !ok {
                return Err(v.fail(sec, "values", format!("invalid value {x} for sweep over {}", sweep.param.as_str())));
            }
        }
        match sweep.param {
            SweepParam::D => {
                for &x in &sweep.values {
                    self.check_width(v, x as usize, "values", sec)?;
                }
            }
            SweepParam::C | SweepParam::CSqrtD => {
                if self.init.c.is_some() || self.init.c_sqrt_d.is_some() {
                    return Err(v.fail(sec, "param", "sweeping the scale conflicts with a fixed c or c_sqrt_d in [init]"));
                }
            }
            SweepParam::C2 => {
                if self.init.scheme != SchemeName::MfGeneral {
                    return Err(v.fail(sec, "param", "c2 sweeps need scheme mf-general"));
                }
            }
            SweepParam::SigmaR => {
                let sigma1 = match &self.problem {
                    ProblemConfig::Mf { sigma1, .. } | ProblemConfig::Lnn { sigma1, .. } => *sigma1,
                };
                if sweep.values.iter().any(|&x| x > sigma1) {
                    return Err(v.fail(sec, "values", "sigma_r values must not exceed sigma1"));
                }
            }
        }
        Ok(())
    }

    /// One entry per sweep value (a single unlabeled cell without a sweep).
    pub fn cells(&self) -> Vec<Cell> {
        let Some(sweep) = &self.sweep else {
            return vec![Cell {
                label: "base".into(),
                sweep_value: None,
                problem: self.problem.clone(),
                init: self.init.clone(),
            }];
        };
        sweep
            .values
            .iter()
            .map(|&x| {
                let mut problem = self.problem.clone();
                let mut init = self.init.clone();
                match sweep.param {
                    SweepParam::D => init.d = x as usize,
                    SweepParam::C => init.c = Some(ScaleSpec::Value(x)),
                    SweepParam::CSqrtD => init.c_sqrt_d = Some(x),
                    SweepParam::C2 => init.c2 = x,
                    SweepParam::SigmaR => *problem.sigma_r_mut() = x,
                }
                Cell {
                    label: format!("{}={}", sweep.param.as_str(), format_value(x)),
                    sweep_value: Some(x),
                    problem,
                    init,
                }
            })
            .collect()
    }

    pub fn diagnostics_cadence(&self) -> usize {
        self.diagnostics.cadence.unwrap_or_else(|| {
            let (m, n) = self.problem.residual_shape();
            if m * n <= 400 {
                1
            } else {
                10
            }
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.output.dir.clone().unwrap_or_else(|| format!("out/{}", self.name)))
    }
}

/// Shortest decimal that round-trips.
pub fn format_value(x: f64) -> String {
    format!("{x}")
}

/// One point of the sweep axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub label: String,
    pub sweep_value: Option<f64>,
    pub problem: ProblemConfig,
    pub init: InitSection,
}
