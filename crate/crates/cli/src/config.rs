//! Flag, file and environment layers resolved into one [`RunConfig`].
//!
//! Precedence, highest first: command-line flag, `--config` file entry,
//! `MNLAB_SEED` (seed only), built-in default.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use mnlab_core::covariance::Model;
use mnlab_core::hypothesis::{c_for_bumps, ModelClass, MIN_BUMPS};
use mnlab_core::montecarlo::Estimator;
use serde::Serialize;

use crate::UsageError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format {s:?}; expected json or csv")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    M1,
    M2,
    M3,
    Mq,
}

impl FromStr for ModelName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

/// Every setting as it may appear on the command line or in a file.
#[derive(Args, Clone, Debug, Default)]
pub struct Settings {
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    /// Kernel exponent for `--model mq`.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Hoelder constant.
    #[arg(long = "L")]
    pub l: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replicates, trials or profiles, depending on the command.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub qs: Option<Vec<f64>>,
    #[arg(long)]
    pub estimator: Option<Estimator>,
    #[arg(long)]
    pub sigma_sq: Option<f64>,
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    #[arg(long)]
    pub max_hypotheses: Option<usize>,
    /// Largest bump count tried by `--search-c`.
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Search for the smallest passing `c` instead of using `--c`.
    #[arg(long)]
    pub search_c: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, UsageError>
where
    T::Err: fmt::Display,
{
    v.parse()
        .map_err(|e| UsageError::new(format!("--{key}: cannot parse {v:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, UsageError>
where
    T::Err: fmt::Display,
{
    v.split(',').map(|x| parse(key, x.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool, UsageError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(UsageError::new(format!("--{key}: expected true or false, got {v:?}"))),
    }
}

impl Settings {
    /// Reads a `key = value` file. Blank lines and lines starting with `#`
    /// are skipped; keys use flag spelling with `-` or `_`.
    pub fn from_file(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError::new(format!("--config {}: {e}", path.display())))?;
        let mut s = Settings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(UsageError::new(format!(
                    "--config {}:{}: expected key = value",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = k.trim().replace('_', "-");
            let v = v.trim();
            match key.as_str() {
                "model" => s.model = Some(parse(&key, v)?),
                "q" => s.q = Some(parse(&key, v)?),
                "n" => s.n = Some(parse(&key, v)?),
                "alpha" => s.alpha = Some(parse(&key, v)?),
                "L" | "l" => s.l = Some(parse(&key, v)?),
                "tau" => s.tau = Some(parse(&key, v)?),
                "c" => s.c = Some(parse(&key, v)?),
                "kappa" => s.kappa = Some(parse(&key, v)?),
                "seed" => s.seed = Some(parse(&key, v)?),
                "reps" => s.reps = Some(parse(&key, v)?),
                "ns" => s.ns = Some(parse_list(&key, v)?),
                "alphas" => s.alphas = Some(parse_list(&key, v)?),
                "qs" => s.qs = Some(parse_list(&key, v)?),
                "estimator" => s.estimator = Some(parse(&key, v)?),
                "sigma-sq" => s.sigma_sq = Some(parse(&key, v)?),
                "sigma-min" => s.sigma_min = Some(parse(&key, v)?),
                "sigma-max" => s.sigma_max = Some(parse(&key, v)?),
                "max-hypotheses" => s.max_hypotheses = Some(parse(&key, v)?),
                "m-max" => s.m_max = Some(parse(&key, v)?),
                "tol" => s.tol = Some(parse(&key, v)?),
                "search-c" => s.search_c = parse_bool(&key, v)?,
                "out" => s.out = Some(PathBuf::from(v)),
                "format" => s.format = Some(parse(&key, v)?),
                "workers" => s.workers = Some(parse(&key, v)?),
                _ => {
                    return Err(UsageError::new(format!(
                        "--config {}:{}: unknown key {:?}",
                        path.display(),
                        lineno + 1,
                        k.trim()
                    )))
                }
            }
        }
        Ok(s)
    }

    /// Field-wise `self` over `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        Settings {
            model: self.model.or(lower.model),
            q: self.q.or(lower.q),
            n: self.n.or(lower.n),
            alpha: self.alpha.or(lower.alpha),
            l: self.l.or(lower.l),
            tau: self.tau.or(lower.tau),
            c: self.c.or(lower.c),
            kappa: self.kappa.or(lower.kappa),
            seed: self.seed.or(lower.seed),
            reps: self.reps.or(lower.reps),
            ns: self.ns.or(lower.ns),
            alphas: self.alphas.or(lower.alphas),
            qs: self.qs.or(lower.qs),
            estimator: self.estimator.or(lower.estimator),
            sigma_sq: self.sigma_sq.or(lower.sigma_sq),
            sigma_min: self.sigma_min.or(lower.sigma_min),
            sigma_max: self.sigma_max.or(lower.sigma_max),
            max_hypotheses: self.max_hypotheses.or(lower.max_hypotheses),
            m_max: self.m_max.or(lower.m_max),
            tol: self.tol.or(lower.tol),
            search_c: self.search_c || lower.search_c,
            out: self.out.or(lower.out),
            format: self.format.or(lower.format),
            workers: self.workers.or(lower.workers),
            config: self.config.or(lower.config),
        }
    }

    /// Flag names of the experiment settings that were supplied.
    fn supplied(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        macro_rules! note {
            ($($field:ident => $name:literal),*) => {
                $(if self.$field.is_some() { v.push($name); })*
            };
        }
        note!(model => "model", q => "q", n => "n", alpha => "alpha", l => "L", tau => "tau",
              c => "c", kappa => "kappa", seed => "seed", reps => "reps", ns => "ns",
              alphas => "alphas", qs => "qs", estimator => "estimator", sigma_sq => "sigma-sq",
              sigma_min => "sigma-min", sigma_max => "sigma-max",
              max_hypotheses => "max-hypotheses", m_max => "m-max", tol => "tol");
        if self.search_c {
            v.push("search-c");
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    VerifyLinalg,
    VerifySpectral,
    VerifyKl,
    VerifyPosdefmaj,
    VerifyModel3Structure,
    Certificate,
    TwoPointM3,
    RateTable,
    KlScaling,
    SimulateRate,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::VerifyLinalg => "verify-linalg",
            CommandName::VerifySpectral => "verify-spectral",
            CommandName::VerifyKl => "verify-kl",
            CommandName::VerifyPosdefmaj => "verify-posdefmaj",
            CommandName::VerifyModel3Structure => "verify-model3-structure",
            CommandName::Certificate => "certificate",
            CommandName::TwoPointM3 => "two-point-m3",
            CommandName::RateTable => "rate-table",
            CommandName::KlScaling => "kl-scaling",
            CommandName::SimulateRate => "simulate-rate",
        }
    }

    /// Settings the command reads.
    fn keys(self) -> &'static [&'static str] {
        match self {
            CommandName::VerifyLinalg => &["n", "seed", "tol"],
            CommandName::VerifySpectral => &["n", "tol"],
            CommandName::VerifyKl => &["n", "reps", "seed"],
            CommandName::VerifyPosdefmaj => &["ns", "reps", "seed"],
            CommandName::VerifyModel3Structure => {
                &["n", "alpha", "L", "tau", "c", "kappa", "seed", "max-hypotheses", "tol"]
            }
            CommandName::Certificate => &[
                "model", "n", "alpha", "L", "tau", "c", "kappa", "seed", "max-hypotheses",
                "search-c", "m-max",
            ],
            CommandName::TwoPointM3 => &["n", "tau", "c", "kappa", "sigma-min", "sigma-max"],
            CommandName::RateTable => &["alphas", "qs"],
            CommandName::KlScaling => &["model", "q", "alpha", "L", "tau", "ns"],
            CommandName::SimulateRate => {
                &["model", "estimator", "ns", "reps", "seed", "tau", "sigma-sq"]
            }
        }
    }

    fn default_format(self) -> Format {
        match self {
            CommandName::RateTable => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Fully resolved settings of one run; absent fields are not read by the
/// command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<Estimator>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_hypotheses: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_c: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub workers: Option<usize>,
}

const DEFAULT_SEED: u64 = 0;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), UsageError> {
    if cond {
        Ok(())
    } else {
        Err(UsageError::new(msg))
    }
}

/// Applies layers and defaults for `command`, then validates every field
/// the command reads.
pub fn resolve(
    command: CommandName,
    flags: Settings,
    env_seed: Option<&str>,
) -> Result<RunConfig, UsageError> {
    let file = match &flags.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    let env = Settings {
        seed: env_seed
            .map(|v| parse::<u64>("seed", v).map_err(|e| UsageError::new(format!("MNLAB_SEED: {e}"))))
            .transpose()?,
        ..Settings::default()
    };
    let flag_keys = flags.supplied();
    let file_keys = file.supplied();
    let keys = command.keys();
    for k in flag_keys.iter().chain(&file_keys) {
        ensure(
            keys.contains(k),
            format!("--{k} is not used by {}; it reads {}", command.as_str(), keys.join(", ")),
        )?;
    }
    let s = flags.over(file).over(env);
    let wants = |k: &str| keys.contains(&k);
    let pick = |k: &str, v: Option<f64>, d: f64| wants(k).then(|| v.unwrap_or(d));

    let model = wants("model").then(|| s.model.unwrap_or(ModelName::M1));
    let q = match model {
        Some(ModelName::Mq) => Some(
            s.q.ok_or_else(|| UsageError::new("--model mq needs --q"))?,
        ),
        _ => {
            ensure(s.q.is_none(), "--q is only read with --model mq")?;
            None
        }
    };
    let n_default = match command {
        CommandName::VerifyLinalg | CommandName::VerifyModel3Structure => 64,
        CommandName::VerifyKl => 50,
        CommandName::VerifySpectral | CommandName::TwoPointM3 => 256,
        _ => 1024,
    };
    let ns_default: Vec<usize> = match command {
        CommandName::VerifyPosdefmaj => vec![64, 128, 256],
        CommandName::KlScaling => vec![256, 512, 1024, 2048, 4096],
        _ => (10..=14).map(|k| 1usize << k).collect(),
    };
    let reps_default = match command {
        CommandName::VerifyKl => 1000,
        CommandName::VerifyPosdefmaj => 100,
        _ => 500,
    };
    let c_default = match command {
        CommandName::TwoPointM3 => 0.5,
        CommandName::VerifyModel3Structure => {
            let n = s.n.unwrap_or(n_default);
            c_for_bumps(MIN_BUMPS, n, s.alpha.unwrap_or(1.0), ModelClass::M3) * (1.0 + 1e-9)
        }
        _ => 5.0,
    };
    let cfg = RunConfig {
        command,
        model,
        q,
        n: wants("n").then(|| s.n.unwrap_or(n_default)),
        alpha: pick("alpha", s.alpha, 1.0),
        l: pick("L", s.l, 1.0),
        tau: pick("tau", s.tau, 0.1),
        c: pick("c", s.c, c_default),
        kappa: pick("kappa", s.kappa, 0.09),
        seed: wants("seed").then(|| s.seed.unwrap_or(DEFAULT_SEED)),
        reps: wants("reps").then(|| s.reps.unwrap_or(reps_default)),
        ns: wants("ns").then(|| s.ns.clone().unwrap_or(ns_default)),
        alphas: wants("alphas").then(|| s.alphas.clone().unwrap_or(vec![0.6, 1.0, 2.0])),
        qs: wants("qs").then(|| s.qs.clone().unwrap_or(vec![0.0, 0.5, 1.0])),
        estimator: wants("estimator").then(|| s.estimator.unwrap_or(Estimator::Mle)),
        sigma_sq: pick("sigma-sq", s.sigma_sq, 1.0),
        sigma_min: pick("sigma-min", s.sigma_min, 1.0),
        sigma_max: pick("sigma-max", s.sigma_max, 2.0),
        max_hypotheses: wants("max-hypotheses").then(|| s.max_hypotheses.unwrap_or(16)),
        search_c: wants("search-c").then_some(s.search_c),
        m_max: (wants("m-max") && s.search_c).then(|| s.m_max.unwrap_or(64)),
        tol: pick("tol", s.tol, if command == CommandName::VerifyModel3Structure { 1e-12 } else { 1e-10 }),
        format: s.format.unwrap_or(command.default_format()),
        out: s.out,
        workers: s.workers,
    };
    ensure(
        s.m_max.is_none() || s.search_c,
        "--m-max is only read together with --search-c",
    )?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), UsageError> {
    if let Some(n) = cfg.n {
        ensure(n >= 1, "--n must be at least 1")?;
    }
    if let Some(t) = cfg.tau {
        ensure(t.is_finite() && t >= 0.0, format!("--tau must be finite and non-negative, got {t}"))?;
    }
    if let Some(a) = cfg.alpha {
        ensure(a > 0.5 && a <= 2.0, format!("--alpha must lie in (0.5, 2], got {a}"))?;
    }
    if let Some(l) = cfg.l {
        ensure(l > 0.0 && l.is_finite(), format!("--L must be positive, got {l}"))?;
    }
    if let Some(c) = cfg.c {
        ensure(c.is_finite() && c >= 0.0, format!("--c must be non-negative, got {c}"))?;
    }
    if let Some(k) = cfg.kappa {
        ensure((0.0..0.1).contains(&k), format!("--kappa must lie in [0, 0.1), got {k}"))?;
    }
    if let Some(r) = cfg.reps {
        ensure(r >= 1, "--reps must be at least 1")?;
    }
    if let Some(ns) = &cfg.ns {
        ensure(!ns.is_empty() && ns.iter().all(|&n| n >= 1), "--ns needs sizes of at least 1")?;
    }
    if let Some(q) = cfg.q {
        ensure(q.is_finite() && q >= 0.0, format!("--q must be non-negative, got {q}"))?;
    }
    if let Some(w) = cfg.workers {
        ensure(w >= 1, "--workers must be at least 1")?;
    }
    if let Some(t) = cfg.tol {
        ensure(t > 0.0, format!("--tol must be positive, got {t}"))?;
    }
    if let Some(s) = cfg.sigma_sq {
        ensure(s > 0.0, format!("--sigma-sq must be positive, got {s}"))?;
    }
    if let (Some(lo), Some(hi)) = (cfg.sigma_min, cfg.sigma_max) {
        ensure(lo > 0.0 && lo < hi, format!("need 0 < --sigma-min < --sigma-max, got {lo} and {hi}"))?;
    }
    Ok(())
}

impl RunConfig {
    /// The core model for the resolved `--model` and `--q`.
    pub fn core_model(&self) -> Option<Model> {
        self.model.map(|m| match m {
            ModelName::M1 => Model::M1,
            ModelName::M2 => Model::M2,
            ModelName::M3 => Model::M3,
            ModelName::Mq => Model::Mq(self.q.unwrap_or(0.0)),
        })
    }
}
