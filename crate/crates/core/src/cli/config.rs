//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::meta_step::{LambdaMode, StepVariant};
use crate::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Knapsack,
    GaussianCluster,
    Mwis,
    Robust,
    Halving,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Knapsack => "knapsack",
            Kind::GaussianCluster => "gaussian_cluster",
            Kind::Mwis => "mwis",
            Kind::Robust => "robust",
            Kind::Halving => "halving",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Some(match s {
            "knapsack" => Kind::Knapsack,
            "gaussian_cluster" => Kind::GaussianCluster,
            "mwis" => Kind::Mwis,
            "robust" => Kind::Robust,
            "halving" => Kind::Halving,
            _ => return None,
        })
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How per-instance utilities are turned into `[0, 1]` losses for knapsack
/// and MWIS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossScale {
    /// `1 − value / Σ item values`.
    Total,
    /// `(max − value) / (max − min)` over the parameter domain.
    Range,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}: {k}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "{k}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, key: Some(key.to_string()), message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub kind: Kind,
    pub t_train: usize,
    pub t_test: usize,
    pub m_rounds: usize,
    pub replicas: usize,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub epsilon: Option<f64>,
    pub d_param: Option<f64>,
    pub step_variant: StepVariant,
    pub lambda_mode: LambdaMode,
    pub shots: Vec<usize>,
    pub seed: u64,
    pub domain: Interval,
    pub sigma: f64,
    pub loss_scale: LossScale,
    pub mwis_n: usize,
    pub mwis_p: f64,
    pub beta_a: f64,
    pub attack_height: f64,
    pub curve: bool,
    pub record_timing: bool,
}

pub const KEYS: &[&str] = &[
    "experiment_id",
    "kind",
    "t_train",
    "t_test",
    "m_rounds",
    "replicas",
    "beta",
    "gamma",
    "eta",
    "epsilon",
    "d_param",
    "step_variant",
    "lambda_mode",
    "shots",
    "seed",
    "domain",
    "sigma",
    "loss_scale",
    "mwis_n",
    "mwis_p",
    "beta_a",
    "attack_height",
    "curve",
    "record_timing",
];

impl ExperimentConfig {
    /// Defaults for `kind`: ten training and five test tasks of thirty
    /// rounds, a hundred replicas, `γ = η = 0.01`.
    pub fn defaults(kind: Kind) -> Self {
        let (domain, beta) = match kind {
            Kind::Robust | Kind::Halving => (Interval { lo: 0.0, hi: 1.0 }, 0.5),
            _ => (Interval { lo: 0.0, hi: 10.0 }, 0.5),
        };
        ExperimentConfig {
            experiment_id: kind.as_str().to_string(),
            kind,
            t_train: 10,
            t_test: 5,
            m_rounds: 30,
            replicas: 100,
            beta,
            gamma: 0.01,
            eta: 0.01,
            epsilon: None,
            d_param: None,
            step_variant: StepVariant::Ftl,
            lambda_mode: LambdaMode::TheoryFixed,
            shots: vec![1, 5],
            seed: 0,
            domain,
            sigma: 1.0,
            loss_scale: LossScale::Total,
            mwis_n: 20,
            mwis_p: 0.2,
            beta_a: 0.5,
            attack_height: 0.5,
            curve: false,
            record_timing: false,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            key: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        ExperimentConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    key: None,
                    message: format!("expected key = value, got `{content}`"),
                });
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !KEYS.contains(&k.as_str()) {
                return Err(err(Some(line), &k, "unknown key"));
            }
            if let Some((prev, ..)) = pairs.iter().find(|(_, pk, _)| *pk == k) {
                return Err(err(Some(line), &k, format!("duplicate key (first set on line {prev})")));
            }
            pairs.push((line, k, v));
        }
        let kind_entry = pairs
            .iter()
            .find(|(_, k, _)| k == "kind")
            .ok_or_else(|| err(None, "kind", "missing required key"))?;
        let kind = Kind::parse(&kind_entry.2).ok_or_else(|| {
            err(
                Some(kind_entry.0),
                "kind",
                format!("unknown kind `{}` (expected knapsack, gaussian_cluster, mwis, robust or halving)", kind_entry.2),
            )
        })?;
        let mut cfg = ExperimentConfig::defaults(kind);
        for (line, k, v) in &pairs {
            cfg.set(k, v).map_err(|m| err(Some(*line), k, m))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.parse::<T>().map_err(|_| format!("cannot parse `{v}`"))
        }
        fn flag(v: &str) -> Result<bool, String> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(format!("expected true or false, got `{v}`")),
            }
        }
        match key {
            "experiment_id" => {
                if v.is_empty() || v.contains(',') || v.contains('"') {
                    return Err("must be nonempty without commas or quotes".into());
                }
                self.experiment_id = v.to_string();
            }
            "kind" => {}
            "t_train" => self.t_train = num(v)?,
            "t_test" => self.t_test = num(v)?,
            "m_rounds" => self.m_rounds = num(v)?,
            "replicas" => self.replicas = num(v)?,
            "beta" => self.beta = num(v)?,
            "gamma" => self.gamma = num(v)?,
            "eta" => self.eta = num(v)?,
            "epsilon" => self.epsilon = Some(num(v)?),
            "d_param" => self.d_param = Some(num(v)?),
            "step_variant" => {
                self.step_variant = match v {
                    "ftl" => StepVariant::Ftl,
                    "ewoo" => StepVariant::Ewoo,
                    _ => return Err(format!("expected ftl or ewoo, got `{v}`")),
                }
            }
            "lambda_mode" => {
                self.lambda_mode = match v {
                    "meta" => LambdaMode::Meta,
                    "theory-fixed" | "theory_fixed" => LambdaMode::TheoryFixed,
                    _ => return Err(format!("expected meta or theory-fixed, got `{v}`")),
                }
            }
            "shots" => {
                self.shots = v.split(',').map(|s| num::<usize>(s.trim())).collect::<Result<_, _>>()?;
            }
            "seed" => self.seed = num(v)?,
            "domain" => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err("expected lo,hi".into());
                }
                let (lo, hi): (f64, f64) = (num(parts[0])?, num(parts[1])?);
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(format!("invalid interval [{lo}, {hi}]"));
                }
                self.domain = Interval { lo, hi };
            }
            "sigma" => self.sigma = num(v)?,
            "loss_scale" => {
                self.loss_scale = match v {
                    "total" => LossScale::Total,
                    "range" => LossScale::Range,
                    _ => return Err(format!("expected total or range, got `{v}`")),
                }
            }
            "mwis_n" => self.mwis_n = num(v)?,
            "mwis_p" => self.mwis_p = num(v)?,
            "beta_a" => self.beta_a = num(v)?,
            "attack_height" => self.attack_height = num(v)?,
            "curve" => self.curve = flag(v)?,
            "record_timing" => self.record_timing = flag(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |k: &str, m: &str| Err(err(None, k, m));
        if self.t_test == 0 {
            return fail("t_test", "must be at least 1");
        }
        if self.m_rounds == 0 {
            return fail("m_rounds", "must be at least 1");
        }
        if self.replicas == 0 {
            return fail("replicas", "must be at least 1");
        }
        if !(self.beta > 0.0) {
            return fail("beta", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma", "must lie in [0, 1]");
        }
        if !(self.eta > 0.0) {
            return fail("eta", "must be positive");
        }
        if self.shots.is_empty() || self.shots.iter().any(|&s| s == 0 || s > self.m_rounds) {
            return fail("shots", "each entry must lie in [1, m_rounds]");
        }
        if self.lambda_mode == LambdaMode::Meta && !(self.gamma > 0.0) {
            return fail("gamma", "must be positive when lambda_mode = meta");
        }
        if !(self.sigma > 0.0) {
            return fail("sigma", "must be positive");
        }
        if self.kind == Kind::Mwis && self.mwis_n == 0 {
            return fail("mwis_n", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.mwis_p) {
            return fail("mwis_p", "must lie in [0, 1]");
        }
        if !(self.beta_a > 0.0) {
            return fail("beta_a", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.attack_height) {
            return fail("attack_height", "must lie in [0, 1]");
        }
        if matches!(self.kind, Kind::Knapsack | Kind::GaussianCluster | Kind::Mwis)
            && (self.domain.lo < 0.0 || self.domain.hi > 10.0)
        {
            return fail("domain", "must lie inside [0, 10] for this kind");
        }
        Ok(())
    }

    /// Every effective setting, one `key=value` per line in key order.
    pub fn canonical(&self) -> String {
        let opt = |x: Option<f64>| x.map_or("auto".to_string(), |v| format!("{v:?}"));
        let mut lines = vec![
            format!("attack_height={:?}", self.attack_height),
            format!("beta={:?}", self.beta),
            format!("beta_a={:?}", self.beta_a),
            format!("curve={}", self.curve),
            format!("d_param={}", opt(self.d_param)),
            format!("domain={:?},{:?}", self.domain.lo, self.domain.hi),
            format!("epsilon={}", opt(self.epsilon)),
            format!("eta={:?}", self.eta),
            format!("experiment_id={}", self.experiment_id),
            format!("gamma={:?}", self.gamma),
            format!("kind={}", self.kind),
            format!(
                "lambda_mode={}",
                match self.lambda_mode {
                    LambdaMode::Meta => "meta",
                    LambdaMode::TheoryFixed => "theory-fixed",
                }
            ),
            format!("loss_scale={}", if self.loss_scale == LossScale::Total { "total" } else { "range" }),
            format!("m_rounds={}", self.m_rounds),
            format!("mwis_n={}", self.mwis_n),
            format!("mwis_p={:?}", self.mwis_p),
            format!("record_timing={}", self.record_timing),
            format!("replicas={}", self.replicas),
            format!("seed={}", self.seed),
            format!("shots={}", self.shots.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")),
            format!("sigma={:?}", self.sigma),
            format!(
                "step_variant={}",
                match self.step_variant {
                    StepVariant::Ftl => "ftl",
                    StepVariant::Ewoo => "ewoo",
                }
            ),
            format!("t_test={}", self.t_test),
            format!("t_train={}", self.t_train),
        ];
        lines.sort();
        lines.join("\n") + "\n"
    }

    /// SHA-256 of the canonical settings and the code version, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        h.update(b"version=");
        h.update(crate::cli::CODE_VERSION.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
