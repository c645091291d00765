use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::env::CartpoleParams;
use crate::error::{Error, Result};
use crate::init::{InitKind, DEFAULT_EXP_RATE};
use crate::kv::{self, fmt_f64, Line};
use crate::optim::{OptimizerKind, OptimizerSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub episodes: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub actor_optimizer: OptimizerKind,
    pub actor_init: InitKind,
    pub critic_init: InitKind,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            actor_lr: 0.1,
            critic_lr: 0.003,
            episodes: 10_000,
            epochs: 5,
            batch_size: 8,
            actor_optimizer: OptimizerKind::Asga,
            actor_init: InitKind::Exponential {
                rate: DEFAULT_EXP_RATE,
            },
            critic_init: InitKind::Kaiming,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad(format!(
                "clip_epsilon must lie in (0, 1), got {}",
                self.clip_epsilon
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!(
                "gae_lambda must lie in [0, 1], got {}",
                self.gae_lambda
            ));
        }
        for (name, lr) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        if self.episodes == 0 || self.epochs == 0 || self.batch_size == 0 {
            return bad("episodes, epochs and batch_size must all be at least 1".into());
        }
        if self.actor_optimizer == OptimizerKind::Sgd {
            return bad("the actor maximizes its objective; use sga, asga or csga".into());
        }
        if let InitKind::Exponential { .. } = self.critic_init {
            return bad("critic must use a Gaussian initializer".into());
        }
        if let InitKind::Exponential { rate } = self.actor_init {
            if !(rate > 0.0 && rate.is_finite()) {
                return bad(format!("exponential rate must be positive, got {rate}"));
            }
        }
        Ok(())
    }

    pub fn actor_optimizer_spec(&self) -> Result<OptimizerSpec> {
        OptimizerSpec::new(self.actor_optimizer, self.actor_lr)
    }
}

/// The four actor training recipes compared by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    CsgaKaiming,
    CsgaXavier,
    AsgaExp,
    /// Unconstrained reference; not a non-negative method.
    SgaUnconstrained,
}

impl Method {
    /// Report order: the two clipping baselines, then the proposed recipe.
    pub const ALL: [Method; 4] = [
        Method::CsgaKaiming,
        Method::CsgaXavier,
        Method::AsgaExp,
        Method::SgaUnconstrained,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::AsgaExp => "asga-exp",
            Method::CsgaKaiming => "csga-kaiming",
            Method::CsgaXavier => "csga-xavier",
            Method::SgaUnconstrained => "sga-unconstrained",
        }
    }

    pub fn optimizer(self) -> OptimizerKind {
        match self {
            Method::AsgaExp => OptimizerKind::Asga,
            Method::CsgaKaiming | Method::CsgaXavier => OptimizerKind::Csga,
            Method::SgaUnconstrained => OptimizerKind::Sga,
        }
    }

    pub fn init(self, exp_rate: f64) -> InitKind {
        match self {
            Method::AsgaExp => InitKind::Exponential { rate: exp_rate },
            Method::CsgaKaiming | Method::SgaUnconstrained => InitKind::Kaiming,
            Method::CsgaXavier => InitKind::Xavier,
        }
    }

    pub fn configure(self, config: &mut PpoConfig) {
        let rate = match config.actor_init {
            InitKind::Exponential { rate } => rate,
            _ => DEFAULT_EXP_RATE,
        };
        config.actor_optimizer = self.optimizer();
        config.actor_init = self.init(rate);
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown method '{s}' (expected one of {})",
                    Method::ALL.map(Method::name).join(", ")
                ))
            })
    }
}

/// Learner and environment settings together; serialized as flat `key = value`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunConfig {
    pub ppo: PpoConfig,
    pub env: CartpoleParams,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.env.validate()
    }

    pub fn to_kv_text(&self) -> String {
        let p = &self.ppo;
        let e = &self.env;
        let rows: Vec<(&str, String)> = vec![
            ("clip_epsilon", fmt_f64(p.clip_epsilon)),
            ("gamma", fmt_f64(p.gamma)),
            ("gae_lambda", fmt_f64(p.gae_lambda)),
            ("actor_lr", fmt_f64(p.actor_lr)),
            ("critic_lr", fmt_f64(p.critic_lr)),
            ("episodes", p.episodes.to_string()),
            ("epochs", p.epochs.to_string()),
            ("batch_size", p.batch_size.to_string()),
            ("actor_optimizer", p.actor_optimizer.to_string()),
            ("actor_init", init_text(p.actor_init)),
            ("critic_init", init_text(p.critic_init)),
            ("seed", p.seed.to_string()),
            ("cart_mass", fmt_f64(e.cart_mass)),
            ("pole_mass", fmt_f64(e.pole_mass)),
            ("pole_half_length", fmt_f64(e.pole_half_length)),
            ("gravity", fmt_f64(e.gravity)),
            ("force_magnitude", fmt_f64(e.force_magnitude)),
            ("dt", fmt_f64(e.dt)),
            ("angle_limit", fmt_f64(e.angle_limit)),
            ("position_limit", fmt_f64(e.position_limit)),
            ("max_steps", e.max_steps.to_string()),
            ("velocity_range", fmt_f64(e.velocity_range)),
            ("tip_velocity_range", fmt_f64(e.tip_velocity_range)),
        ];
        rows.into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Sets one field by name. `path`/`line` only label errors.
    pub fn set(&mut self, key: &str, value: &str, path: &str, line: usize) -> Result<()> {
        let f = |v: &str| kv::parse_f64(path, line, key, v);
        let n = |v: &str| kv::parse_usize(path, line, key, v);
        let p = &mut self.ppo;
        let e = &mut self.env;
        match key {
            "clip_epsilon" => p.clip_epsilon = f(value)?,
            "gamma" => p.gamma = f(value)?,
            "gae_lambda" => p.gae_lambda = f(value)?,
            "actor_lr" => p.actor_lr = f(value)?,
            "critic_lr" => p.critic_lr = f(value)?,
            "episodes" => p.episodes = n(value)?,
            "epochs" => p.epochs = n(value)?,
            "batch_size" => p.batch_size = n(value)?,
            "actor_optimizer" => {
                p.actor_optimizer = value
                    .parse()
                    .map_err(|e: Error| Error::parse(path, line, e.to_string()))?
            }
            "actor_init" | "critic_init" => {
                let kind: InitKind = value
                    .parse()
                    .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
                if key == "actor_init" {
                    p.actor_init = kind;
                } else {
                    p.critic_init = kind;
                }
            }
            "seed" => p.seed = kv::parse_u64(path, line, key, value)?,
            "cart_mass" => e.cart_mass = f(value)?,
            "pole_mass" => e.pole_mass = f(value)?,
            "pole_half_length" => e.pole_half_length = f(value)?,
            "gravity" => e.gravity = f(value)?,
            "force_magnitude" => e.force_magnitude = f(value)?,
            "dt" => e.dt = f(value)?,
            "angle_limit" => e.angle_limit = f(value)?,
            "position_limit" => e.position_limit = f(value)?,
            "max_steps" => e.max_steps = n(value)?,
            "velocity_range" => e.velocity_range = f(value)?,
            "tip_velocity_range" => e.tip_velocity_range = f(value)?,
            other => return Err(Error::parse(path, line, format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every entry of a flat config file on top of `self`.
    pub fn apply_kv_text(&mut self, path: &str, text: &str) -> Result<()> {
        for (line, entry) in kv::lines(path, text)? {
            match entry {
                Line::Entry { key, value } => self.set(key, value, path, line)?,
                Line::Section(name) => {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("sections are not allowed in config files ('[{name}]')"),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn from_kv_text(path: &str, text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_kv_text(path, text)?;
        Ok(cfg)
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::to_kv_text`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_kv_text().as_bytes());
        hex::encode(&digest[..8])
    }
}

fn init_text(kind: InitKind) -> String {
    match kind {
        InitKind::Exponential { rate } => format!("exponential({})", fmt_f64(rate)),
        other => other.name().to_string(),
    }
}
