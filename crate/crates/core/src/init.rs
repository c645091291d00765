//! Parameter initializers: the non-negative exponential scheme and the
//! Kaiming / Xavier Gaussian baselines.

use std::fmt;
use std::str::FromStr;

use rand::distr::{Distribution, Open01};
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nncore::Mlp;

/// Default rate of the exponential initializer.
pub const DEFAULT_EXP_RATE: f64 = 100.0;

/// Seedable deterministic generator. One instance per consumer.
#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent stream derived from `seed`, selected by `stream`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng(inner)
    }

    /// Uniform on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        Open01.sample(&mut self.0)
    }

    /// Uniform on [0, 1).
    pub fn unit(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitKind {
    Exponential { rate: f64 },
    Kaiming,
    Xavier,
}

impl InitKind {
    pub fn name(&self) -> &'static str {
        match self {
            InitKind::Exponential { .. } => "exponential",
            InitKind::Kaiming => "kaiming",
            InitKind::Xavier => "xavier",
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitKind::Exponential { rate } => write!(f, "exponential({rate})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for InitKind {
    type Err = Error;

    /// Accepts `kaiming`, `xavier`, `exponential` (default rate) or
    /// `exponential(<rate>)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "kaiming" => return Ok(InitKind::Kaiming),
            "xavier" => return Ok(InitKind::Xavier),
            "exponential" => {
                return Ok(InitKind::Exponential {
                    rate: DEFAULT_EXP_RATE,
                })
            }
            _ => {}
        }
        let rate = s
            .strip_prefix("exponential(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|r| r.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown initializer '{s}'")))?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Ok(InitKind::Exponential { rate })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub kind: InitKind,
    pub seed: u64,
}

impl InitSpec {
    pub fn apply(&self, net: &Mlp) -> Result<Mlp> {
        let mut rng = Rng::new(self.seed);
        match self.kind {
            InitKind::Exponential { rate } => init_exponential(net, rate, &mut rng),
            kind => init_gaussian(net, kind, &mut rng),
        }
    }
}

/// Inverse-CDF sample of Exp(rate) from `u ∈ (0, 1)`.
#[inline]
pub fn exponential_from_unit(u: f64, rate: f64) -> f64 {
    -u.ln() / rate
}

pub fn sample_exponential(rng: &mut Rng, rate: f64) -> f64 {
    exponential_from_unit(rng.open01(), rate)
}

/// Draws every weight and bias i.i.d. from Exp(rate); all results are > 0.
pub fn init_exponential(net: &Mlp, rate: f64, rng: &mut Rng) -> Result<Mlp> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exponential rate must be positive, got {rate}"
        )));
    }
    let mut out = net.clone();
    for layer in out.layers_mut() {
        for w in layer.weights.data_mut() {
            *w = sample_exponential(rng, rate);
        }
        for b in &mut layer.biases {
            *b = sample_exponential(rng, rate);
        }
    }
    Ok(out)
}

/// Standard deviation used for a layer with the given fan-in/fan-out.
pub fn gaussian_std(kind: InitKind, fan_in: usize, fan_out: usize) -> Result<f64> {
    match kind {
        InitKind::Kaiming => Ok((2.0 / fan_in as f64).sqrt()),
        InitKind::Xavier => Ok((2.0 / (fan_in + fan_out) as f64).sqrt()),
        InitKind::Exponential { .. } => Err(Error::InvalidArgument(
            "exponential is not a Gaussian initializer".into(),
        )),
    }
}

/// Zero-mean Gaussian weights with per-layer std from [`gaussian_std`];
/// biases are zeroed.
pub fn init_gaussian(net: &Mlp, kind: InitKind, rng: &mut Rng) -> Result<Mlp> {
    let mut out = net.clone();
    for layer in out.layers_mut() {
        let std = gaussian_std(kind, layer.input_dim(), layer.output_dim())?;
        for w in layer.weights.data_mut() {
            *w = rng.normal(0.0, std);
        }
        layer.biases.iter_mut().for_each(|b| *b = 0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::ActivationKind;

    #[test]
    fn analytic_inversion() {
        assert_eq!(exponential_from_unit((-1.0f64).exp(), 1.0), 1.0);
    }

    #[test]
    fn exponential_rejects_bad_rate() {
        let mut rng = Rng::new(0);
        assert!(init_exponential(&Mlp::actor(), 0.0, &mut rng).is_err());
        assert!(init_exponential(&Mlp::actor(), -3.0, &mut rng).is_err());
    }

    #[test]
    fn exponential_init_is_strictly_positive() {
        let mut rng = Rng::new(5);
        let net = init_exponential(&Mlp::actor(), 100.0, &mut rng).unwrap();
        assert!(net.min_param() > 0.0);
    }

    #[test]
    fn xavier_square_layer_std() {
        assert_eq!(
            gaussian_std(InitKind::Xavier, 10, 10).unwrap(),
            0.1f64.sqrt()
        );
        assert_eq!(
            gaussian_std(InitKind::Kaiming, 10, 2).unwrap(),
            0.2f64.sqrt()
        );
    }

    #[test]
    fn kaiming_sample_std_matches() {
        let net = Mlp::zeros(&[10, 100_000], &[ActivationKind::Identity]).unwrap();
        let mut rng = Rng::new(9);
        let net = init_gaussian(&net, InitKind::Kaiming, &mut rng).unwrap();
        let w = net.layers()[0].weights.data();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = 0.2f64.sqrt();
        assert!((var.sqrt() - target).abs() / target < 0.05);
        assert!(net.layers()[0].biases.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn same_seed_same_parameters() {
        for kind in [
            InitKind::Exponential { rate: 100.0 },
            InitKind::Kaiming,
            InitKind::Xavier,
        ] {
            let spec = InitSpec { kind, seed: 42 };
            let a = spec.apply(&Mlp::actor()).unwrap();
            let b = spec.apply(&Mlp::actor()).unwrap();
            assert_eq!(a.flatten(), b.flatten());
        }
    }

    #[test]
    fn init_kind_parsing() {
        assert_eq!("kaiming".parse::<InitKind>().unwrap(), InitKind::Kaiming);
        assert_eq!(
            "exponential(50)".parse::<InitKind>().unwrap(),
            InitKind::Exponential { rate: 50.0 }
        );
        assert!("exponential(-1)".parse::<InitKind>().is_err());
        assert!("uniform".parse::<InitKind>().is_err());
    }
}
