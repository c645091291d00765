//! First-order update rules.
//!
//! `Asga` and `Csga` ascend and keep parameters non-negative: ASGA reflects a
//! step that would cross zero back into the positive half-line, CSGA truncates
//! it to zero. `Sgd` descends (critic), `Sga` ascends with no constraint.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Sga,
    Asga,
    Csga,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Sga => "sga",
            OptimizerKind::Asga => "asga",
            OptimizerKind::Csga => "csga",
        }
    }

    /// Whether the rule keeps parameters in the non-negative orthant.
    pub fn is_non_negative(self) -> bool {
        matches!(self, OptimizerKind::Asga | OptimizerKind::Csga)
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "sga" => Ok(OptimizerKind::Sga),
            "asga" => Ok(OptimizerKind::Asga),
            "csga" => Ok(OptimizerKind::Csga),
            other => Err(Error::InvalidArgument(format!(
                "unknown optimizer '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        check_lr(learning_rate)?;
        Ok(OptimizerSpec {
            kind,
            learning_rate,
        })
    }

    /// `grads` is the gradient of the objective this rule optimizes: a loss
    /// for `Sgd`, a reward-like objective for the ascent rules.
    pub fn step(&self, params: &[f64], grads: &[f64]) -> Result<Vec<f64>> {
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => step_sgd(params, grads, lr),
            OptimizerKind::Sga => step_sga(params, grads, lr),
            OptimizerKind::Asga => step_asga(params, grads, lr),
            OptimizerKind::Csga => step_csga(params, grads, lr),
        }
    }
}

fn check_lr(lr: f64) -> Result<()> {
    if lr > 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {lr}"
        )))
    }
}

fn zip_map(params: &[f64], grads: &[f64], f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    if params.len() != grads.len() {
        return Err(Error::LengthMismatch {
            params: params.len(),
            grads: grads.len(),
        });
    }
    Ok(params.iter().zip(grads).map(|(&p, &g)| f(p, g)).collect())
}

/// `|θ + η·g|`
pub fn step_asga(params: &[f64], grads: &[f64], lr: f64) -> Result<Vec<f64>> {
    zip_map(params, grads, |p, g| (p + lr * g).abs())
}

/// `max(0, θ + η·g)`
pub fn step_csga(params: &[f64], grads: &[f64], lr: f64) -> Result<Vec<f64>> {
    zip_map(params, grads, |p, g| (p + lr * g).max(0.0))
}

/// `θ − η·g`
pub fn step_sgd(params: &[f64], grads: &[f64], lr: f64) -> Result<Vec<f64>> {
    zip_map(params, grads, |p, g| p - lr * g)
}

/// `θ + η·g`
pub fn step_sga(params: &[f64], grads: &[f64], lr: f64) -> Result<Vec<f64>> {
    zip_map(params, grads, |p, g| p + lr * g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn asga_examples() {
        assert!(close(step_asga(&[0.5], &[1.0], 0.1).unwrap()[0], 0.6));
        assert!(close(step_asga(&[0.05], &[-1.0], 0.1).unwrap()[0], 0.05));
        assert_eq!(step_asga(&[0.1], &[-1.0], 0.1).unwrap()[0], 0.0);
    }

    #[test]
    fn csga_examples() {
        assert_eq!(step_csga(&[0.05], &[-1.0], 0.1).unwrap()[0], 0.0);
        assert!(close(step_csga(&[0.5], &[1.0], 0.1).unwrap()[0], 0.6));
        assert_eq!(step_csga(&[0.0], &[0.0], 7.0).unwrap()[0], 0.0);
    }

    #[test]
    fn sgd_examples() {
        assert!(close(step_sgd(&[1.0], &[0.5], 0.003).unwrap()[0], 0.9985));
        assert_eq!(
            step_sgd(&[1.0, -2.0], &[0.0, 0.0], 0.5).unwrap(),
            vec![1.0, -2.0]
        );
    }

    #[test]
    fn length_mismatch_is_reported() {
        for f in [step_asga, step_csga, step_sgd, step_sga] {
            assert!(matches!(
                f(&[1.0, 2.0], &[1.0], 0.1),
                Err(Error::LengthMismatch {
                    params: 2,
                    grads: 1
                })
            ));
        }
    }

    #[test]
    fn spec_rejects_non_positive_lr() {
        assert!(OptimizerSpec::new(OptimizerKind::Asga, 0.0).is_err());
        assert!(OptimizerSpec::new(OptimizerKind::Asga, f64::NAN).is_err());
        assert!(OptimizerSpec::new(OptimizerKind::Asga, 0.1).is_ok());
    }

    proptest! {
        #[test]
        fn sgd_is_sga_with_negated_gradient(
            p in prop::collection::vec(-10.0f64..10.0, 1..16),
            seed in prop::collection::vec(-10.0f64..10.0, 16),
            lr in 1e-4f64..1.0,
        ) {
            let g: Vec<f64> = seed[..p.len()].to_vec();
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            prop_assert_eq!(step_sgd(&p, &g, lr).unwrap(), step_sga(&p, &neg, lr).unwrap());
        }

        #[test]
        fn asga_and_csga_agree_on_interior(
            p in prop::collection::vec(0.0f64..5.0, 1..16),
            g in prop::collection::vec(-5.0f64..5.0, 16),
            lr in 1e-4f64..1.0,
        ) {
            let g = &g[..p.len()];
            let interior = p.iter().zip(g).all(|(a, b)| a + lr * b >= 0.0);
            prop_assume!(interior);
            prop_assert_eq!(step_asga(&p, g, lr).unwrap(), step_csga(&p, g, lr).unwrap());
        }
    }
}
