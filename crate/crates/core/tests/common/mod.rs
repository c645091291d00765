//! Reference implementations the library is checked against. They favour
//! the most literal formula over speed.

#![allow(dead_code)]

use partppo::env::{CartpoleParams, CartpoleState, TerminationReason};

/// A_t = Σ_{l=0}^{T−t−1} (γλ)^l δ_{t+l}, summed term by term.
pub fn gae_double_sum(deltas: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let t_max = deltas.len();
    (0..t_max)
        .map(|t| {
            (0..t_max - t)
                .map(|l| (gamma * lambda).powi(l as i32) * deltas[t + l])
                .sum()
        })
        .collect()
}

/// Kolmogorov–Smirnov distance between a sample and Exp(rate).
pub fn ks_distance_exponential(sample: &[f64], rate: f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - (-rate * x).exp();
            (cdf - i as f64 / n)
                .abs()
                .max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max)
}

/// The termination rules restated from the physical limits: 15 degrees of
/// pole tilt, 0.39 m of cart travel, 195 steps.
pub fn expected_termination(s: &CartpoleState, p: &CartpoleParams) -> TerminationReason {
    let angle_limit = 15.0_f64.to_radians();
    assert!((p.angle_limit - angle_limit).abs() < 1e-12);
    assert_eq!(p.position_limit, 0.39);
    assert_eq!(p.max_steps, 195);
    if s.theta.abs() > angle_limit {
        TerminationReason::PoleFell
    } else if s.x.abs() > 0.39 {
        TerminationReason::CartOut
    } else if s.step_index >= 195 {
        TerminationReason::MaxSteps
    } else {
        TerminationReason::Running
    }
}
