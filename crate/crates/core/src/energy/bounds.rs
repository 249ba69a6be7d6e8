//! Equivalence bounds between the standard and laminated curl norms, and
//! the Jensen check for convexity of the laminated functionals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{patch_laminated_curl, patch_standard_curl};
use crate::error::{Error, Result};
use crate::fields::{curl_norm, Boundary, CurlMode, ScalarField3};
use crate::linalg;
use crate::slipsys::{SlipPatch, SlipSystem};

/// `|b1⊥·b2|` below this makes the lower bound meaningless.
pub const EQUIV1_CONDITIONING: f64 = 1e-6;

/// Relative slack allowed for rounding in an inequality `lhs ≤ rhs`.
const SLACK: f64 = 1e-12;

fn holds(lhs: f64, rhs: f64) -> bool {
    rhs - lhs >= -SLACK * rhs.abs().max(1.0)
}

/// One inequality `lhs ≤ factor·norm`, with `rhs = factor·norm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub factor: f64,
    pub slack: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(lhs: f64, factor: f64, norm: f64) -> Self {
        let rhs = factor * norm;
        BoundCheck {
            lhs,
            rhs,
            factor,
            slack: rhs - lhs,
            pass: holds(lhs, rhs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub standard: f64,
    pub laminated: f64,
    /// `standard ≤ (|b2·b1| + |b2·b1⊥|)·laminated`
    pub upper: BoundCheck,
    /// `standard ≤ √2·laminated`
    pub upper_sqrt2: BoundCheck,
    /// `laminated ≤ √2(1 + |b1·b2|)/|b1⊥·b2|·standard`
    pub lower: BoundCheck,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.upper.pass && self.upper_sqrt2.pass && self.lower.pass
    }
}

/// `|b2·b1| + |b2·b1⊥|`, between 1 (orthogonal) and √2 (45°).
pub fn upper_factor(system: &SlipSystem) -> f64 {
    linalg::dot(system.b2(), system.b1()).abs() + linalg::dot(system.b2(), system.b1_perp()).abs()
}

/// `√2(1 + |b1·b2|)/|b1⊥·b2|`.
pub fn lower_factor(system: &SlipSystem) -> Result<f64> {
    let d = linalg::dot(system.b1_perp(), system.b2()).abs();
    if d < EQUIV1_CONDITIONING {
        return Err(Error::guard(
            "conditioning",
            format!("|b1⊥·b2| = {d:e} is below {EQUIV1_CONDITIONING:e}"),
        ));
    }
    Ok(std::f64::consts::SQRT_2 * (1.0 + system.cos_angle()) / d)
}

pub fn curl_bounds_check(patch: &SlipPatch, system: &SlipSystem, boundary: Boundary) -> Result<BoundsReport> {
    let lower = lower_factor(system)?;
    let standard = patch_standard_curl(patch, system, boundary)?;
    let laminated = patch_laminated_curl(patch, boundary)?;
    Ok(BoundsReport {
        standard,
        laminated,
        upper: BoundCheck::new(standard, upper_factor(system), laminated),
        upper_sqrt2: BoundCheck::new(standard, std::f64::consts::SQRT_2, laminated),
        lower: BoundCheck::new(laminated, lower, standard),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub trials: usize,
    pub failures: usize,
    /// Smallest `λf(s) + (1−λ)f(t) − f(λs + (1−λ)t)` seen for the curl.
    pub worst_slack_curl: f64,
    /// The same for the hardening term.
    pub worst_slack_hardening: f64,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn lam_curl(c: &[ScalarField3; 2]) -> Result<f64> {
    curl_norm(&[&c[0], &c[1]], CurlMode::SingleSum, Boundary::Replicate)
}

fn lam_hardening(c: &[ScalarField3; 2], alpha: f64) -> f64 {
    if alpha < 1.0 {
        return 0.0;
    }
    let vol = c[0].grid().cell_volume();
    let sum: f64 = c
        .iter()
        .map(|f| f.values().iter().map(|v| v.abs().powf(alpha)).sum::<f64>())
        .sum();
    2f64.powf(alpha - 1.0) * sum * vol
}

fn mix(a: &ScalarField3, b: &ScalarField3, lambda: f64) -> Result<ScalarField3> {
    a.ensure_compatible(b)?;
    a.with_values(
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
            .collect(),
    )
}

/// Jensen's inequality for the laminated curl and hardening along random
/// segments: `factory` draws the endpoint component pairs `(s, t)`.
pub fn convexity_check<R: Rng>(
    trials: usize,
    alpha: f64,
    rng: &mut R,
    mut factory: impl FnMut(&mut R) -> Result<([ScalarField3; 2], [ScalarField3; 2])>,
) -> Result<ConvexityReport> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    super::check_alpha(alpha)?;
    let mut report = ConvexityReport {
        trials,
        failures: 0,
        worst_slack_curl: f64::INFINITY,
        worst_slack_hardening: f64::INFINITY,
    };
    for _ in 0..trials {
        let (s, t) = factory(rng)?;
        let lambda: f64 = rng.gen();
        let m = [mix(&s[0], &t[0], lambda)?, mix(&s[1], &t[1], lambda)?];
        let rhs_c = lambda * lam_curl(&s)? + (1.0 - lambda) * lam_curl(&t)?;
        let lhs_c = lam_curl(&m)?;
        let rhs_h = lambda * lam_hardening(&s, alpha) + (1.0 - lambda) * lam_hardening(&t, alpha);
        let lhs_h = lam_hardening(&m, alpha);
        report.worst_slack_curl = report.worst_slack_curl.min(rhs_c - lhs_c);
        report.worst_slack_hardening = report.worst_slack_hardening.min(rhs_h - lhs_h);
        if !holds(lhs_c, rhs_c) || !holds(lhs_h, rhs_h) {
            report.failures += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    #[test]
    fn factors_for_orthogonal_and_diagonal_burgers() {
        let m = [1.0, 0.0, 0.0];
        let orth = SlipSystem::new(m, [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        assert!((upper_factor(&orth) - 1.0).abs() < 1e-15);
        assert!((lower_factor(&orth).unwrap() - SQRT_2).abs() < 1e-15);
        let diag = SlipSystem::new(m, [0.0, 1.0, 0.0], [0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        assert!((upper_factor(&diag) - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn upper_factor_peaks_at_forty_five_degrees() {
        let m = [1.0, 0.0, 0.0];
        let mut best = (0.0, 0.0);
        for k in 1..180 {
            let th = k as f64 * std::f64::consts::PI / 180.0;
            let sys = SlipSystem::new(m, [0.0, 1.0, 0.0], [0.0, th.cos(), th.sin()]).unwrap();
            let f = upper_factor(&sys);
            assert!(f <= SQRT_2 + 1e-15);
            if f > best.0 {
                best = (f, th);
            }
        }
        assert!((best.1 - std::f64::consts::FRAC_PI_4).abs() < 1e-12 || (best.1 - 3.0 * std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn ill_conditioned_lower_bound_is_refused() {
        let th: f64 = 1e-8;
        let sys = SlipSystem::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, th.cos(), th.sin()]).unwrap();
        assert!(matches!(lower_factor(&sys), Err(Error::Guard { .. })));
    }
}
