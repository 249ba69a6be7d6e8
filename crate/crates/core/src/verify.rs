//! Randomized property suites: curl-norm bounds, convexity, truncation and
//! mollification monotonicity, and the slip decomposition round trip.
//!
//! Every trial draws its own seed from the master generator up front, so the
//! report depends only on the seed, not on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::energy::{convexity_check, curl_bounds_check, upper_factor};
use crate::error::{Error, Result};
use crate::fields::{curl_norm, Boundary, CurlMode, Grid3, PatchFrame, ScalarField3, VectorField3};
use crate::linalg::{self, Vec3};
use crate::slipsys::{check_rsc_cells, decompose_slip, recompose_slip, SlipCell, SlipPatch, SlipSystem};
use crate::smoothing::{mollify, truncate, Extension, KernelProfile, MollifierKernel};

/// Relative slack for `lhs ≤ rhs` comparisons.
pub const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyParams {
    pub bounds_trials: usize,
    pub convexity_trials: usize,
    pub truncation_trials: usize,
    pub mollification_trials: usize,
    pub decomposition_trials: usize,
    /// Slice resolution range for the bounds suite.
    pub min_resolution: usize,
    pub max_resolution: usize,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            bounds_trials: 200,
            convexity_trials: 500,
            truncation_trials: 100,
            mollification_trials: 100,
            decomposition_trials: 50,
            min_resolution: 64,
            max_resolution: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub trials: usize,
    pub failures: usize,
    /// Smallest `rhs − lhs` seen (negative means a violation).
    pub worst_slack: f64,
    pub passed: bool,
}

impl SuiteReport {
    fn from_slacks(slacks: &[(f64, bool)]) -> Self {
        let failures = slacks.iter().filter(|s| !s.1).count();
        SuiteReport {
            trials: slacks.len(),
            failures,
            worst_slack: slacks.iter().map(|s| s.0).fold(f64::INFINITY, f64::min),
            passed: failures == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    /// Upper-bound prefactor for orthogonal Burgers vectors (expected 1).
    pub orthogonal: f64,
    /// The same at 45° (expected √2).
    pub diagonal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub bounds: SuiteReport,
    pub convexity: SuiteReport,
    pub truncation: SuiteReport,
    pub mollification: SuiteReport,
    /// Worst integral change under mollification.
    pub mollification_integral_drift: f64,
    pub decomposition: SuiteReport,
    pub factors: FactorReport,
}

fn holds(lhs: f64, rhs: f64) -> bool {
    rhs - lhs >= -SLACK * rhs.abs().max(1.0)
}

/// A random unit vector.
pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = linalg::norm(v);
        if n > 0.1 && n <= 1.0 {
            return linalg::scale(v, 1.0 / n);
        }
    }
}

/// A random slip system whose Burgers vectors meet at an angle in
/// `[min_angle, π − min_angle]`.
pub fn random_system<R: Rng>(rng: &mut R, min_angle: f64) -> Result<SlipSystem> {
    let m = random_unit(rng);
    let frame = PatchFrame::from_normal(m)?;
    let phi = rng.gen_range(0.0..2.0 * PI);
    let b1 = linalg::lincomb(phi.cos(), frame.e2(), phi.sin(), frame.e3());
    let theta = rng.gen_range(min_angle..PI - min_angle);
    let b2 = linalg::lincomb(theta.cos(), b1, theta.sin(), linalg::cross(m, b1));
    SlipSystem::new(m, b1, b2)
}

/// Random field on `grid`: a sum of smooth bumps, waves and sharp blocks,
/// optionally with cell noise.
pub fn random_field<R: Rng>(rng: &mut R, grid: &Grid3, frame: PatchFrame, rough: bool) -> Result<ScalarField3> {
    let lo = grid.origin();
    let ext = grid.extents();
    let rel = move |p: Vec3, a: usize| (p[a] - lo[a]) / ext[a];
    let mut terms: Vec<Box<dyn Fn(Vec3) -> f64 + Sync + Send>> = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        let amp: f64 = rng.gen_range(-2.0..2.0);
        match rng.gen_range(0..3) {
            0 => {
                let c = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
                let w = rng.gen_range(0.05..0.3);
                terms.push(Box::new(move |p| {
                    let d: f64 = (0..3).map(|a| (rel(p, a) - c[a]).powi(2)).sum();
                    amp * (-d / (2.0 * w * w)).exp()
                }));
            }
            1 => {
                let k = [rng.gen_range(0..3) as f64, rng.gen_range(1..5) as f64, rng.gen_range(1..5) as f64];
                let ph = rng.gen_range(0.0..2.0 * PI);
                terms.push(Box::new(move |p| {
                    amp * (2.0 * PI * (k[0] * rel(p, 0) + k[1] * rel(p, 1) + k[2] * rel(p, 2)) + ph).sin()
                }));
            }
            _ => {
                let a0 = [rng.gen_range(0.0..0.7), rng.gen_range(0.0..0.7)];
                let size = [rng.gen_range(0.1..0.3), rng.gen_range(0.1..0.3)];
                terms.push(Box::new(move |p| {
                    let (y, z) = (rel(p, 1), rel(p, 2));
                    if y >= a0[0] && y < a0[0] + size[0] && z >= a0[1] && z < a0[1] + size[1] {
                        amp
                    } else {
                        0.0
                    }
                }));
            }
        }
    }
    let mut values: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let p = grid.center_of(idx);
            terms.iter().map(|t| t(p)).sum()
        })
        .collect();
    if rough {
        let level = rng.gen_range(0.05..0.5);
        for v in &mut values {
            *v += level * rng.gen_range(-1.0..1.0);
        }
    }
    ScalarField3::new(grid.clone(), frame, values)
}

fn trial_seeds(rng: &mut ChaCha8Rng, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.gen()).collect()
}

fn bounds_suite(seeds: &[u64], params: &VerifyParams) -> Result<SuiteReport> {
    let results: Vec<Result<(f64, bool)>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = random_system(&mut rng, PI / 18.0)?;
            let frame = sys.slip_frame();
            let ny = rng.gen_range(params.min_resolution..=params.max_resolution);
            let nz = rng.gen_range(params.min_resolution..=params.max_resolution);
            let grid = Grid3::new([1.0, 1.0, 1.0], [4, ny, nz], [0.0; 3])?;
            let rough = rng.gen_bool(0.5);
            let c1 = random_field(&mut rng, &grid, frame, rough)?;
            let c2 = random_field(&mut rng, &grid, frame, rough)?;
            let ind = ScalarField3::constant(grid, frame, 1.0);
            let patch = SlipPatch::new(0, ind, c1, c2)?;
            let r = curl_bounds_check(&patch, &sys, Boundary::Replicate)?;
            let slack = r.upper.slack.min(r.upper_sqrt2.slack).min(r.lower.slack);
            Ok((slack, r.passed()))
        })
        .collect();
    let slacks = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport::from_slacks(&slacks))
}

fn convexity_suite(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut total = SuiteReport {
        trials: 0,
        failures: 0,
        worst_slack: f64::INFINITY,
        passed: true,
    };
    // Half the trials with linear hardening, half with α = 1.5.
    let split = [(1.0, trials / 2), (1.5, trials - trials / 2)];
    for (i, &(alpha, n)) in split.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let r = convexity_check(n, alpha, &mut rng, |rng| {
            let grid = Grid3::new([1.0; 3], [4, rng.gen_range(16..=32), rng.gen_range(16..=32)], [0.0; 3])?;
            let f = PatchFrame::identity();
            let rough = rng.gen_bool(0.5);
            Ok((
                [random_field(rng, &grid, f, rough)?, random_field(rng, &grid, f, rough)?],
                [random_field(rng, &grid, f, rough)?, random_field(rng, &grid, f, rough)?],
            ))
        })?;
        total.trials += r.trials;
        total.failures += r.failures;
        total.worst_slack = total.worst_slack.min(r.worst_slack_curl).min(r.worst_slack_hardening);
    }
    total.passed = total.failures == 0;
    Ok(total)
}

fn tv(f: &ScalarField3) -> Result<f64> {
    curl_norm(&[f], CurlMode::SingleSum, Boundary::Replicate)
}

fn truncation_suite(seeds: &[u64]) -> Result<SuiteReport> {
    let results: Vec<Result<(f64, bool)>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = Grid3::new([1.0; 3], [4, rng.gen_range(24..=64), rng.gen_range(24..=64)], [0.0; 3])?;
            let f = random_field(&mut rng, &grid, PatchFrame::identity(), true)?;
            let mut mags: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
            mags.sort_by(f64::total_cmp);
            let level = mags[(0.9 * (mags.len() - 1) as f64) as usize].max(1e-3);
            let before = tv(&f)?;
            let after = tv(&truncate(&f, level)?)?;
            Ok((before - after, holds(after, before)))
        })
        .collect();
    let slacks = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport::from_slacks(&slacks))
}

fn mollification_suite(seeds: &[u64]) -> Result<(SuiteReport, f64)> {
    let results: Vec<Result<(f64, bool, f64)>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(24..=64);
            let grid = Grid3::new([1.0; 3], [4, n, n], [0.0; 3])?;
            let cells = rng.gen_range(2.0..4.0);
            let kernel = MollifierKernel::new(cells * grid.min_spacing(), &grid, KernelProfile::default())?;
            let rough = rng.gen_bool(0.5);
            let raw = random_field(&mut rng, &grid, PatchFrame::identity(), rough)?;
            // Keep the support clear of the faces by the kernel reach.
            let reach = kernel.reach();
            let f = raw.with_values(
                raw.values()
                    .iter()
                    .enumerate()
                    .map(|(idx, &v)| {
                        let [_, j, k] = grid.ijk(idx);
                        let inside = j >= reach[1] && j + reach[1] < n && k >= reach[2] && k + reach[2] < n;
                        if inside {
                            v
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )?;
            let m = mollify(&f, &kernel, Extension::Zero)?;
            let (before, after) = (tv(&f)?, tv(&m)?);
            let drift = (m.integral() - f.integral()).abs();
            let ok = holds(after, before) && drift <= SLACK * f.l1_norm().max(1.0);
            Ok((before - after, ok, drift))
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let slacks: Vec<(f64, bool)> = rows.iter().map(|r| (r.0, r.1)).collect();
    let drift = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok((SuiteReport::from_slacks(&slacks), drift))
}

fn decomposition_suite(seeds: &[u64]) -> Result<SuiteReport> {
    let results: Vec<Result<(f64, bool)>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = random_system(&mut rng, PI / 18.0)?;
            let grid = Grid3::new([1.0; 3], [4, 16, 16], [0.0; 3])?;
            let frame = PatchFrame::identity();
            let a = random_field(&mut rng, &grid, frame, true)?;
            let b = random_field(&mut rng, &grid, frame, true)?;
            let s = recompose_slip(&a, &b, &sys)?;
            let (c1, c2) = decompose_slip(&s, &sys)?;
            let back: VectorField3 = recompose_slip(&c1, &c2, &sys)?;
            let scale = s.max_norm().max(1.0);
            let err = s
                .values()
                .iter()
                .zip(back.values())
                .map(|(x, y)| linalg::norm(linalg::sub(*x, *y)))
                .fold(0.0, f64::max);
            let cells: Vec<SlipCell> = s.values().iter().map(|&v| SlipCell { system: Some(0), s: v }).collect();
            let rsc = check_rsc_cells(&cells, &[sys], 1e-9)?;
            let tol = SLACK * scale;
            Ok((tol - err, err <= tol && rsc.passed()))
        })
        .collect();
    let slacks = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport::from_slacks(&slacks))
}

/// Upper-bound prefactors for the orthogonal and 45° fixtures.
pub fn factor_fixtures() -> Result<FactorReport> {
    let m = [1.0, 0.0, 0.0];
    let ortho = SlipSystem::new(m, [0.0, 1.0, 0.0], [0.0, 0.0, 1.0])?;
    let diag = SlipSystem::new(m, [0.0, 1.0, 0.0], [0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2])?;
    Ok(FactorReport {
        orthogonal: upper_factor(&ortho),
        diagonal: upper_factor(&diag),
    })
}

/// Runs every suite from `seed`.
pub fn run_verify(params: &VerifyParams, seed: u64) -> Result<VerifyReport> {
    if params.min_resolution < 4 || params.min_resolution > params.max_resolution {
        return Err(Error::param("verify.min_resolution", "must be at least 4 and at most max_resolution"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds_seeds = trial_seeds(&mut rng, params.bounds_trials);
    let convexity_seed: u64 = rng.gen();
    let trunc_seeds = trial_seeds(&mut rng, params.truncation_trials);
    let moll_seeds = trial_seeds(&mut rng, params.mollification_trials);
    let dec_seeds = trial_seeds(&mut rng, params.decomposition_trials);

    let bounds = bounds_suite(&bounds_seeds, params)?;
    let convexity = if params.convexity_trials > 0 {
        convexity_suite(convexity_seed, params.convexity_trials)?
    } else {
        SuiteReport::from_slacks(&[])
    };
    let truncation = truncation_suite(&trunc_seeds)?;
    let (mollification, mollification_integral_drift) = mollification_suite(&moll_seeds)?;
    let decomposition = decomposition_suite(&dec_seeds)?;
    let factors = factor_fixtures()?;
    let passed = [&bounds, &convexity, &truncation, &mollification, &decomposition]
        .iter()
        .all(|s| s.passed);
    Ok(VerifyReport {
        seed,
        passed,
        bounds,
        convexity,
        truncation,
        mollification,
        mollification_integral_drift,
        decomposition,
        factors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_systems_are_valid_and_well_conditioned() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = random_system(&mut rng, PI / 18.0).unwrap();
            assert!(s.cos_angle() <= (PI / 18.0).cos() + 1e-12);
        }
    }

    #[test]
    fn factor_fixture_values() {
        let f = factor_fixtures().unwrap();
        assert_eq!(f.orthogonal, 1.0);
        assert!((f.diagonal - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn small_run_passes() {
        let params = VerifyParams {
            bounds_trials: 4,
            convexity_trials: 6,
            truncation_trials: 4,
            mollification_trials: 4,
            decomposition_trials: 4,
            min_resolution: 16,
            max_resolution: 24,
        };
        let r = run_verify(&params, 1).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r, run_verify(&params, 1).unwrap());
    }
}
