//! Energy functionals: elastic terms (geometrically linear and multiplicative
//! finite strain), curl norms, dissipation, and the assembled totals for
//! single-slip and relaxed-slip states.

mod bounds;

pub use bounds::{
    convexity_check, curl_bounds_check, lower_factor, upper_factor, BoundCheck, BoundsReport, ConvexityReport,
    EQUIV1_CONDITIONING,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{curl_norm, gradient, Boundary, CurlMode, ScalarField3, TensorField3, VectorField3};
use crate::linalg::{self, Mat3, IDENTITY};
use crate::slipsys::{check_rsc_cells, check_ssc, recompose_slip, RelaxedState, SideCondition, SlipPatch, SlipSystem, ViolationReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ElasticMode {
    /// `∫ |sym(∇u − β)|²`
    Linear,
    /// `∫ W((I + ∇u)(I − β))`
    Nonlinear {
        #[serde(default = "default_p")]
        p: f64,
    },
}

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    pub sigma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub elastic: ElasticMode,
    /// `Ssc` evaluates the single-slip energy, `Rsc` the relaxed one.
    pub side_condition: SideCondition,
    pub ssc_tol: f64,
    pub rsc_tol: f64,
    pub boundary: Boundary,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            sigma: 1.0,
            tau: 1.0,
            alpha: 1.0,
            elastic: ElasticMode::Linear,
            side_condition: SideCondition::Rsc,
            ssc_tol: 1e-9,
            rsc_tol: 1e-9,
            boundary: Boundary::Replicate,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} is outside (0, 2]")))
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("sigma", "must be finite and nonnegative"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::param("tau", "must be finite and nonnegative"));
        }
        check_alpha(self.alpha)?;
        if let ElasticMode::Nonlinear { p } = self.elastic {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::param("p", format!("{p} must exceed 1")));
            }
        }
        if !(self.ssc_tol >= 0.0 && self.rsc_tol >= 0.0) {
            return Err(Error::param("tolerance", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Stored-energy density of the elastic deformation gradient.
pub trait StrainDensity: Sync {
    fn eval(&self, f: &Mat3) -> f64;
}

/// `W(F) = |F − I|^p` (Frobenius).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDensity {
    pub p: f64,
}

impl StrainDensity for PowerDensity {
    fn eval(&self, f: &Mat3) -> f64 {
        linalg::frobenius(&linalg::mat_sub(f, &IDENTITY)).powf(self.p)
    }
}

impl<F: Fn(&Mat3) -> f64 + Sync> StrainDensity for F {
    fn eval(&self, f: &Mat3) -> f64 {
        self(f)
    }
}

/// Probe matrices for the growth spot check: scaled identity, a shear, and
/// a fixed generic matrix, at magnitudes spanning four decades.
fn probes() -> Vec<Mat3> {
    let shear = [[1.0, 0.7, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let generic = [[0.3, -1.1, 0.4], [0.9, 0.2, -0.5], [-0.6, 0.8, 1.3]];
    let mut out = vec![IDENTITY, linalg::ZERO33];
    for t in [0.1, 1.0, 10.0, 100.0, 1000.0] {
        for q in [IDENTITY, shear, generic] {
            out.push(linalg::mat_scale(&q, t));
        }
    }
    out
}

/// Spot check of `−c₁ + c₂|F|^p ≤ W(F) ≤ C₁ + C₂|F|^p` at the probe
/// matrices: values must be finite and nonnegative, and for large `|F|` the
/// ratio `W(F)/|F|^p` must stay within `[1e-6, 1e6]`.
pub fn check_growth(w: &dyn StrainDensity, p: f64) -> Result<()> {
    for f in probes() {
        let v = w.eval(&f);
        if !v.is_finite() || v < 0.0 {
            return Err(Error::param("W", format!("W = {v} at probe {f:?}")));
        }
        let n = linalg::frobenius(&f);
        if n >= 100.0 {
            let ratio = v / n.powf(p);
            if !(1e-6..=1e6).contains(&ratio) {
                return Err(Error::param(
                    "W",
                    format!("W(F)/|F|^p = {ratio:e} at |F| = {n}: violates p-growth"),
                ));
            }
        }
    }
    Ok(())
}

#[inline]
pub fn linear_density(grad_u: &Mat3, beta: &Mat3) -> f64 {
    linalg::frobenius_sq(&linalg::sym(&linalg::mat_sub(grad_u, beta)))
}

/// `F_el = (I + ∇u)(I − β)`.
#[inline]
pub fn elastic_gradient(grad_u: &Mat3, beta: &Mat3) -> Mat3 {
    linalg::mat_mul(&linalg::mat_add(&IDENTITY, grad_u), &linalg::mat_sub(&IDENTITY, beta))
}

fn check_pair(grad_u: &TensorField3, beta: &TensorField3) -> Result<()> {
    grad_u.grid().ensure_matches(beta.grid())?;
    grad_u.frame().ensure_matches(beta.frame())
}

pub fn elastic_linear(grad_u: &TensorField3, beta: &TensorField3) -> Result<f64> {
    check_pair(grad_u, beta)?;
    let sum: f64 = grad_u
        .values()
        .par_iter()
        .zip(beta.values().par_iter())
        .map(|(g, b)| linear_density(g, b))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(sum * grad_u.grid().cell_volume())
}

pub fn elastic_nonlinear(grad_u: &TensorField3, beta: &TensorField3, w: &dyn StrainDensity) -> Result<f64> {
    check_pair(grad_u, beta)?;
    let per_cell: Vec<f64> = grad_u
        .values()
        .par_iter()
        .zip(beta.values().par_iter())
        .map(|(g, b)| w.eval(&elastic_gradient(g, b)))
        .collect();
    if let Some(index) = per_cell.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::param("W", format!("negative or non-finite density at cell {index}")));
    }
    Ok(per_cell.iter().sum::<f64>() * grad_u.grid().cell_volume())
}

/// Midpoint integral of `|sym(∇u − β)|²`.
pub fn elastic_energy_linear(u: &VectorField3, beta: &TensorField3) -> Result<f64> {
    elastic_linear(&gradient(u)?, beta)
}

/// Midpoint integral of `W((I + ∇u)(I − β))`.
pub fn elastic_energy_nonlinear(u: &VectorField3, beta: &TensorField3, w: &dyn StrainDensity) -> Result<f64> {
    elastic_nonlinear(&gradient(u)?, beta, w)
}

/// `Σ_j ∫ |D_{y,z} c_j| dx¹` of one patch.
pub fn patch_laminated_curl(patch: &SlipPatch, boundary: Boundary) -> Result<f64> {
    curl_norm(&[patch.c1(), patch.c2()], CurlMode::SingleSum, boundary)
}

fn in_plane_components(patch: &SlipPatch, system: &SlipSystem) -> Result<[ScalarField3; 2]> {
    let e1 = patch.frame().e1();
    if linalg::norm(linalg::sub(e1, system.m())) > 1e-12 {
        return Err(Error::FrameMismatch(format!(
            "patch frame e1 = {e1:?} is not the slip normal {:?}",
            system.m()
        )));
    }
    let s = recompose_slip(patch.c1(), patch.c2(), system)?;
    Ok([s.component(1), s.component(2)])
}

/// `∫ |D_{y,z}(s₂, s₃)| dx¹` of one patch, joint (Frobenius) density.
pub fn patch_standard_curl(patch: &SlipPatch, system: &SlipSystem, boundary: Boundary) -> Result<f64> {
    let [s2, s3] = in_plane_components(patch, system)?;
    curl_norm(&[&s2, &s3], CurlMode::Joint, boundary)
}

pub fn patch_dissipation(patch: &SlipPatch, system: &SlipSystem, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let local = system.in_frame(patch.frame());
    let sum: f64 = patch
        .c1()
        .values()
        .iter()
        .zip(patch.c2().values())
        .map(|(&a, &b)| linalg::norm(local.recompose(a, b)).powf(alpha))
        .sum();
    Ok(sum * patch.grid().cell_volume())
}

/// `Σ_j ∫|c_j|` for α = 1, `2^{α−1} Σ_j ∫|c_j|^α` for α ∈ (1, 2], and 0 for α < 1.
pub fn patch_laminated_hardening(patch: &SlipPatch, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha < 1.0 {
        return Ok(0.0);
    }
    let scale = 2f64.powf(alpha - 1.0);
    let sum: f64 = patch
        .components()
        .iter()
        .map(|c| c.values().iter().map(|v| v.abs().powf(alpha)).sum::<f64>())
        .sum();
    Ok(scale * sum * patch.grid().cell_volume())
}

fn system_of<'a>(systems: &'a [SlipSystem], patch: &SlipPatch) -> Result<&'a SlipSystem> {
    systems.get(patch.system_id).ok_or(Error::UnknownSystem(patch.system_id))
}

pub fn laminated_curl(patches: &[SlipPatch], boundary: Boundary) -> Result<f64> {
    patches.iter().map(|p| patch_laminated_curl(p, boundary)).sum()
}

pub fn standard_curl(patches: &[SlipPatch], systems: &[SlipSystem], boundary: Boundary) -> Result<f64> {
    patches
        .iter()
        .map(|p| patch_standard_curl(p, system_of(systems, p)?, boundary))
        .sum()
}

pub fn dissipation(patches: &[SlipPatch], systems: &[SlipSystem], alpha: f64) -> Result<f64> {
    patches
        .iter()
        .map(|p| patch_dissipation(p, system_of(systems, p)?, alpha))
        .sum()
}

pub fn laminated_hardening(patches: &[SlipPatch], alpha: f64) -> Result<f64> {
    patches.iter().map(|p| patch_laminated_hardening(p, alpha)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchTerms {
    pub patch: usize,
    pub system: usize,
    pub curl: f64,
    pub dissipation: f64,
}

/// Itemized energy. `total` is `None` (JSON `null`) when the state violates
/// the selected side condition, standing in for `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub relaxed: bool,
    pub elastic: f64,
    pub curl: f64,
    pub dissipation: f64,
    pub total: Option<f64>,
    pub feasible: bool,
    pub side_condition: ViolationReport,
    pub patches: Vec<PatchTerms>,
}

impl EnergyReport {
    /// Assembles `elastic + σ·curl + τ·dissipation`.
    pub fn assemble(
        params: &EnergyParams,
        elastic: f64,
        patches: Vec<PatchTerms>,
        side_condition: ViolationReport,
    ) -> Self {
        let curl = patches.iter().map(|p| p.curl).sum();
        let dissipation = patches.iter().map(|p| p.dissipation).sum();
        let feasible = side_condition.passed();
        let total = feasible.then(|| elastic + params.sigma * curl + params.tau * dissipation);
        EnergyReport {
            relaxed: params.side_condition == SideCondition::Rsc,
            elastic,
            curl,
            dissipation,
            total,
            feasible,
            side_condition,
            patches,
        }
    }
}

/// Per-patch curl and dissipation terms for the selected mode.
pub fn patch_terms(state: &RelaxedState, params: &EnergyParams) -> Result<Vec<PatchTerms>> {
    state
        .patches
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let sys = system_of(&state.systems, p)?;
            let (curl, dissipation) = match params.side_condition {
                SideCondition::Rsc => (
                    patch_laminated_curl(p, params.boundary)?,
                    patch_laminated_hardening(p, params.alpha)?,
                ),
                SideCondition::Ssc => (
                    patch_standard_curl(p, sys, params.boundary)?,
                    patch_dissipation(p, sys, params.alpha)?,
                ),
            };
            Ok(PatchTerms {
                patch: i,
                system: p.system_id,
                curl,
                dissipation,
            })
        })
        .collect()
}

/// Energy of a state under `params`, with the default density
/// `W(F) = |F − I|^p` in nonlinear mode.
pub fn total_energy(state: &RelaxedState, params: &EnergyParams) -> Result<EnergyReport> {
    match params.elastic {
        ElasticMode::Nonlinear { p } => total_energy_with(state, params, &PowerDensity { p }),
        ElasticMode::Linear => total_energy_with(state, params, &PowerDensity { p: 2.0 }),
    }
}

/// As [`total_energy`] with a caller-supplied nonlinear density.
pub fn total_energy_with(state: &RelaxedState, params: &EnergyParams, w: &dyn StrainDensity) -> Result<EnergyReport> {
    params.validate()?;
    let beta = state.beta_global()?;
    let grad_u = gradient(&state.u)?;
    let elastic = match params.elastic {
        ElasticMode::Linear => elastic_linear(&grad_u, &beta)?,
        ElasticMode::Nonlinear { p } => {
            check_growth(w, p)?;
            elastic_nonlinear(&grad_u, &beta, w)?
        }
    };
    let cells = state.slip_cells()?;
    let side = match params.side_condition {
        SideCondition::Ssc => check_ssc(&cells, &state.systems, params.ssc_tol)?,
        SideCondition::Rsc => check_rsc_cells(&cells, &state.systems, params.rsc_tol)?,
    };
    Ok(EnergyReport::assemble(params, elastic, patch_terms(state, params)?, side))
}
