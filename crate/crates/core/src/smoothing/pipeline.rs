//! mollify → cut off → mollify, with budget accounting and radius retries.

use serde::{Deserialize, Serialize};

use super::cutoff::{interior_cutoff, PatchGeometry};
use super::{mollify, Extension, KernelProfile, MollifierKernel, MIN_RADIUS_CELLS};
use crate::error::{Error, Result};
use crate::fields::{curl_norm, Boundary, CurlMode, ScalarField3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothParams {
    /// Allowed laminated-curl increase per component, as a fraction of its
    /// input value.
    pub budget_fraction: f64,
    /// Initial kernel radius; defaults to the smallest admissible one.
    pub kernel_radius: Option<f64>,
    /// Required distance of the output support from the non-contact patch
    /// boundary; defaults to two of the smallest cells.
    pub margin: Option<f64>,
    pub profile: KernelProfile,
    pub max_retries: usize,
    pub boundary: Boundary,
}

impl Default for SmoothParams {
    fn default() -> Self {
        SmoothParams {
            budget_fraction: 0.05,
            kernel_radius: None,
            margin: None,
            profile: KernelProfile::default(),
            max_retries: 5,
            boundary: Boundary::Replicate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub tv: f64,
    pub l1: f64,
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub stages: Vec<StageReport>,
    pub tv_in: f64,
    pub tv_out: f64,
    pub budget: f64,
    /// `‖out − in‖₁ / ‖in‖₁` (0 for a zero input).
    pub l1_drift: f64,
    /// Distance from the output support to the patch complement; `None`
    /// for a zero output.
    pub support_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub kernel_radius: f64,
    pub margin: f64,
    /// Ramp margin: `margin` plus the second kernel radius.
    pub cutoff_margin: f64,
    pub budget_fraction: f64,
    pub retries: usize,
    pub components: Vec<ComponentReport>,
}

fn stage(name: &str, f: &ScalarField3, boundary: Boundary) -> Result<StageReport> {
    Ok(StageReport {
        stage: name.to_string(),
        tv: curl_norm(&[f], CurlMode::SingleSum, boundary)?,
        l1: f.l1_norm(),
        integral: f.integral(),
    })
}

fn slack(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

struct Attempt {
    out: [ScalarField3; 2],
    components: Vec<ComponentReport>,
    worst: Option<(f64, f64)>,
}

fn attempt(c: [&ScalarField3; 2], geom: &PatchGeometry, params: &SmoothParams, radius: f64, margin: f64) -> Result<Attempt> {
    let grid = geom.indicator().grid();
    let kernel = MollifierKernel::new(radius, grid, params.profile)?;
    let ext = Extension::Reflect(geom.boundary_contact());
    let cutoff_margin = margin + radius;
    let mut out = Vec::with_capacity(2);
    let mut components = Vec::with_capacity(2);
    let mut worst: Option<(f64, f64)> = None;
    for f in c {
        let input = stage("input", f, params.boundary)?;
        let m1 = mollify(f, &kernel, ext)?;
        let s1 = stage("mollify", &m1, params.boundary)?;
        let (cut, _) = interior_cutoff(&m1, geom, cutoff_margin, params.boundary)?;
        let s2 = stage("cutoff", &cut, params.boundary)?;
        let m2 = mollify(&cut, &kernel, ext)?;
        let s3 = stage("mollify", &m2, params.boundary)?;
        let diff: f64 = m2.values().iter().zip(f.values()).map(|(a, b)| (a - b).abs()).sum::<f64>()
            * grid.cell_volume();
        let l1_drift = if input.l1 > 0.0 { diff / input.l1 } else { diff };
        let margin_out = geom.support_margin(&m2)?;
        let budget = params.budget_fraction * input.tv;
        let increase = s3.tv - input.tv;
        if increase > budget + slack(input.tv) && worst.map_or(true, |w| increase - budget > w.0 - w.1) {
            worst = Some((increase, budget));
        }
        components.push(ComponentReport {
            tv_in: input.tv,
            tv_out: s3.tv,
            budget,
            l1_drift,
            support_margin: margin_out.is_finite().then_some(margin_out),
            stages: vec![input, s1, s2, s3],
        });
        out.push(m2);
    }
    let [a, b]: [ScalarField3; 2] = out.try_into().expect("two components");
    Ok(Attempt {
        out: [a, b],
        components,
        worst,
    })
}

/// Smooths both components of a patch. On a budget violation the kernel
/// radius is halved (down to the admissible minimum) up to
/// `params.max_retries` times before giving up.
pub fn smooth_pipeline(
    c1: &ScalarField3,
    c2: &ScalarField3,
    geom: &PatchGeometry,
    params: &SmoothParams,
) -> Result<([ScalarField3; 2], PipelineReport)> {
    c1.ensure_compatible(geom.indicator())?;
    c2.ensure_compatible(geom.indicator())?;
    if !(params.budget_fraction >= 0.0) {
        return Err(Error::param("budget_fraction", "must be nonnegative"));
    }
    let grid = geom.indicator().grid();
    let min_radius = MIN_RADIUS_CELLS * grid.min_spacing();
    let mut radius = params.kernel_radius.unwrap_or(min_radius);
    let margin = params.margin.unwrap_or(MIN_RADIUS_CELLS * grid.min_spacing());
    if !(margin > 0.0) {
        return Err(Error::param("margin", "must be positive"));
    }
    let mut retries = 0;
    loop {
        let a = attempt([c1, c2], geom, params, radius, margin)?;
        match a.worst {
            None => {
                let report = PipelineReport {
                    kernel_radius: radius,
                    margin,
                    cutoff_margin: margin + radius,
                    budget_fraction: params.budget_fraction,
                    retries,
                    components: a.components,
                };
                return Ok((a.out, report));
            }
            Some((increase, budget)) => {
                let next = 0.5 * radius;
                if retries >= params.max_retries || next < min_radius * (1.0 - 1e-12) {
                    return Err(Error::Budget {
                        retries,
                        increase,
                        budget,
                    });
                }
                radius = next;
                retries += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Grid3, PatchFrame};

    #[test]
    fn zero_fields_stay_zero() {
        let g = Grid3::new([1.0; 3], [4, 32, 32], [0.0; 3]).unwrap();
        let ind = ScalarField3::from_fn(g.clone(), PatchFrame::identity(), |p| {
            if (p[1] - 0.5).hypot(p[2] - 0.5) < 0.4 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let geom = PatchGeometry::new(ind, [[true; 2], [false; 2], [false; 2]]).unwrap();
        let z = ScalarField3::zeros(g, PatchFrame::identity());
        let (out, report) = smooth_pipeline(&z, &z, &geom, &SmoothParams::default()).unwrap();
        assert!(out.iter().all(|f| f.values().iter().all(|v| *v == 0.0)));
        assert_eq!(report.retries, 0);
        assert!(report.components.iter().all(|c| c.tv_out == 0.0 && c.support_margin.is_none()));
    }
}
