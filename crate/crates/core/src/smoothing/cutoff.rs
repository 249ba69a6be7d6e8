//! Patch distance fields and the interior cut-off ramp.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{curl_norm, feature_transform, Boundary, CurlMode, ScalarField3};
use crate::slipsys::SlipPatch;

/// A patch indicator with its distance to the patch complement.
///
/// Cells beyond a face flagged in `boundary_contact` count as patch (the
/// patch continues through `∂Ω`); beyond any other face they count as
/// complement. Distances are centre-to-centre.
#[derive(Debug, Clone)]
pub struct PatchGeometry {
    indicator: ScalarField3,
    distance: ScalarField3,
    boundary_contact: [[bool; 2]; 3],
}

impl PatchGeometry {
    pub fn new(indicator: ScalarField3, boundary_contact: [[bool; 2]; 3]) -> Result<Self> {
        let grid = indicator.grid();
        let n = grid.resolution();
        let padded = [n[0] + 2, n[1] + 2, n[2] + 2];
        let mut mask = vec![false; padded[0] * padded[1] * padded[2]];
        for k in 0..padded[2] {
            for j in 0..padded[1] {
                for i in 0..padded[0] {
                    let p = [i, j, k];
                    let mut outside = false;
                    let mut complement = false;
                    let mut q = [0usize; 3];
                    for a in 0..3 {
                        if p[a] == 0 {
                            outside = true;
                            complement |= !boundary_contact[a][0];
                        } else if p[a] == padded[a] - 1 {
                            outside = true;
                            complement |= !boundary_contact[a][1];
                        } else {
                            q[a] = p[a] - 1;
                        }
                    }
                    mask[i + padded[0] * (j + padded[1] * k)] = if outside {
                        complement
                    } else {
                        indicator.at(q[0], q[1], q[2]) <= 0.5
                    };
                }
            }
        }
        let near = feature_transform(&mask, padded, grid.spacing(), [true; 3]);
        let mut dist = Vec::with_capacity(grid.len());
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let d = near[(i + 1) + padded[0] * ((j + 1) + padded[1] * (k + 1))];
                    dist.push(d.map_or(f64::INFINITY, |d| d.distance));
                }
            }
        }
        // A patch flagged on every face with no complement has infinite
        // distance everywhere; clamp to the domain diameter.
        let diam = crate::linalg::norm(grid.extents());
        for d in &mut dist {
            if !d.is_finite() {
                *d = diam;
            }
        }
        let distance = indicator.with_values(dist)?;
        Ok(PatchGeometry {
            indicator,
            distance,
            boundary_contact,
        })
    }

    pub fn from_patch(patch: &SlipPatch) -> Result<Self> {
        PatchGeometry::new(patch.indicator().clone(), patch.boundary_contact)
    }

    pub fn indicator(&self) -> &ScalarField3 {
        &self.indicator
    }
    pub fn distance(&self) -> &ScalarField3 {
        &self.distance
    }
    pub fn boundary_contact(&self) -> [[bool; 2]; 3] {
        self.boundary_contact
    }

    /// Smallest distance to the complement over the support of `f`
    /// (infinite if `f` vanishes).
    pub fn support_margin(&self, f: &ScalarField3) -> Result<f64> {
        f.ensure_compatible(&self.indicator)?;
        Ok(f.values()
            .iter()
            .zip(self.distance.values())
            .filter(|(v, _)| **v != 0.0)
            .map(|(_, d)| *d)
            .fold(f64::INFINITY, f64::min))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub margin: f64,
    pub tv_before: f64,
    pub tv_after: f64,
    /// `TV(out) − TV(in)`.
    pub increase: f64,
}

/// Multiplies `f` by the ramp `clamp(d/ε − 1, 0, 1)` in the distance `d` to
/// the patch complement: zero within `ε`, one beyond `2ε`.
pub fn interior_cutoff(
    f: &ScalarField3,
    geom: &PatchGeometry,
    margin: f64,
    boundary: Boundary,
) -> Result<(ScalarField3, CutoffReport)> {
    f.ensure_compatible(&geom.indicator)?;
    if !(margin > 0.0) {
        return Err(Error::param("margin", "must be positive"));
    }
    if !geom.distance.values().iter().any(|&d| d > margin) {
        return Err(Error::guard(
            "erosion",
            format!("eroding the patch by {margin} leaves no cells"),
        ));
    }
    let out: Vec<f64> = f
        .values()
        .iter()
        .zip(geom.distance.values())
        .map(|(&v, &d)| v * (d / margin - 1.0).clamp(0.0, 1.0))
        .collect();
    let out = f.with_values(out)?;
    let tv_before = curl_norm(&[f], CurlMode::SingleSum, boundary)?;
    let tv_after = curl_norm(&[&out], CurlMode::SingleSum, boundary)?;
    Ok((
        out,
        CutoffReport {
            margin,
            tv_before,
            tv_after,
            increase: tv_after - tv_before,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Grid3, PatchFrame};

    fn square_patch(contact: [[bool; 2]; 3]) -> PatchGeometry {
        let g = Grid3::new([1.0; 3], [4, 40, 40], [0.0; 3]).unwrap();
        let ind = ScalarField3::from_fn(g, PatchFrame::identity(), |p| {
            if p[1] < 0.6 && p[2] > 0.2 && p[2] < 0.8 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        PatchGeometry::new(ind, contact).unwrap()
    }

    #[test]
    fn distance_is_zero_exactly_outside() {
        let geom = square_patch([[true; 2], [true, false], [false; 2]]);
        for (d, i) in geom.distance().values().iter().zip(geom.indicator().values()) {
            assert!(*d >= 0.0);
            assert_eq!(*d == 0.0, *i == 0.0);
        }
    }

    #[test]
    fn flagged_face_is_not_a_boundary() {
        let h = 1.0 / 40.0;
        let free = square_patch([[true; 2], [false; 2], [false; 2]]);
        let touching = square_patch([[true; 2], [true, false], [false; 2]]);
        // First cell next to the y = 0 face, mid-height.
        let idx = free.indicator().grid().index(1, 0, 20);
        assert!((free.distance().values()[idx] - h).abs() < 1e-12);
        assert!(touching.distance().values()[idx] > 10.0 * h);
    }

    #[test]
    fn deep_support_is_untouched() {
        let geom = square_patch([[true; 2], [false; 2], [false; 2]]);
        let g = geom.indicator().grid().clone();
        let f = ScalarField3::from_fn(g, PatchFrame::identity(), |p| {
            if (p[1] - 0.3).hypot(p[2] - 0.5) < 0.1 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let (out, r) = interior_cutoff(&f, &geom, 0.05, Boundary::Replicate).unwrap();
        assert_eq!(out.values(), f.values());
        assert!(r.increase.abs() <= 1e-12);
    }

    #[test]
    fn ramp_clears_the_margin() {
        let geom = square_patch([[true; 2], [true, false], [false; 2]]);
        let f = geom.indicator().clone();
        let eps = 0.05;
        let (out, _) = interior_cutoff(&f, &geom, eps, Boundary::Replicate).unwrap();
        assert!(geom.support_margin(&out).unwrap() >= eps);
        // Cells on the flagged y = 0 face keep their value.
        let g = f.grid();
        assert_eq!(out.values()[g.index(1, 0, 20)], 1.0);
        assert!(interior_cutoff(&f, &geom, 0.5, Boundary::Replicate).is_err());
    }
}
