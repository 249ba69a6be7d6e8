//! Discrete planar total variation and the slice-integrated curl norms.
//!
//! Forward differences on cell centres; the per-cell integrand is the
//! Euclidean norm of the 2-gradient (one component) or the Frobenius norm of
//! the stacked 2-gradients (two components). Sums run in a fixed order
//! (`k` outer, `j` inner; slices ascending) so results do not depend on the
//! rayon worker count.

use rayon::prelude::*;

use super::{ScalarField3, Slice2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TvMode {
    /// Euclidean norm of one component's 2-gradient.
    #[default]
    Single,
    /// Frobenius norm over two components' 2-gradients.
    Joint,
}

/// Treatment of the forward difference at the high end of each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// One-sided replication: the grid boundary carries no variation.
    #[default]
    Replicate,
    /// Zero padding: for compactly supported fields whose support may touch
    /// the high faces.
    ZeroPad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurlMode {
    /// `Σ_j ∫ |D_{y,z} c_j| dx¹`: every field is charged separately.
    SingleSum,
    /// `∫ |D_{y,z} (s₂, s₃)| dx¹` with the joint (Frobenius) density.
    Joint,
}

#[derive(Clone, Copy)]
struct Strided<'a> {
    data: &'a [f64],
    offset: usize,
    sj: usize,
    sk: usize,
}

impl Strided<'_> {
    #[inline(always)]
    fn at(&self, j: usize, k: usize) -> f64 {
        self.data[self.offset + j * self.sj + k * self.sk]
    }
}

fn tv_kernel(comps: &[Strided<'_>], ny: usize, nz: usize, hy: f64, hz: f64, boundary: Boundary) -> f64 {
    let mut total = 0.0;
    for k in 0..nz {
        for j in 0..ny {
            let mut sq = 0.0;
            for c in comps {
                let f = c.at(j, k);
                let fy = if j + 1 < ny {
                    c.at(j + 1, k)
                } else {
                    match boundary {
                        Boundary::Replicate => f,
                        Boundary::ZeroPad => 0.0,
                    }
                };
                let fz = if k + 1 < nz {
                    c.at(j, k + 1)
                } else {
                    match boundary {
                        Boundary::Replicate => f,
                        Boundary::ZeroPad => 0.0,
                    }
                };
                let gy = (fy - f) / hy;
                let gz = (fz - f) / hz;
                sq += gy * gy + gz * gz;
            }
            total += sq.sqrt();
        }
    }
    total * hy * hz
}

/// Discrete total variation of one slice (`Single`) or of a pair of
/// component slices (`Joint`).
pub fn planar_tv(
    components: &[&Slice2],
    spacing: (f64, f64),
    mode: TvMode,
    boundary: Boundary,
) -> Result<f64> {
    let expected = match mode {
        TvMode::Single => 1,
        TvMode::Joint => 2,
    };
    if components.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "{mode:?} mode takes {expected} component(s), got {}",
            components.len()
        )));
    }
    let (ny, nz) = (components[0].ny, components[0].nz);
    if ny < 2 || nz < 2 {
        return Err(Error::ShapeMismatch(format!("slice {ny}x{nz} is below 2x2")));
    }
    if !(spacing.0 > 0.0 && spacing.1 > 0.0) {
        return Err(Error::param("spacing", "must be positive"));
    }
    let mut comps = Vec::with_capacity(components.len());
    for s in components {
        if s.ny != ny || s.nz != nz || s.values.len() != ny * nz {
            return Err(Error::ShapeMismatch(format!(
                "component {}x{} differs from {ny}x{nz}",
                s.ny, s.nz
            )));
        }
        if let Some(index) = s.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        comps.push(Strided {
            data: &s.values,
            offset: 0,
            sj: 1,
            sk: ny,
        });
    }
    Ok(tv_kernel(&comps, ny, nz, spacing.0, spacing.1, boundary))
}

/// Per-slice TVs of a group of fields taken jointly (a group of one is the
/// single-component TV), in slice order.
fn slice_tvs(fields: &[&ScalarField3], boundary: Boundary) -> Vec<f64> {
    let g = fields[0].grid();
    let [nx, ny, nz] = g.resolution();
    let h = g.spacing();
    (0..nx)
        .into_par_iter()
        .map(|i| {
            let comps: Vec<Strided<'_>> = fields
                .iter()
                .map(|f| Strided {
                    data: f.values(),
                    offset: i,
                    sj: nx,
                    sk: nx * ny,
                })
                .collect();
            tv_kernel(&comps, ny, nz, h[1], h[2], boundary)
        })
        .collect()
}

/// Per-slice TV values `TV(slice_i)` (before the `h₁` weight), in slice order.
pub fn slice_profile(fields: &[&ScalarField3], mode: CurlMode, boundary: Boundary) -> Result<Vec<f64>> {
    validate(fields, mode)?;
    Ok(match mode {
        CurlMode::Joint => slice_tvs(fields, boundary),
        CurlMode::SingleSum => {
            let mut acc = vec![0.0; fields[0].grid().resolution()[0]];
            for f in fields {
                for (a, v) in acc.iter_mut().zip(slice_tvs(&[*f], boundary)) {
                    *a += v;
                }
            }
            acc
        }
    })
}

fn validate(fields: &[&ScalarField3], mode: CurlMode) -> Result<()> {
    let first = fields
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no fields given".into()))?;
    for f in &fields[1..] {
        first.ensure_compatible(f)?;
    }
    if mode == CurlMode::Joint && fields.len() > 2 {
        return Err(Error::ShapeMismatch(format!(
            "joint mode takes the two in-plane components, got {}",
            fields.len()
        )));
    }
    Ok(())
}

/// Midpoint sum over `x¹`-slices of the planar TV: `Σ_i h₁ TV(slice_i)`.
///
/// Slices are taken along grid axis 0, which is `e1 = m` of the fields'
/// frame. In `Joint` mode the fields are the in-plane slip components.
pub fn curl_norm(fields: &[&ScalarField3], mode: CurlMode, boundary: Boundary) -> Result<f64> {
    let profile = slice_profile(fields, mode, boundary)?;
    let h1 = fields[0].grid().spacing()[0];
    Ok(profile.iter().sum::<f64>() * h1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Grid3, PatchFrame};

    fn single(s: &Slice2, h: f64) -> f64 {
        planar_tv(&[s], (h, h), TvMode::Single, Boundary::Replicate).unwrap()
    }

    #[test]
    fn constant_slice_has_no_variation() {
        let s = Slice2::from_fn(16, 9, |_, _| 3.7);
        assert_eq!(single(&s, 0.1), 0.0);
        let j = planar_tv(&[&s, &s], (0.1, 0.2), TvMode::Joint, Boundary::Replicate).unwrap();
        assert_eq!(j, 0.0);
    }

    /// Independent oracle: walk every cell, count neighbours (+y, +z) whose
    /// indicator value differs, and charge `h` for one differing neighbour and
    /// `√2 h` for two.
    fn edge_count_perimeter(ind: &[bool], n: usize, h: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..n {
            for j in 0..n {
                let here = ind[j + n * k];
                let dy = j + 1 < n && ind[j + 1 + n * k] != here;
                let dz = k + 1 < n && ind[j + n * (k + 1)] != here;
                total += match (dy, dz) {
                    (true, true) => std::f64::consts::SQRT_2 * h,
                    (true, false) | (false, true) => h,
                    _ => 0.0,
                };
            }
        }
        total
    }

    #[test]
    fn rectangle_indicator_recovers_its_perimeter() {
        let n = 256;
        let h = 1.0 / n as f64;
        let inside = |j: usize, k: usize| {
            let y = (j as f64 + 0.5) * h;
            let z = (k as f64 + 0.5) * h;
            (0.25..0.5).contains(&y) && (0.25..0.75).contains(&z)
        };
        let s = Slice2::from_fn(n, n, |j, k| if inside(j, k) { 1.0 } else { 0.0 });
        let ind: Vec<bool> = s.values.iter().map(|&v| v == 1.0).collect();
        let tv = single(&s, h);
        assert!((tv - edge_count_perimeter(&ind, n, h)).abs() < 1e-12);
        assert!((tv / 1.5 - 1.0).abs() < 0.02, "tv = {tv}");
    }

    #[test]
    fn duplicated_component_scales_by_sqrt2() {
        let s = Slice2::from_fn(20, 30, |j, k| ((j * 7 + k * 3) % 11) as f64 * 0.3);
        let joint = planar_tv(&[&s, &s], (0.05, 0.05), TvMode::Joint, Boundary::Replicate).unwrap();
        let one = single(&s, 0.05);
        assert!((joint - std::f64::consts::SQRT_2 * one).abs() <= 1e-12 * one);
    }

    #[test]
    fn zero_padding_charges_the_high_faces_only() {
        let s = Slice2::from_fn(8, 8, |_, _| 1.0);
        let h = 0.125;
        let tv = planar_tv(&[&s], (h, h), TvMode::Single, Boundary::ZeroPad).unwrap();
        // 7 + 7 single-edge cells along the faces, one corner cell with both.
        let expected = 14.0 * h + std::f64::consts::SQRT_2 * h;
        assert!((tv - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        let a = Slice2::from_fn(4, 4, |_, _| 0.0);
        let b = Slice2::from_fn(4, 5, |_, _| 0.0);
        assert!(planar_tv(&[&a, &b], (1.0, 1.0), TvMode::Joint, Boundary::Replicate).is_err());
        assert!(planar_tv(&[&a], (1.0, 1.0), TvMode::Joint, Boundary::Replicate).is_err());
        let mut c = a.clone();
        c.values[3] = f64::NAN;
        assert!(matches!(
            planar_tv(&[&c], (1.0, 1.0), TvMode::Single, Boundary::Replicate),
            Err(Error::NonFinite { index: 3 })
        ));
    }

    #[test]
    fn curl_norm_matches_slice_sum() {
        let g = Grid3::new([1.0; 3], [6, 12, 10], [0.0; 3]).unwrap();
        let f = ScalarField3::from_fn(g.clone(), PatchFrame::identity(), |p| {
            (3.0 * p[0]).sin() * (p[1] - 0.3).abs() + p[2] * p[2]
        })
        .unwrap();
        let h = g.spacing();
        let by_hand: f64 = (0..6)
            .map(|i| {
                planar_tv(&[&f.slice_x(i)], (h[1], h[2]), TvMode::Single, Boundary::Replicate).unwrap()
            })
            .sum::<f64>()
            * h[0];
        let c = curl_norm(&[&f], CurlMode::SingleSum, Boundary::Replicate).unwrap();
        assert!((c - by_hand).abs() < 1e-13);
    }

    #[test]
    fn curl_norm_rejects_mismatched_fields() {
        let g1 = Grid3::unit(4).unwrap();
        let g2 = Grid3::unit(5).unwrap();
        let a = ScalarField3::zeros(g1, PatchFrame::identity());
        let b = ScalarField3::zeros(g2, PatchFrame::identity());
        assert!(matches!(
            curl_norm(&[&a, &b], CurlMode::SingleSum, Boundary::Replicate),
            Err(Error::GridMismatch(_))
        ));
    }
}
