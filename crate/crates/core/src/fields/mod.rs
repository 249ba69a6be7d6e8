//! Structured 3-D grids, patch frames, and cell-centred fields.
//!
//! A field is sampled at the cell centres of a [`Grid3`] whose axes are the
//! axes of a [`PatchFrame`]: local coordinate `ξ_a` runs along `e_a`, and the
//! physical point is `x = ξ_1 e_1 + ξ_2 e_2 + ξ_3 e_3`. Vector and tensor
//! components are likewise stored in the frame basis. Storage is x-fastest:
//! `idx = i + nx·(j + ny·k)`.

mod edt;
mod gradient;
pub mod io;
mod resample;
mod tv;

pub use edt::{feature_transform, Nearest};
pub use gradient::gradient;
pub use resample::{resample_scalar, resample_vector};
pub use tv::{curl_norm, planar_tv, slice_profile, Boundary, CurlMode, TvMode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3};

/// Orthonormality / handedness tolerance for frames.
pub const FRAME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid3 {
    extents: Vec3,
    resolution: [usize; 3],
    origin: Vec3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridRepr {
    extents: Vec3,
    resolution: [usize; 3],
    #[serde(default)]
    origin: Vec3,
}

impl TryFrom<GridRepr> for Grid3 {
    type Error = Error;
    fn try_from(s: GridRepr) -> Result<Self> {
        Grid3::new(s.extents, s.resolution, s.origin)
    }
}

impl From<Grid3> for GridRepr {
    fn from(g: Grid3) -> Self {
        GridRepr {
            extents: g.extents,
            resolution: g.resolution,
            origin: g.origin,
        }
    }
}

impl Grid3 {
    pub const MIN_RESOLUTION: usize = 4;

    pub fn new(extents: Vec3, resolution: [usize; 3], origin: Vec3) -> Result<Self> {
        for a in 0..3 {
            if !(extents[a] > 0.0 && extents[a].is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "extent[{a}] = {} must be positive",
                    extents[a]
                )));
            }
            if resolution[a] < Self::MIN_RESOLUTION {
                return Err(Error::InvalidGrid(format!(
                    "resolution[{a}] = {} is below {}",
                    resolution[a],
                    Self::MIN_RESOLUTION
                )));
            }
            if !origin[a].is_finite() {
                return Err(Error::InvalidGrid(format!("origin[{a}] is not finite")));
            }
        }
        resolution
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::InvalidGrid("cell count overflows".into()))?;
        Ok(Grid3 {
            extents,
            resolution,
            origin,
        })
    }

    /// `[0,1]³` with `n` cells per axis.
    pub fn unit(n: usize) -> Result<Self> {
        Grid3::new([1.0; 3], [n; 3], [0.0; 3])
    }

    pub fn extents(&self) -> Vec3 {
        self.extents
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn spacing(&self) -> Vec3 {
        [
            self.extents[0] / self.resolution[0] as f64,
            self.extents[1] / self.resolution[1] as f64,
            self.extents[2] / self.resolution[2] as f64,
        ]
    }

    pub fn min_spacing(&self) -> f64 {
        let h = self.spacing();
        h[0].min(h[1]).min(h[2])
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let nx = self.resolution[0];
        let ny = self.resolution[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Local coordinates of the centre of cell `(i, j, k)`.
    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.spacing();
        [
            self.origin[0] + (i as f64 + 0.5) * h[0],
            self.origin[1] + (j as f64 + 0.5) * h[1],
            self.origin[2] + (k as f64 + 0.5) * h[2],
        ]
    }

    #[inline]
    pub fn center_of(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.ijk(idx);
        self.center(i, j, k)
    }

    pub fn upper(&self) -> Vec3 {
        linalg::add(self.origin, self.extents)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let hi = self.upper();
        (0..3).all(|a| p[a] >= self.origin[a] && p[a] <= hi[a])
    }

    /// Grids are interchangeable when they agree to rounding.
    pub fn matches(&self, other: &Grid3) -> bool {
        self.resolution == other.resolution
            && (0..3).all(|a| {
                let tol = 1e-12 * self.extents[a].abs().max(1.0);
                (self.extents[a] - other.extents[a]).abs() <= tol
                    && (self.origin[a] - other.origin[a]).abs() <= tol
            })
    }

    pub fn ensure_matches(&self, other: &Grid3) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// A grid in `target` frame, with the finest spacing of `self`, covering
    /// the image of this grid (given in `source` frame).
    pub fn covering(&self, source: &PatchFrame, target: &PatchFrame) -> Result<Grid3> {
        let lo = self.origin;
        let hi = self.upper();
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for corner in 0..8 {
            let p = [
                if corner & 1 == 0 { lo[0] } else { hi[0] },
                if corner & 2 == 0 { lo[1] } else { hi[1] },
                if corner & 4 == 0 { lo[2] } else { hi[2] },
            ];
            let q = target.to_local(source.to_global(p));
            for a in 0..3 {
                min[a] = min[a].min(q[a]);
                max[a] = max[a].max(q[a]);
            }
        }
        let h = self.min_spacing();
        let mut res = [0usize; 3];
        let mut ext = [0.0; 3];
        for a in 0..3 {
            let span = max[a] - min[a];
            // Snap spans that are integer multiples of h (axis permutations).
            let cells = (span / h - 1e-9).ceil().max(Self::MIN_RESOLUTION as f64);
            res[a] = cells as usize;
            ext[a] = if (span / h - cells).abs() < 1e-9 {
                span
            } else {
                cells * h
            };
        }
        Grid3::new(ext, res, min)
    }
}

/// Orthonormal right-handed frame `(e1, e2, e3)` with `e1` the slip normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameRepr", into = "FrameRepr")]
pub struct PatchFrame {
    e: [Vec3; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FrameRepr {
    e1: Vec3,
    e2: Vec3,
    e3: Vec3,
}

impl TryFrom<FrameRepr> for PatchFrame {
    type Error = Error;
    fn try_from(s: FrameRepr) -> Result<Self> {
        PatchFrame::new(s.e1, s.e2, s.e3)
    }
}

impl From<PatchFrame> for FrameRepr {
    fn from(f: PatchFrame) -> Self {
        FrameRepr {
            e1: f.e[0],
            e2: f.e[1],
            e3: f.e[2],
        }
    }
}

impl Default for PatchFrame {
    fn default() -> Self {
        Self::identity()
    }
}

impl PatchFrame {
    pub fn identity() -> Self {
        PatchFrame {
            e: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn new(e1: Vec3, e2: Vec3, e3: Vec3) -> Result<Self> {
        let e = [e1, e2, e3];
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                let got = linalg::dot(e[a], e[b]);
                if (got - want).abs() > FRAME_TOL {
                    return Err(Error::InvalidFrame(format!(
                        "e{}·e{} = {got}, expected {want}",
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
        let d = linalg::dot(e1, linalg::cross(e2, e3));
        if (d - 1.0).abs() > FRAME_TOL {
            return Err(Error::InvalidFrame(format!("det = {d}, expected +1")));
        }
        Ok(PatchFrame { e })
    }

    /// Completes a unit normal `m` to a right-handed frame with `e1 = m`.
    ///
    /// The second axis is the coordinate axis least aligned with `m`,
    /// orthogonalised, so axis-aligned normals give signed permutations of
    /// the identity (exact resampling between such frames).
    pub fn from_normal(m: Vec3) -> Result<Self> {
        let e1 = linalg::normalize(m)
            .ok_or_else(|| Error::InvalidFrame("zero slip normal".into()))?;
        if (linalg::norm(m) - 1.0).abs() > FRAME_TOL {
            return Err(Error::InvalidFrame(format!(
                "slip normal must be a unit vector, |m| = {}",
                linalg::norm(m)
            )));
        }
        let mut axis = 0;
        for a in 1..3 {
            if e1[a].abs() < e1[axis].abs() {
                axis = a;
            }
        }
        let mut helper = [0.0; 3];
        helper[axis] = 1.0;
        let e2 = linalg::normalize(linalg::sub(helper, linalg::scale(e1, e1[axis])))
            .ok_or_else(|| Error::InvalidFrame("degenerate helper axis".into()))?;
        let e3 = linalg::cross(e1, e2);
        PatchFrame::new(e1, e2, e3)
    }

    pub fn e1(&self) -> Vec3 {
        self.e[0]
    }
    pub fn e2(&self) -> Vec3 {
        self.e[1]
    }
    pub fn e3(&self) -> Vec3 {
        self.e[2]
    }
    pub fn axes(&self) -> [Vec3; 3] {
        self.e
    }

    /// `R = [e1 e2 e3]` (columns): `x = R ξ`.
    pub fn rotation(&self) -> Mat3 {
        linalg::from_columns(self.e[0], self.e[1], self.e[2])
    }

    #[inline]
    pub fn to_local(&self, x: Vec3) -> Vec3 {
        [
            linalg::dot(self.e[0], x),
            linalg::dot(self.e[1], x),
            linalg::dot(self.e[2], x),
        ]
    }

    #[inline]
    pub fn to_global(&self, xi: Vec3) -> Vec3 {
        [
            self.e[0][0] * xi[0] + self.e[1][0] * xi[1] + self.e[2][0] * xi[2],
            self.e[0][1] * xi[0] + self.e[1][1] * xi[1] + self.e[2][1] * xi[2],
            self.e[0][2] * xi[0] + self.e[1][2] * xi[1] + self.e[2][2] * xi[2],
        ]
    }

    /// Local components of a global tensor: `Rᵀ A R`.
    pub fn tensor_to_local(&self, a: &Mat3) -> Mat3 {
        let r = self.rotation();
        linalg::mat_mul(&linalg::transpose(&r), &linalg::mat_mul(a, &r))
    }

    /// Global components of a local tensor: `R A Rᵀ`.
    pub fn tensor_to_global(&self, a: &Mat3) -> Mat3 {
        let r = self.rotation();
        linalg::mat_mul(&r, &linalg::mat_mul(a, &linalg::transpose(&r)))
    }

    pub fn approx_eq(&self, other: &PatchFrame) -> bool {
        (0..3).all(|a| (0..3).all(|b| (self.e[a][b] - other.e[a][b]).abs() <= FRAME_TOL))
    }

    pub fn ensure_matches(&self, other: &PatchFrame) -> Result<()> {
        if self.approx_eq(other) {
            Ok(())
        } else {
            Err(Error::FrameMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

fn check_finite<'a>(values: impl Iterator<Item = &'a f64>) -> Result<()> {
    for (index, v) in values.enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
    }
    Ok(())
}

/// One number per cell centre.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3 {
    grid: Grid3,
    frame: PatchFrame,
    values: Vec<f64>,
}

impl ScalarField3 {
    pub fn new(grid: Grid3, frame: PatchFrame, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        check_finite(values.iter())?;
        Ok(ScalarField3 {
            grid,
            frame,
            values,
        })
    }

    pub fn zeros(grid: Grid3, frame: PatchFrame) -> Self {
        let values = vec![0.0; grid.len()];
        ScalarField3 {
            grid,
            frame,
            values,
        }
    }

    pub fn constant(grid: Grid3, frame: PatchFrame, c: f64) -> Self {
        let values = vec![c; grid.len()];
        ScalarField3 {
            grid,
            frame,
            values,
        }
    }

    /// Samples `f` at local cell-centre coordinates.
    pub fn from_fn(grid: Grid3, frame: PatchFrame, f: impl Fn(Vec3) -> f64 + Sync) -> Result<Self> {
        use rayon::prelude::*;
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.center_of(idx)))
            .collect();
        ScalarField3::new(grid, frame, values)
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }
    pub fn frame(&self) -> &PatchFrame {
        &self.frame
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    /// Replaces the values, keeping grid and frame.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ScalarField3::new(self.grid.clone(), self.frame, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn ensure_compatible(&self, other: &ScalarField3) -> Result<()> {
        self.grid.ensure_matches(&other.grid)?;
        self.frame.ensure_matches(&other.frame)
    }

    /// Midpoint-rule integral.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The `x¹ = const` slice with index `i`.
    pub fn slice_x(&self, i: usize) -> Slice2 {
        let [_, ny, nz] = self.grid.resolution;
        let mut values = Vec::with_capacity(ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                values.push(self.at(i, j, k));
            }
        }
        Slice2 { ny, nz, values }
    }
}

/// One 3-vector (frame components) per cell centre.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    grid: Grid3,
    frame: PatchFrame,
    values: Vec<Vec3>,
}

impl VectorField3 {
    pub fn new(grid: Grid3, frame: PatchFrame, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} vectors for {} cells",
                values.len(),
                grid.len()
            )));
        }
        check_finite(values.iter().flatten())?;
        Ok(VectorField3 {
            grid,
            frame,
            values,
        })
    }

    pub fn zeros(grid: Grid3, frame: PatchFrame) -> Self {
        let values = vec![[0.0; 3]; grid.len()];
        VectorField3 {
            grid,
            frame,
            values,
        }
    }

    pub fn from_fn(grid: Grid3, frame: PatchFrame, f: impl Fn(Vec3) -> Vec3 + Sync) -> Result<Self> {
        use rayon::prelude::*;
        let values: Vec<Vec3> = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.center_of(idx)))
            .collect();
        VectorField3::new(grid, frame, values)
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }
    pub fn frame(&self) -> &PatchFrame {
        &self.frame
    }
    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn with_values(&self, values: Vec<Vec3>) -> Result<Self> {
        VectorField3::new(self.grid.clone(), self.frame, values)
    }

    pub fn component(&self, a: usize) -> ScalarField3 {
        ScalarField3 {
            grid: self.grid.clone(),
            frame: self.frame,
            values: self.values.iter().map(|v| v[a]).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(linalg::norm(*v)))
    }
}

/// One 3×3 tensor (frame components) per cell centre.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField3 {
    grid: Grid3,
    frame: PatchFrame,
    values: Vec<Mat3>,
}

impl TensorField3 {
    pub fn new(grid: Grid3, frame: PatchFrame, values: Vec<Mat3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} tensors for {} cells",
                values.len(),
                grid.len()
            )));
        }
        check_finite(values.iter().flatten().flatten())?;
        Ok(TensorField3 {
            grid,
            frame,
            values,
        })
    }

    pub fn zeros(grid: Grid3, frame: PatchFrame) -> Self {
        let values = vec![linalg::ZERO33; grid.len()];
        TensorField3 {
            grid,
            frame,
            values,
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }
    pub fn frame(&self) -> &PatchFrame {
        &self.frame
    }
    pub fn values(&self) -> &[Mat3] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Mat3] {
        &mut self.values
    }
}

/// A 2-D `x¹ = const` slice, y-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2 {
    pub ny: usize,
    pub nz: usize,
    pub values: Vec<f64>,
}

impl Slice2 {
    pub fn new(ny: usize, nz: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != ny * nz {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {ny}x{nz} slice",
                values.len()
            )));
        }
        Ok(Slice2 { ny, nz, values })
    }

    pub fn from_fn(ny: usize, nz: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                values.push(f(j, k));
            }
        }
        Slice2 { ny, nz, values }
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> f64 {
        self.values[j + self.ny * k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_coarse_or_degenerate() {
        assert!(Grid3::new([1.0; 3], [3, 8, 8], [0.0; 3]).is_err());
        assert!(Grid3::new([1.0, 0.0, 1.0], [8; 3], [0.0; 3]).is_err());
        assert!(Grid3::new([1.0, f64::NAN, 1.0], [8; 3], [0.0; 3]).is_err());
    }

    #[test]
    fn cell_centres_lie_strictly_inside() {
        let g = Grid3::new([2.0, 1.0, 0.5], [4, 5, 6], [-1.0, 0.0, 3.0]).unwrap();
        for idx in 0..g.len() {
            let c = g.center_of(idx);
            for a in 0..3 {
                assert!(c[a] > g.origin()[a] && c[a] < g.upper()[a]);
            }
            let [i, j, k] = g.ijk(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    #[test]
    fn frame_from_axis_normals_is_a_permutation() {
        let f = PatchFrame::from_normal([1.0, 0.0, 0.0]).unwrap();
        assert_eq!(f, PatchFrame::identity());
        let f = PatchFrame::from_normal([0.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.e2(), [1.0, 0.0, 0.0]);
        assert_eq!(f.e3(), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn frame_from_oblique_normal_is_orthonormal() {
        let m = linalg::normalize([1.0, 2.0, -0.5]).unwrap();
        let f = PatchFrame::from_normal(m).unwrap();
        assert!((linalg::det(&f.rotation()) - 1.0).abs() < 1e-12);
        let x = [0.3, -1.2, 2.0];
        let back = f.to_global(f.to_local(x));
        for a in 0..3 {
            assert!((back[a] - x[a]).abs() < 1e-14);
        }
    }

    #[test]
    fn frame_rejects_left_handed_triples() {
        let err = PatchFrame::new([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]);
        assert!(matches!(err, Err(Error::InvalidFrame(_))));
    }

    #[test]
    fn scalar_field_rejects_non_finite() {
        let g = Grid3::unit(4).unwrap();
        let mut v = vec![0.0; g.len()];
        v[7] = f64::INFINITY;
        assert!(matches!(
            ScalarField3::new(g, PatchFrame::identity(), v),
            Err(Error::NonFinite { index: 7 })
        ));
    }

    #[test]
    fn covering_grid_of_permuted_frame_keeps_spacing() {
        let g = Grid3::new([1.0, 2.0, 0.5], [8, 16, 4], [0.0; 3]).unwrap();
        let target = PatchFrame::from_normal([0.0, 0.0, 1.0]).unwrap();
        let cover = g.covering(&PatchFrame::identity(), &target).unwrap();
        assert_eq!(cover.resolution(), [4, 8, 16]);
        assert!((cover.extents()[0] - 0.5).abs() < 1e-15);
    }
}
