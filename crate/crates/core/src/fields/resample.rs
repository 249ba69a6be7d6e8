//! Trilinear transfer of fields between grids and frames.

use rayon::prelude::*;

use super::{Grid3, PatchFrame, ScalarField3, TensorField3, VectorField3};
use crate::error::Result;
use crate::linalg::{Mat3, Vec3, ZERO33};

/// Fractional indices this close to an integer are snapped, so that grids
/// related by axis permutations transfer values without mixing neighbours.
const SNAP: f64 = 1e-9;

/// Trilinear stencil: eight `(index, weight)` pairs, or `None` outside the
/// grid's domain.
fn stencil(grid: &Grid3, xi: Vec3) -> Option<[(usize, f64); 8]> {
    let h = grid.spacing();
    let n = grid.resolution();
    let o = grid.origin();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let p = (xi[a] - o[a]) / h[a];
        // Points on the domain boundary (up to rounding) still count as inside.
        if p < -SNAP || p > n[a] as f64 + SNAP {
            return None;
        }
        let mut q = (p - 0.5).clamp(0.0, (n[a] - 1) as f64);
        let r = q.round();
        if (q - r).abs() < SNAP {
            q = r;
        }
        let i0 = (q.floor() as usize).min(n[a] - 2);
        base[a] = i0;
        frac[a] = q - i0 as f64;
    }
    let mut out = [(0usize, 0.0); 8];
    for (c, slot) in out.iter_mut().enumerate() {
        let d = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
        let mut w = 1.0;
        for a in 0..3 {
            w *= if d[a] == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        *slot = (grid.index(base[0] + d[0], base[1] + d[1], base[2] + d[2]), w);
    }
    Some(out)
}

impl ScalarField3 {
    /// Trilinear value at a global point; 0 outside the field's domain.
    pub fn sample_global(&self, x: Vec3) -> f64 {
        self.sample_local(self.frame.to_local(x))
    }

    /// Trilinear value at local coordinates of the field's own frame.
    pub fn sample_local(&self, xi: Vec3) -> f64 {
        match stencil(&self.grid, xi) {
            Some(st) => st
                .iter()
                .filter(|(_, w)| *w != 0.0)
                .map(|&(i, w)| w * self.values[i])
                .sum(),
            None => 0.0,
        }
    }
}

impl VectorField3 {
    /// Trilinear value at a global point, components in the field's frame.
    pub fn sample_global(&self, x: Vec3) -> Vec3 {
        match stencil(&self.grid, self.frame.to_local(x)) {
            Some(st) => {
                let mut v = [0.0; 3];
                for &(i, w) in st.iter().filter(|(_, w)| *w != 0.0) {
                    for a in 0..3 {
                        v[a] += w * self.values[i][a];
                    }
                }
                v
            }
            None => [0.0; 3],
        }
    }
}

impl TensorField3 {
    /// Trilinear value at a global point, components in the field's frame.
    pub fn sample_global(&self, x: Vec3) -> Mat3 {
        let mut m = ZERO33;
        if let Some(st) = stencil(&self.grid, self.frame.to_local(x)) {
            for &(i, w) in st.iter().filter(|(_, w)| *w != 0.0) {
                for a in 0..3 {
                    for b in 0..3 {
                        m[a][b] += w * self.values[i][a][b];
                    }
                }
            }
        }
        m
    }
}

fn same_layout(grid: &Grid3, frame: &PatchFrame, target_grid: &Grid3, target: &PatchFrame) -> bool {
    grid == target_grid && frame == target
}

/// Resamples a scalar field onto `target_grid` expressed in `target`.
pub fn resample_scalar(field: &ScalarField3, target: &PatchFrame, target_grid: &Grid3) -> Result<ScalarField3> {
    if same_layout(field.grid(), field.frame(), target_grid, target) {
        return Ok(field.clone());
    }
    let values: Vec<f64> = (0..target_grid.len())
        .into_par_iter()
        .map(|idx| field.sample_global(target.to_global(target_grid.center_of(idx))))
        .collect();
    ScalarField3::new(target_grid.clone(), *target, values)
}

/// Resamples a vector field; components are rotated into the target frame.
pub fn resample_vector(field: &VectorField3, target: &PatchFrame, target_grid: &Grid3) -> Result<VectorField3> {
    if same_layout(field.grid(), field.frame(), target_grid, target) {
        return Ok(field.clone());
    }
    let src = *field.frame();
    let values: Vec<Vec3> = (0..target_grid.len())
        .into_par_iter()
        .map(|idx| {
            let v = field.sample_global(target.to_global(target_grid.center_of(idx)));
            target.to_local(src.to_global(v))
        })
        .collect();
    VectorField3::new(target_grid.clone(), *target, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::fields::{planar_tv, Boundary, TvMode};

    #[test]
    fn identical_layout_is_bitwise_copy() {
        let g = Grid3::new([1.0, 2.0, 1.0], [5, 6, 7], [0.0; 3]).unwrap();
        let f = ScalarField3::from_fn(g.clone(), PatchFrame::identity(), |p| p[0].exp() * p[1] - p[2]).unwrap();
        let r = resample_scalar(&f, &PatchFrame::identity(), &g).unwrap();
        assert_eq!(r.values(), f.values());
    }

    #[test]
    fn constants_survive_rotation_inside_the_domain() {
        let g = Grid3::new([2.0; 3], [12; 3], [-1.0; 3]).unwrap();
        let f = ScalarField3::constant(g, PatchFrame::identity(), 2.5);
        let m = linalg::normalize([1.0, 1.0, 0.3]).unwrap();
        let target = PatchFrame::from_normal(m).unwrap();
        let tg = Grid3::new([1.0; 3], [8; 3], [-0.5; 3]).unwrap();
        let r = resample_scalar(&f, &target, &tg).unwrap();
        assert!(r.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn outside_points_are_zero() {
        let g = Grid3::unit(4).unwrap();
        let f = ScalarField3::constant(g, PatchFrame::identity(), 1.0);
        assert_eq!(f.sample_global([1.5, 0.5, 0.5]), 0.0);
        assert_eq!(f.sample_global([0.5, 0.5, 0.5]), 1.0);
    }

    #[test]
    fn vector_components_follow_the_frame() {
        let g = Grid3::unit(6).unwrap();
        let u = VectorField3::from_fn(g.clone(), PatchFrame::identity(), |_| [0.0, 0.0, 1.0]).unwrap();
        let target = PatchFrame::from_normal([0.0, 0.0, 1.0]).unwrap();
        let tg = g.covering(&PatchFrame::identity(), &target).unwrap();
        let r = resample_vector(&u, &target, &tg).unwrap();
        for v in r.values() {
            assert!((v[0] - 1.0).abs() < 1e-14 && v[1].abs() < 1e-14 && v[2].abs() < 1e-14);
        }
    }

    #[test]
    fn quarter_turn_preserves_rectangle_tv() {
        // Rectangle indicator in the (y,z) plane; rotate about e1 by 90°.
        let n = 128;
        let g = Grid3::new([1.0; 3], [4, n, n], [0.0; 3]).unwrap();
        let f = ScalarField3::from_fn(g.clone(), PatchFrame::identity(), |p| {
            if (0.25..0.5).contains(&p[1]) && (0.25..0.75).contains(&p[2]) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let rot = PatchFrame::new([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]).unwrap();
        let tg = g.covering(&PatchFrame::identity(), &rot).unwrap();
        let r = resample_scalar(&f, &rot, &tg).unwrap();
        let h = g.spacing();
        let before = planar_tv(&[&f.slice_x(1)], (h[1], h[2]), TvMode::Single, Boundary::Replicate).unwrap();
        let ht = tg.spacing();
        let after = planar_tv(&[&r.slice_x(1)], (ht[1], ht[2]), TvMode::Single, Boundary::Replicate).unwrap();
        assert!((after / before - 1.0).abs() < 0.05, "{before} vs {after}");
    }
}
