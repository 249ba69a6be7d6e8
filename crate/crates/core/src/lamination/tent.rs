//! Boundary-layer modification of a rasterized corrector.
//!
//! Outside the slip support the corrector is continued with the value at the
//! nearest support cell of the same `x¹` slice, scaled by a tent
//! `max(0, 1 − d/δ)` in the distance `d` to the support. `δ` must exceed the
//! bi-layer thickness and fit between the support and the patch boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{feature_transform, gradient, ScalarField3, VectorField3};
use crate::linalg;

/// `δ_n = scale · 2^{−n/2} · L`, with `L` the `x¹` extent of the patch.
pub fn default_tent_width(n: u32, extent_x1: f64, scale: f64) -> f64 {
    scale * 2f64.powf(-0.5 * n as f64) * extent_x1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TentReport {
    pub delta: f64,
    pub thickness: f64,
    /// Cells with `0 < d < δ`.
    pub tent_cells: usize,
    pub volume_fraction: f64,
    /// `∫ |sym ∇û|²` over the tent cells.
    pub tent_energy: f64,
    pub sup: f64,
}

/// Applies the tent to `corrector` outside the cells where `support > 0.5`.
pub fn boundary_tent(
    corrector: &VectorField3,
    support: &ScalarField3,
    thickness: f64,
    delta: f64,
) -> Result<(VectorField3, TentReport)> {
    let grid = corrector.grid();
    grid.ensure_matches(support.grid())?;
    corrector.frame().ensure_matches(support.frame())?;
    if !(delta > thickness) {
        return Err(Error::guard(
            "tent",
            format!("tent width {delta} does not exceed the bi-layer thickness {thickness}"),
        ));
    }
    let mask: Vec<bool> = support.values().iter().map(|&v| v > 0.5).collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::param("support", "is empty"));
    }
    // Room between the support and the lateral patch faces.
    let lo = grid.origin();
    let hi = grid.upper();
    let room = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(idx, _)| {
            let c = grid.center_of(idx);
            (c[1] - lo[1]).min(hi[1] - c[1]).min(c[2] - lo[2]).min(hi[2] - c[2])
        })
        .fold(f64::INFINITY, f64::min);
    if delta > room {
        return Err(Error::guard(
            "tent",
            format!("tent width {delta} exceeds the distance {room} from the support to the patch boundary"),
        ));
    }

    let nearest = feature_transform(&mask, grid.resolution(), grid.spacing(), [false, true, true]);
    let src = corrector.values();
    let mut tent_cells = 0usize;
    let mut in_tent = vec![false; src.len()];
    let values: Vec<_> = nearest
        .iter()
        .enumerate()
        .map(|(idx, near)| match near {
            Some(n) if n.distance == 0.0 => src[idx],
            Some(n) => {
                let f = (1.0 - n.distance / delta).max(0.0);
                if f > 0.0 {
                    tent_cells += 1;
                    in_tent[idx] = true;
                }
                linalg::scale(src[n.feature], f)
            }
            None => [0.0; 3],
        })
        .collect();
    let out = corrector.with_values(values)?;
    let grad = gradient(&out)?;
    let vol = grid.cell_volume();
    let tent_energy: f64 = grad
        .values()
        .iter()
        .zip(&in_tent)
        .filter(|(_, &t)| t)
        .map(|(g, _)| linalg::frobenius_sq(&linalg::sym(g)) * vol)
        .sum();
    let report = TentReport {
        delta,
        thickness,
        tent_cells,
        volume_fraction: tent_cells as f64 / grid.len() as f64,
        tent_energy,
        sup: out.max_norm(),
    };
    Ok((out, report))
}
