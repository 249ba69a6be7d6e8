//! Slip systems, slip patches, the Burgers decomposition `s = c1 b1 + c2 b2`,
//! and the single-slip / relaxed-slip side-condition checks.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{resample_scalar, Grid3, PatchFrame, ScalarField3, TensorField3, VectorField3};
use crate::linalg::{self, Mat3, Vec3};

const UNIT_TOL: f64 = 1e-12;
const PARALLEL_TOL: f64 = 1e-9;
/// `|s·m| ≤ TANGENT_TOL·|s|` is accepted as tangential by the decomposition.
pub const TANGENT_TOL: f64 = 1e-9;

/// Slip-plane normal `m` with two normalised Burgers vectors in `m⊥`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemRepr", into = "SystemRepr")]
pub struct SlipSystem {
    m: Vec3,
    b1: Vec3,
    b2: Vec3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SystemRepr {
    m: Vec3,
    b1: Vec3,
    b2: Vec3,
}

impl TryFrom<SystemRepr> for SlipSystem {
    type Error = Error;
    fn try_from(s: SystemRepr) -> Result<Self> {
        SlipSystem::new(s.m, s.b1, s.b2)
    }
}

impl From<SlipSystem> for SystemRepr {
    fn from(s: SlipSystem) -> Self {
        SystemRepr {
            m: s.m,
            b1: s.b1,
            b2: s.b2,
        }
    }
}

impl SlipSystem {
    pub fn new(m: Vec3, b1: Vec3, b2: Vec3) -> Result<Self> {
        for (name, v) in [("m", m), ("b1", b1), ("b2", b2)] {
            if !v.iter().all(|x| x.is_finite()) || (linalg::norm(v) - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidSlipSystem(format!(
                    "|{name}| = {} is not 1",
                    linalg::norm(v)
                )));
            }
        }
        for (name, b) in [("b1", b1), ("b2", b2)] {
            let d = linalg::dot(b, m);
            if d.abs() > UNIT_TOL {
                return Err(Error::InvalidSlipSystem(format!("{name}·m = {d:e}, not in the slip plane")));
            }
        }
        let c = linalg::norm(linalg::cross(b1, b2));
        if c <= PARALLEL_TOL {
            return Err(Error::InvalidSlipSystem(format!(
                "Burgers vectors are (nearly) parallel: |b1×b2| = {c:e}"
            )));
        }
        Ok(SlipSystem { m, b1, b2 })
    }

    pub fn m(&self) -> Vec3 {
        self.m
    }
    pub fn b1(&self) -> Vec3 {
        self.b1
    }
    pub fn b2(&self) -> Vec3 {
        self.b2
    }
    pub fn burgers(&self, j: usize) -> Vec3 {
        if j == 0 {
            self.b1
        } else {
            self.b2
        }
    }

    /// `b1⊥ = m × b1`, the in-plane unit vector orthogonal to `b1`.
    pub fn b1_perp(&self) -> Vec3 {
        linalg::cross(self.m, self.b1)
    }

    /// The frame `(m, b1, m×b1)`, in which `b1 = e2`.
    pub fn slip_frame(&self) -> PatchFrame {
        PatchFrame::new(self.m, self.b1, self.b1_perp()).expect("validated system gives an orthonormal frame")
    }

    /// This system with every vector expressed in `frame` components.
    pub fn in_frame(&self, frame: &PatchFrame) -> SlipSystem {
        SlipSystem {
            m: frame.to_local(self.m),
            b1: frame.to_local(self.b1),
            b2: frame.to_local(self.b2),
        }
    }

    /// `(c1, c2)` with `c1 b1 + c2 b2 = s`, for `s ∈ m⊥`.
    #[inline]
    pub fn decompose(&self, s: Vec3) -> (f64, f64) {
        let p = self.b1_perp();
        let c2 = linalg::dot(s, p) / linalg::dot(self.b2, p);
        let c1 = linalg::dot(s, self.b1) - c2 * linalg::dot(self.b2, self.b1);
        (c1, c2)
    }

    #[inline]
    pub fn recompose(&self, c1: f64, c2: f64) -> Vec3 {
        linalg::lincomb(c1, self.b1, c2, self.b2)
    }

    /// `|b1 · b2|`.
    pub fn cos_angle(&self) -> f64 {
        linalg::dot(self.b1, self.b2).abs()
    }
}

/// Reads a JSON list of `{m, b1, b2}` objects.
pub fn load_catalogue(path: &Path) -> Result<Vec<SlipSystem>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Splits a tangential slip field (components in its own frame) into
/// Burgers components.
pub fn decompose_slip(s: &VectorField3, system: &SlipSystem) -> Result<(ScalarField3, ScalarField3)> {
    let local = system.in_frame(s.frame());
    let m = local.m;
    let pairs: Vec<(f64, f64)> = s
        .values()
        .par_iter()
        .enumerate()
        .map(|(cell, &v)| {
            let n = linalg::norm(v);
            let normal = linalg::dot(v, m).abs();
            if normal > TANGENT_TOL * n {
                return Err(Error::NonTangential {
                    cell,
                    ratio: normal / n,
                });
            }
            Ok(local.decompose(v))
        })
        .collect::<Result<_>>()?;
    let (c1, c2): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok((
        ScalarField3::new(s.grid().clone(), *s.frame(), c1)?,
        ScalarField3::new(s.grid().clone(), *s.frame(), c2)?,
    ))
}

/// `s = c1 b1 + c2 b2`, components in the fields' frame.
pub fn recompose_slip(c1: &ScalarField3, c2: &ScalarField3, system: &SlipSystem) -> Result<VectorField3> {
    c1.ensure_compatible(c2)?;
    let local = system.in_frame(c1.frame());
    let values = c1
        .values()
        .iter()
        .zip(c2.values())
        .map(|(&a, &b)| local.recompose(a, b))
        .collect();
    VectorField3::new(c1.grid().clone(), *c1.frame(), values)
}

/// Subdomain on which one slip system is active, with its Burgers components.
///
/// Indicator and components share one grid in the patch frame. On the
/// global grid the patch is seen through [`SlipPatch::indicator_on`].
#[derive(Debug, Clone)]
pub struct SlipPatch {
    pub system_id: usize,
    indicator: ScalarField3,
    c1: ScalarField3,
    c2: ScalarField3,
    /// Grid faces where the patch touches `∂Ω` (`[axis][low, high]`, patch
    /// frame axes); used by the smoothing pipeline.
    pub boundary_contact: [[bool; 2]; 3],
}

impl SlipPatch {
    pub fn new(system_id: usize, indicator: ScalarField3, c1: ScalarField3, c2: ScalarField3) -> Result<Self> {
        indicator.ensure_compatible(&c1)?;
        indicator.ensure_compatible(&c2)?;
        if let Some(index) = indicator.values().iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::param("indicator", format!("value at cell {index} is not 0 or 1")));
        }
        for (name, c) in [("c1", &c1), ("c2", &c2)] {
            if let Some(cell) = indicator
                .values()
                .iter()
                .zip(c.values())
                .position(|(&i, &v)| i == 0.0 && v != 0.0)
            {
                return Err(Error::param("slip patch", format!("{name} is nonzero outside the patch at cell {cell}")));
            }
        }
        Ok(SlipPatch {
            system_id,
            indicator,
            c1,
            c2,
            boundary_contact: [[false; 2]; 3],
        })
    }

    /// Builds a patch with components zeroed outside the indicator.
    pub fn masked(system_id: usize, indicator: ScalarField3, c1: &ScalarField3, c2: &ScalarField3) -> Result<Self> {
        let mask = |c: &ScalarField3| -> Result<ScalarField3> {
            indicator.ensure_compatible(c)?;
            c.with_values(
                c.values()
                    .iter()
                    .zip(indicator.values())
                    .map(|(&v, &i)| if i == 0.0 { 0.0 } else { v })
                    .collect(),
            )
        };
        let (a, b) = (mask(c1)?, mask(c2)?);
        SlipPatch::new(system_id, indicator, a, b)
    }

    pub fn with_boundary_contact(mut self, faces: [[bool; 2]; 3]) -> Self {
        self.boundary_contact = faces;
        self
    }

    pub fn indicator(&self) -> &ScalarField3 {
        &self.indicator
    }
    pub fn c1(&self) -> &ScalarField3 {
        &self.c1
    }
    pub fn c2(&self) -> &ScalarField3 {
        &self.c2
    }
    pub fn components(&self) -> [&ScalarField3; 2] {
        [&self.c1, &self.c2]
    }
    pub fn frame(&self) -> &PatchFrame {
        self.indicator.frame()
    }
    pub fn grid(&self) -> &Grid3 {
        self.indicator.grid()
    }

    /// Replaces the Burgers components (same grid), re-masking by the indicator.
    pub fn with_components(&self, c1: &ScalarField3, c2: &ScalarField3) -> Result<Self> {
        Ok(SlipPatch::masked(self.system_id, self.indicator.clone(), c1, c2)?.with_boundary_contact(self.boundary_contact))
    }

    /// The indicator seen on another grid/frame, rounded back to {0, 1}.
    pub fn indicator_on(&self, grid: &Grid3, frame: &PatchFrame) -> Result<ScalarField3> {
        resample_scalar(&self.indicator, frame, grid)?.map(|v| if v >= 0.5 { 1.0 } else { 0.0 })
    }
}

/// Affine boundary data `u(x) = A x + b` on one face of the global box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletFace {
    /// Grid axis (0, 1, 2) normal to the face.
    pub axis: usize,
    /// `false` for the low face, `true` for the high face.
    pub high: bool,
    pub matrix: Mat3,
    #[serde(default)]
    pub offset: Vec3,
}

impl DirichletFace {
    pub fn value(&self, x: Vec3) -> Vec3 {
        linalg::add(linalg::mat_vec(&self.matrix, x), self.offset)
    }
}

/// Displacement plus per-patch slip: the pair `(u, β)`.
#[derive(Debug, Clone)]
pub struct RelaxedState {
    pub u: VectorField3,
    pub systems: Vec<SlipSystem>,
    pub patches: Vec<SlipPatch>,
    pub dirichlet: Vec<DirichletFace>,
}

/// Per-cell slip on the global grid: the active system (if any) and the
/// slip vector in global components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipCell {
    pub system: Option<usize>,
    pub s: Vec3,
}

impl RelaxedState {
    /// `u` lives on the global grid in the identity frame.
    pub fn new(
        u: VectorField3,
        systems: Vec<SlipSystem>,
        patches: Vec<SlipPatch>,
        dirichlet: Vec<DirichletFace>,
    ) -> Result<Self> {
        u.frame().ensure_matches(&PatchFrame::identity())?;
        for p in &patches {
            if p.system_id >= systems.len() {
                return Err(Error::UnknownSystem(p.system_id));
            }
        }
        for d in &dirichlet {
            if d.axis > 2 {
                return Err(Error::param("dirichlet.axis", format!("{} is not 0, 1 or 2", d.axis)));
            }
        }
        let state = RelaxedState {
            u,
            systems,
            patches,
            dirichlet,
        };
        let masks = state.global_indicators()?;
        for a in 0..masks.len() {
            for b in a + 1..masks.len() {
                if let Some(cell) = masks[a]
                    .values()
                    .iter()
                    .zip(masks[b].values())
                    .position(|(x, y)| x * y != 0.0)
                {
                    return Err(Error::param(
                        "patches",
                        format!("patches {a} and {b} overlap at global cell {cell}"),
                    ));
                }
            }
        }
        Ok(state)
    }

    pub fn grid(&self) -> &Grid3 {
        self.u.grid()
    }

    pub fn global_indicators(&self) -> Result<Vec<ScalarField3>> {
        let id = PatchFrame::identity();
        self.patches.iter().map(|p| p.indicator_on(self.grid(), &id)).collect()
    }

    /// Slip of one patch on the global grid, global components.
    pub fn patch_slip_global(&self, patch: usize) -> Result<VectorField3> {
        let p = &self.patches[patch];
        let sys = &self.systems[p.system_id];
        let s_local = recompose_slip(&p.c1, &p.c2, sys)?;
        crate::fields::resample_vector(&s_local, &PatchFrame::identity(), self.grid())
    }

    /// Per-cell slip on the global grid (resampled per patch).
    pub fn slip_cells(&self) -> Result<Vec<SlipCell>> {
        let mut cells = vec![
            SlipCell {
                system: None,
                s: linalg::ZERO3
            };
            self.grid().len()
        ];
        let masks = self.global_indicators()?;
        for (i, mask) in masks.iter().enumerate() {
            let s = self.patch_slip_global(i)?;
            for (idx, cell) in cells.iter_mut().enumerate() {
                if mask.values()[idx] != 0.0 {
                    *cell = SlipCell {
                        system: Some(self.patches[i].system_id),
                        s: s.values()[idx],
                    };
                }
            }
        }
        Ok(cells)
    }

    /// `β = Σ_i s_i ⊗ m_i` on the global grid.
    pub fn beta_global(&self) -> Result<TensorField3> {
        let cells = self.slip_cells()?;
        let values = cells
            .iter()
            .map(|c| match c.system {
                Some(id) => linalg::outer(c.s, self.systems[id].m()),
                None => linalg::ZERO33,
            })
            .collect();
        TensorField3::new(self.grid().clone(), PatchFrame::identity(), values)
    }

    /// Largest `|u − (A x + b)|` over the cell layers adjacent to flagged faces.
    pub fn dirichlet_deviation(&self) -> f64 {
        let g = self.grid();
        let n = g.resolution();
        let mut worst: f64 = 0.0;
        for d in &self.dirichlet {
            let layer = if d.high { n[d.axis] - 1 } else { 0 };
            for idx in 0..g.len() {
                if g.ijk(idx)[d.axis] == layer {
                    let want = d.value(g.center_of(idx));
                    worst = worst.max(linalg::norm(linalg::sub(self.u.values()[idx], want)));
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideCondition {
    /// Single slip: per cell, `s` is parallel to one Burgers vector.
    Ssc,
    /// Relaxed slip: `s ∈ m⊥`.
    Rsc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub condition: SideCondition,
    pub tolerance: f64,
    pub cells_checked: usize,
    pub failing_cells: usize,
    /// Largest absolute deviation among all cells.
    pub worst_deviation: f64,
    /// Largest deviation relative to `|s|` among nonzero cells.
    pub worst_relative: f64,
    pub worst_cell: Option<usize>,
}

impl ViolationReport {
    pub fn passed(&self) -> bool {
        self.failing_cells == 0
    }
}

fn check_cells(
    cells: &[SlipCell],
    systems: &[SlipSystem],
    tol: f64,
    condition: SideCondition,
) -> Result<ViolationReport> {
    if !(tol >= 0.0) {
        return Err(Error::param("tol", "must be nonnegative"));
    }
    let per_cell: Vec<(f64, f64, bool)> = cells
        .par_iter()
        .map(|c| {
            let Some(id) = c.system else {
                return Ok((0.0, 0.0, false));
            };
            let sys = systems.get(id).ok_or(Error::UnknownSystem(id))?;
            let n = linalg::norm(c.s);
            if n == 0.0 {
                return Ok((0.0, 0.0, false));
            }
            let dev = match condition {
                SideCondition::Rsc => linalg::dot(c.s, sys.m()).abs(),
                SideCondition::Ssc => (0..2)
                    .map(|j| {
                        let b = sys.burgers(j);
                        linalg::norm(linalg::sub(c.s, linalg::scale(b, linalg::dot(c.s, b))))
                    })
                    .fold(f64::INFINITY, f64::min),
            };
            Ok((dev, dev / n, dev > tol * n))
        })
        .collect::<Result<_>>()?;
    let mut report = ViolationReport {
        condition,
        tolerance: tol,
        cells_checked: cells.len(),
        failing_cells: 0,
        worst_deviation: 0.0,
        worst_relative: 0.0,
        worst_cell: None,
    };
    for (idx, &(dev, rel, fail)) in per_cell.iter().enumerate() {
        report.failing_cells += fail as usize;
        report.worst_deviation = report.worst_deviation.max(dev);
        if rel > report.worst_relative {
            report.worst_relative = rel;
            report.worst_cell = Some(idx);
        }
    }
    Ok(report)
}

/// Single-slip check: `min_j |s − (s·b_j) b_j| ≤ tol·|s|` per cell.
pub fn check_ssc(cells: &[SlipCell], systems: &[SlipSystem], tol: f64) -> Result<ViolationReport> {
    check_cells(cells, systems, tol, SideCondition::Ssc)
}

/// Relaxed-slip check on raw cells: `|s·m| ≤ tol·|s|`.
pub fn check_rsc_cells(cells: &[SlipCell], systems: &[SlipSystem], tol: f64) -> Result<ViolationReport> {
    check_cells(cells, systems, tol, SideCondition::Rsc)
}

pub fn check_rsc(state: &RelaxedState, tol: f64) -> Result<ViolationReport> {
    check_rsc_cells(&state.slip_cells()?, &state.systems, tol)
}
