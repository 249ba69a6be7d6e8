//! Laminate energies by per-slice quadrature, the matching relaxed energy,
//! and the convergence study over levels.
//!
//! Both energies share the same `(y, z)` nodes (cell centres of the
//! evaluation grid) and Gauss–Legendre nodes in `x¹`, so the gap between
//! them measures the construction rather than the quadrature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::laminate::{corrector_gradient, Half, Laminate};
use super::profile::{AnalyticSlip, Displacement};
use crate::energy::{linear_density, ElasticMode, EnergyParams, PowerDensity, StrainDensity};
use crate::error::{Error, Result};
use crate::fields::{planar_tv, Grid3, PatchFrame, Slice2, TvMode};
use crate::linalg::{self, Mat3, Vec3};
use crate::slipsys::{check_ssc, SlipSystem, ViolationReport};

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on `P_q`).
pub fn gauss_legendre(q: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(q);
    for i in 0..q {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pq = if q == 0 { 1.0 } else { p1 };
            let pqm1 = if q == 1 { 1.0 } else { p0 };
            dp = q as f64 * (x * pq - pqm1) / (x * x - 1.0);
            let dx = pq / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Minimum number of Gauss nodes per slice thickness.
pub const MIN_NODES_PER_SLICE: usize = 4;

/// `(y, z)` nodes from `grid` and the number of `x¹` nodes per slice.
#[derive(Debug, Clone)]
pub struct Quadrature {
    grid: Grid3,
    nodes: Vec<(f64, f64)>,
}

impl Quadrature {
    pub fn new(grid: Grid3, nodes_per_slice: usize) -> Result<Self> {
        if nodes_per_slice < MIN_NODES_PER_SLICE {
            return Err(Error::guard(
                "quadrature",
                format!("{nodes_per_slice} nodes per slice, at least {MIN_NODES_PER_SLICE} required"),
            ));
        }
        Ok(Quadrature {
            grid,
            nodes: gauss_legendre(nodes_per_slice),
        })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    fn ny_nz(&self) -> (usize, usize) {
        let r = self.grid.resolution();
        (r[1], r[2])
    }

    fn yz(&self, idx: usize) -> (f64, f64) {
        let (ny, _) = self.ny_nz();
        let c = self.grid.center(0, idx % ny, idx / ny);
        (c[1], c[2])
    }

    fn area(&self) -> f64 {
        let h = self.grid.spacing();
        h[1] * h[2]
    }

    /// Nodes and weights mapped onto `[a, b]`.
    fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().map(move |&(x, w)| (mid + half * x, half * w))
    }

    fn tv(&self, values: Vec<f64>, params: &EnergyParams) -> Result<f64> {
        let (ny, nz) = self.ny_nz();
        let h = self.grid.spacing();
        planar_tv(&[&Slice2::new(ny, nz, values)?], (h[1], h[2]), TvMode::Single, params.boundary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Terms {
    pub elastic: f64,
    pub curl: f64,
    pub dissipation: f64,
    pub total: f64,
}

impl Terms {
    fn assemble(params: &EnergyParams, elastic: f64, curl: f64, dissipation: f64) -> Self {
        Terms {
            elastic,
            curl,
            dissipation,
            total: elastic + params.sigma * curl + params.tau * dissipation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaminateEnergy {
    pub level: u32,
    pub terms: Terms,
    pub side_condition: ViolationReport,
    /// `max |û_n|` over the quadrature nodes.
    pub corrector_sup: f64,
}

fn density(params: &EnergyParams) -> PowerDensity {
    match params.elastic {
        ElasticMode::Nonlinear { p } => PowerDensity { p },
        ElasticMode::Linear => PowerDensity { p: 2.0 },
    }
}

/// Elastic integrand in local components.
#[inline]
fn elastic_local(
    params: &EnergyParams,
    w: &dyn StrainDensity,
    frame: &PatchFrame,
    grad_u: &Mat3,
    grad_corr: &Mat3,
    grad_u_shifted: &Mat3,
    beta: &Mat3,
) -> f64 {
    match params.elastic {
        ElasticMode::Linear => linear_density(&linalg::mat_add(grad_u, grad_corr), beta),
        ElasticMode::Nonlinear { .. } => {
            // y_n = y ∘ ŷ_n: ∇y_n = (I + ∇u(x + û)) (I + ∇û)
            let outer = linalg::mat_add(&linalg::IDENTITY, grad_u_shifted);
            let inner = linalg::mat_add(&linalg::IDENTITY, grad_corr);
            let f = linalg::mat_mul(&linalg::mat_mul(&outer, &inner), &linalg::mat_sub(&linalg::IDENTITY, beta));
            w.eval(&frame.tensor_to_global(&f))
        }
    }
}

fn hardening_power(alpha: f64, v: f64) -> f64 {
    if alpha == 1.0 {
        v.abs()
    } else {
        v.abs().powf(alpha)
    }
}

/// Energy of `(u + û_n, β_n)` for the level-`n` laminate (`u_n = y ∘ ŷ_n − x`
/// in nonlinear mode), with the default density `|F − I|^p`.
pub fn laminate_energy(
    lam: &Laminate,
    displacement: &Displacement,
    params: &EnergyParams,
    quad: &Quadrature,
) -> Result<LaminateEnergy> {
    laminate_energy_with(lam, displacement, params, quad, &density(params))
}

pub fn laminate_energy_with(
    lam: &Laminate,
    displacement: &Displacement,
    params: &EnergyParams,
    quad: &Quadrature,
    w: &dyn StrainDensity,
) -> Result<LaminateEnergy> {
    params.validate()?;
    let (ny, nz) = quad.ny_nz();
    let npts = ny * nz;
    let area = quad.area();
    let slip = lam.slip();
    let local = *lam.local_system();
    let frame = *lam.frame();
    let t = lam.thickness();
    let alpha = params.alpha;
    let nonlinear = matches!(params.elastic, ElasticMode::Nonlinear { .. });

    let per_layer: Vec<Result<(f64, f64, f64, f64)>> = (0..lam.bilayer_count())
        .into_par_iter()
        .map(|k| {
            let b = lam.bilayer(k);
            let mut c = Vec::with_capacity(npts);
            let mut gw = Vec::with_capacity(npts);
            for idx in 0..npts {
                let (y, z) = quad.yz(idx);
                let p = [b.centre, y, z];
                c.push(slip.values(p));
                gw.push(lam.amplitude_gradient(slip.gradients(p)));
            }
            // Each slice of thickness T/2 with value 2c_j: (T/2)·TV(2c_j) = T·TV(c_j).
            let tv1 = quad.tv(c.iter().map(|v| v[0]).collect(), params)?;
            let tv2 = quad.tv(c.iter().map(|v| v[1]).collect(), params)?;
            let curl = t * (tv1 + tv2);
            let diss: f64 = c
                .iter()
                .map(|v| hardening_power(alpha, 2.0 * v[0]) + hardening_power(alpha, 2.0 * v[1]))
                .sum::<f64>()
                * 0.5
                * t
                * area;
            let mut elastic = 0.0;
            let mut sup: f64 = 0.0;
            for (half, lo, hi) in [(Half::Bottom, b.lower, b.centre), (Half::Top, b.centre, b.upper)] {
                for (x1, wq) in quad.on(lo, hi) {
                    let height = lam.tent_height(x1, &b);
                    let mut acc = 0.0;
                    for idx in 0..npts {
                        let (y, z) = quad.yz(idx);
                        let xi = [x1, y, z];
                        let amp = lam.amplitude(c[idx]);
                        let beta = linalg::outer(lam.slice_slip(half, c[idx]), local.m());
                        let grad_corr = corrector_gradient(amp, &gw[idx], height, half);
                        let (_, grad_u) = displacement.eval_local(xi, slip, &local);
                        let shifted = if nonlinear {
                            let corr = linalg::scale(amp, height);
                            displacement.eval_local(linalg::add(xi, corr), slip, &local).1
                        } else {
                            grad_u
                        };
                        acc += elastic_local(params, w, &frame, &grad_u, &grad_corr, &shifted, &beta);
                        sup = sup.max(linalg::norm(amp) * height);
                    }
                    elastic += wq * acc * area;
                }
            }
            Ok((elastic, curl, diss, sup))
        })
        .collect();

    let (mut elastic, mut curl, mut diss, mut sup) = (0.0, 0.0, 0.0, 0.0f64);
    for r in per_layer {
        let (e, c, d, s) = r?;
        elastic += e;
        curl += c;
        diss += d;
        sup = sup.max(s);
    }
    if !elastic.is_finite() {
        return Err(Error::param("W", "non-finite laminate elastic energy"));
    }
    let side = check_ssc(&lam.slice_cells(quad.grid(), 0), &[*lam.system()], params.ssc_tol)?;
    Ok(LaminateEnergy {
        level: lam.level(),
        terms: Terms::assemble(params, elastic, curl, diss),
        side_condition: side,
        corrector_sup: sup,
    })
}

/// Relaxed energy of `(u, β)` on the same `(y, z)` nodes, with `panels`
/// equal Gauss panels in `x¹`: elastic term, laminated curl
/// `Σ_j ∫|D_{y,z} c_j| dx¹` and laminated hardening.
pub fn relaxed_energy(
    slip: &AnalyticSlip,
    system: &SlipSystem,
    displacement: &Displacement,
    params: &EnergyParams,
    quad: &Quadrature,
    panels: usize,
) -> Result<Terms> {
    relaxed_energy_with(slip, system, displacement, params, quad, panels, &density(params))
}

pub fn relaxed_energy_with(
    slip: &AnalyticSlip,
    system: &SlipSystem,
    displacement: &Displacement,
    params: &EnergyParams,
    quad: &Quadrature,
    panels: usize,
    w: &dyn StrainDensity,
) -> Result<Terms> {
    params.validate()?;
    if panels == 0 {
        return Err(Error::param("panels", "must be positive"));
    }
    let (ny, nz) = quad.ny_nz();
    let npts = ny * nz;
    let area = quad.area();
    let local = system.in_frame(slip.frame());
    let frame = *slip.frame();
    let g = quad.grid();
    let (a, len) = (g.origin()[0], g.extents()[0]);
    let alpha = params.alpha;
    let hard_scale = 2f64.powf(alpha - 1.0);

    let per_panel: Vec<Result<(f64, f64, f64)>> = (0..panels)
        .into_par_iter()
        .map(|p| {
            let lo = a + len * p as f64 / panels as f64;
            let hi = a + len * (p + 1) as f64 / panels as f64;
            let (mut elastic, mut curl, mut hard) = (0.0, 0.0, 0.0);
            for (x1, wq) in quad.on(lo, hi) {
                let mut c = Vec::with_capacity(npts);
                let mut acc = 0.0;
                for idx in 0..npts {
                    let (y, z) = quad.yz(idx);
                    let xi: Vec3 = [x1, y, z];
                    let cv = slip.values(xi);
                    let s = local.recompose(cv[0], cv[1]);
                    let beta = linalg::outer(s, local.m());
                    let (_, grad_u) = displacement.eval_local(xi, slip, &local);
                    acc += elastic_local(params, w, &frame, &grad_u, &linalg::ZERO33, &grad_u, &beta);
                    c.push(cv);
                }
                elastic += wq * acc * area;
                let tv1 = quad.tv(c.iter().map(|v| v[0]).collect(), params)?;
                let tv2 = quad.tv(c.iter().map(|v| v[1]).collect(), params)?;
                curl += wq * (tv1 + tv2);
                if alpha >= 1.0 {
                    let h: f64 = c
                        .iter()
                        .map(|v| hardening_power(alpha, v[0]) + hardening_power(alpha, v[1]))
                        .sum();
                    hard += wq * hard_scale * h * area;
                }
            }
            Ok((elastic, curl, hard))
        })
        .collect();
    let (mut elastic, mut curl, mut hard) = (0.0, 0.0, 0.0);
    for r in per_panel {
        let (e, c, h) = r?;
        elastic += e;
        curl += c;
        hard += h;
    }
    Ok(Terms::assemble(params, elastic, curl, hard))
}

/// A relaxed state given in closed form, ready for the convergence study.
#[derive(Debug, Clone)]
pub struct LaminateStudy {
    pub slip: AnalyticSlip,
    pub system: SlipSystem,
    pub displacement: Displacement,
    pub params: EnergyParams,
    pub quadrature: Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: u32,
    pub laminate: Terms,
    pub gap: f64,
    pub gap_ratio: Option<f64>,
    pub corrector_sup: f64,
    pub ssc_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub relaxed: Terms,
    pub rows: Vec<StudyRow>,
    /// Gaps are non-increasing in `n`.
    pub monotone: bool,
    /// `gap(n_max) ≤ max(5% · E_rel, 1e-6)`.
    pub converged: bool,
    pub final_relative_gap: f64,
}

/// Relative tolerance for the final gap.
pub const GAP_FRACTION: f64 = 0.05;
/// Absolute floor for the final gap.
pub const GAP_FLOOR: f64 = 1e-6;

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,elastic,curl,dissipation,total,E_rel_total,gap,gap_ratio\n");
        for r in &self.rows {
            let ratio = r.gap_ratio.map(|x| format!("{x:.12e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                r.n,
                r.laminate.elastic,
                r.laminate.curl,
                r.laminate.dissipation,
                r.laminate.total,
                self.relaxed.total,
                r.gap,
                ratio
            ));
        }
        out
    }
}

impl LaminateStudy {
    pub fn laminate(&self, n: u32) -> Result<Laminate> {
        Laminate::build(&self.slip, &self.system, self.quadrature.grid(), n)
    }

    pub fn laminate_energy(&self, n: u32) -> Result<LaminateEnergy> {
        laminate_energy(&self.laminate(n)?, &self.displacement, &self.params, &self.quadrature)
    }

    /// `E_rel` on `panels` Gauss panels in `x¹`.
    pub fn relaxed_energy(&self, panels: usize) -> Result<Terms> {
        relaxed_energy(&self.slip, &self.system, &self.displacement, &self.params, &self.quadrature, panels)
    }

    /// Laminate energies for every level in `n_list` against `E_rel`, the
    /// latter on `2^{n_max+1}` panels (one per slice of the finest laminate).
    pub fn run(&self, n_list: &[u32]) -> Result<ConvergenceTable> {
        if n_list.is_empty() {
            return Err(Error::param("n_list", "must not be empty"));
        }
        if n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("n_list", "must be strictly ascending"));
        }
        let n_max = *n_list.last().expect("non-empty");
        if n_max > 20 {
            return Err(Error::param("n_list", "levels above 20 are not supported by the study"));
        }
        let relaxed = self.relaxed_energy(1usize << (n_max + 1))?;
        let mut rows: Vec<StudyRow> = Vec::with_capacity(n_list.len());
        for &n in n_list {
            let e = self.laminate_energy(n)?;
            let gap = e.terms.total - relaxed.total;
            let gap_ratio = rows.last().and_then(|prev| (prev.gap != 0.0).then(|| gap / prev.gap));
            rows.push(StudyRow {
                n,
                laminate: e.terms,
                gap,
                gap_ratio,
                corrector_sup: e.corrector_sup,
                ssc_failures: e.side_condition.failing_cells,
            });
        }
        let slack = 1e-12 * relaxed.total.abs().max(1.0);
        let monotone = rows.windows(2).all(|w| w[1].gap <= w[0].gap + slack);
        let last = rows.last().expect("non-empty").gap;
        let converged = last <= (GAP_FRACTION * relaxed.total.abs()).max(GAP_FLOOR);
        let final_relative_gap = if relaxed.total != 0.0 {
            last / relaxed.total.abs()
        } else {
            last
        };
        Ok(ConvergenceTable {
            relaxed,
            rows,
            monotone,
            converged,
            final_relative_gap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for q in 1..=8 {
            let nodes = gauss_legendre(q);
            let wsum: f64 = nodes.iter().map(|n| n.1).sum();
            assert!((wsum - 2.0).abs() < 1e-14);
            for deg in 0..2 * q {
                let got: f64 = nodes.iter().map(|&(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "q={q} deg={deg}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn four_point_rule_matches_tabulated_nodes() {
        let n = gauss_legendre(4);
        assert!((n[3].0 - 0.861_136_311_594_052_6).abs() < 1e-15);
        assert!((n[2].0 - 0.339_981_043_584_856_3).abs() < 1e-15);
        assert!((n[3].1 - 0.347_854_845_137_453_9).abs() < 1e-15);
    }

    #[test]
    fn too_few_nodes_trip_the_guard() {
        assert!(matches!(
            Quadrature::new(Grid3::unit(4).unwrap(), 3),
            Err(Error::Guard { guard: "quadrature", .. })
        ));
    }
}
