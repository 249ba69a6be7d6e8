//! Laminate construction for a single-slip patch and the convergence of its
//! energy to the relaxed energy.

mod laminate;
mod profile;
mod study;
mod tent;

pub use laminate::{corrector_gradient, Bilayer, Half, Laminate, LaminateDump, RasterLaminate, MAX_LEVEL};
pub use profile::{AnalyticSlip, Displacement, Profile};
pub use study::{
    gauss_legendre, laminate_energy, laminate_energy_with, relaxed_energy, relaxed_energy_with, ConvergenceTable,
    LaminateEnergy, LaminateStudy, Quadrature, StudyRow, Terms, GAP_FLOOR, GAP_FRACTION, MIN_NODES_PER_SLICE,
};
pub use tent::{boundary_tent, default_tent_width, TentReport};
