//! Numerical laboratory for the canonical solution operator of ∂̄ on weighted
//! L² spaces of the plane.
//!
//! The pipeline is: a subharmonic weight φ ([`weights`]) on a truncated lattice
//! ([`grid`]) defines the twisted operator D = -∂_z + φ_z and the magnetic
//! Schrödinger operator H = D̄D ([`operator`]). The bottom of the spectrum of H
//! ([`spectra`]) controls the canonical solution u of ∂̄u = f ([`dbar_solver`]),
//! and its behaviour at infinity decides whether that solution operator is
//! compact ([`compactness`]).

pub mod block;
pub mod compactness;
pub mod dbar_solver;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod operator;
pub mod sparse;
pub mod spectra;
pub mod weights;

pub use num_complex::Complex64;

pub use compactness::{
    classify, local_ground_energy, magnetic_integral, mu_profile, ClassifyParams,
    CompactnessReport, MuProfile, Verdict,
};
pub use dbar_solver::{canonical_solve, minimality_probe, orthogonality_defect, SolveReport};
pub use error::{Error, Result};
pub use grid::{ball_subgrid, build_grid, dz_forward, integrate, FieldC, Grid2D, Shape, Support};
pub use operator::{
    assemble_D, assemble_Dbar, assemble_H, assemble_schrodinger, quadratic_form, FactoredOp,
    SparseHermitianOp,
};
pub use sparse::CsrMatrix;
pub use spectra::{
    apply_inverse, boundary_mass_fraction, cluster_count, dense_smallest, eigs_smallest, smallest_eigs, solution_singular_values, ClusterCount,
    EigenOptions, EigenResult, SingularValues,
};
pub use weights::{doubling_report, DoublingReport, WeightModel};
