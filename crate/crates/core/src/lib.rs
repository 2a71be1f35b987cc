//! KMS-state structure of graph algebras under the gauge dynamics, with
//! classification of the states by classical and quantum symmetry.
//!
//! The crate is organized along the pipeline:
//!
//! - [`graph`]: finite directed graphs, vertex matrices, path words;
//! - [`spectral`]: exact-preferred spectral radius, eigenspaces, Perron data,
//!   circulant spectra;
//! - [`kms`]: the KMS simplex at a temperature, uniqueness, admissible
//!   temperatures, state evaluation on path words;
//! - [`symmetry`]: classical automorphism groups, isomorphism testing, and
//!   invariance filtering of KMS polytopes;
//! - [`quantum`]: sound certificates about the quantum symmetry (quantum
//!   vertex transitivity verdicts, quantum-invariant state sets);
//! - [`lbcs`]: linear binary constraint systems and their game graphs,
//!   including the built-in magic-square instance.

pub mod graph;
pub mod kms;
pub mod lbcs;
pub mod linalg;
pub mod quantum;
pub mod spectral;
pub mod symmetry;

pub use graph::{build_graph, disjoint_union, make_circulant, orient, validate_path, DirectedGraph, PathWord};
pub use kms::{
    admissible_inverse_temperatures, check_toeplitz_subinvariance, critical_inverse_temperature,
    evaluate_state, factors_through, kms_simplex, unique_kms, BetaSpec, InverseTemperature, KmsPolytope,
    KmsState,
};
pub use lbcs::{constraint_graph, homogenize, mermin_peres, parse_lbcs, solve_f2, LinearBinarySystem};
pub use quantum::{coherent_partition, quantum_invariant_kms, qvt_verdict, strongly_connected_quantum_report, QSymVerdict};
pub use spectral::{circulant_spectrum, eigenspace_at, perron_data, spectral_radius, SpectralReport, TaggedReal, TaggedVec};
pub use symmetry::{
    are_isomorphic, automorphism_group, invariant_kms_subpolytope, is_state_invariant,
    is_vertex_transitive, verify_union_aut_product, AutomorphismGroup, Permutation,
};
