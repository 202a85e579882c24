//! Minimum-error discrimination under global and PPT measurements.
//!
//! `p_G = max Σ η_i Tr(ρ_i M_i)` over POVMs, `p_PPT` the same maximum over
//! POVMs whose elements have PSD partial transpose, and
//! `q_PPT = min Tr H` over `H` with every `H − η_i ρ_i` decomposable.
//! Item indices are zero-based throughout.

mod programs;
mod theorems;
mod types;

pub use programs::{
    discrimination_options, dual_qppt, dual_qppt_with, evaluate_measurement, global_condition, optimal_global,
    optimal_global_with, optimal_ppt, optimal_ppt_with, psd_restricted_dual, psd_restricted_dual_with,
};
pub use theorems::{
    corollary1_check, corollary1_check_with, corollary2_classify, corollary2_classify_with, theorem3_witness_check,
    theorem3_witness_check_with, theorem4_classify, theorem4_classify_with, verify_joint_optimality,
    verify_joint_optimality_with, Corollary1, JointOptimality, Theorem3, Theorem4, Theorem4Runs,
};
pub use types::{
    DiscriminationResult, Ensemble, EnsembleItem, EqualityVerdict, Evidence, Measurement, Mode, Outcome,
};
