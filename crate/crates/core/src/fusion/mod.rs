//! The three fusion strategies: the branch-merge network, early fusion by
//! feature concatenation, and late fusion by linear regression over unimodal
//! predictions.

mod late;
mod net;
mod spec;

pub use late::{fit_late_fusion, modality_importance, LateFusionModel};
pub use net::FusionNet;
pub use spec::{
    build_early, build_early_for, build_proposed, build_proposed_for, build_unimodal_for, layer_table, BranchSpec,
    FusionNetSpec,
};
