//! Naive-Bayes what-if analysis: DI is the single parent, each inspection
//! parameter a conditionally independent child.
//!
//! Parameter values are discretised into levels by a [`LevelScheme`], CPTs
//! are estimated per (phase, size) slice by [`build_model`], and
//! [`CptModel::posterior`] answers "given these levels, how likely is each
//! DI level". [`recommend`] ranks candidate parameter settings by the
//! posterior mass they put on a target set of DI levels.

mod model;
mod scheme;

pub use model::{
    build_model, joint_frequency, merge_expert, recommend, sort_recommendations, CptModel,
    CptRow, DiDistribution, Evidence, NodeCpt, Recommendation, SUM_TOLERANCE,
};
pub use scheme::{discretize, Cut, CutOwner, LevelOverride, LevelScheme, NodeLevels, ParamNode};
