//! Synthetic MoE forward engine with pluggable expert-skip policies.

mod flops;
mod model;
mod policy;
mod routing;
mod spec;
mod stats;
mod token;

pub use flops::{expert_flops, flop_count, FlopReport};
pub use model::{
    build_synthetic_model, ExpertWeights, ForwardOutput, ForwardTrace, LayerWeights, MoeLayerOutput, SyntheticMoeModel,
};
pub use policy::{SkipMask, SkipPolicy};
pub use routing::{route_probs, select_topk, RoutingDecision};
pub use spec::{ModelSpec, RouterTuning};
pub use stats::{LayerCounts, SkipStats};
pub use token::{Modality, Token, TokenSequence};
