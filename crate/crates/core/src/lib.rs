pub mod eval;
pub mod graph;
pub mod learner;
pub mod partition;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod walk_stats;
