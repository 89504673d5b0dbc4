//! Keyframe-and-box video segmentation rewards, GRPO, and a synthetic
//! environment small enough to train in seconds.

pub mod cot;
pub mod env;
pub mod eval;
pub mod geometry;
pub mod grpo;
pub mod policy;
pub mod response;
pub mod rewards;
pub mod rng;
pub mod train;
