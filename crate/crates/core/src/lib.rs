//! Promptable segmentation pipelines: automatic mask generation, prompt
//! simulation, evaluation protocols and mask statistics over a pluggable
//! segmenter.

pub mod amg;
pub mod cli;
pub mod crops;
pub mod eval;
pub mod io;
pub mod mask;
pub mod nms;
pub mod rng;
pub mod scene;
pub mod segmenter;
pub mod sim;
pub mod stats;
