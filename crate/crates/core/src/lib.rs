//! Power prediction for high-level-synthesis design points and
//! latency/power Pareto exploration over directive spaces.

pub mod activity;
pub mod design;
pub mod features;
pub mod model;
pub mod dse;
pub mod synth;
pub mod pipeline;
pub mod bench;
