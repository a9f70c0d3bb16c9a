pub mod baseline;
pub mod compare;
pub mod downscale;
pub mod evaluate;
pub mod render;
pub mod roc;
pub mod search;
pub mod synth;
pub mod train;
