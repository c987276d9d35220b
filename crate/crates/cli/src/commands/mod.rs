pub mod detect;
pub mod eval_detect;
pub mod eval_sr;
pub mod gradcheck;
pub mod sr;
pub mod synth;
pub mod train;
