pub mod fusion;
pub mod interpolate;
pub mod train;
