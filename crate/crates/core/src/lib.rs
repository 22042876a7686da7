pub mod fitting;
pub mod kinetics;
pub mod optics;
pub mod quantum;
pub mod signal;
