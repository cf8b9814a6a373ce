pub mod agent;
pub mod ehr;
pub mod eval;
pub mod streamer;
pub mod synth;
pub mod tools;
