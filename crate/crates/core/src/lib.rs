pub mod app;
pub mod assembly;
pub mod config;
pub mod eigen;
pub mod flow;
pub mod operators;
pub mod sparse;
pub mod surface;
pub mod trace_lab;
