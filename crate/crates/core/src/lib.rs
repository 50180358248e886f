pub mod engine;
pub mod error;
pub mod graph;
pub mod harness;
pub mod ids;
pub mod layout;
pub mod pathtime;
pub mod policy;
pub mod scoring;
pub mod world;
