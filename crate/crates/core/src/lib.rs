pub mod artifact;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod eval;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod tablefile;
pub mod textlab;
