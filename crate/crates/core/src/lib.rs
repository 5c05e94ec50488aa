pub mod cli;
pub mod corpus;
pub mod evaluation;
pub mod embeddings;
pub mod encoders;
pub mod nn;
pub mod taskgen;
pub mod training;
