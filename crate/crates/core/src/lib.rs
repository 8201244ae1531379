pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod harness;
pub mod models;
pub mod neural;
pub mod seed;
pub mod textprep;
pub mod verify;
pub mod vectorizers;

pub use error::{Error, Result};
