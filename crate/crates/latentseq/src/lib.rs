//! IO, file formats, networking and the command line around
//! [`latentseq_core`].

pub mod audio;
pub mod error;
pub mod onset;
pub mod wav;

pub use error::{Error, Result};
pub mod atlas_file;
pub mod dataset;
pub mod model_file;
pub mod config;
pub mod live;
pub mod ws;
pub mod bridge;
pub mod server;
pub mod cli;
