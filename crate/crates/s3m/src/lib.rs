//! Files and the command line around [`s3m_core`]: JSON-lines report
//! datasets, checksummed model bundles, a converter for exported bug
//! tracker dumps, a synthetic corpus generator and the `s3m` subcommands.

pub mod bundle;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod netbeans;
pub mod report;
pub mod synth;

pub use bundle::Bundle;
pub use dataset::{parse_dataset, read_dataset, DatasetFormat, ReportRecord};
pub use error::{Error, Result};
