//! File formats, configuration and the command line for `bingham-core`.
//!
//! * [`io`]: the binary table format, JSON and CSV files.
//! * [`dto`]: serializable mirrors of distributions, mixtures and reports.
//! * [`config`]: merging flags, config files and the environment.
//! * [`run`]: toy training runs and the `run.json` record.
//! * [`cli`]: the `bingham` executable.

pub mod cli;
pub mod config;
pub mod dto;
pub mod io;
pub mod run;
