//! File formats, tabular output, parallel sweeps and the command line for
//! [`scmx_core`].

pub mod cli;
pub mod config;
pub mod parallel;
pub mod table;
pub mod traceio;

pub use cli::run;
pub use parallel::RayonExecutor;
pub use traceio::{read_trace, read_trace_file, write_trace, TraceFormat, TraceIoError};
