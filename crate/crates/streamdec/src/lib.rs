//! File formats, reports and the command-line front end for `streamdec-core`.

pub mod io;
pub mod suite;
pub mod cli;
