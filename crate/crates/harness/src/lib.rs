//! File formats, result records, experiment runners and the `rghmm`
//! command line on top of `rghmm-core`.

pub mod cli;
pub mod experiment;
pub mod format;
pub mod records;
