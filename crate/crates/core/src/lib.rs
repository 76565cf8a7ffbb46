//! Static detection of resource leaks in Android and Java sources.

pub mod bench;
pub mod checkers;
pub mod dataflow;
pub mod java;
pub mod registry;
