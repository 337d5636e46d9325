//! Command line front end: spec files, reports, SVG rendering and the
//! analysis commands behind the `simbound` binary.

pub mod commands;
pub mod render;
pub mod report;
pub mod specfile;
