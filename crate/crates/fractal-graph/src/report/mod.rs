//! Configuration, orchestration and output: TOML run configs in, JSON
//! reports and SVG figures out.

pub mod config;
pub mod json;
pub mod pipeline;
pub mod svg;

pub use config::{Pipeline, RunConfig};
pub use json::to_canonical_json;
pub use pipeline::{run, RunOutcome, RunReport};
pub use svg::{render_svg, Scene};
